import logging

from ...utils.bias import sample_base_rate
from ...utils.exceptions import DataValidationError
from ...utils.metrics import metric_spec
from ...utils.run_config import parse_interval, parse_mapping, parse_value_list
from ...utils.sensitivity import (
    CorrectionSign, ErrorStructure, RangeMode, SensitivityConfig, contour_grid, run_sensitivity,
)
from ..command_base import CSV_SCHEMA_HELP, ProxyAuditCommand

logger = logging.getLogger(__name__)


class Command(ProxyAuditCommand):
    help = ("Bias-corrected weighted metric over an (eps, eps_prime) range with bootstrap "
            "plausible mean and sensitivity intervals. " + CSV_SCHEMA_HELP)
    command_name = 'sensitivity'

    def add_command_arguments(self, parser):
        parser.add_argument('--metric', help="Metric to analyse (default fnr)")
        parser.add_argument('--eps', help="Absolute eps range 'low,high' (or v for [-v, v])")
        parser.add_argument('--eps-prime', help="Absolute eps_prime range 'low,high' (or v for [-v, v])")
        parser.add_argument('--eps-rel', help="Relative error levels, e.g. 0.05,0.10,0.20; one analysis per level")
        parser.add_argument('--base-rate', action='append', metavar='GROUP=VALUE',
                            help="Population E[I(A=group) | h1=1]; defaults to the sample value when labels exist")
        parser.add_argument('--structure', choices=[s.value for s in ErrorStructure], help="Error structure")
        parser.add_argument('--sign', choices=[s.value for s in CorrectionSign], help="Bias correction sign")
        parser.add_argument('--reps', type=int, help="Bootstrap replicates")
        parser.add_argument('--alpha', type=float, help="Two-sided level of the percentile interval")
        parser.add_argument('--grid-resolution', type=int, help="Grid points per axis for --grid")
        parser.add_argument('--grid', action='store_true', help="Also write the contour grid CSV")
        parser.add_argument('--no-resample', action='store_true',
                            help="Use the original sample as the single replicate")
        parser.add_argument('--name', default='sensitivity', help="Report file stem")

    def _base_rate(self, dataset, spec, group, base_rates):
        if group in base_rates:
            return base_rates[group]
        if dataset.has_labels:
            value = sample_base_rate(dataset, spec, group)
            logger.info("Using the sample base rate %.4f for group %s", value, group)
            return value
        raise DataValidationError(f"group {group} needs --base-rate {group}=VALUE (no true group labels)")

    def run(self, run, options):
        dataset = self.load_dataset(run, options)
        groups = self.resolve_groups(run, options, dataset)
        spec = metric_spec(run.resolve('metric', options.get('metric'), default='fnr'))
        seed = self.resolve_seed(run, options)
        levels = run.resolve('eps_rel', options.get('eps_rel') and parse_value_list(options['eps_rel']),
                             cast=parse_value_list)
        eps = run.resolve('eps', options.get('eps') and parse_interval(options['eps']),
                          default=(0.0, 0.0), cast=parse_interval)
        eps_prime = run.resolve('eps_prime', options.get('eps_prime') and parse_interval(options['eps_prime']),
                                default=(0.0, 0.0), cast=parse_interval)
        base_rates = parse_mapping(options.get('base_rate'))
        template = dict(
            error_structure=ErrorStructure(run.resolve('structure', options.get('structure'), default='independent')),
            correction_sign=CorrectionSign(run.resolve('sign', options.get('sign'), default='subtract')),
            bootstrap_reps=run.resolve('reps', options.get('reps'), cast=int, setting='BOOTSTRAP_REPS'),
            alpha=run.resolve('alpha', options.get('alpha'), cast=float, setting='ALPHA'),
            grid_resolution=run.resolve('grid_resolution', options.get('grid_resolution'), cast=int,
                                        setting='GRID_RESOLUTION'),
            resample=not run.resolve('no_resample', options.get('no_resample') or None, default=False, cast=bool),
            seed=seed,
            workers=self.workers,
        )

        if levels:
            settings_by_label = [(f"rel_{level:g}", RangeMode.RELATIVE, (-level, level), (-level, level))
                                 for level in levels]
        else:
            settings_by_label = [('absolute', RangeMode.ABSOLUTE, tuple(eps), tuple(eps_prime))]

        group_base_rates = {group: self._base_rate(dataset, spec, group, base_rates) for group in groups}
        run.values['base_rates'] = group_base_rates

        results, paths = {}, []
        for group in groups:
            base_rate = group_base_rates[group]
            results[group] = {}
            for label, mode, eps_range, eps_prime_range in settings_by_label:
                config = SensitivityConfig(eps_range=eps_range, eps_prime_range=eps_prime_range, base_rate=base_rate,
                                           range_mode=mode, **template)
                results[group][label] = run_sensitivity(dataset, spec, group, config).as_dict()
                if options.get('grid'):
                    grid = contour_grid(dataset, spec, group, config)
                    paths.append(self.store.write_csv(
                        f"{options['name']}_grid_{group}_{label}.csv", grid, run.as_dict(), seed))

        paths.insert(0, self.store.write_json(f"{options['name']}.json", run.as_dict(), seed,
                                              {'metric': spec.name, 'groups': results}))
        return paths
