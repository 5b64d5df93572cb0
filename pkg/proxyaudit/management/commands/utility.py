from ...utils.exceptions import UtilityInputError
from ...utils.run_config import csv_list, parse_mapping, parse_value_list
from ...utils.sensitivity import CorrectionSign, SensitivityConfig
from ...utils.utility import UTILITY_MODES, GroupUtilityParams, group_utility_report
from ..command_base import CSV_SCHEMA_HELP, ProxyAuditCommand


class Command(ProxyAuditCommand):
    help = ("Per-group expected utility p0 (1 - FPR) r + p1 (1 - FNR) with intervals from "
            "bias-corrected FPR and FNR at each relative error level. " + CSV_SCHEMA_HELP)
    command_name = 'utility'

    def add_command_arguments(self, parser):
        parser.add_argument('--r', type=float, help="Utility ratio of a true negative to a true positive")
        parser.add_argument('--levels', help="Relative error levels (default 0,0.05,0.10,0.20)")
        parser.add_argument('--modes', help="Comma-separated: uncorrelated, correlated (default both)")
        parser.add_argument('--prevalence', action='append', metavar='GROUP=VALUE',
                            help="Population prevalence of the condition; repeatable")
        parser.add_argument('--base-rate-fnr', action='append', metavar='GROUP=VALUE',
                            help="Population E[I(A=group) | Y=1]; repeatable")
        parser.add_argument('--base-rate-fpr', action='append', metavar='GROUP=VALUE',
                            help="Population E[I(A=group) | Y=0]; repeatable")
        parser.add_argument('--sign', choices=[s.value for s in CorrectionSign], help="Bias correction sign")
        parser.add_argument('--reps', type=int, help="Bootstrap replicates")
        parser.add_argument('--alpha', type=float, help="Two-sided level of the percentile interval")
        parser.add_argument('--no-interval-check', action='store_true',
                            help="Do not warn when r lies outside (p1/p0, P1/(1-P1))")
        parser.add_argument('--no-resample', action='store_true',
                            help="Use the original sample as the single replicate")
        parser.add_argument('--name', default='utility', help="Report file stem")

    def run(self, run, options):
        dataset = self.load_dataset(run, options)
        groups = self.resolve_groups(run, options, dataset)
        seed = self.resolve_seed(run, options)
        r = run.resolve('r', options.get('r'), cast=float)
        if r is None:
            raise UtilityInputError("--r is required")
        levels = run.resolve('levels', options.get('levels') and parse_value_list(options['levels']),
                             default=[0.0, 0.05, 0.10, 0.20], cast=parse_value_list)
        modes = run.resolve('modes', options.get('modes') and csv_list(options['modes']),
                            default=list(UTILITY_MODES), cast=csv_list)

        prevalence = parse_mapping(options.get('prevalence'))
        base_rate_fnr = parse_mapping(options.get('base_rate_fnr'))
        base_rate_fpr = parse_mapping(options.get('base_rate_fpr'))
        params = {
            group: GroupUtilityParams(prevalence[group], base_rate_fnr[group], base_rate_fpr[group])
            for group in groups
            if group in prevalence and group in base_rate_fnr and group in base_rate_fpr
        }
        run.values['group_params'] = {
            group: {'prevalence': p.prevalence, 'base_rate_fnr': p.base_rate_fnr, 'base_rate_fpr': p.base_rate_fpr}
            for group, p in params.items()
        }

        base_config = SensitivityConfig(
            correction_sign=CorrectionSign(run.resolve('sign', options.get('sign'), default='subtract')),
            bootstrap_reps=run.resolve('reps', options.get('reps'), cast=int, setting='BOOTSTRAP_REPS'),
            alpha=run.resolve('alpha', options.get('alpha'), cast=float, setting='ALPHA'),
            resample=not run.resolve('no_resample', options.get('no_resample') or None, default=False, cast=bool),
            seed=seed,
            workers=self.workers,
        )
        check = not run.resolve('no_interval_check', options.get('no_interval_check') or None, default=False,
                                cast=bool)
        report = group_utility_report(dataset, groups, levels, params, r, base_config=base_config, modes=modes,
                                      check_interval=check)
        return [
            self.store.write_json(f"{options['name']}.json", run.as_dict(), seed, report.as_dict()),
            self.store.write_csv(f"{options['name']}.csv", report.to_frame(), run.as_dict(), seed),
        ]
