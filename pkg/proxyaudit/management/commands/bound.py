from ...utils.analyzer import AuditAnalyzer
from ...utils.exceptions import DataValidationError
from ...utils.metrics import metric_spec
from ...utils.run_config import parse_mapping
from ..command_base import CSV_SCHEMA_HELP, ProxyAuditCommand

BOUND_FIELDS = ('weighted', 'oracle', 'empirical_bias', 'deltas', 'assumption1', 'same_sign', 'base_rate',
                'bound', 'bound_population', 'bound_sharp')


class Command(ProxyAuditCommand):
    help = ("Bound on the absolute bias of a weighted metric. Uses true labels when present, "
            "otherwise --base-rate and --h1-rate. " + CSV_SCHEMA_HELP)
    command_name = 'bound'

    def add_command_arguments(self, parser):
        parser.add_argument('--metric', help="Metric to bound (default fnr)")
        parser.add_argument('--base-rate', action='append', metavar='GROUP=VALUE',
                            help="Population E[I(A=group) | h1=1]; repeatable")
        parser.add_argument('--h1-rate', type=float, help="Population E[h1]")
        parser.add_argument('--name', default='bound', help="Report file stem")

    def run(self, run, options):
        dataset = self.load_dataset(run, options)
        groups = self.resolve_groups(run, options, dataset)
        spec = metric_spec(run.resolve('metric', options.get('metric'), default='fnr'))
        base_rates = parse_mapping(options.get('base_rate'))
        if base_rates:
            run.values['base_rates'] = base_rates
        h1_rate = run.resolve('h1_rate', options.get('h1_rate'), cast=float)

        if not dataset.has_labels:
            missing = [group for group in groups if group not in base_rates]
            if missing or h1_rate is None:
                raise DataValidationError(
                    "without true group labels the bound needs --h1-rate and --base-rate for groups: "
                    + ', '.join(missing or groups)
                )

        analyzer = AuditAnalyzer(dataset)
        results = {}
        for group in groups:
            audit = analyzer.audit_metric(spec, group, base_rates.get(group), h1_rate)
            results[group] = {key: audit[key] for key in BOUND_FIELDS}
        return [self.store.write_json(f"{options['name']}.json", run.as_dict(), None,
                                      {'metric': spec.name, 'groups': results})]
