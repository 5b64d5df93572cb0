from ...utils.analyzer import AuditAnalyzer
from ...utils.run_config import csv_list, parse_mapping
from ..command_base import CSV_SCHEMA_HELP, ProxyAuditCommand


class Command(ProxyAuditCommand):
    help = "Weighted (and, with true labels, oracle) metrics and bias diagnostics per group. " + CSV_SCHEMA_HELP
    command_name = 'audit'

    def add_command_arguments(self, parser):
        parser.add_argument('--metrics', help="Comma-separated metrics: fnr, fpr, ppv, npv, selection_rate, error_rate")
        parser.add_argument('--base-rate', action='append', metavar='GROUP=VALUE',
                            help="Population E[I(A=group) | h1=1] for the bound without labels; repeatable")
        parser.add_argument('--h1-rate', type=float, help="Population E[h1] for the bound without labels")
        parser.add_argument('--name', default='audit', help="Report file stem")

    def run(self, run, options):
        dataset = self.load_dataset(run, options)
        groups = self.resolve_groups(run, options, dataset)
        metrics = run.resolve('metrics', options.get('metrics') and csv_list(options['metrics']),
                              default=['fnr', 'fpr'], cast=csv_list)
        base_rates = parse_mapping(options.get('base_rate'))
        if base_rates:
            run.values['base_rates'] = base_rates
        h1_rate = run.resolve('h1_rate', options.get('h1_rate'), cast=float)

        analysis = AuditAnalyzer(dataset).comprehensive_audit(metrics, groups, base_rates, h1_rate)
        return [self.store.write_json(f"{options['name']}.json", run.as_dict(), None, analysis)]
