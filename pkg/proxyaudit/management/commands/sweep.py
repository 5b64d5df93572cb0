from ...utils.exceptions import SimulationConfigError
from ...utils.run_config import csv_list, parse_value_list
from ...utils.simulate import SWEEP_AXES, assumption1_cells, run_scenario_sweep
from ..command_base import ProxyAuditCommand
from .simulate import add_simulation_arguments, resolve_sim_config


class Command(ProxyAuditCommand):
    help = ("Replicated simulation over one parameter axis; writes per-replication rows and "
            "mean/2.5%/97.5% summary rows (summary=1), plus per-cell Assumption-1 means.")
    command_name = 'sweep'
    uses_dataset = False

    def add_command_arguments(self, parser):
        add_simulation_arguments(parser)
        parser.add_argument('--axis', choices=SWEEP_AXES, help="Swept parameter")
        parser.add_argument('--values', help="Axis values: start:stop:step or a comma list")
        parser.add_argument('--reps', type=int, help="Replications per value (default 100)")
        parser.add_argument('--metrics', help="Comma-separated metrics (default fnr)")
        parser.add_argument('--eps-widths', help="Symmetric eps widths whose bias range is checked, e.g. 0.05,0.1")
        parser.add_argument('--name', help="Output file stem (default sweep_<axis>)")

    def run(self, run, options):
        axis = run.resolve('axis', options.get('axis'))
        if axis not in SWEEP_AXES:
            raise SimulationConfigError(f"--axis must be one of {', '.join(SWEEP_AXES)}")
        values = run.resolve('values', options.get('values') and parse_value_list(options['values']),
                             cast=parse_value_list)
        if not values:
            raise SimulationConfigError("--values is required")
        seed = self.resolve_seed(run, options)
        replications = run.resolve('reps', options.get('reps'), default=100, cast=int)
        metrics = run.resolve('metrics', options.get('metrics') and csv_list(options['metrics']),
                              default=['fnr'], cast=csv_list)
        widths = run.resolve('eps_widths', options.get('eps_widths') and parse_value_list(options['eps_widths']),
                             default=[], cast=parse_value_list)
        config = resolve_sim_config(run, options, seed, replications=replications, metrics=tuple(metrics),
                                    eps_widths=tuple(widths))

        table = run_scenario_sweep(config, axis, values, replications, workers=self.workers)
        name = options.get('name') or f"sweep_{axis}"
        return [
            self.store.write_csv(f"{name}.csv", table, run.as_dict(), seed),
            self.store.write_csv(f"{name}_cells.csv", assumption1_cells(table), run.as_dict(), seed),
        ]
