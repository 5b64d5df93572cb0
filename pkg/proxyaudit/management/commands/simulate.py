from ...utils.simulate import GroupRealization, SimConfig, population_calibration, simulate_test_dataset
from ..command_base import ProxyAuditCommand


def add_simulation_arguments(parser):
    parser.add_argument('--beta1', type=float, help="Dependence of Y on the true group (default 0.25)")
    parser.add_argument('--beta2', type=float, help="Mean shift of the proxy (default 0)")
    parser.add_argument('--beta3', type=float, help="Covariance of true and proxy logits, |beta3| <= 20 (default 20)")
    parser.add_argument('--n-population', type=int, help="Population size (default 50000)")
    parser.add_argument('--n-sample', type=int, help="Test sample size (default 2000)")
    parser.add_argument('--n-train', type=int, help="Training size (default half the population)")
    parser.add_argument('--sim-threshold', type=float, help="Score threshold for y_hat (default 0.5)")
    parser.add_argument('--realization', choices=[r.value for r in GroupRealization],
                        help="How the true group is drawn from its probability (default bernoulli)")


def resolve_sim_config(run, options, seed, **extra) -> SimConfig:
    defaults = SimConfig.__dataclass_fields__
    values = dict(
        beta1=run.resolve('beta1', options.get('beta1'), default=defaults['beta1'].default, cast=float),
        beta2=run.resolve('beta2', options.get('beta2'), default=defaults['beta2'].default, cast=float),
        beta3=run.resolve('beta3', options.get('beta3'), default=defaults['beta3'].default, cast=float),
        n_population=run.resolve('n_population', options.get('n_population'),
                                 default=defaults['n_population'].default, cast=int),
        n_sample=run.resolve('n_sample', options.get('n_sample'), default=defaults['n_sample'].default, cast=int),
        n_train=run.resolve('n_train', options.get('n_train'), cast=int),
        threshold=run.resolve('sim_threshold', options.get('sim_threshold'), cast=float, setting='THRESHOLD'),
        realization=GroupRealization(run.resolve('realization', options.get('realization'), default='bernoulli')),
        seed=seed,
    )
    values.update(extra)
    return SimConfig(**values)


class Command(ProxyAuditCommand):
    help = ("Simulate one seeded test sample (columns y, y_hat, score, prob_1, prob_0, true_group) "
            "for use with audit, sensitivity, bound and utility")
    command_name = 'simulate'
    uses_dataset = False

    def add_command_arguments(self, parser):
        add_simulation_arguments(parser)
        parser.add_argument('--replication', type=int, default=0, help="Replication index of the sample")
        parser.add_argument('--calibration', action='store_true',
                            help="Also report group share and AUC of the proxy for the whole population")
        parser.add_argument('--name', default='simulated', help="Output file stem")

    def run(self, run, options):
        seed = self.resolve_seed(run, options)
        config = resolve_sim_config(run, options, seed)
        replication = run.resolve('replication', options.get('replication'), default=0, cast=int)
        dataset = simulate_test_dataset(config, replication)
        paths = [self.store.write_csv(f"{options['name']}.csv", dataset.to_frame(), run.as_dict(), seed)]
        if options.get('calibration'):
            paths.append(self.store.write_json(f"{options['name']}_calibration.json", run.as_dict(), seed,
                                               population_calibration(config)))
        return paths
