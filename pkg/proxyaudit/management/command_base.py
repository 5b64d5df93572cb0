"""
Shared plumbing for the proxyaudit management commands
"""

import logging
import re

from django.core.management.base import BaseCommand, CommandError

from ..utils.data_model import ColumnSchema, ingest_csv
from ..utils.exceptions import DataValidationError, ProxyAuditError
from ..utils.report_store import ReportStore
from ..utils.run_config import RunConfig, csv_list, parse_mapping

logger = logging.getLogger(__name__)

CSV_SCHEMA_HELP = (
    "Input CSV layout: y (0/1 outcome), y_hat (0/1 prediction) and/or score "
    "(in [0, 1], dichotomized at --threshold when y_hat is absent), one "
    "prob_<group> column per group with P(A=group | proxies), and optionally "
    "true_group holding the true group id. Lines starting with '#' are ignored."
)

# negative numbers, ranges and lists such as -0.5:0.5:0.25 or -0.2,0.3
NEGATIVE_VALUE = re.compile(r'^-(\d+\.?\d*|\.\d+)([:,]-?(\d+\.?\d*|\.\d+))*$')


class ProxyAuditCommand(BaseCommand):
    """
    Base class for commands that resolve a RunConfig, call the library and
    write reports. Library errors become CommandError with the error's exit code.
    """

    command_name = None
    uses_dataset = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse would read these as unknown options
        parser._negative_number_matcher = NEGATIVE_VALUE
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help="INI file with a [settings] section; flags override it")
        parser.add_argument('--output-dir', help="Directory for report files")
        parser.add_argument('--seed', type=int, help="Random seed (unsigned 64-bit)")
        parser.add_argument('--workers', type=int, help="Parallel workers; results do not depend on it")
        if self.uses_dataset:
            parser.add_argument('--input', help="Audit CSV file")
            parser.add_argument('--groups', help="Comma-separated group ids (default: all probability columns)")
            parser.add_argument('--prob-prefix', help="Prefix of group probability columns (default prob_)")
            parser.add_argument('--prob-column', action='append', metavar='GROUP=COLUMN',
                                help="Explicit group probability column; repeatable")
            parser.add_argument('--outcome-column', help="Outcome column (default y)")
            parser.add_argument('--prediction-column', help="Prediction column (default y_hat)")
            parser.add_argument('--score-column', help="Score column (default score)")
            parser.add_argument('--group-column', help="True group column (default true_group)")
            parser.add_argument('--exhaustive', action='store_true', default=None,
                                help="Group probabilities must sum to one per record")
            parser.add_argument('--threshold', type=float, help="Score threshold for y_hat (default 0.5)")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            run = RunConfig(self.command_name, options.get('config'))
            output_dir = run.resolve('output_dir', options.get('output_dir'), setting='OUTPUT_DIR', record=False)
            self.workers = run.resolve('workers', options.get('workers'), cast=int, setting='WORKERS', record=False)
            if self.workers < 1:
                raise DataValidationError("workers must be at least 1")
            self.store = ReportStore(output_dir)
            paths = self.run(run, options)
        except ProxyAuditError as exc:
            logger.error("%s failed: %s", self.command_name, exc)
            raise CommandError(str(exc), returncode=exc.exit_code)
        for path in paths:
            self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))

    def run(self, run: RunConfig, options) -> list:
        raise NotImplementedError

    def resolve_seed(self, run: RunConfig, options) -> int:
        seed = run.resolve('seed', options.get('seed'), cast=int, setting='SEED')
        if not 0 <= seed < 2 ** 64:
            raise DataValidationError("seed must be an unsigned 64-bit integer")
        return seed

    def load_dataset(self, run: RunConfig, options):
        path = run.resolve('input', options.get('input'))
        if not path:
            raise DataValidationError("an --input CSV file is required")
        schema = ColumnSchema(
            outcome=run.resolve('outcome_column', options.get('outcome_column'), default='y'),
            prediction=run.resolve('prediction_column', options.get('prediction_column'), default='y_hat'),
            score=run.resolve('score_column', options.get('score_column'), default='score'),
            prob_columns=parse_mapping(options.get('prob_column'), cast=str) or None,
            prob_prefix=run.resolve('prob_prefix', options.get('prob_prefix'), default='prob_'),
            true_group=run.resolve('group_column', options.get('group_column'), default='true_group'),
            exhaustive=run.resolve('exhaustive', options.get('exhaustive'), default=False, cast=bool),
        )
        if schema.prob_columns:
            run.values['prob_columns'] = dict(schema.prob_columns)
        threshold = run.resolve('threshold', options.get('threshold'), cast=float, setting='THRESHOLD')
        return ingest_csv(path, schema, threshold=threshold)

    def resolve_groups(self, run: RunConfig, options, dataset) -> list:
        groups = run.resolve('groups', options.get('groups') and csv_list(options['groups']), cast=csv_list)
        groups = list(groups or dataset.group_ids)
        run.values['groups'] = groups
        for group in groups:
            dataset.probabilities(group)
        return groups
