import logging
import sys
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, CommandParser

from priceformation.config import load_run_config
from priceformation.csvio import read_field_csv
from priceformation.exceptions import EXIT_USAGE, PriceFormationError
from priceformation.forward import FILE_DATUM, synthesize


class UsageExitParser(CommandParser):
    """Command parser whose usage errors exit with the usage code (argparse uses 2)."""

    def error(self, message):
        if self.called_from_command_line:
            self.print_usage(sys.stderr)
            self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')
        raise CommandError(f'Error: {message}', returncode=EXIT_USAGE)


class PriceFormationCommand(BaseCommand):
    """
    Shared options and error handling of the price formation commands.

    Subclasses implement ``run(config, out_dir, options)``. Library errors are
    turned into CommandError carrying the exit code of their class.
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.__class__ = UsageExitParser
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, help='Run configuration file (key = value lines)')
        parser.add_argument('--out', type=str, help='Output directory')
        parser.add_argument('--mode', choices=['verification', 'assimilation'],
                            help='Include or drop the known initial-density term')
        parser.add_argument('--bc', choices=['nonlocal', 'neumann'], help='Boundary condition of the forward solver')
        parser.add_argument('--parallel', type=int, help='Worker processes for the per-basis control solves')

    def handle(self, *args, **options):
        if options['verbosity'] >= 2:
            logging.getLogger('priceformation').setLevel(logging.DEBUG)
        try:
            config = load_run_config(
                options['config'],
                mode=options['mode'],
                boundary=options['bc'],
                parallel=options['parallel'],
            )
            out_dir = Path(options['out'] or config.output_dir or settings.PRICEFORMATION_OUTPUT_DIR)
            if config.parallel is None:
                config = config.with_overrides(parallel=settings.PRICEFORMATION_PARALLEL)
            self.run(config, out_dir, options)
        except PriceFormationError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, config, out_dir, options):
        raise NotImplementedError('subclasses of PriceFormationCommand must provide a run() method')

    def written(self, *paths):
        for path in paths:
            self.stdout.write(f'  {path}')


def simulate_observations(config):
    """Synthetic observations for a run configuration, generated on the refined grid."""
    cfg = config.assimilation
    datum = read_field_csv(config.initial_datum_file) if config.initial_datum == FILE_DATUM else None
    return synthesize(
        config.initial_datum,
        cfg.grid,
        cfg.transaction_cost,
        cfg.t_end,
        cfg.n_steps,
        bc=cfg.boundary,
        refinement=cfg.refinement,
        eps=cfg.eps,
        margin=cfg.price_margin,
        datum=datum,
    )
