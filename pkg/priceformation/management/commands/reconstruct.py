from pathlib import Path

from priceformation.assimilate import INTERIOR, VERIFICATION, reconstruct_final_density, reconstruction_error
from priceformation.csvio import (
    read_field_csv,
    read_price_csv,
    write_controls_csv,
    write_diagnostics_csv,
    write_field_csv,
)
from priceformation.mesh import resample

from ._base import PriceFormationCommand, simulate_observations


class Command(PriceFormationCommand):
    help = 'Reconstruct the final buyer-vendor density from price.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--price', type=str, help='Observed series (default: OUT/price.csv)')
        parser.add_argument('--initial', type=str,
                            help='Density at eps for verification mode (x,f); simulated from the config otherwise')
        parser.add_argument('--reference', type=str,
                            help='Reference f(., T) to report the error against (default: OUT/density_T.csv if present)')

    def run(self, config, out_dir, options):
        cfg = config.assimilation
        data = read_price_csv(options['price'] or out_dir / 'price.csv')

        f_eps = None
        if cfg.mode == VERIFICATION:
            if options['initial']:
                f_eps = resample(read_field_csv(options['initial']), cfg.grid)
            else:
                f_eps = simulate_observations(config).density_at_eps

        result = reconstruct_final_density(data, cfg, f_eps)

        reference_path = options['reference'] or out_dir / 'density_T.csv'
        reference = read_field_csv(reference_path) if Path(reference_path).exists() else None

        out_dir.mkdir(parents=True, exist_ok=True)
        paths = (
            write_field_csv(out_dir / 'fhat_T.csv', result.density, 'f'),
            write_field_csv(out_dir / 'Fhat_T.csv', result.transformed, 'F'),
            write_controls_csv(out_dir / 'controls.csv', result),
            write_diagnostics_csv(out_dir / 'recon_diag.csv', result),
        )
        converged = sum(1 for d in result.diagnostics if d.converged)
        self.stdout.write(self.style.SUCCESS(
            f'Reconstructed f(., T) in {cfg.mode} mode from {len(result.diagnostics)} basis functions '
            f'({converged} converged), p(T)={result.price:.6g}'
        ))
        if reference is not None:
            fhat = resample(result.density, reference.grid)
            error = reconstruction_error(fhat, reference, INTERIOR, result.price)
            self.stdout.write(f'  interior relative L2 error against {reference_path}: {error:.4e}')
        self.written(*paths)
