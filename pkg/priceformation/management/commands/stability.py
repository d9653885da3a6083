from priceformation.assimilate import VERIFICATION
from priceformation.csvio import write_stability_csv
from priceformation.experiments import stability_sweep

from ._base import PriceFormationCommand, simulate_observations


class Command(PriceFormationCommand):
    help = 'Reconstruct from perturbed prices and write stability.csv (delta, err_u, err_f)'

    def run(self, config, out_dir, options):
        cfg = config.assimilation
        data = simulate_observations(config)
        f_eps = data.density_at_eps if cfg.mode == VERIFICATION else None
        rows = stability_sweep(data.series, cfg, config.delta, config.sweep_count, config.perturbation,
                               f_eps=f_eps, rate_delta=config.rate_perturbation)

        out_dir.mkdir(parents=True, exist_ok=True)
        path = write_stability_csv(out_dir / 'stability.csv', rows)
        self.stdout.write(self.style.SUCCESS(
            f'Stability sweep: {len(rows)} rows, {config.perturbation} perturbations of size {config.delta}'
        ))
        for row in rows:
            self.stdout.write(f'  k={row.index:2d}  delta={row.delta:.3e}  err_u={row.control_error:.3e}  '
                              f'err_f={row.reconstruction_error:.3e}')
        self.written(path)
