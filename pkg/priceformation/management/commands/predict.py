from priceformation.assimilate import VERIFICATION
from priceformation.csvio import read_field_csv, read_price_csv, write_price_csv
from priceformation.experiments import predict_price, prediction_family, prediction_spread
from priceformation.forward import TransformSpec
from priceformation.mesh import resample

from ._base import PriceFormationCommand, simulate_observations


class Command(PriceFormationCommand):
    help = 'Predict the price after T from a reconstructed density and write predicted_price.csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--fhat', type=str, help='Reconstructed density (default: OUT/fhat_T.csv)')
        parser.add_argument('--price', type=str, help='Observed series giving p(T) (default: OUT/price.csv)')
        parser.add_argument('--sweep', action='store_true',
                            help='Predict from reconstructions of the perturbed family instead '
                                 '(writes predicted_price_<k>.csv)')

    def run(self, config, out_dir, options):
        cfg = config.assimilation
        if options['sweep']:
            self.run_family(config, out_dir)
            return

        fhat = read_field_csv(options['fhat'] or out_dir / 'fhat_T.csv')
        data = read_price_csv(options['price'] or out_dir / 'price.csv')
        spec = TransformSpec.at_price(cfg.grid, cfg.transaction_cost, data.final_price)
        predicted = predict_price(resample(fhat, cfg.grid), spec, config.horizon, config.prediction_steps,
                                  cfg.boundary, cfg.price_margin, data.final_time)

        out_dir.mkdir(parents=True, exist_ok=True)
        path = write_price_csv(out_dir / 'predicted_price.csv', predicted)
        self.stdout.write(self.style.SUCCESS(
            f'Predicted price on [{predicted.times[0]:.6g}, {predicted.final_time:.6g}]: '
            f'p={predicted.final_price:.6g} at the end, measured p(T)={data.final_price:.6g}'
        ))
        self.written(path)

    def run_family(self, config, out_dir):
        cfg = config.assimilation
        data = simulate_observations(config)
        f_eps = data.density_at_eps if cfg.mode == VERIFICATION else None
        runs = prediction_family(data.series, cfg, config.delta, config.sweep_count, config.horizon,
                                        config.prediction_steps, config.perturbation, f_eps)

        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [write_price_csv(out_dir / f'predicted_price_{run.index}.csv', run.series) for run in runs]
        price_gap, density_gap = prediction_spread(runs)
        self.stdout.write(self.style.SUCCESS(f'Predicted {len(runs)} perturbed price paths'))
        for run in runs:
            self.stdout.write(f'  k={run.index:2d}  p(T+horizon)={run.series.final_price:.6g}')
        self.stdout.write(f'  spread of final prices {price_gap:.4e}, of reconstructions {density_gap:.4e}')
        self.written(*paths)
