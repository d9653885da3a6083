from priceformation.csvio import write_field_csv, write_price_csv

from ._base import PriceFormationCommand, simulate_observations


class Command(PriceFormationCommand):
    help = 'Simulate the price formation model and write price.csv, density_T.csv and transformed_T.csv'

    def run(self, config, out_dir, options):
        data = simulate_observations(config)

        out_dir.mkdir(parents=True, exist_ok=True)
        paths = (
            write_price_csv(out_dir / 'price.csv', data.series),
            write_field_csv(out_dir / 'density_T.csv', data.final_density, 'f'),
            write_field_csv(out_dir / 'transformed_T.csv', data.transformed, 'F'),
        )
        self.stdout.write(self.style.SUCCESS(
            f'Simulated {config.experiment} market: p(0)={data.series.prices[0]:.6g}, '
            f'p(T)={data.series.final_price:.6g} over {len(data.series)} samples'
        ))
        self.written(*paths)
