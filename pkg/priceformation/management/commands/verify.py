import pandas as pd

from priceformation.csvio import FLOAT_FORMAT
from priceformation.exceptions import VerificationFailure
from priceformation.verification import run_verification

from ._base import PriceFormationCommand


class Command(PriceFormationCommand):
    help = 'Run the invariant suite and write verification.csv; exits 4 if any check fails'

    def run(self, config, out_dir, options):
        report = run_verification(seed=config.seed, parallel=config.parallel or 1)

        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / 'verification.csv'
        pd.DataFrame(
            [(check.name, check.passed, check.detail) for check in report.checks],
            columns=['check', 'passed', 'detail'],
        ).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')

        for check in report.checks:
            style = self.style.SUCCESS if check.passed else self.style.ERROR
            self.stdout.write(style(f'  {"ok    " if check.passed else "FAILED"} {check.name}: {check.detail}'))
        self.written(path)
        if not report.passed:
            names = ', '.join(check.name for check in report.failures)
            raise VerificationFailure(f'{len(report.failures)} check(s) failed: {names}')
        self.stdout.write(self.style.SUCCESS(f'All {len(report.checks)} checks passed'))
