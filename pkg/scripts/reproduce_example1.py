"""Double-integrator tracking of scalar Gaussian outputs at t = 0..4 (both cases).

Prints the output-space means and variances recovered at the observation
times and the transport cost; writes the CLI artifacts under ``--out``.
"""
import argparse
from pathlib import Path

import numpy as np

from ensemble_ot.cli import EXAMPLE1_MEANS, EXAMPLE1_VARIANCES, main as cli_main
from ensemble_ot.csvio import read_timeseries


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("out/example1"))
    args = parser.parse_args(argv)
    for case in (1, 2):
        out = args.out / f"case{case}"
        code = cli_main(["example1", "--case", str(case), "--out", str(out), "--quiet"])
        if code:
            return code
        times, means, covs = read_timeseries(out / "track.csv")
        print(f"case {case}")
        print("   t      mean  target   variance  target")
        for k in range(5):
            i = int(np.argmin(np.abs(times - k)))
            print(f"{k:4d} {means[i, 0]:9.6f} {EXAMPLE1_MEANS[k]:6.1f} {covs[i, 0, 0]:10.6f} "
                  f"{EXAMPLE1_VARIANCES[case][k]:6.1f}")
        print(f"   min covariance eigenvalue along the track: {np.linalg.eigvalsh(covs).min():.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
