"""Train the constrained spline on synthetic strain-limiting data for several betas.

Usage::

    python3 scripts/synthetic_benchmark.py --beta 0.5,1,5,10 --out results/synth

Prints one metrics row per beta and writes the same files as ``slekan synth``.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from slekan import cli, data_io


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--beta", default="0.5,1,5,10")
    parser.add_argument("--samples", type=int, default=400)
    parser.add_argument("--iterations", type=int, default=5000)
    parser.add_argument("--out", default="results/synth")
    args = parser.parse_args()

    cfg = cli.RunConfig()
    cfg.synth.n_samples = args.samples
    cfg.train.iterations = args.iterations
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"{'beta':>6} {'MAE':>10} {'RMSE':>10} {'R2':>9} {'tail/global max err':>20} {'s':>6}")
    rows = []
    for beta in cli._float_list(args.beta):
        start = time.perf_counter()
        (row,) = cli.cmd_synth([beta], cfg, out)
        elapsed = time.perf_counter() - start
        _, curve = data_io.read_csv(out / f"synth_beta{beta!r}_curve.csv")
        tau, err = curve[:, 0], np.abs(curve[:, 2] - curve[:, 1])
        tail = err[np.abs(tau) > 2.0 / beta]
        ratio = tail.max() / err.max() if tail.size else float("nan")
        print(f"{beta:6.2f} {row[1]:10.3e} {row[2]:10.3e} {row[3]:9.5f} {ratio:20.3f} {elapsed:6.1f}")
        rows.append(row)
    # cmd_synth rewrites the summary per call, so collect all betas here
    data_io.write_csv(out / "synth_summary.csv", ("beta", "mae", "rmse", "r_squared"), rows)
    print(f"files written to {out}")


if __name__ == "__main__":
    main()
