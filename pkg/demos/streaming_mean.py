"""Debiasing on a data stream versus constant mini-batches at equal cost.

Observations x ~ N(10, 5000^2) arrive one block at a time and are thrown
away after use; the prior is N(0, 50^2).  The debiased scheme targets the
posterior given n_max observations.  The baseline averages posteriors
from fixed-size batches costing the same on average, and stays pinned
near the prior.
"""

import argparse

from debiasing.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--R", type=int, default=5000)
    parser.add_argument("--out", default="demo_results/stream")
    args = parser.parse_args()
    cli_main([
        "stream", "--out", args.out,
        "--set", "a=16", "--set", "n_max=16384", "--set", "alpha=0.6", "--set", f"R={args.R}",
    ])
    print(f"running traces for both schemes: {args.out}/stream_trace.csv")


if __name__ == "__main__":
    main()
