"""Random-feature regression: debiased predictions versus constant batches.

The ground truth is the predictive mean using all N training points, so
the full-data MSE is zero by construction.  Small training subsets are
strongly shrunk toward zero, and averaging many of them does not remove
that shrinkage.  The debiased average does, at the same average number
of training points touched per replicate.
"""

import argparse

import numpy as np

from debiasing import ConvergenceFit, build_geometric_schedule, build_truncation_geometric, run_debias, tune_alpha
from debiasing.experiments import run_pilot
from debiasing.models import RffRegressionModel, generate_synthetic, mse


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--N", type=int, default=10_000)
    parser.add_argument("--R", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ds = generate_synthetic("rff_regression", None, args.N, 1)
    model = RffRegressionModel.from_dataset(ds, m=100, lam=10.0, basis_seed=7)
    truth = model.evaluate(np.arange(args.N))

    schedule = build_geometric_schedule(10, 10, args.N)
    pilot = run_pilot(model, schedule.sizes, repeats=30, seed=args.seed)
    fit = ConvergenceFit(pilot.fit.c, pilot.fit.beta - 0.1, pilot.fit.residual)
    alpha, _ = tune_alpha(10, 10, args.N, fit)
    print(f"levels {schedule.sizes}; pilot beta {pilot.fit.beta:.3f}; alpha {alpha:.3f}")

    est = run_debias(model, schedule, build_truncation_geometric(alpha, schedule.L), R=args.R, master_seed=args.seed)
    batch = int(round(est.total_likelihood_evals / args.R))
    rng = np.random.default_rng(args.seed + 1)
    baseline = np.mean([model.evaluate(rng.choice(args.N, batch, replace=False)) for _ in range(args.R)], axis=0)

    print(f"average training points per replicate: {batch}")
    print(f"MSE debiased       {mse(est.mean, truth):.3e}")
    print(f"MSE constant batch {mse(baseline, truth):.3e}")
    for n in schedule.sizes:
        one = mse(model.evaluate(rng.choice(args.N, n, replace=False)), truth)
        print(f"  single subset of {n:>6}: MSE {one:.3e}")


if __name__ == "__main__":
    main()
