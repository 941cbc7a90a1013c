"""Choosing the truncation exponent alpha from a pilot run.

A pilot estimates how fast partial-posterior expectations settle
(E|delta_t|^2 ~ c n_t^-beta).  The work-variance product is then
minimised over alpha; the curve is printed so the trade-off is visible.
"""

import argparse

import numpy as np

from debiasing.experiments import run_pilot
from debiasing.models import GaussianMeanModel, generate_synthetic, nearest_spd
from debiasing.schedule import (
    ConvergenceFit,
    build_geometric_schedule,
    largest_admissible_n,
    tradeoff_curve,
    tune_alpha,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--N", type=int, default=10_000)
    parser.add_argument("--a", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    cov = nearest_spd([[-1.0, 3.0], [3.0, 1.0]])
    ds = generate_synthetic("gaussian_mean", {"cov": cov.ravel().tolist()}, args.N, 1)
    model = GaussianMeanModel(ds.data, cov, component=None)
    ladder = build_geometric_schedule(args.a, 2, largest_admissible_n(args.a, 2, args.N))
    pilot = run_pilot(model, ladder.sizes[:6], repeats=args.repeats, seed=0)
    print(f"pilot levels {pilot.sizes}")
    print(f"squared differences {np.array2string(np.asarray(pilot.squared_diffs), precision=5)}")
    print(f"fitted beta = {pilot.fit.beta:.3f}, c = {pilot.fit.c:.3g}")

    # the fitted exponent next to the idealised variance-only rate beta = 1
    for label, fit in (("fitted", pilot.fit), ("beta = 1", ConvergenceFit(pilot.fit.c, 1.0, 0.0))):
        alpha, product = tune_alpha(args.a, 2, args.N, fit)
        print(f"\n{label}: best alpha = {alpha:.3f} (work x variance = {product:.4g})")
        curve = tradeoff_curve(args.a, 2, args.N, fit, alphas=np.linspace(0.5, min(1.2, fit.beta - 0.02), 8))
        print("  alpha    work      variance   product")
        for row in zip(*curve):
            print("  {:.3f}  {:9.1f}  {:9.4g}  {:9.4g}".format(*row))


if __name__ == "__main__":
    main()
