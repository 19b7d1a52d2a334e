#!/usr/bin/env python3
"""Posterior-concentration experiment: error decay vs the closed-form bound.

Simulates exact Bayes updating on a two-candidate Bernoulli family, sweeps
the sample count, and reports how fast the mean posterior error falls
relative to the Hellinger separation rate. An optional uniform redundancy
discount phi rescales the effective number of informative draws, which
should stretch the sample requirement by roughly 1/phi.

Typical runs:

    python3 scripts/decay_experiment.py
    python3 scripts/decay_experiment.py --phi 0.5 --n-max 64 --out half.csv
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from stepsearch.theory import (  # noqa: E402
    ThetaFamily,
    min_sample_size,
    run_decay_experiment,
    separation,
)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--p-star", type=float, default=0.9, help="truth success rate")
    parser.add_argument("--p-other", type=float, default=0.5, help="alternative rate")
    parser.add_argument("--prior-star", type=float, default=0.5)
    parser.add_argument("--n-max", type=int, default=32)
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--delta", type=float, default=0.05)
    parser.add_argument("--phi", type=float, default=None, help="uniform redundancy discount")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="decay.csv")
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    family = ThetaFamily.bernoulli_pair(
        p_other=args.p_other,
        p_star=args.p_star,
        prior=(1.0 - args.prior_star, args.prior_star),
    )
    profile = separation(family)
    n_min = min_sample_size(profile.lambda_t, args.delta, args.prior_star)
    result = run_decay_experiment(
        family,
        n_grid=range(1, args.n_max + 1),
        trials=args.trials,
        redundancy=args.phi,
        seed=args.seed,
        delta=args.delta,
        csv_path=args.out,
    )

    errors = np.asarray(result.mean_posterior_error)
    ns = np.asarray(result.n_grid)
    slope = float(np.polyfit(ns, np.log(errors), 1)[0])

    print(f"separation lambda        = {profile.lambda_t:.6f}")
    print(f"bound valid from         n >= {n_min}")
    print(f"mean error at n=1        = {errors[0]:.5f}")
    print(f"mean error at n={ns[-1]:<3d}     = {errors[-1]:.5f}")
    print(f"log-error slope          = {slope:.4f}  (target <= {-profile.lambda_t:.4f} + slack)")
    half_life = math.log(2) / -slope if slope < 0 else float("inf")
    print(f"error halves every       ~{half_life:.1f} draws")
    violations = [
        int(n)
        for n, err, bound in zip(ns, errors, result.bound_values)
        if n >= n_min and err > bound
    ]
    print(f"bound violations (n>={n_min}) = {violations or 'none'}")
    print(f"csv written to           {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
