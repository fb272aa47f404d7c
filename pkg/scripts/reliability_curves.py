"""Reliability curves and adjustment factors at a point estimate of theta.

    python scripts/reliability_curves.py --draws 50 --reps 2000 --seed 0
"""
import argparse
import warnings

import numpy as np

from admkit.errors import DomainError
from admkit.hier import REFERENCE_THETA
from admkit.reliability import DOL, NO_DOL, k_d_factor, phi_beta_curves


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--draws", type=int, default=50)
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    phis = np.arange(1, 7) * 0.5
    curves = phi_beta_curves([REFERENCE_THETA] * args.draws, phis, args.reps, rng=args.seed,
                             threads=args.threads)
    print("phi    beta(DOL)  beta(no DOL)")
    for pd, pn in zip(curves[DOL], curves[NO_DOL]):
        print(f"{pd.phi:4.2f}  {pd.beta:9.3f}  {pn.beta:12.3f}")
    for target in (2.5, 3.0, 3.5):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                r = k_d_factor(curves[DOL], curves[NO_DOL], target, rng=args.seed)
            except DomainError as exc:
                print(f"beta={target}: {exc}")
                continue
        print(f"beta={target}: K_D={r.k_d:.3f} ({r.interval[0]:.3f}, {r.interval[1]:.3f}) [{r.method}]")


if __name__ == "__main__":
    main()
