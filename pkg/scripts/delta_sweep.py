"""Pilot acceptance rate against the kernel bandwidth on simulated Scenario 1 data.

    python scripts/delta_sweep.py --seed 0 --iterations 2000
"""
import argparse
import logging

import numpy as np

from admkit.abcmcmc import ChainConfig, run_chain, sweep_candidates
from admkit.hier import REFERENCE_THETA
from admkit.simulate import TestConfig, simulate_failure_times
from admkit.streams import substream


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--literal", action="store_true", help="unstandardized summaries (hours)")
    ap.add_argument("--grid", choices=["wide", "narrow"], default="wide")
    args = ap.parse_args()
    logging.disable(logging.WARNING)

    data = simulate_failure_times(REFERENCE_THETA, TestConfig(tau_c=4500.0, censor_time=8760.0, n_boards=300),
                                  substream(args.seed, 1))
    grid = np.geomspace(0.5, 20, 17) if args.grid == "wide" else sweep_candidates()
    if args.literal:
        grid = grid * 1e3
    for delta in grid:
        cfg = ChainConfig([data], delta=float(delta), theta0=REFERENCE_THETA, seed=args.seed,
                          burn_in=args.iterations, thin=1, n_draws=1, standardize=not args.literal)
        print(f"{delta:10.4g} {run_chain(cfg).acceptance_rate:.4f}", flush=True)


if __name__ == "__main__":
    main()
