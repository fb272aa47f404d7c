"""Long-run averages of the load processes against their analytic values.

    python scripts/load_moments.py --years 100000 --seeds 20
"""
import argparse
import math

import numpy as np

from admkit.damage import HOURS_PER_YEAR
from admkit.loads import LoadModelParams, sample_load_path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--years", type=float, default=1e5)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    p = LoadModelParams()
    horizon = args.years * HOURS_PER_YEAR
    print(f"analytic: sustained mean {p.sustained_mean:.5f}  episode fraction {p.episode_fraction:.5f}")
    for seed in range(args.seeds):
        path = sample_load_path(p, horizon, np.random.default_rng(seed))
        dur = np.diff(np.append(path.sustained_starts, horizon))
        mean_s = (dur * path.sustained_levels).sum() / horizon
        sd_s = math.sqrt(2 * p.sustained_shape * p.sustained_scale ** 2 / len(dur))
        frac = (path.episode_ends - path.episode_starts).sum() / horizon
        q = p.episode_fraction
        sd_e = math.sqrt((1 - q) ** 2 * p.episode_mean ** 2 + q ** 2 * p.gap_mean ** 2) / (
            math.sqrt(len(path.episode_starts)) * (p.gap_mean + p.episode_mean))
        print(f"seed {seed}: sustained {mean_s:.5f} (z={(mean_s - p.sustained_mean) / sd_s:+.2f})  "
              f"episodes {frac:.5f} (z={(frac - q) / sd_e:+.2f})")


if __name__ == "__main__":
    main()
