"""Posterior-predictive failure probabilities under stochastic loads.

For each posterior draw and replicate a board is sampled, a load history is
sampled, and the board is scored two ways on the same random numbers: with
damage accumulation (first passage of the damage ODE) and without it (the
board breaks only when the load exceeds its short-term strength).  Every
``phi`` reuses the same boards and histories, so the curves are coupled.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from . import damage
from .damage import HOURS_PER_YEAR, K_STANDARD
from .errors import DomainError
from .hier import HyperParams, effects_from_normals
from .loads import LoadModelParams, sample_load_block
from .streams import SeedLike, name_key, seed_sequence, substream

log = logging.getLogger(__name__)

DOL = "dol"
NO_DOL = "nodol"
MODES = (DOL, NO_DOL)
DEFAULT_HORIZON = 30 * HOURS_PER_YEAR
BLOCK = 500

_REL = name_key("reliability")


def reliability_index(p_f):
    """``-Phi^{-1}(p_f)``; ``+inf`` at 0 and ``-inf`` at 1."""
    p = np.asarray(p_f, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("p_f must lie in [0, 1]")
    beta = 0.0 - stats.norm.ppf(p)  # +0.0 rather than -0.0 at p = 0.5
    return float(beta) if beta.ndim == 0 else beta


@dataclass
class ReliabilityPoint:
    phi: float
    p_f: float
    beta: float
    draw_p_f: np.ndarray
    mode: str = DOL
    n_invalid: int = 0

    @property
    def draw_beta(self) -> np.ndarray:
        return reliability_index(self.draw_p_f)

    def beta_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Equal-tailed interval of the per-draw reliability indices."""
        q = (1 - level) / 2
        lo_p, hi_p = np.quantile(self.draw_p_f, [q, 1 - q])
        return reliability_index(hi_p), reliability_index(lo_p)


@dataclass
class KdResult:
    beta_target: float
    phi1: float
    phi2: float
    k_d: float
    interval: tuple[float, float]
    pooled_k_d: float
    n_draws_used: int
    method: str = "per-draw"
    draws: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class FailureSamples:
    """Failure times, shape ``(n_phi, n_draws, n_rep)``; ``inf`` means survived, NaN invalid."""

    phis: np.ndarray
    times: dict[str, np.ndarray]
    horizon: float


def _block_times(theta: HyperParams, phis: np.ndarray, size: int, horizon: float,
                 params: LoadModelParams, rng: np.random.Generator, modes: Sequence[str]):
    z = rng.standard_normal((size, 5))
    fx = effects_from_normals(theta, z)
    loads = sample_load_block(params, horizon, rng, size)

    t_s = damage.ramp_failure_times(fx, K_STANDARD)
    for i in np.flatnonzero(np.isnan(t_s)):
        try:
            t_s[i] = damage.ramp_failure_time(fx[i], K_STANDARD)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            log.warning("replicate %d: short-term strength failed (%s); marked invalid", i, exc)
    tau_s = K_STANDARD * t_s
    bad = ~np.isfinite(tau_s)
    safe_tau_s = np.where(bad, 1.0, tau_s)

    out = {m: np.empty((len(phis), size)) for m in modes}
    ends = np.concatenate([loads.starts[:, 1:], np.full((size, 1), horizon)], axis=1)
    positive = ends > loads.starts
    for p, phi in enumerate(phis):
        tau = loads.tau(phi, params)
        over = (tau > safe_tau_s[:, None]) & positive
        first = np.argmax(over, axis=1)
        t_over = np.where(over.any(axis=1), loads.starts[np.arange(size), first], np.inf)
        if DOL in modes:
            # a load above the short-term strength breaks the board at once
            t = damage.piecewise_failure_times(fx, safe_tau_s, loads.starts, tau, horizon)
            out[DOL][p] = np.where(bad, np.nan, np.minimum(t, t_over))
        if NO_DOL in modes:
            out[NO_DOL][p] = np.where(bad, np.nan, t_over)
    return out


def simulate_failure_samples(theta_draws: Sequence[HyperParams], phis, n_rep: int,
                             horizon: float = DEFAULT_HORIZON, rng: SeedLike = 0,
                             params: LoadModelParams = LoadModelParams(),
                             modes: Sequence[str] = MODES, threads: int = 1,
                             block: int = BLOCK) -> FailureSamples:
    """Failure times for every ``(phi, draw, replicate)`` on common random numbers.

    Replicates are generated in fixed blocks of ``block``, each from its own
    substream keyed by ``(draw, block index)``, so the output does not depend
    on ``threads``.
    """
    phis = np.asarray(phis, dtype=float)
    if n_rep < 1:
        raise DomainError("n_rep must be at least 1")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if np.any(phis < 0):
        raise DomainError("phi must be nonnegative")
    if not len(theta_draws):
        raise DomainError("need at least one posterior draw")
    modes = tuple(modes)
    if any(m not in MODES for m in modes):
        raise DomainError(f"unknown mode in {modes}")
    tasks = [(i, b0) for i in range(len(theta_draws)) for b0 in range(0, n_rep, block)]

    def run(task):
        i, b0 = task
        size = min(block, n_rep - b0)
        return _block_times(theta_draws[i], phis, size, horizon, params,
                            substream(rng, _REL, i, b0 // block), modes)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    times = {m: np.empty((len(phis), len(theta_draws), n_rep)) for m in modes}
    for (i, b0), res in zip(tasks, results):
        for m in modes:
            times[m][:, i, b0:b0 + res[m].shape[1]] = res[m]
    return FailureSamples(phis, times, float(horizon))


def simulate_time_to_failure(theta_draws: Sequence[HyperParams], phi: float, n_rep: int,
                             horizon: float = DEFAULT_HORIZON, rng: SeedLike = 0,
                             params: LoadModelParams = LoadModelParams(),
                             threads: int = 1, block: int = BLOCK) -> np.ndarray:
    """Failure times with damage accumulation, shape ``(n_draws, n_rep)``."""
    s = simulate_failure_samples(theta_draws, [phi], n_rep, horizon, rng, params, (DOL,), threads, block)
    return s.times[DOL][0]


def failure_probability(samples: np.ndarray, horizon: float) -> tuple[np.ndarray, float, int]:
    """Per-draw and pooled fraction failing by ``horizon``, plus the invalid count.

    ``samples`` has shape ``(n_draws, n_rep)``; NaN entries are excluded.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise DomainError("no samples")
    valid = ~np.isnan(samples)
    failed = valid & (samples <= horizon)
    n_valid = valid.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_draw = failed.sum(axis=1) / n_valid
    pooled = float(failed.sum() / valid.sum()) if valid.any() else math.nan
    return per_draw, pooled, int((~valid).sum())


def no_dol_failure(theta_draws: Sequence[HyperParams], phi: float, n_rep: int,
                   horizon: float = DEFAULT_HORIZON, rng: SeedLike = 0,
                   params: LoadModelParams = LoadModelParams(), threads: int = 1) -> np.ndarray:
    """Per-draw probability that the peak load exceeds the short-term strength."""
    s = simulate_failure_samples(theta_draws, [phi], n_rep, horizon, rng, params, (NO_DOL,), threads)
    return failure_probability(s.times[NO_DOL][0], horizon)[0]


def curves_from_samples(samples: FailureSamples) -> dict[str, list[ReliabilityPoint]]:
    curves = {}
    for mode, times in samples.times.items():
        pts = []
        for p, phi in enumerate(samples.phis):
            per_draw, pooled, n_bad = failure_probability(times[p], samples.horizon)
            pts.append(ReliabilityPoint(float(phi), pooled, reliability_index(pooled), per_draw, mode, n_bad))
        curves[mode] = pts
    return curves


def phi_beta_curves(theta_draws: Sequence[HyperParams], phi_grid, n_rep: int,
                    horizon: float = DEFAULT_HORIZON, rng: SeedLike = 0,
                    params: LoadModelParams = LoadModelParams(), threads: int = 1,
                    coupled: bool = True, block: int = BLOCK) -> dict[str, list[ReliabilityPoint]]:
    """Both curves; ``coupled=False`` gives each mode its own random numbers."""
    grid = np.asarray(phi_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("phi_grid must be nonempty and strictly ascending")
    if coupled:
        return curves_from_samples(simulate_failure_samples(theta_draws, grid, n_rep, horizon, rng,
                                                            params, MODES, threads, block))
    out = {}
    for m in MODES:
        s = simulate_failure_samples(theta_draws, grid, n_rep, horizon, seed_sequence(rng, name_key(m)),
                                     params, (m,), threads, block)
        out.update(curves_from_samples(s))
    return out


def phi_beta_curve(theta_draws: Sequence[HyperParams], phi_grid, n_rep: int,
                   horizon: float = DEFAULT_HORIZON, mode: str = DOL, rng: SeedLike = 0,
                   params: LoadModelParams = LoadModelParams(), threads: int = 1) -> list[ReliabilityPoint]:
    """One curve; identical to the matching half of ``phi_beta_curves`` at the same seed."""
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    grid = np.asarray(phi_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("phi_grid must be nonempty and strictly ascending")
    s = simulate_failure_samples(theta_draws, grid, n_rep, horizon, rng, params, (mode,), threads)
    return curves_from_samples(s)[mode]


# --- adjustment factor --------------------------------------------------------

def _phi_at_beta(phis: np.ndarray, betas: np.ndarray, target: float, name: str) -> float:
    """Interpolate ``phi`` at ``beta = target`` on the monotone (nonincreasing) fit of ``betas``."""
    keep = np.isfinite(betas)
    if keep.sum() < len(betas):
        warnings.warn(f"{name}: {len(betas) - keep.sum()} grid point(s) with infinite beta excluded")
    phis, betas = phis[keep], betas[keep]
    if len(phis) < 2:
        raise DomainError(f"{name}: fewer than two finite points; cannot bracket beta={target}")
    fit = optimize.isotonic_regression(betas, increasing=False).x
    if not fit[-1] <= target <= fit[0]:
        raise DomainError(f"{name}: beta={target} outside curve range [{fit[-1]:.4g}, {fit[0]:.4g}]")
    # np.interp needs increasing abscissae: walk the curve from the right
    return float(np.interp(target, fit[::-1], phis[::-1]))


def _curve_arrays(curve: Sequence[ReliabilityPoint]):
    phis = np.array([p.phi for p in curve])
    if np.any(np.diff(phis) <= 0):
        raise DomainError("curve phis must be strictly ascending")
    return phis, np.array([p.beta for p in curve]), np.array([p.draw_p_f for p in curve])


def k_d_factor(curve_dol: Sequence[ReliabilityPoint], curve_nodol: Sequence[ReliabilityPoint],
               beta_target: float, level: float = 0.95, min_fraction: float = 0.5,
               rng: SeedLike = 0, n_boot: int = 400) -> KdResult:
    """``K_D = phi_2 / phi_1`` at ``beta_target`` with a posterior interval.

    Each posterior draw gives its own pair of curves and hence its own
    ``K_D``; the estimate is their mean and the interval their equal-tailed
    quantiles.  Draws whose curves do not bracket the target are dropped.
    When fewer than ``min_fraction`` of draws remain (too few replicates to
    resolve small failure probabilities per draw), the pooled ratio is
    reported with a bootstrap-over-draws interval instead.
    """
    phi_d, beta_d, pf_d = _curve_arrays(curve_dol)
    phi_n, beta_n, pf_n = _curve_arrays(curve_nodol)
    phi2 = _phi_at_beta(phi_d, beta_d, beta_target, "with-DOL curve")
    phi1 = _phi_at_beta(phi_n, beta_n, beta_target, "no-DOL curve")
    pooled = phi2 / phi1
    q = (1 - level) / 2

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        per_draw = []
        for j in range(pf_d.shape[1]):
            try:
                p2 = _phi_at_beta(phi_d, reliability_index(pf_d[:, j]), beta_target, "draw")
                p1 = _phi_at_beta(phi_n, reliability_index(pf_n[:, j]), beta_target, "draw")
            except DomainError:
                continue
            per_draw.append(p2 / p1)
    per_draw = np.array(per_draw)
    n_draws = pf_d.shape[1]
    if len(per_draw) >= max(2, min_fraction * n_draws):
        lo, hi = np.quantile(per_draw, [q, 1 - q])
        est = float(per_draw.mean())
        return KdResult(beta_target, phi1, phi2, est, (float(min(lo, est)), float(max(hi, est))),
                        pooled, len(per_draw), "per-draw", per_draw)

    gen = substream(rng, name_key("kd-bootstrap"))
    boot = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(n_boot):
            idx = gen.integers(0, n_draws, n_draws)
            try:
                b2 = _phi_at_beta(phi_d, reliability_index(pf_d[:, idx].mean(axis=1)), beta_target, "draw")
                b1 = _phi_at_beta(phi_n, reliability_index(pf_n[:, idx].mean(axis=1)), beta_target, "draw")
            except DomainError:
                continue
            boot.append(b2 / b1)
    if boot:
        lo, hi = np.quantile(boot, [q, 1 - q])
    else:
        lo = hi = pooled
    warnings.warn(f"beta={beta_target}: only {len(per_draw)}/{n_draws} draws bracket the target; "
                  "reporting pooled K_D with a bootstrap interval")
    return KdResult(beta_target, phi1, phi2, pooled, (float(min(lo, pooled)), float(max(hi, pooled))),
                    pooled, len(per_draw), "pooled-bootstrap", np.array(boot))


# --- output -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_curves(curves: dict[str, list[ReliabilityPoint]], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi", "p_f", "beta", "beta_lo", "beta_hi", "mode"])
        for mode in MODES:
            for pt in curves.get(mode, []):
                lo, hi = pt.beta_interval()
                w.writerow([_fmt(pt.phi), _fmt(pt.p_f), _fmt(pt.beta), _fmt(lo), _fmt(hi), mode])
    return path


def write_kd(results: Sequence[KdResult], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta_target", "phi1", "phi2", "kd", "kd_lo", "kd_hi"])
        for r in results:
            w.writerow([_fmt(r.beta_target), _fmt(r.phi1), _fmt(r.phi2), _fmt(r.k_d),
                        _fmt(r.interval[0]), _fmt(r.interval[1])])
    return path
