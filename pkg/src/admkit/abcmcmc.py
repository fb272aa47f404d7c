"""Censoring-aware ABC-MCMC over the hyperparameters.

Each iteration proposes ``theta'`` by a Gaussian random walk, simulates one
replicate of every observed dataset under ``theta'``, and accepts with
probability

    min(1, prior ratio * prod_d [K(s'_d - s_obs,d) / K(s_d - s_obs,d)]
                       * (F'_d / F_d)^(n_d - n_c,d) * ((1 - F'_d) / (1 - F_d))^n_c,d)

where ``s`` are 19 quantiles of the uncensored times, ``K`` a Normal kernel of
bandwidth ``delta`` and ``F`` the simulated fraction failing before the
censoring time.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DomainError
from .hier import HyperParams, PriorSpec, ProposalSpec, log_prior, propose
from .simulate import CensoredSample, simulate_failure_times
from .streams import SeedLike, name_key, substream

log = logging.getLogger(__name__)

QUANTILE_LEVELS = np.round(np.arange(1, 20) * 0.05, 10)

_FIT = name_key("fit")
_PILOT = name_key("pilot")
_INIT = name_key("init")


def summary_stats(times) -> np.ndarray:
    """19 quantiles (5%, 10%, ..., 95%) with linear interpolation of order statistics."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise DomainError("summary statistics need at least one uncensored time")
    return np.quantile(times, QUANTILE_LEVELS, method="linear")


def kernel_log(s, s_obs, delta: float, scale=None) -> float:
    """Log of the product of independent ``N(0, delta^2)`` densities at ``(s - s_obs) / scale``."""
    if not delta > 0:
        raise DomainError(f"bandwidth must be positive, got {delta}")
    d = np.asarray(s, dtype=float) - np.asarray(s_obs, dtype=float)
    if scale is not None:
        d = d / np.asarray(scale, dtype=float)
    return float(-0.5 * np.dot(d, d) / delta ** 2 - d.size * math.log(delta * math.sqrt(2 * math.pi)))


@dataclass
class ChainState:
    """Parameter value plus the synthetic summaries that were accepted with it."""

    theta: HyperParams
    summaries: list[np.ndarray]
    p_hat: list[float]
    log_prior: float = 0.0
    kernel_logs: list[float] = field(default_factory=list)


@dataclass
class ChainConfig:
    datasets: list[CensoredSample]
    delta: float
    burn_in: int = 100_000
    thin: int = 10_000
    n_draws: int = 500
    proposal: ProposalSpec = field(default_factory=ProposalSpec)
    seed: int = 0
    theta0: HyperParams | None = None
    standardize: bool = True
    pilot_size: int = 200
    prior: PriorSpec = field(default_factory=PriorSpec)

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.n_draws < 1 or self.thin < 1 or self.burn_in < 0:
            raise DomainError("need n_draws >= 1, thin >= 1, burn_in >= 0")
        if not self.datasets:
            raise DomainError("at least one dataset is required")
        for i, d in enumerate(self.datasets):
            if len(d.times) == 0:
                raise DomainError(f"dataset {i} has no uncensored failures")


@dataclass
class ChainResult:
    draws: list[ChainState]
    iterations: list[int]
    acceptance_rates: list[float]
    acceptance_rate: float
    scales: list[np.ndarray]
    observed: list[np.ndarray]
    n_failed_sims: int
    meta: dict = field(default_factory=dict)


def _transform(times: np.ndarray, standardize: bool) -> np.ndarray:
    return np.log(times) if standardize else times


def _censor_log_factor(f_new: float, f_old: float, n: int, n_c: int) -> float:
    n_f = n - n_c
    total = 0.0
    if n_f:
        if f_new <= 0.0:
            return -math.inf
        total += n_f * (math.log(f_new) - math.log(f_old))
    if n_c:
        if f_new >= 1.0:
            return -math.inf
        total += n_c * (math.log1p(-f_new) - math.log1p(-f_old))
    return total


def log_accept_ratio(current: ChainState, proposal: ChainState, log_prior_ratio: float,
                     datasets: list[CensoredSample]) -> float:
    """Log of the pre-truncation acceptance ratio (symmetric proposal, so no g-ratio)."""
    if len(current.p_hat) != len(datasets) or len(proposal.p_hat) != len(datasets):
        raise DomainError("states and datasets disagree on the number of datasets")
    if log_prior_ratio == -math.inf:
        return -math.inf
    total = log_prior_ratio
    for d, data in enumerate(datasets):
        total += proposal.kernel_logs[d] - current.kernel_logs[d]
        total += _censor_log_factor(proposal.p_hat[d], current.p_hat[d], data.n_total, data.n_censored)
        if total == -math.inf:
            return total
    return total


def abc_accept_ratio(current: ChainState, proposal: ChainState, theta_prior_ratio: float,
                     config: ChainConfig) -> float:
    """Acceptance probability in ``[0, 1]``."""
    if theta_prior_ratio <= 0:
        return 0.0
    lr = log_accept_ratio(current, proposal, math.log(theta_prior_ratio), config.datasets)
    return 1.0 if lr >= 0 else math.exp(lr)


class _Target:
    """Observed summaries, scales and the per-dataset simulation step."""

    def __init__(self, config: ChainConfig, scales=None):
        self.config = config
        self.datasets = config.datasets
        self.observed = [summary_stats(_transform(d.times, config.standardize)) for d in self.datasets]
        self.scales = scales

    def simulate(self, theta: HyperParams, seed, *keys) -> ChainState | None:
        """Synthetic state at ``theta``; None when a replicate has no uncensored times."""
        summaries, p_hat, klogs = [], [], []
        for d, data in enumerate(self.datasets):
            rep = simulate_failure_times(theta, data.config, substream(seed, *keys, d))
            if len(rep.times) == 0:
                return None
            s = summary_stats(_transform(rep.times, self.config.standardize))
            summaries.append(s)
            p_hat.append(rep.failed_fraction)
            scale = self.scales[d] if self.scales is not None else None
            klogs.append(kernel_log(s, self.observed[d], self.config.delta, scale))
        return ChainState(theta, summaries, p_hat, log_prior(theta, self.config.prior), klogs)


def pilot_scales(config: ChainConfig, theta: HyperParams, seed: SeedLike) -> list[np.ndarray]:
    """Per-dataset robust scale of each summary coordinate at ``theta``.

    Normal-consistent median absolute deviation over ``config.pilot_size``
    replicates; replicates without uncensored times are skipped.
    """
    target = _Target(config)
    reps: list[list[np.ndarray]] = [[] for _ in config.datasets]
    for r in range(config.pilot_size):
        for d, data in enumerate(config.datasets):
            rep = simulate_failure_times(theta, data.config, substream(seed, _PILOT, r, d))
            if len(rep.times):
                reps[d].append(summary_stats(_transform(rep.times, config.standardize)))
    scales = []
    for d, rows in enumerate(reps):
        if len(rows) < 2:
            raise DomainError(f"pilot simulation at theta0 produced no failures for dataset {d}")
        mad = stats.median_abs_deviation(np.array(rows), axis=0, scale="normal")
        floor = 1e-12 * max(1.0, float(np.max(np.abs(target.observed[d]))))
        scales.append(np.where(mad > floor, mad, 1.0))
    return scales


def _initial_state(target: _Target, theta0: HyperParams, seed) -> ChainState:
    for attempt in range(1000):
        state = target.simulate(theta0, seed, _INIT, attempt)
        if state is not None:
            return state
    raise DomainError("could not simulate any uncensored failures at theta0")


def run_chain(config: ChainConfig, rng: SeedLike | None = None, scales=None) -> ChainResult:
    """Run ``burn_in + thin * n_draws`` iterations and return the thinned draws.

    All randomness comes from substreams keyed by iteration and dataset index,
    so a chain is reproducible from ``(seed, config)``.
    """
    seed = config.seed if rng is None else rng
    theta0 = config.theta0
    if theta0 is None:
        raise DomainError("ChainConfig.theta0 must be set")
    if config.standardize and scales is None:
        scales = pilot_scales(config, theta0, seed)
    target = _Target(config, scales if config.standardize else None)
    current = _initial_state(target, theta0, seed)

    total = config.burn_in + config.thin * config.n_draws
    accepted = failed = 0
    draws, iters, rates = [], [], []
    for it in range(1, total + 1):
        step_rng = substream(seed, _FIT, it)
        theta_new = propose(current.theta, config.proposal, step_rng)
        u = step_rng.random()
        lp_new = log_prior(theta_new, config.prior)
        if lp_new > -math.inf:
            try:
                prop = target.simulate(theta_new, seed, _FIT, it, 1)
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                failed += 1
                log.warning("iteration %d: simulation failed (%s); proposal rejected", it, exc)
                prop = None
            if prop is not None:
                lr = log_accept_ratio(current, prop, lp_new - current.log_prior, config.datasets)
                if lr >= 0 or u < math.exp(lr):
                    current = prop
                    accepted += 1
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws.append(current)
            iters.append(it)
            rates.append(accepted / it)
    meta = {
        "delta": config.delta,
        "seed": int(config.seed) if rng is None else str(rng),
        "standardize": config.standardize,
        "summary_scale": "log-hours" if config.standardize else "hours",
        "burn_in": config.burn_in,
        "thin": config.thin,
        "n_draws": config.n_draws,
        "iterations": total,
    }
    return ChainResult(draws, iters, rates, accepted / total,
                       scales if config.standardize else [np.ones(19) for _ in config.datasets],
                       target.observed, failed, meta)


@dataclass
class CalibrationResult:
    delta: float
    rates: dict[float, float]
    warning: bool


def calibrate_bandwidth(candidates, pilot_iterations: int, config: ChainConfig,
                        rng: SeedLike | None = None, target_rate: float = 0.01) -> CalibrationResult:
    """Smallest candidate bandwidth whose pilot chain accepts at least ``target_rate``.

    Every candidate's pilot chain shares the same random numbers.  When none
    qualifies the largest candidate is returned with ``warning`` set.
    """
    cands = sorted(float(c) for c in candidates)
    if not cands or cands[0] <= 0:
        raise DomainError("candidates must be nonempty and positive")
    seed = config.seed if rng is None else rng
    scales = pilot_scales(config, config.theta0, seed) if config.standardize else None
    rates: dict[float, float] = {}
    if len(cands) == 1:
        return CalibrationResult(cands[0], rates, False)
    for delta in cands:
        pilot = ChainConfig(**{**config.__dict__, "delta": delta, "burn_in": pilot_iterations,
                               "thin": 1, "n_draws": 1})
        res = run_chain(pilot, seed, scales=scales)
        rates[delta] = res.acceptance_rate
        log.info("delta=%.4g pilot acceptance %.4f", delta, res.acceptance_rate)
        if res.acceptance_rate >= target_rate:
            return CalibrationResult(delta, rates, False)
    warnings.warn(f"no bandwidth reached {target_rate:.2%} acceptance; using {cands[-1]}")
    return CalibrationResult(cands[-1], rates, True)


def sweep_candidates(lo: float = 0.1, hi: float = 3.0, count: int = 30) -> list[float]:
    return [float(x) for x in np.linspace(lo, hi, count)]


# --- chain files --------------------------------------------------------------

def write_chain(result: ChainResult, path: str | Path, header: dict | None = None) -> Path:
    """JSON lines: a ``{"meta": ...}`` header, then one object per retained draw."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {**(header or {}), **result.meta,
            "acceptance_rate": result.acceptance_rate,
            "n_failed_sims": result.n_failed_sims,
            "standardization": [np.asarray(s, dtype=float).tolist() for s in result.scales],
            "observed_summaries": [np.asarray(s, dtype=float).tolist() for s in result.observed]}
    with path.open("w") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for state, it, rate in zip(result.draws, result.iterations, result.acceptance_rates):
            row = {"iteration": it, "theta": state.theta.to_dict(),
                   "p_hat": [float(p) for p in state.p_hat],
                   "kernel_log": [float(k) for k in state.kernel_logs],
                   "acceptance_rate": rate}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def read_chain(path: str | Path) -> tuple[dict, list[dict]]:
    """``(meta, rows)`` with each row's ``theta`` turned into ``HyperParams``."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DomainError(f"{path}: empty chain file")
    head = json.loads(lines[0])
    if "meta" not in head:
        raise DomainError(f"{path}: first line must be the metadata header")
    rows = []
    for ln in lines[1:]:
        row = json.loads(ln)
        row["theta"] = HyperParams.from_dict(row["theta"])
        rows.append(row)
    return head["meta"], rows
