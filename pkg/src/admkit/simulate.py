"""Censored constant-load datasets and the brute-force KDE likelihood."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import damage
from .damage import K_STANDARD, EffectsBatch, RampConstant
from .errors import DomainError, IntegrationError
from .hier import HyperParams, effects_from_normals

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestConfig:
    """Ramp rate (psi/h), hold level (psi), censoring time (h) and sample size."""

    __test__ = False  # keep pytest from collecting this as a test class

    k: float = K_STANDARD
    tau_c: float = math.inf
    censor_time: float = math.inf
    n_boards: int = 0

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f"k must be positive, got {self.k}")
        if not self.tau_c > 0:
            raise DomainError(f"tau_c must be positive, got {self.tau_c}")
        if self.n_boards < 0:
            raise DomainError(f"n_boards must be nonnegative, got {self.n_boards}")
        if math.isfinite(self.tau_c) and not self.censor_time > self.tau_c / self.k:
            raise DomainError("censor_time must fall after the end of the ramp")

    @property
    def ramp_end(self) -> float:
        return self.tau_c / self.k

    def with_boards(self, n: int) -> "TestConfig":
        return TestConfig(self.k, self.tau_c, self.censor_time, n)


@dataclass
class CensoredSample:
    """Uncensored failure times plus the number of boards censored at ``config.censor_time``."""

    times: np.ndarray
    n_censored: int
    config: TestConfig
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.n_censored < 0:
            raise DomainError("n_censored must be nonnegative")
        if np.any(self.times < 0) or np.any(self.times > self.config.censor_time):
            raise DomainError("uncensored times must lie in [0, censor_time]")

    @property
    def n_total(self) -> int:
        return len(self.times) + self.n_censored

    @property
    def failed_fraction(self) -> float:
        return len(self.times) / self.n_total if self.n_total else math.nan

    def breakdown(self) -> dict[str, int]:
        """Failures during the ramp, during the hold, and survivors."""
        in_ramp = int(np.sum(self.times <= self.config.ramp_end))
        return {"ramp": in_ramp, "constant": len(self.times) - in_ramp, "censored": self.n_censored}


def _ode_fallback(fx: damage.RandomEffects, config: TestConfig) -> float:
    t_s = damage.ramp_failure_time(fx, config.k)
    t_max = config.censor_time if math.isfinite(config.censor_time) else 1e9
    profile = RampConstant(config.k, config.tau_c)
    sol = damage.integrate_damage(fx, config.k * t_s, profile, t_max, step=t_max / 10,
                                  min_segment_steps=400, steps_per_damage=400)
    return sol.failure_time


def failure_times(fx: EffectsBatch, config: TestConfig) -> np.ndarray:
    """Failure times for a batch of boards under ``config``'s load profile.

    Uses the closed form; boards where it breaks down numerically are
    re-solved by ODE integration.
    """
    times, _, _ = damage.constant_load_failure_times(fx, config.k, config.tau_c)
    bad = np.flatnonzero(np.isnan(times))
    for i in bad:
        log.warning("closed form failed for board %d: %s", i, fx[i])
        try:
            times[i] = _ode_fallback(fx[i], config)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            raise IntegrationError(f"board {i}: {exc}") from exc
        log.debug("board %d solved by ODE fallback", i)
    return times


def simulate_failure_times(theta: HyperParams, config: TestConfig,
                           rng: np.random.Generator) -> CensoredSample:
    """Simulate a censored constant-load test of ``config.n_boards`` boards."""
    z = rng.standard_normal((config.n_boards, 5))
    return censor(failure_times(effects_from_normals(theta, z), config), config)


def censor(times: np.ndarray, config: TestConfig) -> CensoredSample:
    observed = np.isfinite(times) & (times <= config.censor_time)
    return CensoredSample(np.sort(times[observed]), int(np.sum(~observed)), config.with_boards(len(times)))


# --- KDE likelihood -----------------------------------------------------------

def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = np.std(x, ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * len(x) ** (-0.2)


def log_kde_density(points: np.ndarray, sample: np.ndarray, chunk: int = 16) -> np.ndarray:
    """Log density at ``points`` of a Gaussian KDE on log-times of ``sample``.

    Both arrays are positive times; the density is returned on the time scale
    (the log-transform Jacobian ``1/t`` is included).
    """
    y = np.log(np.asarray(sample, dtype=float))
    q = np.log(np.asarray(points, dtype=float))
    h = silverman_bandwidth(y)
    if not h > 0:
        raise DomainError("degenerate KDE sample")
    out = np.empty(len(q))
    norm = -math.log(len(y) * h * math.sqrt(2 * math.pi))
    for i in range(0, len(q), chunk):
        u = (q[i:i + chunk, None] - y[None, :]) / h
        e = -0.5 * u * u
        m = e.max(axis=1, keepdims=True)
        out[i:i + chunk] = m[:, 0] + np.log(np.exp(e - m).sum(axis=1)) + norm
    return out - q


def kde_log_likelihood(data: CensoredSample, theta: HyperParams, n_sim: int,
                       rng: np.random.Generator, truncated: bool = False) -> float:
    """Approximate censored log-likelihood of ``data`` under ``theta``.

    ``n_sim`` failure times are simulated under the data's test
    configuration; the sub-censor fraction estimates ``F(t_c)`` and a KDE of
    the simulated uncensored times estimates the truncated density.  The
    default returns ``sum log f(t_i) + n_c log(1 - F(t_c))``; ``truncated``
    returns ``sum log f(t_i)/F(t_c)`` alone.
    """
    if data.n_total == 0:
        return 0.0
    if not theta.valid:
        return -math.inf
    sim = simulate_failure_times(theta, data.config.with_boards(n_sim), rng)
    f_hat = sim.failed_fraction
    n_obs = len(data.times)
    if (f_hat == 0.0 and n_obs) or (f_hat == 1.0 and data.n_censored):
        return -math.inf
    total = 0.0
    if n_obs:
        if len(sim.times) < 2:
            return -math.inf
        dens = log_kde_density(data.times, sim.times)
        total += float(dens.sum())
        if not truncated:
            total += n_obs * math.log(f_hat)
    if not truncated and data.n_censored:
        total += data.n_censored * math.log1p(-f_hat)
    return total


# --- dataset files ------------------------------------------------------------

def _num_or_null(x: float):
    return None if math.isinf(x) else float(x)


def write_dataset(sample: CensoredSample, path: str | Path) -> Path:
    """Write ``<path>.csv`` with ``board_id,time_hours,censored`` plus a ``.json`` sidecar."""
    path = Path(path).with_suffix(".csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = sample.config
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["board_id", "time_hours", "censored"])
        for i, t in enumerate(sample.times):
            w.writerow([i, repr(float(t)), 0])
        for j in range(sample.n_censored):
            w.writerow([len(sample.times) + j, repr(float(cfg.censor_time)), 1])
    sidecar = {"k": cfg.k, "tau_c": _num_or_null(cfg.tau_c),
               "censor_time": _num_or_null(cfg.censor_time), "n_boards": sample.n_total}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_dataset(path: str | Path) -> CensoredSample:
    path = Path(path).with_suffix(".csv")
    side = json.loads(path.with_suffix(".json").read_text())
    unknown = set(side) - {"k", "tau_c", "censor_time", "n_boards"}
    if unknown:
        raise DomainError(f"{path.with_suffix('.json')}: unknown keys {sorted(unknown)}")

    def inf_if_null(v):
        return math.inf if v is None else float(v)

    times, n_c = [], 0
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["board_id", "time_hours", "censored"]:
            raise DomainError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            if int(row["censored"]):
                n_c += 1
            else:
                times.append(float(row["time_hours"]))
    cfg = TestConfig(float(side["k"]), inf_if_null(side["tau_c"]), inf_if_null(side["censor_time"]),
                     len(times) + n_c)
    return CensoredSample(np.sort(np.array(times)), n_c, cfg, meta={"path": str(path)})
