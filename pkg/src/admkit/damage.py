"""Canadian accumulated-damage model for lumber.

Damage ``alpha(t)`` evolves as

    mu * dalpha/dt = [(a tau_s)(tau/tau_s - sigma0)_+]^b
                     + [(c tau_s)(tau/tau_s - sigma0)_+]^n * alpha

with failure at ``alpha = 1``.  Times are in hours and ``mu = 1`` hour.

Two routes to failure times are provided:

* closed forms for the ramp and ramp-then-constant tests (``ramp_failure_time``,
  ``constant_load_failure_time`` and their batched counterparts), and
* a fixed-step 5-step Adams-Bashforth integrator for arbitrary load profiles
  (``integrate_damage``), plus an exact segment-wise solver for piecewise
  constant loads (``piecewise_failure_times``).

All powers are evaluated in log space; ``b`` and ``n`` drawn from log-normals
can be large enough to overflow ``(a k T)**b`` directly.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize, special

from .errors import DomainError, IntegrationError, NumericalError, SolverError

MU = 1.0
HOURS_PER_YEAR = 8760.0
K_STANDARD = 388440.0

# Adams-Bashforth 5-step weights, newest history value first.
_AB5 = (1901.0 / 720.0, -2774.0 / 720.0, 2616.0 / 720.0, -1274.0 / 720.0, 251.0 / 720.0)


class Phase(enum.Enum):
    RAMP = "ramp"
    CONSTANT = "constant"
    SURVIVED = "survived"


# integer phase codes used by the batched solvers
RAMP, CONSTANT, SURVIVED = 0, 1, 2
_PHASES = {RAMP: Phase.RAMP, CONSTANT: Phase.CONSTANT, SURVIVED: Phase.SURVIVED}


@dataclass(frozen=True)
class RandomEffects:
    """Latent damage parameters of a single board."""

    a: float
    b: float
    c: float
    n: float
    sigma0: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.n, self.sigma0)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite random effects: {self}")
        if min(vals) <= 0.0 or self.sigma0 >= 1.0:
            raise DomainError(f"random effects outside their support: {self}")


@dataclass(frozen=True)
class EffectsBatch:
    """Random effects of many boards, one array per parameter."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    n: np.ndarray
    sigma0: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    def __getitem__(self, i: int) -> RandomEffects:
        return RandomEffects(float(self.a[i]), float(self.b[i]), float(self.c[i]),
                             float(self.n[i]), float(self.sigma0[i]))

    @classmethod
    def from_effects(cls, effects: Sequence[RandomEffects]) -> "EffectsBatch":
        cols = zip(*[(e.a, e.b, e.c, e.n, e.sigma0) for e in effects])
        arrays = [np.asarray(col, dtype=float) for col in cols]
        if not arrays:
            arrays = [np.empty(0) for _ in range(5)]
        return cls(*arrays)

    def subset(self, mask) -> "EffectsBatch":
        return EffectsBatch(self.a[mask], self.b[mask], self.c[mask], self.n[mask], self.sigma0[mask])


@dataclass(frozen=True)
class RampConstant:
    """Ramp at rate ``k`` (psi/h) up to ``tau_c`` (psi), then hold.

    ``tau_c = inf`` gives the pure ramp test.
    """

    k: float
    tau_c: float = math.inf

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise DomainError(f"ramp rate must be positive, got {self.k}")
        if not self.tau_c > 0:
            raise DomainError(f"constant level must be positive, got {self.tau_c}")

    @property
    def ramp_end(self) -> float:
        return self.tau_c / self.k

    def load(self, t: float) -> float:
        return min(self.k * t, self.tau_c)

    def segments(self, t_max: float) -> Iterator[tuple[float, float, float, float]]:
        """Yield ``(t0, t1, tau_at_t0, slope)`` pieces covering ``[0, t_max]``."""
        t0 = self.ramp_end
        if t0 >= t_max:
            yield 0.0, t_max, 0.0, self.k
            return
        yield 0.0, t0, 0.0, self.k
        yield t0, t_max, self.tau_c, 0.0


@dataclass(frozen=True)
class Piecewise:
    """Piecewise-constant load; ``levels[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)
        if bp.ndim != 1 or bp.shape != lv.shape or len(bp) == 0:
            raise DomainError("breakpoints and levels must be equal-length 1-d arrays")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise DomainError("breakpoints must start at 0 and strictly increase")
        if np.any(lv < 0) or not np.all(np.isfinite(lv)):
            raise DomainError("levels must be finite and nonnegative")

    def load(self, t: float) -> float:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return float(self.levels[max(i, 0)])

    def max_load(self, t_max: float) -> float:
        return float(self.levels[self.breakpoints < t_max].max(initial=self.levels[0]))

    def segments(self, t_max: float) -> Iterator[tuple[float, float, float, float]]:
        bp = self.breakpoints
        for i in range(len(bp)):
            t0 = float(bp[i])
            if t0 >= t_max:
                return
            t1 = float(bp[i + 1]) if i + 1 < len(bp) else t_max
            yield t0, min(t1, t_max), float(self.levels[i]), 0.0


LoadProfile = RampConstant | Piecewise


@dataclass(frozen=True)
class DamageSolution:
    failure_time: float
    phase: Phase
    alpha_at_t0: float
    alpha_end: float = 1.0


def _check_finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            raise DomainError(f"non-finite input: {vals}")


def damage_rate(alpha: float, t: float, tau_at_t: float, tau_s: float, fx: RandomEffects) -> float:
    """Damage accumulation rate (1/hour) at load ``tau_at_t``.

    ``t`` is accepted for signature symmetry with time-dependent profiles; the
    rate depends on time only through the load.
    """
    _check_finite(alpha, t, tau_at_t, tau_s)
    if tau_s <= 0:
        raise DomainError(f"tau_s must be positive, got {tau_s}")
    x = tau_at_t / tau_s - fx.sigma0
    if x <= 0.0:
        return 0.0
    lx = math.log(x)
    first = math.exp(fx.b * (math.log(fx.a * tau_s) + lx))
    second = math.exp(fx.n * (math.log(fx.c * tau_s) + lx))
    return (first + second * alpha) / MU


# --- incomplete gamma ---------------------------------------------------------

def _log_lower_gamma(s, log_x):
    """``log(gamma_lower(s, exp(log_x)))``, elementwise and underflow-safe."""
    s = np.asarray(s, dtype=float)
    log_x = np.asarray(log_x, dtype=float)
    shape = np.broadcast_shapes(s.shape, log_x.shape)
    s, log_x = (np.broadcast_to(v, shape).ravel() for v in (s, log_x))
    x = np.exp(log_x)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = special.gammainc(s, x)
        out = np.log(p) + special.gammaln(s)
    small = ~(p > 1e-280) & np.isfinite(log_x)
    if np.any(small):
        ss, xs, lxs = s[small], x[small], log_x[small]
        # gamma(s, x) = x^s e^-x sum_k x^k / (s (s+1) ... (s+k))
        term = 1.0 / ss
        total = term.copy()
        for k in range(1, 2000):
            term = term * xs / (ss + k)
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out = out.copy()
        out[small] = ss * lxs - xs + np.log(total)
    out = np.where(np.isneginf(log_x), -np.inf, out)
    return out.reshape(shape)


def lower_incomplete_gamma(s, x):
    """Lower incomplete gamma function ``int_0^x exp(-u) u^(s-1) du``."""
    s_arr = np.asarray(s, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(~(s_arr > 0)):
        raise DomainError("lower_incomplete_gamma requires s > 0")
    if np.any(~(x_arr >= 0)):
        raise DomainError("lower_incomplete_gamma requires x >= 0")
    with np.errstate(over="ignore"):
        direct = special.gammainc(s_arr, x_arr) * special.gamma(s_arr)
        via_log = np.exp(_log_lower_gamma(s_arr, np.log(np.where(x_arr > 0, x_arr, 1.0))))
    out = np.where(s_arr < 150, direct, via_log)
    out = np.where(x_arr == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


# --- ramp test ----------------------------------------------------------------

def _log_prefactor(a, b, c, n, k):
    # (akT)^b / (ckT)^(n(b+1)/(n+1)) * (mu(n+1)/T)^((b-n)/(n+1)); the powers of T cancel
    return (b * np.log(a * k) - n * (b + 1) / (n + 1) * np.log(c * k)
            + (b - n) / (n + 1) * np.log(MU * (n + 1)))


def _ramp_residual(log_t: float, fx: RandomEffects, k: float) -> float:
    """log(RHS) - log(LHS) of the ramp failure equation at ``T = exp(log_t)``."""
    a, b, c, n, s0 = fx.a, fx.b, fx.c, fx.n, fx.sigma0
    s = (b + 1) / (n + 1)
    log_akt = math.log(a * k) + log_t
    log_ckt = math.log(c * k) + log_t
    # X = -log H(T) = (ckT)^n T (1 - sigma0)^(n+1) / (mu (n+1))
    log_big_x = n * log_ckt + log_t + (n + 1) * math.log1p(-s0) - math.log(MU * (n + 1))
    log_rhs = (b * log_akt - n * (b + 1) / (n + 1) * log_ckt
               + (b - n) / (n + 1) * (math.log(MU * (n + 1)) - log_t)
               + float(_log_lower_gamma(s, log_big_x)))
    log_lhs = -math.exp(log_big_x)
    return log_rhs - log_lhs


def ramp_failure_time(fx: RandomEffects, k: float = K_STANDARD) -> float:
    """Failure time (hours) of a board under the ramp load ``tau(t) = k t``.

    The board's strength is ``tau_s = k T_s`` with ``k`` acting as the
    calibration rate, so ``T_s`` is the root of an implicit equation.  It is
    bracketed by geometric expansion from one hour and refined with Brent's
    method in ``log T``.
    """
    if not (k > 0 and math.isfinite(k)):
        raise DomainError(f"ramp rate must be positive, got {k}")
    if math.log1p(-fx.sigma0) == -math.inf:
        return math.inf
    lo = hi = 0.0
    f_hi = _ramp_residual(hi, fx, k)
    step = math.log(2.0)
    bound = math.log(1e12)
    if f_hi > 0:
        f_lo = f_hi
        while f_lo > 0:
            hi, lo = lo, lo - step
            if lo < -bound:
                raise SolverError(f"no ramp-failure bracket in [1e-12, 1e12] h for {fx}")
            f_lo = _ramp_residual(lo, fx, k)
    else:
        while f_hi <= 0:
            lo, hi = hi, hi + step
            if hi > bound:
                raise SolverError(f"no ramp-failure bracket in [1e-12, 1e12] h for {fx}")
            f_hi = _ramp_residual(hi, fx, k)
    root = optimize.brentq(_ramp_residual, lo, hi, args=(fx, k), xtol=1e-13, rtol=1e-15, maxiter=200)
    return math.exp(root)


def ramp_failure_times(fx: EffectsBatch, k: float = K_STANDARD) -> np.ndarray:
    """Vectorised ``ramp_failure_time``.

    Solves for ``X = -log H(T_s)`` instead of ``T_s``: after the powers of
    ``T_s`` cancel the equation reads ``X + log gamma_lower(s, X) = -log P``
    with ``P`` the prefactor, which is monotone in ``log X``.  A safeguarded
    Newton iteration runs on all boards at once; ``T_s`` follows from ``X``
    explicitly.  Entries that fail to converge are NaN.
    """
    a, b, c, n, s0 = (np.asarray(v, dtype=float) for v in (fx.a, fx.b, fx.c, fx.n, fx.sigma0))
    if a.size == 0:
        return np.empty(0)
    s = (b + 1) / (n + 1)
    target = -_log_prefactor(a, b, c, n, k)

    def resid(L):
        return np.exp(L) + _log_lower_gamma(s, L) - target

    # small-X asymptote: log gamma ~ s L - log s
    guess = (target + np.log(s)) / s
    big = np.log(np.maximum(target - special.gammaln(s), 1e-300))
    guess = np.where(target - special.gammaln(s) > s + 1, big, guess)
    lo, hi = guess - 1.0, guess + 1.0
    r_lo, r_hi = resid(lo), resid(hi)
    width = np.full_like(lo, 2.0)
    ok = np.isfinite(target)
    for _ in range(200):
        need_lo = ok & (r_lo > 0)
        need_hi = ok & (r_hi < 0)
        if not (need_lo.any() or need_hi.any()):
            break
        width = np.where(need_lo | need_hi, width * 2.0, width)
        lo = np.where(need_lo, lo - width, lo)
        hi = np.where(need_hi, hi + width, hi)
        r_lo = np.where(need_lo, resid(lo), r_lo)
        r_hi = np.where(need_hi, resid(hi), r_hi)
    ok &= (r_lo <= 0) & (r_hi >= 0)

    L = np.clip(guess, lo, hi)
    for _ in range(100):
        lg = _log_lower_gamma(s, L)
        X = np.exp(L)
        r = X + lg - target
        lo = np.where(r <= 0, L, lo)
        hi = np.where(r >= 0, L, hi)
        with np.errstate(over="ignore", invalid="ignore"):
            deriv = X + np.exp(s * L - X - lg)
            newton = L - r / deriv
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        new = np.where(bad, 0.5 * (lo + hi), newton)
        delta = np.abs(new - L)
        L = new
        if np.all(~ok | (delta <= 1e-14 * np.maximum(1.0, np.abs(L)))):
            break
    log1m = np.log1p(-s0)
    log_t = (L - n * np.log(c * k) + np.log(MU * (n + 1)) - (n + 1) * log1m) / (n + 1)
    with np.errstate(over="ignore"):
        t_s = np.exp(log_t)
    t_s = np.where(np.isneginf(log1m), np.inf, t_s)
    return np.where(ok | np.isneginf(log1m), t_s, np.nan)


# --- constant-load test -------------------------------------------------------

def _constant_phase(fx: EffectsBatch, k: float, tau_c: float, t_s: np.ndarray):
    """Closed-form failure after a ramp to ``tau_c`` given ramp failure times.

    Returns ``(times, phases, alpha_t0)``; NaN times flag numerical failure.
    """
    a, b, c, n, s0 = (np.asarray(v, dtype=float) for v in (fx.a, fx.b, fx.c, fx.n, fx.sigma0))
    t_s = np.asarray(t_s, dtype=float)
    size = t_s.shape
    times = t_s.copy()
    phases = np.full(size, RAMP, dtype=np.int8)
    alpha0 = np.zeros(size)
    if math.isinf(tau_c):
        phases[np.isinf(t_s)] = SURVIVED
        return times, phases, alpha0
    t0 = tau_c / k
    rest = ~(t_s <= t0)
    if not rest.any():
        return times, phases, alpha0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        x = t0 / t_s - s0
        surv = rest & ~(x > 0)
        times[surv] = np.inf
        phases[surv] = SURVIVED
        act = rest & (x > 0) & np.isfinite(t_s)
        if not act.any():
            return times, phases, alpha0
        a, b, c, n, s0, ts, xa = a[act], b[act], c[act], n[act], s0[act], t_s[act], x[act]
        logx = np.log(xa)
        log_akt = np.log(a * k * ts)
        log_ckt = np.log(c * k * ts)
        log_c1 = b * (log_akt + logx) - math.log(MU)
        log_c2 = n * (log_ckt + logx) - math.log(MU)
        log_x0 = n * log_ckt + np.log(ts) - np.log(MU * (n + 1)) + (n + 1) * logx
        s = (b + 1) / (n + 1)
        log_alpha0 = _log_prefactor(a, b, c, n, k) + np.exp(log_x0) + _log_lower_gamma(s, log_x0)
        log_al = np.minimum(log_alpha0, 0.0)
        al = np.exp(log_al)
        one_minus = -np.expm1(log_al)
        # alpha(T0) can exceed 1 only through rounding when T0 ~ T_s
        invalid = ~np.isfinite(log_alpha0) & ~np.isneginf(log_alpha0) | (log_alpha0 > 1e-9)
        # time from T0 to failure is log1p(y)/C2 with y = (1 - alpha) C2 / (C1 + alpha C2)
        log_y = np.log(one_minus) + log_c2 - np.logaddexp(log_c1, log_al + log_c2)
        y = np.exp(log_y)
        delta = np.where(log_y < -25.0, np.exp(log_y - log_c2) * (1.0 - 0.5 * y),
                         np.logaddexp(0.0, log_y) * np.exp(-log_c2))
        delta = np.where(one_minus == 0, 0.0, delta)
        t_c = t0 + delta
        t_c = np.where(invalid, np.nan, t_c)
    idx = np.flatnonzero(act)
    times[idx] = t_c
    phases[idx] = np.where(np.isinf(t_c), SURVIVED, CONSTANT)
    alpha0[idx] = np.where(invalid, np.nan, al)
    return times, phases, alpha0


def constant_load_failure_times(fx: EffectsBatch, k: float, tau_c: float):
    """Vectorised constant-load failure times: ``(times, phase codes, alpha(T0))``."""
    t_s = ramp_failure_times(fx, k)
    return _constant_phase(fx, k, tau_c, t_s)


def constant_load_failure_time(fx: RandomEffects, k: float, tau_c: float) -> DamageSolution:
    """Failure time of one board under a ramp to ``tau_c`` followed by a hold."""
    if not (k > 0 and tau_c > 0):
        raise DomainError(f"need k > 0 and tau_c > 0, got k={k}, tau_c={tau_c}")
    t_s = ramp_failure_time(fx, k)
    batch = EffectsBatch.from_effects([fx])
    times, phases, alpha0 = _constant_phase(batch, k, tau_c, np.array([t_s]))
    if not np.isfinite(alpha0[0]) or math.isnan(times[0]):
        raise NumericalError(
            f"constant-load closed form failed for {fx}: T_s={t_s}, T0={tau_c / k}, alpha(T0)={alpha0[0]}")
    return DamageSolution(float(times[0]), _PHASES[int(phases[0])], float(alpha0[0]),
                          1.0 if phases[0] != SURVIVED else float(alpha0[0]))


# --- numerical integration ----------------------------------------------------

def integrate_damage(fx: RandomEffects, tau_s: float, profile: LoadProfile, t_max: float,
                     step: float, min_segment_steps: int = 16,
                     steps_per_damage: int | None = None) -> DamageSolution:
    """Integrate the damage ODE from ``alpha(0) = 0`` with fixed-step AB5.

    Each smooth piece of the profile is integrated separately: the multistep
    history restarts at every breakpoint (and where a ramp crosses the
    ``sigma0`` threshold) with four RK4 steps.  Pieces held below the
    threshold are skipped since the rate vanishes there.  Every piece gets at
    least ``min_segment_steps`` steps.  With ``steps_per_damage`` set, the step
    on a held segment is further capped so that at most ``1/steps_per_damage``
    of unit damage can accrue per step (the rate is at most ``C1 + C2`` while
    ``alpha <= 1``).  The failure instant is located by linear interpolation
    between the bracketing steps.
    """
    if not (step > 0 and math.isfinite(step)):
        raise IntegrationError(f"step must be positive and finite, got {step}")
    if not (t_max > 0):
        raise IntegrationError(f"t_max must be positive, got {t_max}")
    if not tau_s > 0:
        raise DomainError(f"tau_s must be positive, got {tau_s}")
    log_as = math.log(fx.a * tau_s)
    log_cs = math.log(fx.c * tau_s)
    b, n, s0 = fx.b, fx.n, fx.sigma0
    threshold = s0 * tau_s

    def rate(tau, alpha):
        x = tau / tau_s - s0
        if x <= 0.0:
            return 0.0
        lx = math.log(x)
        try:
            return (math.exp(b * (log_as + lx)) + math.exp(n * (log_cs + lx)) * alpha) / MU
        except OverflowError:
            return math.inf

    ramp_end = profile.ramp_end if isinstance(profile, RampConstant) else 0.0
    alpha = 0.0
    alpha_t0 = 0.0

    def phase_of(t):
        if isinstance(profile, RampConstant) and t <= ramp_end:
            return Phase.RAMP
        return Phase.CONSTANT

    for seg_start, seg_end, tau0, slope in profile.segments(t_max):
        if slope == 0.0:
            if tau0 <= threshold:
                continue
            start = seg_start
        else:
            t_th = seg_start + (threshold - tau0) / slope
            if t_th >= seg_end:
                continue
            start = max(seg_start, t_th)
        length = seg_end - start
        if length <= 0:
            continue
        h_cap = step
        if steps_per_damage and slope == 0.0:
            h_cap = min(step, 1.0 / (steps_per_damage * rate(tau0, 1.0)))
        m = max(int(math.ceil(length / h_cap)), min_segment_steps)
        h = length / m

        def f(t, y, _t0=seg_start, _tau0=tau0, _k=slope):
            return rate(_tau0 + _k * (t - _t0), y)

        hist: deque = deque(maxlen=5)
        t = start
        hist.appendleft(f(t, alpha))
        for i in range(m):
            t_next = start + (i + 1) * h
            if len(hist) < 5:
                k1 = hist[0]
                k2 = f(t + 0.5 * h, alpha + 0.5 * h * k1)
                k3 = f(t + 0.5 * h, alpha + 0.5 * h * k2)
                k4 = f(t + h, alpha + h * k3)
                new = alpha + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                new = alpha + h * (_AB5[0] * hist[0] + _AB5[1] * hist[1] + _AB5[2] * hist[2]
                                   + _AB5[3] * hist[3] + _AB5[4] * hist[4])
            if new >= 1.0:
                t_fail = t + (1.0 - alpha) / (new - alpha) * h
                return DamageSolution(t_fail, phase_of(t_fail), alpha_t0, 1.0)
            if not math.isfinite(new):
                raise IntegrationError(f"non-finite damage at t={t_next} for {fx}")
            alpha, t = new, t_next
            hist.appendleft(f(t, alpha))
        if isinstance(profile, RampConstant) and seg_end == ramp_end:
            alpha_t0 = alpha
    return DamageSolution(math.inf, Phase.SURVIVED, alpha_t0, alpha)


def piecewise_failure_times(fx: EffectsBatch, tau_s: np.ndarray, starts: np.ndarray,
                            levels: np.ndarray, horizon: float) -> np.ndarray:
    """Exact failure times of many boards under piecewise-constant loads.

    Row ``i`` of ``starts``/``levels`` (shape ``(boards, segments)``) holds the
    ascending segment start times and the load (psi) on each segment of board
    ``i``; the last segment runs to ``horizon``.  On a constant segment the
    damage ODE is linear with constant coefficients, so it is advanced in
    closed form.  Returns ``inf`` for boards surviving to ``horizon``.
    """
    a, b, c, n, s0 = (np.asarray(v, dtype=float)[:, None] for v in (fx.a, fx.b, fx.c, fx.n, fx.sigma0))
    tau_s = np.asarray(tau_s, dtype=float)[:, None]
    starts = np.minimum(np.asarray(starts, dtype=float), horizon)
    levels = np.asarray(levels, dtype=float)
    rows, cols = starts.shape
    out = np.full(rows, np.inf)
    if rows == 0 or cols == 0:
        return out
    ends = np.concatenate([starts[:, 1:], np.full((rows, 1), horizon)], axis=1)
    dt = np.maximum(ends - starts, 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        x = levels / tau_s - s0
        active = (x > 0) & (dt > 0)
        logx = np.log(np.where(active, x, 1.0))
        log_c1 = b * (np.log(a * tau_s) + logx) - math.log(MU)
        log_c2 = n * (np.log(c * tau_s) + logx) - math.log(MU)
        c1 = np.where(active, np.exp(log_c1), 0.0)
        c2 = np.where(active, np.exp(log_c2), 0.0)
        z = c2 * dt
        grow = np.exp(z)
        # c1 * expm1(c2 dt) / c2, with the c2 -> 0 limit c1 dt
        ratio = np.where(z > 1e-300, np.expm1(z) / np.where(z > 1e-300, z, 1.0), 1.0)
        drive = np.where(active, c1 * dt * ratio, 0.0)
    cand = np.flatnonzero(active.any(axis=1))
    if cand.size == 0:
        return out
    grow, drive, c1, c2, dt = grow[cand], drive[cand], c1[cand], c2[cand], dt[cand]
    starts_c = starts[cand]
    alpha = np.zeros(cand.size)
    alive = np.ones(cand.size, dtype=bool)
    fail_col = np.full(cand.size, -1)
    alpha_before = np.zeros(cand.size)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(cols):
            new = alpha * grow[:, j] + drive[:, j]
            hit = alive & ~(new < 1.0)
            if hit.any():
                fail_col[hit] = j
                alpha_before[hit] = alpha[hit]
                alive &= ~hit
            alpha = np.where(alive, new, alpha)
            if not alive.any():
                break
    failed = np.flatnonzero(fail_col >= 0)
    if failed.size:
        j = fail_col[failed]
        a0 = alpha_before[failed]
        c1f, c2f = c1[failed, j], c2[failed, j]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # alpha(t) = (a0 + c1/c2) e^(c2 t) - c1/c2 reaches 1 at log1p(y)/c2
            denom = c1f + a0 * c2f
            y = (1.0 - a0) * c2f / denom
            lin = (1.0 - a0) / denom
            factor = np.where(y > 1e-12, np.log1p(y) / np.where(y > 1e-12, y, 1.0), 1.0 - 0.5 * y)
            t_in = np.minimum(factor * lin, dt[failed, j])
        out[cand[failed]] = starts_c[failed, j] + t_in
    return out
