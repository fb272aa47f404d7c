"""Stochastic residential load histories.

A load history is a constant dead load plus two live-load processes.  The
sustained process is a sequence of occupancies of exponential length, each
with a gamma-distributed level.  The extraordinary process alternates
exponential quiet gaps (level zero) with short exponential episodes that
carry gamma levels.  Levels are normalized; ``assemble_load`` converts to psi.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .damage import HOURS_PER_YEAR, Piecewise
from .errors import DomainError


@dataclass(frozen=True)
class LoadModelParams:
    """Load-model constants.  Durations are means in years, gamma laws are (shape, scale)."""

    dead_mean: float = 1.0
    dead_sd: float = 0.1
    occupancy_mean: float = 0.1
    sustained_shape: float = 3.122
    sustained_scale: float = 0.0481
    gap_mean: float = 1.0
    episode_mean: float = 0.03835
    extra_shape: float = 0.826
    extra_scale: float = 0.1023
    gamma: float = 0.25
    alpha_d: float = 1.25
    alpha_l: float = 1.5
    r_o: float = 2722.0

    def __post_init__(self):
        positive = ("dead_sd", "occupancy_mean", "sustained_shape", "sustained_scale", "gap_mean",
                    "episode_mean", "extra_shape", "extra_scale", "alpha_l", "r_o")
        for name in positive:
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        if not (self.gamma >= 0 and self.alpha_d >= 0):
            raise DomainError("gamma and alpha_d must be nonnegative")

    @property
    def denominator(self) -> float:
        return self.gamma * self.alpha_d + self.alpha_l

    @property
    def sustained_mean(self) -> float:
        return self.sustained_shape * self.sustained_scale

    @property
    def episode_fraction(self) -> float:
        """Long-run fraction of time spent inside extraordinary episodes."""
        return self.episode_mean / (self.gap_mean + self.episode_mean)


@dataclass(frozen=True)
class LoadPath:
    """One normalized load history on ``[0, horizon]`` hours.

    ``sustained_starts[i]`` opens the occupancy with level
    ``sustained_levels[i]``; episode ``j`` covers
    ``[episode_starts[j], episode_ends[j])`` with level ``episode_levels[j]``.
    """

    dead: float
    sustained_starts: np.ndarray
    sustained_levels: np.ndarray
    episode_starts: np.ndarray
    episode_ends: np.ndarray
    episode_levels: np.ndarray
    horizon: float

    def sustained(self, t: float) -> float:
        i = int(np.searchsorted(self.sustained_starts, t, side="right")) - 1
        return float(self.sustained_levels[max(i, 0)])

    def extraordinary(self, t: float) -> float:
        j = int(np.searchsorted(self.episode_starts, t, side="right")) - 1
        if j >= 0 and t < self.episode_ends[j]:
            return float(self.episode_levels[j])
        return 0.0

    def live_segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Merged breakpoints and total live level on each resulting segment."""
        return _merge(self.sustained_starts[None], self.sustained_levels[None],
                      self.episode_starts[None], self.episode_ends[None],
                      self.episode_levels[None], self.horizon, dedupe=True)


@dataclass
class LoadBlock:
    """Many independent histories on a common padded segment grid.

    Row ``r`` holds segment start times ``starts[r]`` (ascending, the last
    ones possibly clipped to ``horizon`` with zero length) and total live
    levels ``live[r]``.
    """

    dead: np.ndarray
    starts: np.ndarray
    live: np.ndarray
    horizon: float

    def __len__(self) -> int:
        return len(self.dead)

    def tau(self, phi: float, params: LoadModelParams) -> np.ndarray:
        """Load in psi on every segment."""
        return phi * params.r_o * (params.gamma * self.dead[:, None] + self.live) / params.denominator

    def max_tau(self, phi: float, params: LoadModelParams) -> np.ndarray:
        ends = np.concatenate([self.starts[:, 1:], np.full((len(self), 1), self.horizon)], axis=1)
        tau = np.where(ends > self.starts, self.tau(phi, params), 0.0)
        return tau.max(axis=1)


def _renewals(rng: np.random.Generator, mean: float, size: int, horizon: float) -> np.ndarray:
    """Exponential inter-event durations, padded with columns until every row passes ``horizon``."""
    expected = horizon / mean
    cols = int(expected + 6.0 * math.sqrt(expected) + 8)
    d = rng.exponential(mean, (size, cols))
    while np.any(d.sum(axis=1) < horizon):
        d = np.concatenate([d, rng.exponential(mean, (size, cols))], axis=1)
    return d


def _sample_raw(params: LoadModelParams, horizon: float, rng: np.random.Generator, size: int):
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    dead = rng.normal(params.dead_mean, params.dead_sd, size)
    while np.any(neg := dead < 0):
        dead[neg] = rng.normal(params.dead_mean, params.dead_sd, int(neg.sum()))

    occ = _renewals(rng, params.occupancy_mean * HOURS_PER_YEAR, size, horizon)
    s_starts = np.concatenate([np.zeros((size, 1)), np.cumsum(occ[:, :-1], axis=1)], axis=1)
    s_levels = rng.gamma(params.sustained_shape, params.sustained_scale, s_starts.shape)

    # gaps and episodes alternate, starting with a gap
    cycle = (params.gap_mean + params.episode_mean) * HOURS_PER_YEAR
    expected = horizon / cycle
    cols = int(expected + 6.0 * math.sqrt(expected) + 4)
    gaps = rng.exponential(params.gap_mean * HOURS_PER_YEAR, (size, cols))
    eps = rng.exponential(params.episode_mean * HOURS_PER_YEAR, (size, cols))
    while np.any((gaps.sum(axis=1) + eps.sum(axis=1)) < horizon):
        gaps = np.concatenate([gaps, rng.exponential(params.gap_mean * HOURS_PER_YEAR, (size, cols))], axis=1)
        eps = np.concatenate([eps, rng.exponential(params.episode_mean * HOURS_PER_YEAR, (size, cols))], axis=1)
    e_levels = rng.gamma(params.extra_shape, params.extra_scale, gaps.shape)
    ends = np.cumsum(gaps + eps, axis=1)
    e_starts = ends - eps
    return dead, s_starts, s_levels, e_starts, ends, e_levels


def _merge(s_starts, s_levels, e_starts, e_ends, e_levels, horizon, dedupe=False):
    """Merge both processes into one segment grid per row, clipped to ``horizon``."""
    rows, ns = s_starts.shape
    ne = e_starts.shape[1]
    times = np.concatenate([s_starts, e_starts, e_ends], axis=1)
    kind = np.concatenate([np.zeros(ns, np.int8), np.ones(ne, np.int8), np.full(ne, 2, np.int8)])
    order = np.argsort(times, axis=1, kind="stable")
    times = np.take_along_axis(times, order, axis=1)
    kind = kind[order]
    s_idx = np.cumsum(kind == 0, axis=1) - 1
    e_count = np.cumsum(kind > 0, axis=1)
    in_episode = (e_count % 2) == 1
    e_idx = np.maximum((e_count - 1) // 2, 0)
    live = np.take_along_axis(s_levels, s_idx, axis=1)
    if ne == 0:
        e_levels = np.zeros((rows, 1))
    live = live + np.where(in_episode, np.take_along_axis(e_levels, e_idx, axis=1), 0.0)
    times = np.minimum(times, horizon)
    if not dedupe:
        return times, live
    t, lv = times[0], live[0]
    keep = np.append(t[1:] > t[:-1], True) & (t < horizon)
    keep[0] = True
    return t[keep], lv[keep]


def sample_load_block(params: LoadModelParams, horizon: float, rng: np.random.Generator,
                      size: int) -> LoadBlock:
    """``size`` independent histories, merged onto a padded common grid."""
    dead, s_starts, s_levels, e_starts, e_ends, e_levels = _sample_raw(params, horizon, rng, size)
    starts, live = _merge(s_starts, s_levels, e_starts, e_ends, e_levels, horizon)
    return LoadBlock(dead, starts, live, float(horizon))


def sample_load_path(params: LoadModelParams, horizon: float, rng: np.random.Generator) -> LoadPath:
    """One load history over ``[0, horizon]`` hours."""
    dead, s_starts, s_levels, e_starts, e_ends, e_levels = _sample_raw(params, horizon, rng, 1)
    s_keep = s_starts[0] < horizon
    e_keep = e_starts[0] < horizon
    return LoadPath(
        dead=float(dead[0]),
        sustained_starts=s_starts[0][s_keep],
        sustained_levels=s_levels[0][s_keep],
        episode_starts=e_starts[0][e_keep],
        episode_ends=np.minimum(e_ends[0][e_keep], horizon),
        episode_levels=e_levels[0][e_keep],
        horizon=float(horizon),
    )


def design_live_load(phi: float, params: LoadModelParams = LoadModelParams()) -> float:
    """Nominal live load in psi at performance factor ``phi``."""
    return phi * params.r_o / params.denominator


def assemble_load(path: LoadPath, phi: float, params: LoadModelParams = LoadModelParams()) -> Piecewise:
    """Load in psi as a piecewise-constant profile."""
    if not phi >= 0:
        raise DomainError(f"phi must be nonnegative, got {phi}")
    bp, live = path.live_segments()
    return Piecewise(bp, phi * params.r_o * (params.gamma * path.dead + live) / params.denominator)


def write_load_path(profile: Piecewise, horizon: float, path: str | Path) -> Path:
    """Dump ``t_hours,tau_psi`` rows as a step function (one row per breakpoint plus the end)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_hours", "tau_psi"])
        for t, tau in zip(profile.breakpoints, profile.levels):
            w.writerow([repr(float(t)), repr(float(tau))])
        w.writerow([repr(float(horizon)), repr(float(profile.levels[-1]))])
    return path
