import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from admkit.damage import HOURS_PER_YEAR
from admkit.errors import DomainError
from admkit.loads import (
    LoadModelParams,
    assemble_load,
    design_live_load,
    sample_load_block,
    sample_load_path,
    write_load_path,
)

P = LoadModelParams()
HORIZON = 30 * HOURS_PER_YEAR


def test_design_live_load():
    assert design_live_load(1.0) == pytest.approx(2722 / 1.8125)
    assert design_live_load(1.0) == pytest.approx(1501.8, abs=0.05)
    assert design_live_load(2.6) == pytest.approx(2.6 * design_live_load(1.0))
    no_dead = LoadModelParams(gamma=0.0)
    assert design_live_load(1.0, no_dead) == pytest.approx(2722 / 1.5)


def test_dead_load_only_level():
    path = sample_load_path(P, HORIZON, np.random.default_rng(0))
    flat = type(path)(1.0, np.array([0.0]), np.array([0.0]), np.empty(0), np.empty(0), np.empty(0), HORIZON)
    prof = assemble_load(flat, 1.0, P)
    assert prof.levels[0] == pytest.approx(2722 * 0.25 / 1.8125)
    assert prof.levels[0] == pytest.approx(375.4, abs=0.05)


def test_assemble_linear_in_phi():
    path = sample_load_path(P, HORIZON, np.random.default_rng(1))
    one = assemble_load(path, 1.0, P)
    two = assemble_load(path, 2.0, P)
    np.testing.assert_allclose(two.levels, 2 * one.levels, rtol=1e-15)
    np.testing.assert_array_equal(two.breakpoints, one.breakpoints)
    assert np.all(assemble_load(path, 0.0, P).levels == 0.0)
    with pytest.raises(DomainError):
        assemble_load(path, -1.0, P)


def test_assemble_matches_pointwise_definition():
    path = sample_load_path(P, HORIZON, np.random.default_rng(2))
    prof = assemble_load(path, 1.7, P)
    for t in np.random.default_rng(3).uniform(0, HORIZON, 300):
        expect = 1.7 * 2722 * (0.25 * path.dead + path.sustained(t) + path.extraordinary(t)) / 1.8125
        assert prof.load(t) == pytest.approx(expect, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 40.0))
def test_path_structure(seed, years):
    horizon = years * HOURS_PER_YEAR
    path = sample_load_path(P, horizon, np.random.default_rng(seed))
    # occupancies tile [0, horizon) from time zero
    assert path.sustained_starts[0] == 0.0
    assert np.all(np.diff(path.sustained_starts) > 0)
    assert path.sustained_starts[-1] < horizon
    # episodes are ordered and never overlap
    assert np.all(path.episode_ends > path.episode_starts)
    assert np.all(path.episode_starts[1:] >= path.episode_ends[:-1])
    assert np.all(path.episode_ends <= horizon)
    assert path.dead > 0
    assert np.all(path.sustained_levels >= 0) and np.all(path.episode_levels >= 0)
    prof = assemble_load(path, 1.0, P)
    assert np.all(prof.levels >= 0)
    # every episode adds a start and (unless clipped) an end breakpoint
    n_clipped = int(len(path.episode_ends) and path.episode_ends[-1] >= horizon)
    assert len(prof.breakpoints) <= len(path.sustained_starts) + 2 * len(path.episode_starts) - n_clipped
    assert len(prof.breakpoints) >= len(path.sustained_starts)


def test_tiny_horizon_single_levels():
    path = sample_load_path(P, 1e-9, np.random.default_rng(4))
    prof = assemble_load(path, 1.0, P)
    assert len(prof.breakpoints) == 1 and prof.breakpoints[0] == 0.0


def test_extraordinary_zero_between_episodes():
    path = sample_load_path(P, HORIZON, np.random.default_rng(5))
    assert len(path.episode_starts) > 5
    gaps = 0.5 * (path.episode_ends[:-1] + path.episode_starts[1:])
    assert all(path.extraordinary(t) == 0.0 for t in gaps)
    mids = 0.5 * (path.episode_starts + path.episode_ends)
    np.testing.assert_array_equal([path.extraordinary(t) for t in mids], path.episode_levels)


def test_long_run_moments():
    horizon = 1e5 * HOURS_PER_YEAR
    path = sample_load_path(P, horizon, np.random.default_rng(6))
    dur = np.diff(np.append(path.sustained_starts, horizon))
    mean_s = (dur * path.sustained_levels).sum() / horizon
    # renewal-reward variance of a time average: E[D^2] Var(L) / (E[D]^2 N) = 2 k theta^2 / N
    sd_s = math.sqrt(2 * P.sustained_shape * P.sustained_scale ** 2 / len(dur))
    assert abs(mean_s - 0.1502) < 3 * sd_s + 5e-5
    frac = (path.episode_ends - path.episode_starts).sum() / horizon
    q = P.episode_fraction
    sd_e = math.sqrt((1 - q) ** 2 * P.episode_mean ** 2 + q ** 2 * P.gap_mean ** 2) / (
        math.sqrt(len(path.episode_starts)) * (P.gap_mean + P.episode_mean))
    assert abs(frac - 0.0369) < 3 * sd_e + 5e-5
    assert P.episode_fraction == pytest.approx(0.0369, abs=5e-5)


def test_level_and_duration_means():
    path = sample_load_path(P, 2e4 * HOURS_PER_YEAR, np.random.default_rng(7))
    lv = path.sustained_levels
    assert abs(lv.mean() - P.sustained_mean) < 3 * math.sqrt(P.sustained_shape) * P.sustained_scale / math.sqrt(len(lv))
    eps = (path.episode_ends - path.episode_starts)[:-1] / HOURS_PER_YEAR
    assert abs(eps.mean() - P.episode_mean) < 3 * P.episode_mean / math.sqrt(len(eps))
    el = path.episode_levels
    assert abs(el.mean() - 0.826 * 0.1023) < 3 * math.sqrt(0.826) * 0.1023 / math.sqrt(len(el))


def test_block_matches_definition():
    block = sample_load_block(P, HORIZON, np.random.default_rng(8), 20)
    assert block.starts.shape == block.live.shape
    assert np.all(block.starts[:, 0] == 0.0)
    assert np.all(np.diff(block.starts, axis=1) >= 0)
    assert np.all(block.starts <= HORIZON)
    tau = block.tau(1.0, P)
    assert np.all(tau >= 0)
    np.testing.assert_allclose(block.max_tau(2.0, P), 2 * block.max_tau(1.0, P))


def test_block_and_path_agree():
    # a block of one and a single path consume the stream identically
    block = sample_load_block(P, HORIZON, np.random.default_rng(9), 1)
    path = sample_load_path(P, HORIZON, np.random.default_rng(9))
    prof = assemble_load(path, 1.0, P)
    keep = np.append(np.diff(block.starts[0]) > 0, True) & (block.starts[0] < HORIZON)
    np.testing.assert_allclose(block.starts[0][keep], prof.breakpoints)
    np.testing.assert_allclose(block.tau(1.0, P)[0][keep], prof.levels, rtol=1e-12)


def test_params_validation():
    with pytest.raises(DomainError):
        LoadModelParams(occupancy_mean=0.0)
    with pytest.raises(DomainError):
        LoadModelParams(extra_scale=-1.0)
    with pytest.raises(DomainError):
        sample_load_path(P, 0.0, np.random.default_rng(0))


def test_load_path_csv(tmp_path):
    path = sample_load_path(P, HORIZON, np.random.default_rng(10))
    prof = assemble_load(path, 1.0, P)
    out = write_load_path(prof, HORIZON, tmp_path / "path.csv")
    lines = out.read_text().splitlines()
    assert lines[0] == "t_hours,tau_psi"
    assert len(lines) == len(prof.breakpoints) + 2
    assert float(lines[-1].split(",")[0]) == HORIZON
