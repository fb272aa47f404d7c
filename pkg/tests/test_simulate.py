import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from admkit.damage import HOURS_PER_YEAR, K_STANDARD
from admkit.errors import DomainError
from admkit.hier import REFERENCE_THETA, HyperParams
from admkit.simulate import (
    CensoredSample,
    TestConfig,
    censor,
    failure_times,
    kde_log_likelihood,
    log_kde_density,
    read_dataset,
    silverman_bandwidth,
    simulate_failure_times,
    write_dataset,
)
from admkit.hier import effects_from_normals
from admkit.streams import substream

SCEN1 = TestConfig(K_STANDARD, 4500.0, HOURS_PER_YEAR, 300)


def test_test_config_validation():
    with pytest.raises(DomainError):
        TestConfig(k=0.0)
    with pytest.raises(DomainError):
        TestConfig(tau_c=-1.0)
    with pytest.raises(DomainError):
        TestConfig(tau_c=4500.0, censor_time=1e-6)
    assert SCEN1.ramp_end == pytest.approx(4500.0 / K_STANDARD)


def test_scenario_breakdown():
    sample = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(0))
    b = sample.breakdown()
    assert sum(b.values()) == 300 == sample.n_total
    # each phase is well represented at the data-generating parameters
    assert min(b.values()) > 40
    assert np.all(np.diff(sample.times) >= 0)
    assert np.all(sample.times <= SCEN1.censor_time)


def test_empty_dataset():
    sample = simulate_failure_times(REFERENCE_THETA, SCEN1.with_boards(0), np.random.default_rng(0))
    assert sample.n_total == 0 and len(sample.times) == 0
    assert kde_log_likelihood(sample, REFERENCE_THETA, 1000, np.random.default_rng(1)) == 0.0


def test_censor_excludes_infinite_times():
    cfg = TestConfig(K_STANDARD, 4500.0, math.inf, 3)
    s = censor(np.array([1.0, math.inf, 2.0]), cfg)
    assert s.n_censored == 1
    np.testing.assert_array_equal(s.times, [1.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0), st.floats(1.0, 20.0))
def test_longer_test_never_censors_more(seed, years, factor):
    cfg = TestConfig(K_STANDARD, 4500.0, years * HOURS_PER_YEAR, 100)
    z = np.random.default_rng(seed).standard_normal((100, 5))
    times = failure_times(effects_from_normals(REFERENCE_THETA, z), cfg)
    short = censor(times, cfg)
    long = censor(times, TestConfig(cfg.k, cfg.tau_c, cfg.censor_time * factor, 100))
    assert long.n_censored <= short.n_censored


def test_silverman_bandwidth():
    x = np.array([1.0, 2.0, 4.0, 7.0, 11.0, 16.0])
    sd = np.std(x, ddof=1)
    iqr = np.percentile(x, 75) - np.percentile(x, 25)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 6 ** -0.2)


def test_kde_density_integrates_to_one():
    sample = np.exp(np.random.default_rng(3).normal(2.0, 1.0, 4000))
    grid = np.exp(np.linspace(-4, 8, 20001))
    dens = np.exp(log_kde_density(grid, sample))
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_density_of_lognormal():
    sample = np.exp(np.random.default_rng(4).normal(0.0, 1.0, 50_000))
    t = np.array([0.5, 1.0, 2.0])
    exact = -0.5 * np.log(t) ** 2 - np.log(t * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(log_kde_density(t, sample), exact, atol=0.03)


def test_kde_likelihood_exchangeable():
    data = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(5))
    perm = np.random.default_rng(6).permutation(data.times)
    shuffled = CensoredSample(perm, data.n_censored, data.config)
    a = kde_log_likelihood(data, REFERENCE_THETA, 5000, substream(1, 2))
    b = kde_log_likelihood(shuffled, REFERENCE_THETA, 5000, substream(1, 2))
    assert a == pytest.approx(b, rel=1e-12)


def test_kde_likelihood_variance_shrinks():
    data = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(7))
    sd = {}
    for n_sim in (4000, 8000):
        vals = [kde_log_likelihood(data, REFERENCE_THETA, n_sim, substream(n_sim, r)) for r in range(60)]
        sd[n_sim] = np.std(vals)
    assert sd[8000] < sd[4000]


def test_kde_likelihood_parts():
    data = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(8))
    full = kde_log_likelihood(data, REFERENCE_THETA, 20_000, substream(3))
    trunc = kde_log_likelihood(data, REFERENCE_THETA, 20_000, substream(3), truncated=True)
    sim = simulate_failure_times(REFERENCE_THETA, SCEN1.with_boards(20_000), substream(3))
    f = sim.failed_fraction
    expect = trunc + len(data.times) * math.log(f) + data.n_censored * math.log1p(-f)
    assert full == pytest.approx(expect, rel=1e-12)


def test_kde_likelihood_impossible_theta():
    data = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(9))
    # thresholds near 1: nothing fails before censoring
    strong = HyperParams(**{**REFERENCE_THETA.to_dict(), "mu_sigma0": 12.0})
    assert kde_log_likelihood(data, strong, 2000, substream(0)) == -math.inf
    bad = HyperParams(**{**REFERENCE_THETA.to_dict(), "sigma_a": -1.0})
    assert kde_log_likelihood(data, bad, 2000, substream(0)) == -math.inf


def test_true_theta_beats_shifted_theta():
    data = simulate_failure_times(REFERENCE_THETA, SCEN1, np.random.default_rng(10))
    shifted = HyperParams(**{**REFERENCE_THETA.to_dict(), "mu_a": -7.0})
    assert (kde_log_likelihood(data, REFERENCE_THETA, 50_000, substream(4))
            > kde_log_likelihood(data, shifted, 50_000, substream(4)))


def test_dataset_round_trip(tmp_path):
    sample = simulate_failure_times(REFERENCE_THETA, SCEN1.with_boards(50), np.random.default_rng(11))
    path = write_dataset(sample, tmp_path / "d1")
    lines = path.read_text().splitlines()
    assert lines[0] == "board_id,time_hours,censored"
    assert len(lines) == 51
    censored_rows = [ln for ln in lines[1:] if ln.endswith(",1")]
    assert len(censored_rows) == sample.n_censored
    assert all(float(r.split(",")[1]) == SCEN1.censor_time for r in censored_rows)
    side = json.loads(path.with_suffix(".json").read_text())
    assert side == {"k": K_STANDARD, "tau_c": 4500.0, "censor_time": HOURS_PER_YEAR, "n_boards": 50}
    back = read_dataset(path)
    np.testing.assert_array_equal(back.times, sample.times)
    assert back.n_censored == sample.n_censored and back.config == sample.config


def test_dataset_infinite_fields(tmp_path):
    cfg = TestConfig(K_STANDARD, math.inf, math.inf, 20)
    sample = simulate_failure_times(REFERENCE_THETA, cfg, np.random.default_rng(12))
    path = write_dataset(sample, tmp_path / "ramp")
    assert json.loads(path.with_suffix(".json").read_text())["tau_c"] is None
    assert read_dataset(path).config == cfg


def test_dataset_bad_header(tmp_path):
    (tmp_path / "x.csv").write_text("id,t,c\n")
    (tmp_path / "x.json").write_text('{"k": 1, "tau_c": null, "censor_time": null, "n_boards": 0}')
    with pytest.raises(DomainError):
        read_dataset(tmp_path / "x.csv")
