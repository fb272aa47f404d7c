import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from admkit.errors import DomainError
from admkit.hier import (
    REFERENCE_THETA,
    THETA_FIELDS,
    HyperParams,
    PriorSpec,
    ProposalSpec,
    effects_from_normals,
    log_prior,
    log_proposal_density,
    propose,
    sample_effects,
)

theta_values = st.lists(st.floats(-5, 5), min_size=10, max_size=10).map(
    lambda v: HyperParams(*[abs(x) + 0.01 if i % 2 else x for i, x in enumerate(v)]))


def scipy_log_prior(theta: HyperParams) -> float:
    v = theta.as_array()
    locs, scales = v[0::2], v[1::2]
    total = sum(stats.norm.logpdf(m, 0, math.sqrt(var)) for m, var in zip(locs, (20, 20, 20, 20, 1)))
    total += sum(stats.invgamma.logpdf(s * s, a=0.01, scale=0.01) for s in scales)
    return float(total)


def test_log_prior_matches_scipy_at_table_values():
    assert log_prior(REFERENCE_THETA) == pytest.approx(scipy_log_prior(REFERENCE_THETA), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(theta_values)
def test_log_prior_matches_scipy(theta):
    assert log_prior(theta) == pytest.approx(scipy_log_prior(theta), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("field", ["sigma_a", "sigma_n", "sigma_sigma0"])
@pytest.mark.parametrize("value", [0.0, -0.3])
def test_log_prior_outside_support(field, value):
    theta = HyperParams(**{**REFERENCE_THETA.to_dict(), field: value})
    assert log_prior(theta) == -math.inf
    assert not theta.valid


def test_log_prior_custom_spec():
    spec = PriorSpec(location_var=(1, 1, 1, 1, 1), ig_shape=2.0, ig_scale=3.0)
    v = REFERENCE_THETA.as_array()
    expect = sum(stats.norm.logpdf(m) for m in v[0::2])
    expect += sum(stats.invgamma.logpdf(s * s, a=2.0, scale=3.0) for s in v[1::2])
    assert log_prior(REFERENCE_THETA, spec) == pytest.approx(expect, rel=1e-12)


def test_dict_and_array_round_trip():
    d = REFERENCE_THETA.to_dict()
    assert list(d) == list(THETA_FIELDS)
    assert HyperParams.from_dict(d) == REFERENCE_THETA
    assert HyperParams.from_array(REFERENCE_THETA.as_array()) == REFERENCE_THETA
    with pytest.raises(DomainError):
        HyperParams.from_dict({**d, "mu_x": 1.0})
    with pytest.raises(DomainError):
        HyperParams.from_array([1.0] * 9)


def test_proposal_variance():
    spec = ProposalSpec()
    rng = np.random.default_rng(4)
    steps = np.array([propose(REFERENCE_THETA, spec, rng).as_array() for _ in range(100_000)])
    var = (steps - REFERENCE_THETA.as_array()).var(axis=0)
    np.testing.assert_allclose(var, spec.diag, rtol=0.05)


def test_zero_proposal_is_identity():
    spec = ProposalSpec(diag=(0.0,) * 10)
    assert propose(REFERENCE_THETA, spec, np.random.default_rng(0)) == REFERENCE_THETA


def test_proposal_symmetric():
    spec = ProposalSpec()
    rng = np.random.default_rng(1)
    for _ in range(20):
        other = propose(REFERENCE_THETA, spec, rng)
        assert log_proposal_density(other, REFERENCE_THETA, spec) == pytest.approx(
            log_proposal_density(REFERENCE_THETA, other, spec), rel=1e-14)


def test_proposal_spec_validation():
    with pytest.raises(DomainError):
        ProposalSpec(diag=(0.1,) * 9)
    with pytest.raises(DomainError):
        ProposalSpec(diag=(-0.1,) + (0.1,) * 9)


def test_sample_effects_moments():
    fx = sample_effects(REFERENCE_THETA, np.random.default_rng(2), 200_000)
    for arr, mu, sd in [(fx.a, -7.5, 0.5), (fx.b, 3.2, 0.2), (fx.c, -22.0, 0.3), (fx.n, -1.0, 0.2)]:
        logs = np.log(arr)
        assert abs(logs.mean() - mu) < 4 * sd / math.sqrt(len(logs))
        assert logs.std() == pytest.approx(sd, rel=0.01)
    eta = fx.sigma0 / (1 - fx.sigma0)
    assert np.log(eta).mean() == pytest.approx(0.15, abs=4 * 0.05 / math.sqrt(len(eta)))
    assert np.all((fx.sigma0 > 0) & (fx.sigma0 < 1))


def test_sample_effects_single_and_rows():
    one = sample_effects(REFERENCE_THETA, np.random.default_rng(3))
    batch = sample_effects(REFERENCE_THETA, np.random.default_rng(3), 5)
    assert one == batch[0]
    z = np.random.default_rng(3).standard_normal((5, 5))
    np.testing.assert_array_equal(effects_from_normals(REFERENCE_THETA, z).a, batch.a)


def test_sample_effects_rejects_invalid_theta():
    bad = HyperParams(**{**REFERENCE_THETA.to_dict(), "sigma_b": -1.0})
    with pytest.raises(DomainError):
        sample_effects(bad, np.random.default_rng(0), 3)
