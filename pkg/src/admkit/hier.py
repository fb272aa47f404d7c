"""Hyperparameters, random-effect sampling, priors and random-walk proposals."""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy import special

from .damage import EffectsBatch
from .errors import DomainError

THETA_FIELDS = ("mu_a", "sigma_a", "mu_b", "sigma_b", "mu_c", "sigma_c",
                "mu_n", "sigma_n", "mu_sigma0", "sigma_sigma0")
LOCATION_FIELDS = THETA_FIELDS[0::2]
SCALE_FIELDS = THETA_FIELDS[1::2]


@dataclass(frozen=True)
class HyperParams:
    """Log-normal location/scale pairs for ``a, b, c, n`` and ``eta``.

    Instances may sit outside the support (non-positive scales) so that a
    proposal can be scored and rejected; ``valid`` tells which.
    """

    mu_a: float
    sigma_a: float
    mu_b: float
    sigma_b: float
    mu_c: float
    sigma_c: float
    mu_n: float
    sigma_n: float
    mu_sigma0: float
    sigma_sigma0: float

    @property
    def valid(self) -> bool:
        vals = astuple(self)
        return all(math.isfinite(v) for v in vals) and all(v > 0 for v in vals[1::2])

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "HyperParams":
        values = [float(v) for v in values]
        if len(values) != 10:
            raise DomainError(f"theta needs 10 components, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        extra = set(d) - set(THETA_FIELDS)
        missing = set(THETA_FIELDS) - set(d)
        if extra or missing:
            raise DomainError(f"bad theta keys: missing={sorted(missing)} unknown={sorted(extra)}")
        return cls(**{k: float(d[k]) for k in THETA_FIELDS})


# Data-generating values of the simulation study.
REFERENCE_THETA = HyperParams(-7.50, 0.50, 3.20, 0.20, -22.00, 0.30, -1.00, 0.20, 0.15, 0.05)


@dataclass(frozen=True)
class PriorSpec:
    """Normal priors on locations (given as variances), Inverse-Gamma on squared scales."""

    location_var: tuple[float, ...] = (20.0, 20.0, 20.0, 20.0, 1.0)
    ig_shape: float = 0.01
    ig_scale: float = 0.01


@dataclass(frozen=True)
class ProposalSpec:
    """Diagonal covariance of the Gaussian random-walk proposal."""

    diag: tuple[float, ...] = (0.01, 0.01, 0.01, 0.01, 0.2, 0.01, 0.01, 0.01, 0.1, 0.01)

    def __post_init__(self):
        if len(self.diag) != 10 or any(not (v >= 0) for v in self.diag):
            raise DomainError(f"proposal diagonal must hold 10 nonnegative entries, got {self.diag}")


def sample_effects(theta: HyperParams, rng: np.random.Generator, size: int | None = None):
    """Draw board random effects given ``theta``.

    Returns a single ``RandomEffects`` when ``size`` is None, otherwise an
    ``EffectsBatch``.  Each board consumes five standard normals in the order
    ``a, b, c, n, eta``, so board ``i`` of a batch depends only on row ``i``
    of the stream.
    """
    if not theta.valid:
        raise DomainError(f"cannot sample effects from invalid theta {theta}")
    z = rng.standard_normal((1 if size is None else size, 5))
    batch = effects_from_normals(theta, z)
    return batch[0] if size is None else batch


def effects_from_normals(theta: HyperParams, z: np.ndarray) -> EffectsBatch:
    loc = np.array([theta.mu_a, theta.mu_b, theta.mu_c, theta.mu_n, theta.mu_sigma0])
    scale = np.array([theta.sigma_a, theta.sigma_b, theta.sigma_c, theta.sigma_n, theta.sigma_sigma0])
    logs = loc + scale * z
    v = np.exp(logs)
    # sigma0 = eta / (1 + eta), computed as a logistic of log(eta)
    sigma0 = special.expit(logs[:, 4])
    return EffectsBatch(v[:, 0], v[:, 1], v[:, 2], v[:, 3], sigma0)


def _normal_logpdf(x, var):
    return -0.5 * math.log(2 * math.pi * var) - 0.5 * x * x / var


def _inv_gamma_logpdf(x, shape, scale):
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1) * math.log(x) - scale / x


def log_prior(theta: HyperParams, spec: PriorSpec = PriorSpec()) -> float:
    """Log prior density of ``theta``.

    The Inverse-Gamma density is evaluated at ``sigma**2`` while the chain
    moves on ``sigma`` itself; no Jacobian term is added.
    """
    vals = astuple(theta)
    if not all(math.isfinite(v) for v in vals):
        return -math.inf
    locs, scales = vals[0::2], vals[1::2]
    if any(s <= 0 for s in scales):
        return -math.inf
    total = sum(_normal_logpdf(m, v) for m, v in zip(locs, spec.location_var))
    total += sum(_inv_gamma_logpdf(s * s, spec.ig_shape, spec.ig_scale) for s in scales)
    return total


def propose(theta_k: HyperParams, spec: ProposalSpec, rng: np.random.Generator) -> HyperParams:
    """Gaussian random-walk step ``theta' = theta_k + z`` with ``z ~ N(0, diag)``."""
    z = rng.standard_normal(10) * np.sqrt(np.asarray(spec.diag, dtype=float))
    return HyperParams.from_array(theta_k.as_array() + z)


def log_proposal_density(theta_to: HyperParams, theta_from: HyperParams, spec: ProposalSpec) -> float:
    """``log g(theta_to | theta_from)`` over the components with positive variance."""
    d = theta_to.as_array() - theta_from.as_array()
    total = 0.0
    for di, v in zip(d, spec.diag):
        if v > 0:
            total += _normal_logpdf(di, v)
        elif di != 0:
            return -math.inf
    return total
