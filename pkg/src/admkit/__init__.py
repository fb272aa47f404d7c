"""Accumulated-damage models for lumber: simulation, likelihood-free fitting and reliability."""
from .damage import (
    HOURS_PER_YEAR,
    K_STANDARD,
    EffectsBatch,
    Phase,
    Piecewise,
    RampConstant,
    RandomEffects,
    constant_load_failure_time,
    constant_load_failure_times,
    damage_rate,
    integrate_damage,
    lower_incomplete_gamma,
    piecewise_failure_times,
    ramp_failure_time,
    ramp_failure_times,
)
from .errors import DomainError, IntegrationError, NumericalError, SolverError
from .hier import REFERENCE_THETA, HyperParams, PriorSpec, ProposalSpec, log_prior, propose, sample_effects

__version__ = "0.1.0"
