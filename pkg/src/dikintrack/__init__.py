"""Sampling and tracking of time-varying log-concave distributions with the Dikin walk."""

from .barriers import PolytopeBarrier, QuadraticBarrier, SumBarrier, analytic_center, ball, box
from .errors import ConfigError, ConvergenceError, DikinError, DomainError, NumericError
from .potentials import (
    LinearPotential,
    Potential,
    PotentialPair,
    QuadraticPotential,
    step_size,
    sup_diff_bound,
    zero_potential,
)
from .walker import ChainParams, ChainState, init_state, run, sample_path, step

__version__ = "0.1.0"
