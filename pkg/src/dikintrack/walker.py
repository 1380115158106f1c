"""Lazy Metropolis Dikin walk targeting ``exp(-s(x)) / Z`` on K.

One step of the chain:

1. draw ``u0 ~ U[0, 1)``; if ``u0 < 1/2`` stay (lazy move);
2. draw ``g ~ N(0, I_d)`` and propose ``z = x + r / sqrt(2d) * L_x^{-T} g``
   where ``D^2F(x) = L_x L_x^T``;
3. if ``z`` is not strictly inside K, stay;
4. draw ``u1 ~ U[0, 1)`` and move to ``z`` iff ``log(u1) < log_accept(x, z)``.

The random draws above happen in exactly this order and only when reached;
this order is part of the reproducibility contract. Generators are Philox
(counter based) seeded from a 64-bit integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .barriers import Barrier, cholesky
from .errors import ConfigError, DomainError
from .potentials import Potential

__all__ = [
    "ChainParams",
    "ChainState",
    "make_rng",
    "init_state",
    "propose",
    "log_accept",
    "log_proposal_density",
    "step",
    "run",
    "sample_path",
]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class ChainParams:
    r: float
    seed: int = 0

    def validate(self, d: int) -> None:
        if not self.r > 0:
            raise ConfigError(f"step size must be positive, got {self.r}")
        if self.r > 1.0 / d * (1 + 1e-12):
            raise ConfigError(f"step size {self.r} exceeds 1/d = {1.0 / d}")


class _Geometry:
    """Cached local geometry at an interior point."""

    __slots__ = ("x", "L", "V", "_prop")

    def __init__(self, barrier: Barrier, x: np.ndarray):
        self.x = x
        self.L = cholesky(barrier.hessian(x))
        self.V = float(np.log(np.diag(self.L)).sum())
        self._prop = None

    def norm2(self, v: np.ndarray) -> float:
        w = self.L.T @ v
        return float(w @ w)

    def whiten_inverse(self, g: np.ndarray) -> np.ndarray:
        """``L^{-T} g``; covariance ``D^2F(x)^{-1}`` for standard normal g."""
        if self._prop is None:
            d = self.L.shape[0]
            self._prop = solve_triangular(self.L.T, np.eye(d), lower=False, check_finite=False)
        return self._prop @ g


@dataclass
class ChainState:
    """Mutable state of a single chain; owned by one caller at a time."""

    x: np.ndarray
    rng: np.random.Generator
    step_count: int = 0
    proposal_count: int = 0
    outside_count: int = 0
    accept_count: int = 0
    _geom: _Geometry | None = field(default=None, repr=False, compare=False)

    @property
    def lazy_count(self) -> int:
        return self.step_count - self.proposal_count

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.proposal_count if self.proposal_count else 0.0

    def geometry(self, barrier: Barrier) -> _Geometry:
        g = self._geom
        if g is None or g.x is not self.x:
            g = self._geom = _Geometry(barrier, self.x)
        return g


def init_state(barrier: Barrier, x0, seed: int) -> ChainState:
    x0 = np.array(x0, dtype=float)
    if not barrier.contains(x0):
        raise DomainError(f"initial point {x0} is not interior")
    return ChainState(x=x0, rng=make_rng(seed))


def propose(barrier: Barrier, x, r: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``z ~ N(x, r^2 / (2d) * D^2F(x)^{-1})`` (consumes d normals)."""
    x = np.asarray(x, dtype=float)
    geom = _Geometry(barrier, x)
    return _propose(geom, x, r, rng)


def _propose(geom: _Geometry, x, r, rng):
    d = x.shape[0]
    g = rng.standard_normal(d)
    return x + (r / math.sqrt(2.0 * d)) * geom.whiten_inverse(g)


def log_proposal_density(barrier: Barrier, x, y, r: float) -> float:
    """Normalized log density of the proposal kernel at ``x``, evaluated at ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[0]
    geom = _Geometry(barrier, x)
    # N(x, (r^2/2d) H^{-1}): -d||y-x||_x^2/r^2 + V(x) - (d/2) log(pi r^2 / d)
    return -d * geom.norm2(y - x) / r**2 + geom.V - 0.5 * d * math.log(math.pi * r**2 / d)


def log_accept(barrier: Barrier, s: Potential, x, z, r: float) -> float:
    """Log of the Metropolis ratio ``G_z(x) e^{s(x)} / (G_x(z) e^{s(z)})`` before truncation."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    gx = _Geometry(barrier, x)
    gz = _Geometry(barrier, z)
    return _log_accept(gx, gz, s(x), s(z), r)


def _log_accept(gx: _Geometry, gz: _Geometry, sx: float, sz: float, r: float) -> float:
    d = gx.x.shape[0]
    diff = gz.x - gx.x
    c = d / (r * r)
    return (-c * gz.norm2(diff) + gz.V) - (-c * gx.norm2(diff) + gx.V) + sx - sz


def step(barrier: Barrier, s: Potential, params: ChainParams, state: ChainState) -> ChainState:
    """Advance the chain one step in place and return it."""
    rng = state.rng
    state.step_count += 1
    if rng.random() < 0.5:
        return state
    state.proposal_count += 1
    gx = state.geometry(barrier)
    z = _propose(gx, state.x, params.r, rng)
    if not barrier.contains(z):
        state.outside_count += 1
        return state
    gz = _Geometry(barrier, z)
    la = _log_accept(gx, gz, s(state.x), s(z), params.r)
    u = rng.random()
    if la >= 0.0 or (u > 0.0 and math.log(u) < la):
        state.x = z
        state._geom = gz
        state.accept_count += 1
    return state


def run(
    barrier: Barrier,
    s: Potential,
    params: ChainParams,
    state: ChainState,
    n: int,
    sink: Callable[[np.ndarray], None] | None = None,
) -> ChainState:
    """Run ``n`` steps; ``sink`` receives the point after every step."""
    if n < 0:
        raise ValueError(f"step count must be nonnegative, got {n}")
    params.validate(barrier.dim)
    for _ in range(n):
        step(barrier, s, params, state)
        if sink is not None:
            sink(state.x)
    return state


def sample_path(barrier: Barrier, s: Potential, params: ChainParams, state: ChainState, n: int) -> np.ndarray:
    """Run ``n`` steps and return the visited points as an ``(n, d)`` array."""
    params.validate(barrier.dim)
    out = np.empty((n, barrier.dim))
    for i in range(n):
        step(barrier, s, params, state)
        out[i] = state.x
    return out
