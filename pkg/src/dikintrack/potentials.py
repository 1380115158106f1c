"""Convex potentials ``s`` defining targets ``exp(-s(x)) / Z`` on K.

Besides evaluation, each potential carries the metadata that controls the
admissible step size of the walk (Lipschitz and smoothness constants, an
optional user-certified radius ``r_star``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .barriers import Barrier
from .errors import ConfigError

__all__ = [
    "Potential",
    "LinearPotential",
    "QuadraticPotential",
    "PotentialPair",
    "SupBound",
    "step_size",
    "sup_diff_bound",
    "scale",
    "zero_potential",
]

KINDS = ("linear", "quadratic", "smooth", "lipschitz", "custom")


class Potential:
    """A convex function on K with step-size metadata.

    Args:
        func: callable returning ``s(x)`` for a d-vector.
        kind: one of ``linear``, ``quadratic``, ``smooth``, ``lipschitz``, ``custom``.
        lipschitz_L: Euclidean Lipschitz constant on K (of the non-linear part
            when ``linear_part`` is given).
        smooth_sigma: Lipschitz constant of the gradient.
        linear_part: vector ``g`` such that ``s - <g, x>`` is nearly constant
            on small Dikin ellipsoids.
        r_star: user-certified step radius for the ``custom`` kind.
        sup_abs: optional declared bound on ``sup_K |s|``.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], float],
        kind: str = "custom",
        lipschitz_L: float | None = None,
        smooth_sigma: float | None = None,
        linear_part=None,
        r_star: float | None = None,
        sup_abs: float | None = None,
    ):
        if kind not in KINDS:
            raise ConfigError(f"unknown potential kind {kind!r}; expected one of {KINDS}")
        self.func = func
        self.kind = kind
        self.lipschitz_L = lipschitz_L
        self.smooth_sigma = smooth_sigma
        self.linear_part = None if linear_part is None else np.asarray(linear_part, dtype=float)
        self.r_star = r_star
        self.sup_abs = sup_abs

    def __call__(self, x) -> float:
        return float(self.func(np.asarray(x, dtype=float)))

    def batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([self(x) for x in np.atleast_2d(X)])

    def scaled(self, factor: float) -> "Potential":
        func = self.func
        return Potential(
            _Scaled(func, factor),
            kind=self.kind,
            lipschitz_L=_mul(self.lipschitz_L, factor),
            smooth_sigma=_mul(self.smooth_sigma, factor),
            linear_part=None if self.linear_part is None else factor * self.linear_part,
            r_star=self.r_star,
            sup_abs=_mul(self.sup_abs, factor),
        )


class _Scaled:
    # picklable replacement for a closure
    def __init__(self, func, factor):
        self.func = func
        self.factor = factor

    def __call__(self, x):
        return self.factor * self.func(x)


def _mul(value, factor):
    return None if value is None else value * factor


class LinearPotential(Potential):
    """``s(x) = <b, x> + c``."""

    def __init__(self, b, c: float = 0.0):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        self.b = b
        self.c = float(c)
        super().__init__(
            self._eval,
            kind="linear",
            lipschitz_L=float(np.linalg.norm(b)),
            smooth_sigma=0.0,
            linear_part=b,
        )

    def _eval(self, x):
        return float(self.b @ x) + self.c

    def __call__(self, x) -> float:
        return float(self.b @ x) + self.c

    def batch(self, X):
        return np.atleast_2d(X) @ self.b + self.c

    def scaled(self, factor):
        return LinearPotential(factor * self.b, factor * self.c)

    def __repr__(self):
        return f"LinearPotential(b={self.b.tolist()}, c={self.c})"


class QuadraticPotential(Potential):
    """``s(x) = 0.5 * (x - center)^T P (x - center)`` with P symmetric PSD.

    ``P`` may be a scalar precision. The Lipschitz constant on K is
    ``||P|| (R_K + ||center||)`` and is filled in when ``enclosing_radius`` is
    known.
    """

    def __init__(self, center, precision=1.0, enclosing_radius: float | None = None):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        d = center.shape[0]
        P = np.asarray(precision, dtype=float)
        P = P * np.eye(d) if P.ndim == 0 else 0.5 * (P + P.T)
        self.center = center
        self.P = P
        self.P_norm = float(np.linalg.norm(P, 2))
        L = None
        if enclosing_radius is not None:
            L = self.P_norm * (enclosing_radius + float(np.linalg.norm(center)))
        super().__init__(self._eval, kind="quadratic", lipschitz_L=L, smooth_sigma=self.P_norm)

    def _eval(self, x):
        u = x - self.center
        return 0.5 * float(u @ self.P @ u)

    def __call__(self, x) -> float:
        u = np.asarray(x, dtype=float) - self.center
        return 0.5 * float(u @ self.P @ u)

    def batch(self, X):
        U = np.atleast_2d(X) - self.center
        return 0.5 * np.einsum("ni,ij,nj->n", U, self.P, U)

    def scaled(self, factor):
        out = QuadraticPotential(self.center, factor * self.P)
        out.lipschitz_L = _mul(self.lipschitz_L, factor)
        return out

    def __repr__(self):
        return f"QuadraticPotential(center={self.center.tolist()}, precision_norm={self.P_norm})"


def zero_potential(dim: int) -> LinearPotential:
    """The uniform target ``s = 0``."""
    return LinearPotential(np.zeros(dim))


@dataclass(frozen=True)
class SupBound:
    """Upper bound on ``sup_K |s_prev - s_next|``; ``heuristic`` marks a sampled estimate."""

    value: float
    heuristic: bool = False


@dataclass(frozen=True)
class PotentialPair:
    """Consecutive potentials with a bound on their sup-norm difference.

    ``alpha`` optionally carries an L2 change bound for L2-mode tracking.
    """

    prev: Potential
    next: Potential
    sup_diff: float
    heuristic: bool = False
    alpha: float | None = None

    @classmethod
    def build(cls, prev: Potential, next: Potential, barrier: Barrier, **kwargs) -> "PotentialPair":
        bound = sup_diff_bound(prev, next, barrier, **kwargs)
        return cls(prev, next, bound.value, bound.heuristic)


def step_size(p: Potential, d: int) -> float:
    """Largest step size admitted by the potential's kind; never above ``1/d``."""
    cap = 1.0 / d
    if p.kind == "linear":
        return cap
    if p.kind == "lipschitz":
        if p.lipschitz_L is None:
            raise ConfigError("lipschitz potential needs lipschitz_L")
        return cap if p.lipschitz_L == 0 else min(cap, 1.0 / p.lipschitz_L)
    if p.kind in ("smooth", "quadratic"):
        if p.smooth_sigma is None:
            raise ConfigError(f"{p.kind} potential needs smooth_sigma")
        return cap if p.smooth_sigma == 0 else min(cap, 1.0 / math.sqrt(p.smooth_sigma))
    if p.r_star is None:
        raise ConfigError("custom potential needs r_star")
    return min(cap, float(p.r_star))


def sup_diff_bound(
    prev: Potential,
    next: Potential,
    barrier: Barrier,
    declared: float | None = None,
    n_samples: int = 10_000,
    inflation: float = 2.0,
    seed: int = 0,
) -> SupBound:
    """Upper bound on ``sup_K |prev - next|``.

    Closed forms are used for linear/linear pairs and for quadratic pairs that
    share a precision matrix (drifting means). Otherwise ``declared`` is used
    if given, else the maximum over ``n_samples`` scrambled Sobol points in K
    times ``inflation``, flagged as heuristic.
    """
    R = barrier.enclosing_radius
    if prev is next:
        return SupBound(0.0)
    if isinstance(prev, LinearPotential) and isinstance(next, LinearPotential):
        return SupBound(float(np.linalg.norm(prev.b - next.b)) * R + abs(prev.c - next.c))
    if (
        isinstance(prev, QuadraticPotential)
        and isinstance(next, QuadraticPotential)
        and np.array_equal(prev.P, next.P)
    ):
        drift = float(np.linalg.norm(next.center - prev.center))
        # drift * sup ||2x - c_t - c_{t-1}|| with the sup bounded through R_K
        spread = 2.0 * R + float(np.linalg.norm(next.center + prev.center))
        return SupBound(prev.P_norm * drift * spread)
    if declared is not None:
        return SupBound(float(declared))
    pts = interior_samples(barrier, n_samples, seed=seed)
    gap = np.abs(prev.batch(pts) - next.batch(pts))
    return SupBound(inflation * float(gap.max()), heuristic=True)


def interior_samples(barrier: Barrier, n: int, seed: int = 0) -> np.ndarray:
    """``n`` quasi-random points of K drawn from its bounding box by rejection."""
    lo, hi = barrier.bounding_box()
    sampler = qmc.Sobol(barrier.dim, scramble=True, seed=seed)
    # Sobol balance needs power-of-two totals: draw 2^m, then double each round
    batch = 2 ** max(10, math.ceil(math.log2(max(n, 1))))
    out: list[np.ndarray] = []
    got = 0
    for _ in range(12):
        cand = lo + (hi - lo) * sampler.random(batch)
        keep = cand[barrier.contains_batch(cand)]
        out.append(keep)
        got += len(keep)
        if got >= n:
            break
        batch = sampler.num_generated
    pts = np.concatenate(out)[:n]
    if len(pts) == 0:
        raise ConfigError("could not find interior points inside the bounding box")
    return pts


def scale(p: Potential, factor: float) -> Potential:
    """``x -> factor * s(x)`` with rescaled metadata."""
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    if factor == 1.0:
        return p
    return p.scaled(factor)
