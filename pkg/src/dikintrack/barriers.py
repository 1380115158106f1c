"""Self-concordant barriers describing a convex body K.

A barrier exposes the local geometry used by the walk: the Hessian metric
``||v||_x = sqrt(v^T D^2F(x) v)`` and the unit Dikin ellipsoid around each
interior point, which is always contained in K.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, NumericError

logger = logging.getLogger(__name__)

__all__ = [
    "Barrier",
    "PolytopeBarrier",
    "QuadraticBarrier",
    "SumBarrier",
    "box",
    "ball",
    "cholesky",
    "local_norm",
    "log_det_half",
    "contains",
    "analytic_center",
]


class Barrier(ABC):
    """A ``nu``-self-concordant barrier F for a bounded convex body K.

    Subclasses implement :meth:`slack`, which returns one positive number per
    defining constraint for interior points, plus the derivatives of F.
    """

    def __init__(self, dim: int, nu: float, enclosing_radius: float):
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        if nu < 1:
            raise ValueError(f"barrier parameter must be >= 1, got {nu}")
        if not enclosing_radius > 0:
            raise ValueError(f"enclosing radius must be positive, got {enclosing_radius}")
        self.dim = int(dim)
        self.nu = float(nu)
        self.enclosing_radius = float(enclosing_radius)

    @abstractmethod
    def slack(self, x: np.ndarray) -> np.ndarray:
        """Constraint slacks at ``x``; all strictly positive iff x is interior."""

    @abstractmethod
    def slack_batch(self, X: np.ndarray) -> np.ndarray:
        """Slacks for a stack of points, shape ``(n, m)``."""

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def hessian(self, x: np.ndarray) -> np.ndarray:
        ...

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(self.slack(x) > 0.0))

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = np.all(np.isfinite(X), axis=1)
        with np.errstate(invalid="ignore"):
            ok &= np.all(self.slack_batch(X) > 0.0, axis=1)
        return ok

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing K (the cube of half-width R by default)."""
        R = self.enclosing_radius
        return np.full(self.dim, -R), np.full(self.dim, R)

    def interior_point(self) -> np.ndarray:
        """Some strictly interior point, used to seed Newton's method."""
        raise DomainError(f"{type(self).__name__} cannot find an interior point; pass x0")

    def _check_interior(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(f"point {x} is not in the interior of K")
        return x


class PolytopeBarrier(Barrier):
    """Log barrier of ``{x : <a_j, x> < b_j, j = 1..m}``; ``nu = m``."""

    def __init__(self, A, b, enclosing_radius: float):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        super().__init__(A.shape[1], A.shape[0], enclosing_radius)
        self.A = A
        self.b = b

    def slack(self, x):
        return self.b - self.A @ x

    def slack_batch(self, X):
        return self.b[None, :] - X @ self.A.T

    def value(self, x):
        x = self._check_interior(x)
        return float(-np.log(self.slack(x)).sum())

    def gradient(self, x):
        x = self._check_interior(x)
        return self.A.T @ (1.0 / self.slack(x))

    def hessian(self, x):
        W = self.A / self.slack(x)[:, None]
        return W.T @ W

    def bounding_box(self):
        from scipy.optimize import linprog

        lo, hi = Barrier.bounding_box(self)
        bounds = list(zip(lo, hi))
        for i in range(self.dim):
            c = np.zeros(self.dim)
            c[i] = 1.0
            for sign, out in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * c, A_ub=self.A, b_ub=self.b, bounds=bounds)
                if res.status == 0:
                    out[i] = res.x[i]
        return lo, hi

    def interior_point(self):
        # Chebyshev center: max t s.t. <a_j, x> + t ||a_j|| <= b_j.
        from scipy.optimize import linprog

        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        res = linprog(
            c,
            A_ub=np.hstack([self.A, norms[:, None]]),
            b_ub=self.b,
            bounds=[(None, None)] * self.dim + [(None, self.enclosing_radius)],
        )
        if res.status != 0 or res.x[-1] <= 0:
            raise DomainError("polytope has empty interior")
        return res.x[: self.dim]


class QuadraticBarrier(Barrier):
    """Barrier ``-sum log(-f_j(x))`` for convex quadratics ``f_j``.

    Each constraint is ``(Q, q, c)`` with ``f(x) = x^T Q x + q^T x + c`` and Q
    symmetric positive semidefinite. ``nu`` equals the number of constraints.
    """

    def __init__(self, constraints: Sequence[tuple], enclosing_radius: float):
        if not constraints:
            raise ValueError("need at least one quadratic constraint")
        self.constraints = []
        for Q, q, c in constraints:
            Q = np.atleast_2d(np.asarray(Q, dtype=float))
            Q = 0.5 * (Q + Q.T)
            q = np.asarray(q, dtype=float).reshape(-1)
            if q.shape[0] != Q.shape[0]:
                raise ValueError("quadratic constraint has mismatched Q and q")
            self.constraints.append((Q, q, float(c)))
        dim = self.constraints[0][0].shape[0]
        if any(Q.shape != (dim, dim) for Q, _, _ in self.constraints):
            raise ValueError("quadratic constraints have mixed dimensions")
        super().__init__(dim, len(self.constraints), enclosing_radius)

    def slack(self, x):
        return np.array([-(x @ Q @ x + q @ x + c) for Q, q, c in self.constraints])

    def slack_batch(self, X):
        cols = [-(np.einsum("ni,ij,nj->n", X, Q, X) + X @ q + c) for Q, q, c in self.constraints]
        return np.stack(cols, axis=1)

    def value(self, x):
        x = self._check_interior(x)
        return float(-np.log(self.slack(x)).sum())

    def gradient(self, x):
        x = self._check_interior(x)
        g = np.zeros(self.dim)
        for (Q, q, _), s in zip(self.constraints, self.slack(x)):
            g += (2.0 * Q @ x + q) / s
        return g

    def hessian(self, x):
        H = np.zeros((self.dim, self.dim))
        for (Q, q, _), s in zip(self.constraints, self.slack(x)):
            gf = 2.0 * Q @ x + q
            H += np.outer(gf, gf) / s**2 + 2.0 * Q / s
        return H

    def bounding_box(self):
        lo, hi = Barrier.bounding_box(self)
        for Q, q, c in self.constraints:
            try:
                Qinv = np.linalg.inv(Q)
            except np.linalg.LinAlgError:
                continue
            if np.any(np.linalg.eigvalsh(Q) <= 0):
                continue
            # f < 0 is the ellipsoid (x - m)^T Q (x - m) < rho
            m = -0.5 * Qinv @ q
            rho = float(m @ Q @ m) - c
            half = np.sqrt(max(rho, 0.0) * np.diag(Qinv))
            lo = np.maximum(lo, m - half)
            hi = np.minimum(hi, m + half)
        return lo, hi

    def interior_point(self):
        candidates = []
        for Q, q, _ in self.constraints:
            try:
                candidates.append(np.linalg.solve(2.0 * Q, -q))
            except np.linalg.LinAlgError:
                continue
        if candidates:
            candidates.append(np.mean(candidates, axis=0))
        candidates.append(np.zeros(self.dim))
        for x in candidates:
            if self.contains(x):
                return x
        return super().interior_point()


class SumBarrier(Barrier):
    """Sum of barriers; describes the intersection of their bodies."""

    def __init__(self, components: Sequence[Barrier], enclosing_radius: float | None = None):
        if not components:
            raise ValueError("SumBarrier needs at least one component")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError(f"components have different dimensions: {sorted(dims)}")
        if enclosing_radius is None:
            enclosing_radius = min(c.enclosing_radius for c in components)
        super().__init__(dims.pop(), sum(c.nu for c in components), enclosing_radius)
        self.components = list(components)

    def slack(self, x):
        return np.concatenate([c.slack(x) for c in self.components])

    def slack_batch(self, X):
        return np.concatenate([c.slack_batch(X) for c in self.components], axis=1)

    def value(self, x):
        return float(sum(c.value(x) for c in self.components))

    def gradient(self, x):
        return sum(c.gradient(x) for c in self.components)

    def hessian(self, x):
        return sum(c.hessian(x) for c in self.components)

    def bounding_box(self):
        lo, hi = Barrier.bounding_box(self)
        for c in self.components:
            clo, chi = c.bounding_box()
            lo, hi = np.maximum(lo, clo), np.minimum(hi, chi)
        return lo, hi

    def interior_point(self):
        for c in self.components:
            try:
                x = c.interior_point()
            except DomainError:
                continue
            if self.contains(x):
                return x
        return super().interior_point()


def box(lower, upper) -> PolytopeBarrier:
    """Axis-aligned box ``lower < x < upper`` as a polytope barrier (nu = 2d)."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or np.any(lower >= upper):
        raise ValueError("box needs lower < upper componentwise")
    d = lower.shape[0]
    A = np.vstack([np.eye(d), -np.eye(d)])
    b = np.concatenate([upper, -lower])
    radius = float(np.linalg.norm(np.maximum(np.abs(lower), np.abs(upper))))
    return PolytopeBarrier(A, b, enclosing_radius=radius)


def ball(dim: int, radius: float = 1.0, center=None) -> QuadraticBarrier:
    """Euclidean ball ``||x - center||^2 < radius^2`` (nu = 1)."""
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    Q = np.eye(dim)
    q = -2.0 * center
    c = float(center @ center) - radius**2
    return QuadraticBarrier([(Q, q, c)], enclosing_radius=radius + float(np.linalg.norm(center)))


def cholesky(H: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``H``, raising :class:`NumericError` on failure."""
    try:
        return np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Hessian is not positive definite: {exc}") from None


def local_norm(barrier: Barrier, x, v) -> float:
    """``||v||_x = sqrt(v^T D^2F(x) v)``."""
    x = barrier._check_interior(x)
    L = cholesky(barrier.hessian(x))
    return float(np.linalg.norm(L.T @ np.asarray(v, dtype=float)))


def log_det_half(barrier: Barrier, x) -> float:
    """``0.5 * log det D^2F(x)`` from the Cholesky diagonal."""
    x = barrier._check_interior(x)
    L = cholesky(barrier.hessian(x))
    return float(np.log(np.diag(L)).sum())


def contains(barrier: Barrier, x) -> bool:
    return barrier.contains(x)


def analytic_center(barrier: Barrier, tol: float = 1e-9, x0=None, max_iter: int = 200) -> np.ndarray:
    """Minimize F by damped Newton steps of length ``1 / (1 + lambda)``.

    Stops once the Newton decrement ``lambda = ||grad F||_{x,*}`` is at most
    ``tol``.
    """
    x = barrier.interior_point() if x0 is None else np.asarray(x0, dtype=float)
    x = barrier._check_interior(x)
    for it in range(max_iter):
        g = barrier.gradient(x)
        L = cholesky(barrier.hessian(x))
        w = np.linalg.solve(L, g)
        lam = math.sqrt(float(w @ w))
        if lam <= tol:
            logger.debug("analytic center after %d Newton steps", it)
            return x
        step = np.linalg.solve(L.T, w)
        x = x - step / (1.0 + lam)
    raise ConvergenceError(f"damped Newton did not converge in {max_iter} iterations (decrement {lam:.3g})")
