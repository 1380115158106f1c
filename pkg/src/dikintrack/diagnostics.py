"""Ground-truth oracles and numerical property checks.

The grid oracle discretizes a target on a 1D or 2D body with cell-center
quadrature; total-variation distances of chain output are measured against
it. The remaining helpers check the walk's detailed balance and the
barrier's self-concordance inequalities by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .barriers import Barrier, analytic_center, cholesky
from .errors import DomainError
from .potentials import Potential, interior_samples
from .walker import (
    ChainParams,
    _Geometry,
    _log_accept,
    _propose,
    init_state,
    log_proposal_density,
    make_rng,
    step,
)

__all__ = [
    "GridOracle",
    "grid_density",
    "mixture_oracle",
    "tv_distance",
    "detailed_balance_check",
    "self_concordance_check",
    "dikin_containment_check",
    "empirical_moments",
    "ensemble_tv_curve",
    "calibrate_constant",
    "property_report",
    "TOLERANCES",
]


@dataclass
class GridOracle:
    """Normalized cell probabilities of a target on a regular grid.

    ``edges`` holds one array of cell boundaries per axis; ``probs`` has one
    entry per cell (shape ``(n1,)`` or ``(n1, n2)``) and is zero off K.
    """

    edges: list[np.ndarray]
    probs: np.ndarray
    mask: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return float(self.edges[0][1] - self.edges[0][0])

    def centers(self) -> list[np.ndarray]:
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def center_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.centers(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def mean(self) -> np.ndarray:
        pts = self.center_points()
        return self.probs.ravel() @ pts

    def coarsen(self, bins: int) -> tuple[list[np.ndarray], np.ndarray]:
        """Aggregate cells into ``bins`` equal bins per axis; returns (edges, probs)."""
        new_edges = [np.linspace(e[0], e[-1], bins + 1) for e in self.edges]
        pts = self.center_points()
        hist, _ = np.histogramdd(pts, bins=new_edges, weights=self.probs.ravel())
        return new_edges, hist

    def to_csv_rows(self) -> list[tuple]:
        return [(*p, w) for p, w in zip(self.center_points(), self.probs.ravel())]


def _bounding_box(barrier: Barrier, lower, upper):
    blo, bhi = barrier.bounding_box()
    lo = blo if lower is None else np.atleast_1d(np.asarray(lower, dtype=float))
    hi = bhi if upper is None else np.atleast_1d(np.asarray(upper, dtype=float))
    return lo, hi


def grid_density(barrier: Barrier, s: Potential, h: float, lower=None, upper=None) -> GridOracle:
    """Cell-center discretization of ``exp(-s)`` restricted to K.

    The grid covers ``[lower, upper]`` (default: the barrier's bounding box)
    with cells of side at most ``h``.
    """
    if barrier.dim > 2:
        raise DomainError("grid oracle supports dimension 1 or 2 only")
    lo, hi = _bounding_box(barrier, lower, upper)
    edges = [np.linspace(a, b, max(1, math.ceil((b - a) / h - 1e-9)) + 1) for a, b in zip(lo, hi)]
    shape = tuple(len(e) - 1 for e in edges)
    mesh = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in edges], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    mask = barrier.contains_batch(pts)
    if not mask.any():
        raise DomainError("no grid cell center lies inside K")
    logw = np.full(len(pts), -np.inf)
    logw[mask] = -s.batch(pts[mask])
    logw -= logw[mask].max()
    w = np.exp(logw)
    probs = w / w.sum()
    return GridOracle(edges=edges, probs=probs.reshape(shape), mask=mask.reshape(shape))


def mixture_oracle(oracles: Sequence[GridOracle], weights: Sequence[float]) -> GridOracle:
    """Weighted mixture of oracles built on the same grid."""
    weights = np.asarray(weights, dtype=float)
    base = oracles[0]
    for o in oracles[1:]:
        if o.probs.shape != base.probs.shape or not all(np.allclose(a, b) for a, b in zip(o.edges, base.edges)):
            raise ValueError("mixture components must share one grid")
    probs = sum(w * o.probs for w, o in zip(weights, oracles)) / weights.sum()
    mask = np.logical_or.reduce([o.mask for o in oracles])
    return GridOracle(edges=base.edges, probs=probs, mask=mask)


def tv_distance(oracle: GridOracle, samples, bins: int | None = None, return_outside: bool = False):
    """Half the L1 distance between the sample histogram and the oracle.

    With ``bins`` set, both are first aggregated onto ``bins`` equal bins per
    axis. Samples outside the oracle's bounding box fall into a sink cell of
    zero oracle mass; their count is returned when ``return_outside`` is set.
    """
    X = np.asarray(samples, dtype=float).reshape(-1, oracle.dim)
    n = len(X)
    if n == 0:
        raise ValueError("tv_distance needs at least one sample")
    if bins is None:
        edges, probs = oracle.edges, oracle.probs
    else:
        edges, probs = oracle.coarsen(bins)
    lo = np.array([e[0] for e in edges])
    hi = np.array([e[-1] for e in edges])
    inside = np.all((X >= lo) & (X <= hi), axis=1)
    counts, _ = np.histogramdd(X[inside], bins=edges)
    outside = int(n - inside.sum())
    tv = 0.5 * (np.abs(counts / n - probs).sum() + outside / n)
    return (float(tv), outside) if return_outside else float(tv)


def empirical_moments(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased covariance."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < 2:
        raise ValueError("need at least two samples for moments")
    return X.mean(axis=0), np.atleast_2d(np.cov(X, rowvar=False, ddof=1))


def _random_interior(barrier: Barrier, n: int, rng: np.random.Generator) -> np.ndarray:
    return interior_samples(barrier, n, seed=int(rng.integers(2**31)))


_LOG_TINY = math.log(np.finfo(float).tiny)


def detailed_balance_check(barrier: Barrier, s: Potential, r: float, trials: int, seed: int = 0) -> float:
    """Largest relative gap between the two sides of the balance identity.

    For each trial a random interior ``x`` and a proposal ``z ~ G_x`` inside K
    are drawn, then ``exp(-s(x)) G_x(z) min(1, A(x,z))`` is compared with
    ``exp(-s(z)) G_z(x) min(1, A(z,x))`` using normalized proposal densities.

    Pairs whose two sides both underflow to 0.0 in double precision (moves
    into a sliver near the boundary whose reverse move has log density below
    about -708) count as balanced: the log-space difference there is pure
    rounding on terms of size ``||x - z||_z^2``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng(seed)
    xs = _random_interior(barrier, trials, rng)
    worst = 0.0
    for x in xs:
        gx = _Geometry(barrier, x)
        for _ in range(100):
            z = _propose(gx, x, r, rng)
            if barrier.contains(z):
                break
        else:
            continue
        gz = _Geometry(barrier, z)
        sx, sz = s(x), s(z)
        a_xz = _log_accept(gx, gz, sx, sz, r)
        a_zx = _log_accept(gz, gx, sz, sx, r)
        lhs = -sx + log_proposal_density(barrier, x, z, r) + min(0.0, a_xz)
        rhs = -sz + log_proposal_density(barrier, z, x, r) + min(0.0, a_zx)
        if max(lhs, rhs) < _LOG_TINY:
            continue
        worst = max(worst, abs(math.expm1(lhs - rhs)))
    return worst


def _third_derivative(barrier: Barrier, x, h1, h2, h3) -> float:
    """``D^3F(x)[h1, h2, h3]`` by central differences of the Hessian along h3."""
    n3 = math.sqrt(float(h3 @ barrier.hessian(x) @ h3))
    eps = 1e-4 / n3
    Hp = barrier.hessian(x + eps * h3)
    Hm = barrier.hessian(x - eps * h3)
    return float(h1 @ (Hp - Hm) @ h2) / (2.0 * eps)


def self_concordance_check(barrier: Barrier, trials: int = 1000, seed: int = 0, max_delta: float = 0.5) -> dict:
    """Worst ratios of the self-concordance inequalities at random points.

    Returned keys:

    * ``ratio_3a``: max of ``D^3F[h,h,h] / (2 (D^2F[h,h])^{3/2})`` (should be <= 1)
    * ``ratio_3b``: max of ``DF[h]^2 / D^2F[h,h]`` (should be <= nu)
    * ``ratio_trilinear``: max of ``|D^3F[h1,h2,h3]| / (2 prod ||h_i||_x)`` (<= 1)
    * ``sandwich_low`` / ``sandwich_high``: min over trials of
      ``lambda_min(M) / (1-delta)^2`` and max of ``lambda_max(M) (1-delta)^2``
      where ``M = H(x)^{-1/2} H(x+h) H(x)^{-1/2}`` and ``delta = ||h||_x``
      (should be >= 1 and <= 1 respectively).
    """
    rng = make_rng(seed)
    d = barrier.dim
    xs = _random_interior(barrier, trials, rng)
    out = {"ratio_3a": -math.inf, "ratio_3b": 0.0, "ratio_trilinear": 0.0,
           "sandwich_low": math.inf, "sandwich_high": 0.0, "nu": barrier.nu, "trials": trials}
    for x in xs:
        H = barrier.hessian(x)
        L = cholesky(H)
        g = barrier.gradient(x)
        hs = rng.standard_normal((3, d))
        h = hs[0]
        q = float(h @ H @ h)
        out["ratio_3a"] = max(out["ratio_3a"], _third_derivative(barrier, x, h, h, h) / (2.0 * q**1.5))
        out["ratio_3b"] = max(out["ratio_3b"], float(g @ h) ** 2 / q)
        norms = [math.sqrt(float(v @ H @ v)) for v in hs]
        tri = abs(_third_derivative(barrier, x, hs[0], hs[1], hs[2])) / (2.0 * norms[0] * norms[1] * norms[2])
        out["ratio_trilinear"] = max(out["ratio_trilinear"], tri)
        dlt = max_delta * rng.random()
        step_ = dlt * h / math.sqrt(q)
        if dlt == 0 or not barrier.contains(x + step_):
            continue
        Linv = np.linalg.inv(L)
        M = Linv @ barrier.hessian(x + step_) @ Linv.T
        ev = np.linalg.eigvalsh(0.5 * (M + M.T))
        out["sandwich_low"] = min(out["sandwich_low"], ev[0] / (1.0 - dlt) ** 2)
        out["sandwich_high"] = max(out["sandwich_high"], ev[-1] * (1.0 - dlt) ** 2)
    return out


def dikin_containment_check(barrier: Barrier, trials: int = 1000, radius: float = 0.999, seed: int = 0) -> int:
    """Count points ``x + h`` with ``||h||_x = radius`` that fall outside K."""
    rng = make_rng(seed)
    xs = _random_interior(barrier, trials, rng)
    violations = 0
    for x in xs:
        L = cholesky(barrier.hessian(x))
        u = rng.standard_normal(barrier.dim)
        u /= np.linalg.norm(u)
        h = radius * np.linalg.solve(L.T, u)
        if not barrier.contains(x + h):
            violations += 1
    return violations


def ensemble_tv_curve(
    barrier: Barrier,
    s: Potential,
    r: float,
    oracle: GridOracle,
    n_chains: int,
    n_steps: int,
    bins: int | None = None,
    seed: int = 0,
    x0=None,
) -> np.ndarray:
    """TV between the ensemble of ``n_chains`` chains and the oracle after each step.

    Every chain starts at ``x0`` (default: the analytic center). Entry ``k``
    of the result is the TV after ``k`` steps, ``k = 0..n_steps``.
    """
    x0 = analytic_center(barrier) if x0 is None else np.asarray(x0, dtype=float)
    params = ChainParams(r=r, seed=seed)
    params.validate(barrier.dim)
    seeds = np.random.SeedSequence(seed).generate_state(n_chains, dtype=np.uint64)
    states = [init_state(barrier, x0, int(sd)) for sd in seeds]
    curve = np.empty(n_steps + 1)
    curve[0] = tv_distance(oracle, np.array([st.x for st in states]), bins=bins)
    for k in range(1, n_steps + 1):
        for st in states:
            step(barrier, s, params, st)
        curve[k] = tv_distance(oracle, np.array([st.x for st in states]), bins=bins)
    return curve


def calibrate_constant(
    barrier: Barrier,
    s: Potential,
    r: float,
    oracle: GridOracle,
    target_tv: float = 0.05,
    warm_bound: float = 10.0,
    n_chains: int = 1000,
    max_steps: int = 400,
    bins: int | None = None,
    seed: int = 0,
) -> tuple[float, int]:
    """Fit the conductance constant C to observed mixing.

    Runs an ensemble from the analytic center until its TV to the oracle
    drops below ``target_tv`` (at step ``n*``), then returns the C for which
    the burn-in rule ``ceil(log(warm_bound / target_tv) / Delta)`` equals
    ``n*``, together with ``n*``.
    """
    curve = ensemble_tv_curve(barrier, s, r, oracle, n_chains, max_steps, bins=bins, seed=seed)
    hits = np.nonzero(curve <= target_tv)[0]
    if len(hits) == 0:
        raise DomainError(f"ensemble did not reach TV {target_tv} within {max_steps} steps")
    n_star = max(1, int(hits[0]))
    delta_emp = min(0.5, math.log(warm_bound / target_tv) / n_star)
    C = r * r / (barrier.dim * barrier.nu**2 * delta_emp)
    return C, n_star


# Pass thresholds for property_report. Third derivatives come from finite
# differences of the Hessian, so their ratios get a 5% multiplicative margin.
TOLERANCES = {
    "balance": 1e-10,
    "ratio_3a": 1.05,
    "ratio_trilinear": 1.05,
    "ratio_3b_slack": 1e-9,
    "sandwich": 1e-6,
}


def property_report(barrier: Barrier, s: Potential, r: float | None = None, trials: int = 1000, seed: int = 0) -> list[dict]:
    """Run every property check and attach a ``pass`` flag to each record."""
    r = 1.0 / barrier.dim if r is None else r
    tol = TOLERANCES
    sc = self_concordance_check(barrier, trials, seed=seed)
    bal = detailed_balance_check(barrier, s, r, trials, seed=seed)
    viol = dikin_containment_check(barrier, trials, seed=seed)
    return [
        {"check": "detailed_balance", "value": bal, "limit": tol["balance"], "pass": bal <= tol["balance"]},
        {"check": "dikin_containment", "value": viol, "limit": 0, "pass": viol == 0},
        {"check": "self_concordance_3a", "value": sc["ratio_3a"], "limit": tol["ratio_3a"],
         "pass": sc["ratio_3a"] <= tol["ratio_3a"]},
        {"check": "self_concordance_3b", "value": sc["ratio_3b"], "limit": sc["nu"],
         "pass": sc["ratio_3b"] <= sc["nu"] * (1.0 + tol["ratio_3b_slack"])},
        {"check": "trilinear_bound", "value": sc["ratio_trilinear"], "limit": tol["ratio_trilinear"],
         "pass": sc["ratio_trilinear"] <= tol["ratio_trilinear"]},
        {"check": "hessian_sandwich_low", "value": sc["sandwich_low"], "limit": 1.0,
         "pass": sc["sandwich_low"] >= 1.0 - tol["sandwich"]},
        {"check": "hessian_sandwich_high", "value": sc["sandwich_high"], "limit": 1.0,
         "pass": sc["sandwich_high"] <= 1.0 + tol["sandwich"]},
    ]
