"""Streaming posterior sampling for exponential families on K."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import tracker as tr
from ..barriers import Barrier, analytic_center
from ..errors import ConfigError
from ..potentials import Potential, PotentialPair, sup_diff_bound
from ..walker import ChainParams, ChainState, init_state, run

__all__ = ["ExpFamilyModel", "PosteriorPotential", "PosteriorTracker", "posterior_ingest"]


@dataclass(frozen=True)
class ExpFamilyModel:
    """Family ``p(y | x) = h(y) exp(<x, T(y)> - A(x))`` with a conjugate prior.

    ``A_lipschitz`` and ``A_lambda_max`` select the step-size rule; the latter
    takes precedence. ``A_sup`` optionally bounds ``sup_K |A|`` so that the
    per-observation change bound is exact rather than sampled.
    """

    T: Callable[[np.ndarray], np.ndarray]
    A: Callable[[np.ndarray], float]
    kappa1: np.ndarray
    kappa2: float = 0.0
    A_lipschitz: float | None = None
    A_lambda_max: float | None = None
    A_sup: float | None = None


class PosteriorPotential(Potential):
    """``s(x) = -<x, stat> + weight * A(x)``."""

    def __init__(self, A, stat, weight: float):
        self.A = A
        self.stat = np.asarray(stat, dtype=float)
        self.weight = float(weight)
        super().__init__(self._eval, kind="custom", linear_part=-self.stat)

    def _eval(self, x):
        return -float(x @ self.stat) + self.weight * float(self.A(x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return -float(x @ self.stat) + self.weight * float(self.A(x))


class PosteriorTracker:
    """Keeps a chain close to the running posterior as observations arrive."""

    def __init__(
        self,
        model: ExpFamilyModel,
        barrier: Barrier,
        eps: float = 0.1,
        C: float = 1.0,
        seed: int = 0,
        warm_bound: float = 10.0,
        x0=None,
        execute: bool = True,
    ):
        if model.A_lipschitz is None and model.A_lambda_max is None:
            raise ConfigError("exponential family model needs A_lipschitz or A_lambda_max")
        self.model = model
        self.barrier = barrier
        self.execute = execute
        d = barrier.dim
        self.config = tr.TrackerConfig(d=d, nu=barrier.nu, C=C, mode="supnorm", eps=eps)
        self.t = 0
        self.potential = PosteriorPotential(model.A, model.kappa1, model.kappa2)
        self.r = self.step_size(0)
        self.seed = seed
        self.state: ChainState | None = None
        burn = tr.initial_burn_in(self.config.delta(self.r), warm_bound, eps)
        if execute:
            x0 = analytic_center(barrier) if x0 is None else x0
            self.state = init_state(barrier, x0, seed)
            run(barrier, self.potential, ChainParams(self.r, seed), self.state, burn)
        self.tracker = tr.start(self.config, tau0=burn, delta0=self.config.delta(self.r))

    def step_size(self, t: int) -> float:
        d = self.barrier.dim
        n = t + self.model.kappa2
        if n <= 0:
            return 1.0 / d
        if self.model.A_lambda_max is not None:
            return min(1.0 / d, 1.0 / math.sqrt(n * self.model.A_lambda_max))
        return min(1.0 / d, 1.0 / (n * self.model.A_lipschitz))

    def ingest(self, y) -> dict:
        Ty = np.atleast_1d(np.asarray(self.model.T(y), dtype=float))
        prev = self.potential
        nxt = PosteriorPotential(self.model.A, prev.stat + Ty, prev.weight + 1.0)
        declared = None
        if self.model.A_sup is not None:
            declared = float(np.linalg.norm(Ty)) * self.barrier.enclosing_radius + self.model.A_sup
        bound = sup_diff_bound(prev, nxt, self.barrier, declared=declared, seed=self.t)
        self.t += 1
        r = self.step_size(self.t)
        pair = PotentialPair(prev, nxt, bound.value, bound.heuristic)
        tau, self.tracker = tr.advance(self.config, self.tracker, pair, r)
        if self.execute:
            run(self.barrier, nxt, ChainParams(r, self.seed), self.state, tau)
        self.potential = nxt
        self.r = r
        rec = self.tracker.report()
        rec["r"] = r
        if self.state is not None:
            rec["x"] = self.state.x.tolist()
        return rec


def posterior_ingest(tracker: PosteriorTracker, y) -> dict:
    """Feed one observation and return the round report."""
    return tracker.ingest(y)
