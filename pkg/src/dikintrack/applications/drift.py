"""Tracking truncated Gaussians with a drifting mean, and mixtures of them."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .. import tracker as tr
from ..barriers import Barrier, analytic_center
from ..errors import ConfigError, DomainError
from ..potentials import Potential, PotentialPair, QuadraticPotential, sup_diff_bound
from ..walker import ChainParams, ChainState, init_state, run

logger = logging.getLogger(__name__)

__all__ = ["DriftScheduler", "drift_track", "drift_track_ensemble", "ComponentChain", "mixture_sample"]


class DriftScheduler:
    """Per-round schedule for targets ``s_t(x) = (p/2) ||x - c_t||^2`` on K.

    Scheduling depends only on the centers, never on chain output, so one
    scheduler can drive any number of chains.

    Args:
        barrier: body K.
        center_radius: radius R of the ball containing every center.
        policy: ``onestep`` or ``accuracy``.
        eps: accuracy target for the ``accuracy`` policy and for the burn-in.
        C: conductance constant.
        warm_bound: assumed L2 distance of the starting point mass to the
            first target, used to size the burn-in.
    """

    def __init__(
        self,
        barrier: Barrier,
        center_radius: float,
        policy: str = "onestep",
        eps: float = 0.1,
        C: float = 1.0,
        warm_bound: float = 10.0,
        precision: float = 1.0,
        initial_center=None,
    ):
        self.barrier = barrier
        self.R = float(center_radius)
        self.precision = float(precision)
        d = barrier.dim
        lip = self.precision * (barrier.enclosing_radius + self.R)
        self.r = min(1.0 / d, 1.0 / lip) if lip > 0 else 1.0 / d
        self.config = tr.TrackerConfig(d=d, nu=barrier.nu, C=C, mode="supnorm", eps=eps, policy=policy)
        self.delta = self.config.delta(self.r)
        c0 = np.zeros(d) if initial_center is None else np.asarray(initial_center, dtype=float)
        self.potential = self._potential(c0)
        if policy == "onestep":
            beta0 = 1.0 + 0.4 * self.delta**2
            u0 = tr.fixed_point(beta0, self.delta)
        else:
            beta0 = 1.0
            u0 = eps
        self.burn_in = tr.initial_burn_in(self.delta, warm_bound, u0)
        self.state = tr.start(self.config, u0=u0, beta0=beta0, tau0=self.burn_in, delta0=self.delta)

    def _potential(self, c) -> QuadraticPotential:
        c = np.asarray(c, dtype=float).reshape(self.barrier.dim)
        if np.linalg.norm(c) > self.R * (1 + 1e-12):
            raise DomainError(f"center {c} lies outside the declared radius {self.R}")
        return QuadraticPotential(c, self.precision, enclosing_radius=self.barrier.enclosing_radius)

    def initial_report(self) -> dict:
        rec = self.state.report()
        rec["drift"] = 0.0
        return rec

    def push(self, center) -> tuple[int, QuadraticPotential, dict]:
        """Schedule the round for a new center; returns ``(tau, potential, report)``."""
        nxt = self._potential(center)
        prev = self.potential
        bound = sup_diff_bound(prev, nxt, self.barrier)
        pair = PotentialPair(prev, nxt, bound.value, bound.heuristic)
        tau, self.state = tr.advance(self.config, self.state, pair, self.r)
        self.potential = nxt
        rec = self.state.report()
        rec["drift"] = float(np.linalg.norm(nxt.center - prev.center))
        rec["fixed_point"] = tr.fixed_point(self.state.beta, self.state.delta)
        return tau, nxt, rec


def drift_track(
    barrier: Barrier,
    centers: Iterable,
    policy: str = "onestep",
    eps: float = 0.1,
    C: float = 1.0,
    center_radius: float = 1.0,
    seed: int = 0,
    warm_bound: float = 10.0,
    initial_center=None,
    x0=None,
) -> Iterator[tuple[np.ndarray, dict]]:
    """Yield one ``(sample, report)`` per round, starting with the burn-in round."""
    sched = DriftScheduler(barrier, center_radius, policy, eps, C, warm_bound, initial_center=initial_center)
    x0 = analytic_center(barrier) if x0 is None else x0
    state = init_state(barrier, x0, seed)
    params = ChainParams(r=sched.r, seed=seed)
    run(barrier, sched.potential, params, state, sched.burn_in)
    yield state.x.copy(), sched.initial_report()
    for c in centers:
        tau, pot, rec = sched.push(c)
        run(barrier, pot, params, state, tau)
        yield state.x.copy(), rec


def _run_chunk(args):
    barrier, rounds, r, burn_in, pot0, seeds, x0 = args
    out = []
    for sd in seeds:
        st = init_state(barrier, x0, int(sd))
        params = ChainParams(r=r, seed=int(sd))
        run(barrier, pot0, params, st, burn_in)
        for tau, pot in rounds:
            run(barrier, pot, params, st, tau)
        out.append(st.x.copy())
    return out


def drift_track_ensemble(
    barrier: Barrier,
    centers: Sequence,
    n_chains: int,
    policy: str = "onestep",
    eps: float = 0.1,
    C: float = 1.0,
    center_radius: float = 1.0,
    seed: int = 0,
    warm_bound: float = 10.0,
    initial_center=None,
    workers: int = 1,
) -> tuple[np.ndarray, list[dict]]:
    """Run ``n_chains`` independent trackers over the same center stream.

    Returns the final-round points (in chain order) and the shared round
    reports. Chain ``i`` is seeded with the i-th word of ``SeedSequence(seed)``.
    """
    sched = DriftScheduler(barrier, center_radius, policy, eps, C, warm_bound, initial_center=initial_center)
    pot0 = sched.potential
    reports = [sched.initial_report()]
    rounds = []
    for c in centers:
        tau, pot, rec = sched.push(c)
        rounds.append((tau, pot))
        reports.append(rec)
    x0 = analytic_center(barrier)
    seeds = np.random.SeedSequence(seed).generate_state(n_chains, dtype=np.uint64)
    chunks = np.array_split(seeds, max(1, workers))
    jobs = [(barrier, rounds, sched.r, sched.burn_in, pot0, ch, x0) for ch in chunks if len(ch)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return np.array([x for part in parts for x in part]), reports


@dataclass
class ComponentChain:
    """One mixture component: weight, target and its own chain."""

    weight: float
    barrier: Barrier
    potential: Potential
    params: ChainParams
    state: ChainState
    steps: int = 1


def mixture_sample(components: Sequence[ComponentChain], rng: np.random.Generator) -> np.ndarray:
    """Pick a component with probability proportional to its weight, advance it, return its point."""
    weights = np.array([c.weight for c in components], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ConfigError(f"mixture weights must be positive and sum to 1, got {weights.tolist()}")
    i = 0 if len(components) == 1 else int(rng.choice(len(components), p=weights))
    comp = components[i]
    run(comp.barrier, comp.potential, comp.params, comp.state, comp.steps)
    return comp.state.x.copy()
