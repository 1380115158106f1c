"""Simulated annealing for linear objectives ``min_{x in K} <l, x>``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import tracker as tr
from ..barriers import Barrier, analytic_center
from ..potentials import LinearPotential, PotentialPair, sup_diff_bound, zero_potential
from ..walker import ChainParams, init_state, run

__all__ = ["AnnealSchedule", "anneal_schedule", "anneal_minimize", "phase_alpha"]


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric sharpening ``s_t = (1 - d^{-1/2})^{-t} <l, x>`` for ``t = 1..k``."""

    d: int
    eps: float
    k: int
    ratio: float
    eps_phase: float

    def scale(self, t: int) -> float:
        return (1.0 - self.ratio) ** (-t)

    @property
    def final_temperature(self) -> float:
        return 1.0 / self.scale(self.k)


def anneal_schedule(d: int, eps: float) -> AnnealSchedule:
    """Phase count ``ceil(sqrt(d) log(d/eps))`` and per-phase accuracy.

    Degenerate targets (``eps >= d``) get a single phase at accuracy ``eps``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    span = math.sqrt(d) * math.log(d / eps)
    k = max(1, math.ceil(span))
    eps_phase = eps / span if span >= 1.0 else eps
    return AnnealSchedule(d=d, eps=eps, k=k, ratio=d**-0.5, eps_phase=eps_phase)


def phase_alpha(schedule: AnnealSchedule, t: int, sup_diff: float) -> float:
    """L2 change bound for phase ``t``.

    Uses the geometric-sharpening bound when the sharpening ratio is below 1/2
    and the previous phase is itself a scaled objective (t >= 2); the generic
    bound ``sqrt(beta)`` from the sup-norm change is always available and the
    smaller of the two is returned.
    """
    bounds = [math.exp(sup_diff)]  # sqrt(exp(2 * sup_diff))
    if t >= 2 and schedule.ratio < 0.5:
        bounds.append(tr.alpha_anneal(schedule.ratio, schedule.d))
    return min(bounds)


def anneal_minimize(
    barrier: Barrier,
    ell,
    eps: float,
    C: float = 1.0,
    seed: int = 0,
    warm_bound: float = 10.0,
    r: float | None = None,
    x0=None,
) -> tuple[np.ndarray, float, dict]:
    """Approximately minimize ``<ell, x>`` over K by annealed Dikin walks.

    Starts with a burn-in on the uniform target from the analytic center, then
    runs ``tau_t = ceil(log(alpha_t / eps_t) / Delta)`` steps per phase.
    Returns the final iterate, its objective value and a report dict.
    """
    ell = np.asarray(ell, dtype=float)
    if abs(np.linalg.norm(ell) - 1.0) > 1e-9:
        raise ValueError("objective direction must be a unit vector")
    d = barrier.dim
    sched = anneal_schedule(d, eps)
    r = 1.0 / d if r is None else r
    config = tr.TrackerConfig(d=d, nu=barrier.nu, C=C, mode="l2", eps=sched.eps_phase)
    dlt = config.delta(r)

    x0 = analytic_center(barrier) if x0 is None else x0
    state = init_state(barrier, x0, seed)
    params = ChainParams(r=r, seed=seed)
    prev = zero_potential(d)
    burn = tr.initial_burn_in(dlt, warm_bound, sched.eps_phase)
    run(barrier, prev, params, state, burn)
    tstate = tr.start(config, tau0=burn, delta0=dlt)

    taus = []
    for t in range(1, sched.k + 1):
        nxt = LinearPotential(sched.scale(t) * ell)
        sup = sup_diff_bound(prev, nxt, barrier).value
        pair = PotentialPair(prev, nxt, sup, alpha=phase_alpha(sched, t, sup))
        tau, tstate = tr.advance(config, tstate, pair, r)
        run(barrier, nxt, params, state, tau)
        taus.append(tau)
        prev = nxt

    x = state.x.copy()
    report = {
        "k": sched.k,
        "delta": dlt,
        "burn_in": burn,
        "taus": taus,
        "total_steps": burn + sum(taus),
        "final_temperature": sched.final_temperature,
        "suboptimality_certificate": d * sched.final_temperature,
        "tv_bound": tstate.tv_bound,
        "acceptance_rate": state.acceptance_rate,
    }
    return x, float(ell @ x), report
