"""Sequential prediction with linear losses by sampling exponential weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import tracker as tr
from ..barriers import Barrier, analytic_center
from ..diagnostics import grid_density
from ..errors import DomainError
from ..potentials import LinearPotential, Potential, PotentialPair, sup_diff_bound, zero_potential
from ..walker import ChainParams, ChainState, init_state, run

__all__ = [
    "PredictorState",
    "default_eta",
    "make_predictor",
    "predict_round",
    "cumulative_potential",
    "best_fixed_comparator",
    "realized_regret",
]


def default_eta(d: int, nu: float, T: int) -> float:
    """Learning rate ``1 / (d^{3/2} nu sqrt(T))``."""
    return 1.0 / (d**1.5 * nu * math.sqrt(T))


class _SumPotential(Potential):
    def __init__(self, linear: LinearPotential, prior: Potential):
        self.linear = linear
        self.prior = prior
        super().__init__(self._eval, kind="custom", linear_part=linear.b, r_star=prior.r_star)

    def _eval(self, x):
        return self.linear(x) + self.prior(x)

    def batch(self, X):
        return self.linear.batch(X) + self.prior.batch(X)


@dataclass
class PredictorState:
    """Exponential-weights learner ``s_t = eta * L_t + R`` tracked by one chain.

    ``loss_sum`` is the cumulative linear loss vector; ``offsets`` and
    ``vectors`` keep the loss history for comparator evaluation.
    """

    eta: float
    r: float
    chain: ChainState
    config: tr.TrackerConfig
    tracker: tr.TrackerState
    loss_sum: np.ndarray
    prior: Potential | None = None
    bounded: bool = True
    seed: int = 0
    realized: list = field(default_factory=list)
    vectors: list = field(default_factory=list)
    offsets: list = field(default_factory=list)
    taus: list = field(default_factory=list)

    @property
    def t(self) -> int:
        return len(self.realized)


def cumulative_potential(state: PredictorState) -> Potential:
    lin = LinearPotential(state.eta * state.loss_sum)
    return lin if state.prior is None else _SumPotential(lin, state.prior)


def make_predictor(
    barrier: Barrier,
    T: int | None = None,
    eta: float | None = None,
    seed: int = 0,
    C: float = 1.0,
    prior: Potential | None = None,
    bounded: bool = True,
    policy: str = "onestep",
    eps: float = 0.1,
    warm_bound: float = 10.0,
) -> PredictorState:
    """Learner with burn-in on the prior; ``eta`` defaults to :func:`default_eta` for horizon T."""
    d = barrier.dim
    if eta is None:
        if T is None:
            raise ValueError("give either the horizon T or eta")
        eta = default_eta(d, barrier.nu, T)
    r = 1.0 / d
    config = tr.TrackerConfig(d=d, nu=barrier.nu, C=C, mode="supnorm", eps=eps, policy=policy)
    dlt = config.delta(r)
    if policy == "onestep":
        beta0 = 1.0 + 0.4 * dlt**2
        u0 = tr.fixed_point(beta0, dlt)
    else:
        beta0, u0 = 1.0, eps
    burn = tr.initial_burn_in(dlt, warm_bound, u0)
    chain = init_state(barrier, analytic_center(barrier), seed)
    s0 = zero_potential(d) if prior is None else prior
    run(barrier, s0, ChainParams(r, seed), chain, burn)
    return PredictorState(
        eta=eta,
        r=r,
        chain=chain,
        config=config,
        tracker=tr.start(config, u0=u0, beta0=beta0, tau0=burn, delta0=dlt),
        loss_sum=np.zeros(d),
        prior=prior,
        bounded=bounded,
        seed=seed,
    )


def predict_round(state: PredictorState, barrier: Barrier, loss, offset: float = 0.0) -> tuple[np.ndarray, PredictorState]:
    """Play the current chain point, then absorb the loss ``<loss, x> + offset``."""
    g = np.atleast_1d(np.asarray(loss, dtype=float))
    if state.bounded:
        spread = float(np.linalg.norm(g)) * barrier.enclosing_radius
        if offset - spread < -1e-12 or offset + spread > 1.0 + 1e-12:
            raise DomainError(f"loss <{g.tolist()}, x> + {offset} is not guaranteed to lie in [0, 1] on K")
    Y = state.chain.x.copy()
    state.realized.append(float(g @ Y) + offset)
    state.vectors.append(g)
    state.offsets.append(float(offset))

    prev = cumulative_potential(state)
    state.loss_sum = state.loss_sum + g
    nxt = cumulative_potential(state)
    sup = sup_diff_bound(LinearPotential(state.eta * (state.loss_sum - g)), LinearPotential(state.eta * state.loss_sum), barrier)
    pair = PotentialPair(prev, nxt, sup.value, sup.heuristic)
    tau, state.tracker = tr.advance(state.config, state.tracker, pair, state.r)
    run(barrier, nxt, ChainParams(state.r, state.seed), state.chain, tau)
    state.taus.append(tau)
    return Y, state


def best_fixed_comparator(state: PredictorState, barrier: Barrier, h: float = 1e-3) -> tuple[np.ndarray, float]:
    """Best fixed decision in hindsight, minimized over a grid of K (d <= 2)."""
    total_offset = float(np.sum(state.offsets))
    oracle = grid_density(barrier, zero_potential(barrier.dim), h)
    pts = oracle.center_points()[oracle.mask.ravel()]
    losses = pts @ state.loss_sum + total_offset
    i = int(np.argmin(losses))
    return pts[i], float(losses[i])


def realized_regret(state: PredictorState, barrier: Barrier, h: float = 1e-3) -> float:
    _, best = best_fixed_comparator(state, barrier, h)
    return float(np.sum(state.realized)) - best
