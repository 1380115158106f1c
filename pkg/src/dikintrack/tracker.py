"""Chain-length scheduling for tracking a sequence of targets.

Round ``t`` runs the walk for ``tau_t`` steps on the new target. The
schedule is driven by a contraction surrogate ``Delta_t = r_t^2 / (C d nu^2)``
and by a measure of how far the target moved: the sup-norm density ratio
``beta_t`` or the L2 ratio ``alpha_t``. An upper bound ``u_t`` on the L2
error of the chain is propagated alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ConfigError, DomainError
from .potentials import PotentialPair

__all__ = [
    "TrackerConfig",
    "TrackerState",
    "delta",
    "beta_from_sup",
    "alpha_anneal",
    "u_update",
    "u_update_alt",
    "tau_multistep",
    "tau_l2",
    "one_step_ok",
    "one_step_sufficient",
    "initial_burn_in",
    "fixed_point",
    "start",
    "advance",
]

_CEIL_SLACK = 1e-9


def _ceil(v: float) -> int:
    # absorb rounding such as log(e * t / t) = 1 + 2e-16
    return math.ceil(v - _CEIL_SLACK * max(1.0, abs(v)))


def delta(r: float, d: int, nu: float, C: float = 1.0) -> float:
    """``r^2 / (C d nu^2)`` clamped to at most 1/2."""
    if r <= 0 or d <= 0 or nu <= 0 or C <= 0:
        raise DomainError("delta needs positive r, d, nu and C")
    return min(0.5, r * r / (C * d * nu * nu))


def beta_from_sup(sup_diff: float) -> float:
    """Density-ratio bound ``exp(2 * sup_K |s_t - s_{t+1}|)``."""
    if sup_diff < 0:
        raise DomainError(f"sup_diff must be nonnegative, got {sup_diff}")
    return math.exp(2.0 * sup_diff)


def alpha_anneal(delta_sched: float, d: int) -> float:
    """L2 change bound ``(1 + delta^2 / (1 - 2 delta))^{d/2}`` for ``s_{t+1} = s_t / (1 - delta)``."""
    if not 0.0 <= delta_sched < 0.5:
        raise DomainError(f"annealing ratio must lie in (0, 1/2), got {delta_sched}")
    return (1.0 + delta_sched**2 / (1.0 - 2.0 * delta_sched)) ** (d / 2.0)


def u_update(u_prev: float, beta: float, delta: float, tau: int) -> float:
    """``(1 - Delta)^tau (beta^{3/2} u_prev + sqrt(beta) (beta - 1))``."""
    return (1.0 - delta) ** tau * (beta**1.5 * u_prev + math.sqrt(beta) * (beta - 1.0))


def u_update_alt(u_prev: float, beta: float, delta: float, tau: int) -> float:
    """Variant ``(1 - Delta)^tau (sqrt(beta) u_prev + sqrt(beta - 1))``, tighter for large beta."""
    return (1.0 - delta) ** tau * (math.sqrt(beta) * u_prev + math.sqrt(beta - 1.0))


def tau_multistep(delta: float, beta: float, eps_prev: float, eps_t: float) -> int:
    """Steps needed so that an error bound ``eps_prev`` becomes ``eps_t`` after a beta-sized move."""
    arg = beta**1.5 * eps_prev / eps_t + math.sqrt(beta) * (beta - 1.0) / eps_t
    if arg <= 1.0:
        return 1
    return max(1, _ceil(math.log(arg) / delta))


def tau_l2(delta: float, alpha: float, eps_t: float) -> int:
    """``ceil(log(alpha / eps) / Delta)``, at least 1."""
    if alpha <= eps_t:
        return 1
    return max(1, _ceil(math.log(alpha / eps_t) / delta))


def one_step_ok(beta: float, delta: float) -> bool:
    """Whether a single step per round keeps the error at its fixed point."""
    return beta**1.5 <= 1.0 + delta * delta / (1.0 - delta)


def one_step_sufficient(beta: float, delta: float) -> bool:
    """Cheaper sufficient check ``beta - 1 <= 0.4 Delta^2``."""
    return beta - 1.0 <= 0.4 * delta * delta


def fixed_point(beta: float, delta: float) -> float:
    """Error level ``sqrt(beta) (beta - 1) / Delta`` maintained by one-step tracking."""
    return math.sqrt(beta) * (beta - 1.0) / delta


def initial_burn_in(delta: float, warm_bound: float, target: float) -> int:
    """Steps contracting a warm-start L2 bound below ``target`` at rate ``1 - Delta``."""
    if target <= 0:
        raise DomainError("burn-in target must be positive")
    if warm_bound <= target:
        return 0
    return _ceil(math.log(warm_bound / target) / delta)


@dataclass(frozen=True)
class TrackerConfig:
    """Scheduler settings.

    Attributes:
        d: dimension.
        nu: barrier parameter.
        C: conductance constant in ``Delta``.
        mode: ``supnorm`` (beta driven) or ``l2`` (alpha driven).
        eps: accuracy target, constant or a per-round sequence starting at round 0.
        policy: ``accuracy`` (multi-step) or ``onestep`` (single step whenever
            admissible, supnorm mode only).
        alt_recurrence: also evaluate the large-beta recurrence and keep the
            smaller bound.
    """

    d: int
    nu: float
    C: float = 1.0
    mode: str = "supnorm"
    eps: float | Sequence[float] = 0.1
    policy: str = "accuracy"
    alt_recurrence: bool = False

    def __post_init__(self):
        if self.C <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        if self.mode not in ("supnorm", "l2"):
            raise ConfigError(f"mode must be supnorm or l2, got {self.mode!r}")
        if self.policy not in ("accuracy", "onestep"):
            raise ConfigError(f"policy must be accuracy or onestep, got {self.policy!r}")
        if self.policy == "onestep" and self.mode != "supnorm":
            raise ConfigError("onestep policy requires supnorm mode")
        if isinstance(self.eps, (int, float)):
            if self.eps <= 0:
                raise ConfigError("eps must be positive")
        elif any(e <= 0 for e in self.eps):
            raise ConfigError("eps must be positive")

    def eps_at(self, t: int) -> float:
        if isinstance(self.eps, (int, float)):
            return float(self.eps)
        if t >= len(self.eps):
            raise ConfigError(f"no accuracy target for round {t}")
        return float(self.eps[t])

    def delta(self, r: float) -> float:
        return delta(r, self.d, self.nu, self.C)


@dataclass(frozen=True)
class TrackerState:
    """Scheduler state after round ``t``.

    ``u`` is the L2 error bound (supnorm mode); ``tv_bound`` is the running sum
    of accuracy targets (l2 mode). ``beta_ref`` is the non-decreasing beta used
    by the one-step policy.
    """

    t: int = 0
    u: float = 0.0
    tv_bound: float = 0.0
    beta: float | None = None
    alpha: float | None = None
    delta: float | None = None
    tau: int = 0
    heuristic: bool = False
    beta_ref: float = 1.0

    def report(self) -> dict:
        rec = {"t": self.t, "delta": self.delta, "tau": self.tau, "heuristic": self.heuristic}
        if self.alpha is not None:
            rec["alpha"] = self.alpha
            rec["tv_bound"] = self.tv_bound
        else:
            rec["beta"] = self.beta
            rec["u"] = self.u
        return rec


def start(
    config: TrackerConfig,
    u0: float | None = None,
    beta0: float = 1.0,
    tau0: int = 0,
    delta0: float | None = None,
) -> TrackerState:
    """Round-0 state; ``u0`` defaults to the round-0 accuracy target."""
    eps0 = config.eps_at(0)
    u = eps0 if u0 is None else float(u0)
    return TrackerState(t=0, u=u, tv_bound=eps0, tau=tau0, beta_ref=beta0, delta=delta0)


def advance(
    config: TrackerConfig,
    state: TrackerState,
    pair: PotentialPair,
    r_next: float,
) -> tuple[int, TrackerState]:
    """Schedule round ``t + 1`` and return ``(tau, new_state)``."""
    t = state.t + 1
    dlt = config.delta(r_next)
    if config.mode == "l2":
        if pair.alpha is None:
            raise ConfigError("l2 mode needs an alpha bound on the potential pair")
        eps_t = config.eps_at(t)
        tau = tau_l2(dlt, pair.alpha, eps_t)
        new = replace(
            state,
            t=t,
            tv_bound=state.tv_bound + eps_t,
            alpha=pair.alpha,
            beta=None,
            delta=dlt,
            tau=tau,
            heuristic=pair.heuristic,
        )
        return tau, new

    beta = beta_from_sup(pair.sup_diff)
    beta_ref = state.beta_ref
    if config.policy == "onestep":
        beta_used = max(beta, beta_ref)
        if one_step_ok(beta_used, dlt):
            tau = 1
        else:
            tau = tau_multistep(dlt, beta_used, state.u, fixed_point(beta_used, dlt))
        beta_ref = beta_used
    else:
        beta_used = beta
        tau = tau_multistep(dlt, beta, config.eps_at(t - 1), config.eps_at(t))
    u = u_update(state.u, beta_used, dlt, tau)
    if config.alt_recurrence:
        u = min(u, u_update_alt(state.u, beta_used, dlt, tau))
    new = replace(
        state,
        t=t,
        u=u,
        beta=beta_used,
        alpha=None,
        delta=dlt,
        tau=tau,
        heuristic=pair.heuristic,
        beta_ref=beta_ref,
    )
    return tau, new
