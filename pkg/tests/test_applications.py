import math

import numpy as np
import pytest

from dikintrack import tracker as tr
from dikintrack.applications import (
    ComponentChain,
    DriftScheduler,
    ExpFamilyModel,
    PosteriorTracker,
    anneal_minimize,
    anneal_schedule,
    default_eta,
    drift_track,
    drift_track_ensemble,
    make_predictor,
    mixture_sample,
    posterior_ingest,
    predict_round,
    realized_regret,
)
from dikintrack.applications.anneal import phase_alpha
from dikintrack.applications.posterior import PosteriorPotential
from dikintrack.applications.predict import cumulative_potential
from dikintrack.barriers import analytic_center, ball, box
from dikintrack.diagnostics import grid_density, mixture_oracle, tv_distance
from dikintrack.errors import ConfigError, DomainError
from dikintrack.potentials import Potential, QuadraticPotential, step_size
from dikintrack.walker import ChainParams, init_state, make_rng


# annealing


def test_anneal_phase_count_example():
    sched = anneal_schedule(4, 0.1)
    assert sched.k == math.ceil(2 * math.log(40)) == 8
    assert sched.eps_phase == pytest.approx(0.1 / (2 * math.log(40)))


@pytest.mark.parametrize("d", [2, 3, 4, 9, 25])
def test_anneal_schedule_invariants(d):
    sched = anneal_schedule(d, 0.1)
    assert sched.final_temperature <= 0.1 / d
    for t in range(1, sched.k):
        assert sched.scale(t + 1) == pytest.approx(sched.scale(t) / (1 - d**-0.5), rel=1e-14)


def test_anneal_degenerate_accuracy():
    sched = anneal_schedule(2, 5.0)
    assert sched.k <= 1
    with pytest.raises(ValueError):
        anneal_schedule(2, 0.0)


def test_phase_alpha():
    sched = anneal_schedule(16, 0.1)
    assert phase_alpha(sched, 1, 0.2) == pytest.approx(math.exp(0.2))
    assert phase_alpha(sched, 3, 10.0) == pytest.approx(tr.alpha_anneal(0.25, 16))
    small = anneal_schedule(2, 0.1)  # ratio 1/sqrt(2) >= 1/2
    assert phase_alpha(small, 3, 0.3) == pytest.approx(math.exp(0.3))


def test_anneal_minimize_on_square():
    K = box([-1, -1], [1, 1])
    x, value, rep = anneal_minimize(K, [1.0, 0.0], 0.1, C=0.34, seed=4)
    assert K.contains(x)
    assert value == pytest.approx(x[0])
    assert value <= -1 + 0.1
    assert rep["k"] == math.ceil(math.sqrt(2) * math.log(20))
    assert rep["total_steps"] == rep["burn_in"] + sum(rep["taus"])
    assert rep["suboptimality_certificate"] <= 0.1
    assert rep["tv_bound"] == pytest.approx(rep["k"] * 0.1 / (math.sqrt(2) * math.log(20)) + 0.1 / (math.sqrt(2) * math.log(20)))


def test_anneal_requires_unit_direction():
    with pytest.raises(ValueError):
        anneal_minimize(box([-1], [1]), [2.0], 0.1)


# posterior


def gaussian_model(d, kappa2=1.0, R=1.0):
    return ExpFamilyModel(
        T=lambda y: np.asarray(y, dtype=float),
        A=lambda x: 0.5 * float(x @ x),
        kappa1=np.zeros(d),
        kappa2=kappa2,
        A_lipschitz=R,
        A_lambda_max=1.0,
        A_sup=0.5 * R * R,
    )


def test_posterior_smooth_step_size():
    K = ball(2)
    pt = PosteriorTracker(gaussian_model(2, kappa2=3.0), K, execute=False)
    for t in range(0, 20):
        assert pt.step_size(t) == pytest.approx(min(0.5, 1 / math.sqrt(t + 3.0)))


def test_posterior_lipschitz_path():
    model = ExpFamilyModel(T=lambda y: y, A=lambda x: 0.0, kappa1=np.zeros(1), kappa2=0.0, A_lipschitz=2.0)
    pt = PosteriorTracker(model, box([-1], [1]), execute=False)
    assert pt.step_size(5) == pytest.approx(0.1)


def test_posterior_needs_a_constant():
    model = ExpFamilyModel(T=lambda y: y, A=lambda x: 0.0, kappa1=np.zeros(1))
    with pytest.raises(ConfigError):
        PosteriorTracker(model, box([-1], [1]), execute=False)


def test_posterior_zero_observation_uses_sup_of_A():
    K = ball(2)
    pt = PosteriorTracker(gaussian_model(2), K, execute=False)
    rec = pt.ingest(np.zeros(2))
    assert rec["beta"] == pytest.approx(math.exp(2 * 0.5))


def test_posterior_tau_grows_linearly():
    pt = PosteriorTracker(gaussian_model(2), ball(2), execute=False)
    taus = [pt.ingest(np.array([0.1, -0.2]))["tau"] for _ in range(400)]
    for t in (100, 200):
        assert taus[2 * t - 1] / taus[t - 1] <= 2.2


def test_posterior_potentials_are_convex():
    rng = np.random.default_rng(0)
    model = ExpFamilyModel(T=lambda y: y, A=lambda x: float(np.logaddexp(0, x).sum()), kappa1=np.zeros(2),
                           A_lambda_max=0.25)
    s = PosteriorPotential(model.A, np.array([0.4, -1.0]), 5.0)
    h = 1e-4
    for _ in range(200):
        x, v = rng.uniform(-1, 1, 2), rng.normal(size=2)
        second = (s(x + h * v) - 2 * s(x) + s(x - h * v)) / h**2
        assert second >= -1e-8 * max(1.0, v @ v) - 1e-5


def test_posterior_executes_chain():
    K = box([-1, -1], [1, 1])
    pt = PosteriorTracker(gaussian_model(2, R=math.sqrt(2)), K, seed=3)
    rec = posterior_ingest(pt, np.array([0.3, 0.1]))
    assert rec["t"] == 1 and K.contains(np.array(rec["x"]))
    assert pt.state.step_count == pt.tracker.tau + tr.initial_burn_in(tr.delta(0.5, 2, 4), 10.0, 0.1)


# drift


def test_drift_one_step_regime_at_tiny_drift():
    K = box([-1, -1], [1, 1])
    sched = DriftScheduler(K, 0.5)
    tau, _, rec = sched.push([1e-9, 0.0])
    assert tr.one_step_ok(rec["beta"], rec["delta"])
    assert tau == 1


def test_drift_accuracy_policy_uses_multistep_formula():
    K = box([-1], [1])
    sched = DriftScheduler(K, 0.5, policy="accuracy", eps=0.1)
    tau, _, rec = sched.push([0.2])
    b, dl = rec["beta"], rec["delta"]
    assert tau == math.ceil(math.log(b**1.5 + math.sqrt(b) * (b - 1) / 0.1) / dl - 1e-9)


def test_drift_center_outside_radius():
    sched = DriftScheduler(box([-1], [1]), 0.5)
    with pytest.raises(DomainError):
        sched.push([0.6])


def test_drift_zero_drift_constant_tau():
    K = box([-1], [1])
    sched = DriftScheduler(K, 0.5, policy="accuracy", eps=0.1)
    taus = [sched.push([0.0])[0] for _ in range(10)]
    assert len(set(taus)) == 1


def test_drift_track_onestep_stays_below_fixed_point():
    K = box([-1], [1])
    centers = 0.4 * np.sin(np.linspace(0, 6, 200))[:, None]
    reports = [rec for _, rec in drift_track(K, centers, center_radius=0.5, seed=1)]
    assert len(reports) == 201
    for rec in reports[1:]:
        assert rec["u"] <= tr.fixed_point(rec["beta"], rec["delta"]) * (1 + 1e-12)


def test_drift_ensemble_is_worker_invariant():
    K = box([-1], [1])
    centers = [[0.0], [0.01], [0.02]]
    a, rep_a = drift_track_ensemble(K, centers, 6, center_radius=0.5, seed=5, workers=1)
    b, rep_b = drift_track_ensemble(K, centers, 6, center_radius=0.5, seed=5, workers=2)
    assert a.tobytes() == b.tobytes()
    assert rep_a == rep_b


# mixtures


def _component(weight, center, seed, steps=1):
    K = box([-1], [1])
    pot = QuadraticPotential([center], 50.0, enclosing_radius=1.0)
    r = step_size(pot, 1)
    st = init_state(K, [center], seed)
    return ComponentChain(weight, K, pot, ChainParams(r, seed), st, steps)


def test_mixture_single_component_delegates():
    comp = _component(1.0, 0.2, 1)
    x = mixture_sample([comp], make_rng(0))
    assert np.array_equal(x, comp.state.x) and comp.state.step_count == 1


def test_mixture_weight_validation():
    with pytest.raises(ConfigError):
        mixture_sample([_component(0.5, 0.0, 1), _component(0.6, 0.1, 2)], make_rng(0))


def test_mixture_counts_and_tv():
    comps = [_component(0.5, -0.5, 1), _component(0.5, 0.5, 2)]
    rng = make_rng(7)
    n = 100_000
    X = np.array([mixture_sample(comps, rng) for _ in range(n)])
    counts = [c.state.step_count for c in comps]
    assert sum(counts) == n
    assert abs(counts[0] - 50_000) <= 500
    K = box([-1], [1])
    oracle = mixture_oracle([grid_density(K, c.potential, 0.01) for c in comps], [0.5, 0.5])
    assert tv_distance(oracle, X, bins=100) <= 0.07


# prediction


def test_default_eta_formula():
    assert default_eta(1, 2.0, 100) == 1 / (1 * 2.0 * 10)
    assert default_eta(4, 8.0, 400) == 1 / (8 * 8.0 * 20)


def test_zero_losses_zero_regret():
    K = box([-1], [1])
    st = make_predictor(K, T=20, seed=0)
    for _ in range(20):
        predict_round(st, K, [0.0])
    assert realized_regret(st, K) == 0.0
    assert all(t == 1 for t in st.taus)


def test_vanishing_eta_keeps_beta_one():
    K = box([-1], [1])
    st = make_predictor(K, eta=1e-12, seed=0)
    predict_round(st, K, [0.5], 0.5)
    assert st.tracker.beta == pytest.approx(st.tracker.beta_ref)
    assert tr.beta_from_sup(1e-12 * 0.5) == pytest.approx(1.0, abs=1e-11)


def test_prediction_potential_reconstruction():
    K = box([-1, -1], [1, 1])
    prior = QuadraticPotential([0.1, 0.0], 0.5)
    st = make_predictor(K, T=50, seed=2, prior=prior, bounded=False)
    rng = np.random.default_rng(0)
    losses = rng.normal(size=(30, 2))
    for g in losses:
        predict_round(st, K, g)
    s = cumulative_potential(st)
    for x in rng.uniform(-0.9, 0.9, (50, 2)):
        expected = st.eta * sum(float(g @ x) for g in losses) + prior(x)
        assert s(x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_bounded_mode_rejects_large_losses():
    K = box([-1], [1])
    st = make_predictor(K, T=10, seed=0)
    with pytest.raises(DomainError):
        predict_round(st, K, [0.8], 0.5)
    predict_round(st, K, [0.5], 0.5)


def test_prediction_one_step_per_round():
    K = box([-1], [1])
    st = make_predictor(K, T=200, seed=3)
    rng = np.random.default_rng(1)
    for _ in range(200):
        predict_round(st, K, [0.5 * rng.choice([-1.0, 1.0])], 0.5)
    assert st.taus == [1] * 200
    assert math.isfinite(realized_regret(st, K))
