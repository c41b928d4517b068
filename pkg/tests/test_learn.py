import numpy as np
import pytest
from sklearn.base import clone

from fracdyn.basis import BasisExpansion, BasisSpec, eval_basis
from fracdyn.exceptions import IllPosedRegression, InconsistentData, InsufficientExcitation, UsageError
from fracdyn.learn import (
    LCF,
    LDF,
    ExperimentDataset,
    ExperimentPlan,
    FractionalDynamicsLearner,
    LearnedModel,
    estimate_order,
    fit_control_field,
    fit_drift_field,
    generate_dataset,
    integer_order_baseline,
    solve_least_squares,
    solve_normal_equations,
)
from fracdyn.learn.regression import regression_problem
from fracdyn.simulate import step_continuous, step_discrete
from fracdyn.systems import CONTINUOUS, DISCRETE, ControlAffineSystem, get_benchmark

BOX2 = [[-2.0, 2.0], [-4.0, 4.0]]


def in_span_system(kind, alpha, seed=0, L=5, domain=BOX2):
    """System whose drift and control are exact graded-Legendre expansions."""
    rng = np.random.default_rng(seed)
    spec = BasisSpec(L, domain)
    n = spec.n
    B_true = rng.normal(size=(n, L)) * 0.3
    B_true[:, 0] += 2.0                       # keep g away from zero
    F_true = rng.normal(size=(n, L)) * 0.2
    g_exp, f_exp = BasisExpansion(spec, B_true), BasisExpansion(spec, F_true)
    system = ControlAffineSystem(n, 1, f_exp, lambda x: g_exp(x)[..., None], domain, alpha, kind, "in-span")
    return system, spec, B_true, f_exp


@pytest.fixture(scope="module")
def vdp_data():
    s = get_benchmark("vanderpol").system
    return s, generate_dataset(s, ExperimentPlan(20, 10, seed=3), 0.1)


def test_dataset_shapes(vdp_data):
    _, ds = vdp_data
    assert ds.x0.shape == (20, 2)
    for name in ("u0", "u1"):
        assert getattr(ds, name).shape == (20, 11, 1)
    for name in ("x1", "x2", "xt2"):
        assert getattr(ds, name).shape == (20, 11, 2)
    assert ds.x3 is None
    s = get_benchmark("logistic").system
    d = generate_dataset(s, ExperimentPlan(7, 4, seed=0))
    assert d.x3.shape == (7, 5, 1) and d.xt3.shape == (7, 5, 1) and d.u2.shape == (7, 5, 1)


def test_dataset_matches_direct_simulation(vdp_data):
    s, ds = vdp_data
    i, j = 4, 7
    hist = ds.x0[i][None]
    x1 = step_continuous(s, hist, ds.u0[i, j], 0.1)
    x2 = step_continuous(s, np.stack([ds.x0[i], x1]), ds.u1[i, j], 0.1)
    xt2 = step_continuous(s, x1[None], ds.u1[i, j], 0.1)
    np.testing.assert_array_equal(ds.x1[i, j], x1)
    np.testing.assert_array_equal(ds.x2[i, j], x2)
    np.testing.assert_array_equal(ds.xt2[i, j], xt2)


@pytest.mark.parametrize("kind", [CONTINUOUS, DISCRETE])
def test_equilibrium_dataset(kind):
    # zero fields: every state is an equilibrium, so all records equal x0
    s = ControlAffineSystem(2, 1, lambda x: np.zeros_like(x), lambda x: np.zeros(x.shape + (1,)),
                            BOX2, 1.0, kind)
    ds = generate_dataset(s, ExperimentPlan(1, 1, input_range=(0, 0)), 0.1)
    names = ("x1", "x2", "xt2") + (("x3", "xt3") if kind == DISCRETE else ())
    for name in names:
        np.testing.assert_allclose(getattr(ds, name)[0], np.broadcast_to(ds.x0[0], (2, 2)), atol=1e-15)


@pytest.mark.parametrize("name", ["vanderpol", "logistic"])
def test_integer_order_has_no_reset_gap(name):
    s = get_benchmark(name, alpha=1.0).system
    ds = generate_dataset(s, ExperimentPlan(5, 3, seed=1))
    np.testing.assert_allclose(ds.x2, ds.xt2, atol=1e-13)
    if ds.x3 is not None:
        np.testing.assert_allclose(ds.x3, ds.xt3, atol=1e-13)


def test_dataset_persistence(tmp_path):
    s = get_benchmark("ultracap").system
    ds = generate_dataset(s, ExperimentPlan(6, 3, seed=2))
    ds.save(tmp_path / "d")
    back = ExperimentDataset.load(tmp_path / "d")
    for name in ("x0", "u0", "u1", "u2", "x1", "x2", "x3", "xt2", "xt3"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))
    assert back.time_kind == DISCRETE and back.meta["seed"] == 2 and back.active_channel == 1
    assert sorted(p.name for p in (tmp_path / "d").iterdir()) == sorted(
        ["meta.json", "x0.csv", "u0.csv", "u1.csv", "u2.csv", "x1.csv", "x2.csv", "x3.csv", "xt2.csv", "xt3.csv"])


@pytest.mark.parametrize("name,alpha", [("vanderpol", 0.9), ("lotka", 0.98), ("logistic", 0.6),
                                        ("ultracap", 0.2)])
def test_order_recovery_noiseless(name, alpha):
    s = get_benchmark(name).system
    ds = generate_dataset(s, ExperimentPlan(40, 10, seed=0))
    est = estimate_order(ds)
    np.testing.assert_allclose(est.alpha.orders, alpha, atol=1e-8)


def test_logistic_root_selection():
    s = get_benchmark("logistic").system
    est = estimate_order(generate_dataset(s, ExperimentPlan(30, 5, seed=0)))
    np.testing.assert_allclose(est.details["a_minus_a2"], [0.24], atol=1e-10)
    np.testing.assert_allclose(sorted(est.roots[0]), [0.4, 0.6], atol=1e-8)
    assert est.alpha.orders[0] == pytest.approx(0.6, abs=1e-8)
    res = est.root_residuals[0]
    assert res[np.argmin(np.abs(est.roots[0] - 0.6))] < res[np.argmin(np.abs(est.roots[0] - 0.4))]


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_discrete_degenerate_roots(alpha):
    s = get_benchmark("logistic", alpha=alpha).system
    est = estimate_order(generate_dataset(s, ExperimentPlan(20, 4, seed=1)))
    assert est.alpha.orders[0] == pytest.approx(alpha, abs=1e-7)


def test_continuous_integer_order_estimate():
    s = get_benchmark("lotka", alpha=1.0).system
    est = estimate_order(generate_dataset(s, ExperimentPlan(10, 4, seed=1), 0.1))
    np.testing.assert_allclose(est.alpha.orders, 1.0, atol=1e-12)


def _manual(kind, x0, x1, x2, xt2, **extra):
    a = lambda v: np.asarray(v, dtype=float).reshape(1, 1, 1)
    return ExperimentDataset(np.asarray(x0, dtype=float).reshape(1, 1), a(0), a(0), a(x1), a(x2), a(xt2),
                             kind, 0.1, **{k: a(v) for k, v in extra.items()})


def test_single_sample_slope():
    ds = _manual(CONTINUOUS, 0.5, 0.0, 0.05, 0.0)
    assert estimate_order(ds).alpha.orders[0] == pytest.approx(0.9, abs=1e-15)


def test_order_errors():
    with pytest.raises(InsufficientExcitation):
        estimate_order(_manual(CONTINUOUS, 0.5, 0.5, 1.0, 1.0))
    bad = _manual(DISCRETE, 1.0, 0.0, 1.0, 0.0, u2=0, x3=0, xt3=0)    # a - a^2 = 0.5 > 1/4
    with pytest.raises(InconsistentData):
        estimate_order(bad)


@pytest.mark.parametrize("kind,alpha", [(CONTINUOUS, 0.9), (DISCRETE, 0.6)])
def test_in_span_exact_recovery(kind, alpha):
    system, spec, B_true, f_exp = in_span_system(kind, alpha, seed=1)
    ds = generate_dataset(system, ExperimentPlan(50, 10, seed=5), 0.1)
    est = estimate_order(ds)
    np.testing.assert_allclose(est.alpha.orders, alpha, atol=1e-8)
    fit = fit_control_field(ds, spec, est.alpha)
    assert np.max(np.abs(fit.coef - B_true.reshape(-1))) <= 1e-8
    assert fit.residual <= 1e-10
    x, f, expansion = fit_drift_field(ds, fit.expansion, est.alpha, spec)
    assert np.max(np.abs(f - f_exp(x))) <= 1e-8
    assert np.max(np.abs(expansion.coef - f_exp.coef)) <= 1e-8


@pytest.mark.parametrize("kind,alpha", [(CONTINUOUS, 0.85), (DISCRETE, 0.3)])
def test_resimulation_consistency(kind, alpha):
    system, spec, _, _ = in_span_system(kind, alpha, seed=2)
    ds = generate_dataset(system, ExperimentPlan(50, 10, seed=6), 0.1)
    learner = FractionalDynamicsLearner(L=5).fit(ds)
    learned = learner.model_.as_system()
    for i in range(ds.M):
        if kind == CONTINUOUS:
            x1 = step_continuous(learned, ds.x0[i][None], ds.u0[i, 1], 0.1)
        else:
            x1 = step_discrete(learned, ds.x0[i][None], ds.u0[i, 1])
        assert np.max(np.abs(x1 - ds.x1[i, 1])) <= 1e-8
    np.testing.assert_allclose(learner.predict(ds.x0, ds.u0[:, 1]), ds.x1[:, 1], atol=1e-8)
    assert learner.score(ds) == pytest.approx(1.0, abs=1e-12)


def test_residual_matches_reported():
    s = get_benchmark("vanderpol").system
    ds = generate_dataset(s, ExperimentPlan(30, 6, seed=0), 0.1)
    spec = BasisSpec(5, s.domain)
    fit = fit_control_field(ds, spec, 0.9)
    Phi, Y = regression_problem(ds, spec, 0.9)
    assert np.linalg.norm(Y - Phi @ fit.coef) == pytest.approx(fit.residual, rel=1e-12)
    assert fit.condition >= 1.0


def test_solver_equivalence():
    rng = np.random.default_rng(0)
    for _ in range(20):
        Phi = rng.normal(size=(80, 10))
        Y = rng.normal(size=80)
        B, _, cond = solve_least_squares(Phi, Y)
        assert cond <= 1e6
        np.testing.assert_allclose(B, solve_normal_equations(Phi, Y), rtol=1e-8, atol=1e-12)
        B2, *_ = np.linalg.lstsq(Phi, Y, rcond=None)
        np.testing.assert_allclose(B, B2, rtol=1e-8, atol=1e-12)


def test_reference_trial_invariance():
    system, spec, _, _ = in_span_system(CONTINUOUS, 0.9, seed=3)
    ds = generate_dataset(system, ExperimentPlan(40, 8, seed=1), 0.1)
    base = fit_control_field(ds, spec, 0.9, reference=0).coef
    for ref in (3, 8):
        np.testing.assert_allclose(fit_control_field(ds, spec, 0.9, reference=ref).coef, base, atol=1e-8)


def test_ill_posed_regression():
    s = get_benchmark("vanderpol").system
    ds = generate_dataset(s, ExperimentPlan(10, 4, input_range=(0.3, 0.3)), 0.1)
    with pytest.raises(IllPosedRegression):
        fit_control_field(ds, BasisSpec(5, s.domain), 0.9)
    with pytest.raises(IllPosedRegression):
        solve_least_squares(np.ones((10, 2)), np.ones(10))


def test_constant_control_reproduced():
    c = np.array([1.5, -0.7])
    s = ControlAffineSystem(2, 1, lambda x: np.sin(x), lambda x: np.broadcast_to(c[:, None], x.shape + (1,)),
                            BOX2, 0.9, CONTINUOUS)
    ds = generate_dataset(s, ExperimentPlan(30, 5, seed=0), 0.1)
    spec = BasisSpec(3, BOX2)
    fit = fit_control_field(ds, spec, 0.9)
    grid = np.random.default_rng(1).uniform([-2, -4], [2, 4], (50, 2))
    np.testing.assert_allclose(fit.expansion(grid), np.broadcast_to(c, (50, 2)), atol=1e-10)


def test_zero_drift_samples():
    s, spec, _, _ = in_span_system(DISCRETE, 0.7, seed=4)
    zero = ControlAffineSystem(2, 1, lambda x: np.zeros_like(x), s.control, BOX2, 0.7, DISCRETE)
    ds = generate_dataset(zero, ExperimentPlan(30, 5, seed=0))
    fit = fit_control_field(ds, spec, 0.7)
    _, f, _ = fit_drift_field(ds, fit.expansion, 0.7)
    np.testing.assert_allclose(f, 0.0, atol=1e-10)


def test_channel_mismatch_is_usage_error():
    s = get_benchmark("vanderpol").system
    with pytest.raises(UsageError):
        generate_dataset(s, ExperimentPlan(3, 2, active_channel=2), 0.1)
    ds = generate_dataset(s, ExperimentPlan(5, 3), 0.1)
    with pytest.raises(UsageError):
        fit_control_field(ds, BasisSpec(3, [[0, 1]]), 0.9)
    with pytest.raises(UsageError):
        LDF().fit(ds)


def test_integer_baseline():
    s = get_benchmark("logistic", alpha=1.0).system
    ds = generate_dataset(s, ExperimentPlan(60, 8, seed=0))
    spec = BasisSpec(7, s.domain)
    base = integer_order_baseline(ds, spec)
    frac = LDF(L=7).fit(ds).model_
    assert base.alpha_hat.tolist() == [1.0]
    np.testing.assert_allclose(base.g_hat[1].coef, frac.g_hat[1].coef, atol=1e-8)
    np.testing.assert_allclose(base.f_samples, frac.f_samples, atol=1e-8)
    ds6 = generate_dataset(get_benchmark("logistic").system, ExperimentPlan(60, 8, seed=0))
    assert integer_order_baseline(ds6, spec).alpha_hat.tolist() == [1.0]


def test_multi_input_learning():
    rng = np.random.default_rng(7)
    spec = BasisSpec(4, [[-1, 1], [-1, 1]])
    G = [BasisExpansion(spec, rng.normal(size=(2, 4)) + 1.0) for _ in range(2)]
    s = ControlAffineSystem(2, 2, lambda x: -x, lambda x: np.stack([G[0](x), G[1](x)], axis=-1),
                            spec.domain, [0.8, 0.6], CONTINUOUS)
    data = [generate_dataset(s, ExperimentPlan(40, 6, seed=ch, active_channel=ch), 0.1) for ch in (1, 2)]
    learner = LCF(L=4).fit(data)
    np.testing.assert_allclose(learner.alpha_.orders, [0.8, 0.6], atol=1e-8)
    x = rng.uniform(-1, 1, (20, 2))
    np.testing.assert_allclose(learner.model_.control(x), s.g(x), atol=1e-8)


def test_estimator_protocol_and_model_json(tmp_path):
    est = FractionalDynamicsLearner(L=4, alpha=0.9)
    assert clone(est).get_params() == est.get_params()
    s = get_benchmark("vanderpol").system
    ds = generate_dataset(s, ExperimentPlan(25, 5, seed=0), 0.1)
    est.fit(ds)
    path = tmp_path / "m.json"
    est.model_.to_json(path)
    back = LearnedModel.from_json(path)
    x = np.random.default_rng(0).uniform([-2, -4], [2, 4], (10, 2))
    np.testing.assert_array_equal(back.control(x), est.model_.control(x))
    np.testing.assert_array_equal(back.drift(x), est.model_.drift(x))
    assert back.to_json() == est.model_.to_json()
    traj = est.simulate([0.5, 0.5], None, horizon=10)
    assert traj.states.shape == (11, 2)


def test_basis_evaluation_shared_with_learner():
    s = get_benchmark("logistic").system
    ds = generate_dataset(s, ExperimentPlan(40, 5, seed=0))
    m = LDF(L=7).fit(ds).model_
    assert m.basis.L == 7
    x = np.linspace(0, 8, 5)[:, None]
    np.testing.assert_allclose(m.control(x)[:, 0, 0], eval_basis(m.basis, x) @ m.g_hat[1].coef[0])
