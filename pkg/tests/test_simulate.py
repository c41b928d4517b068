import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdyn.exceptions import SimulationDiverged, UsageError
from fracdyn.simulate import (
    SimulationConfig,
    Trajectory,
    reinitialize,
    simulate,
    simulate_continuous,
    simulate_discrete,
    step_continuous,
    step_discrete,
)
from fracdyn.systems import (
    CONTINUOUS,
    DISCRETE,
    ControlAffineSystem,
    get_benchmark,
    make_logistic_map,
    make_van_der_pol,
)

from oracles import brute_discrete_next, psi_product


def test_continuous_first_step_closed_form():
    s = make_van_der_pol().system
    x1 = step_continuous(s, np.array([[1.0, 0.0]]), np.zeros(1), 0.1)
    np.testing.assert_allclose(x1, np.array([1.0, 0.0]) + 0.1**0.9 * np.array([1 / 3, 2.0]), rtol=1e-14)


def test_continuous_euler_single_step():
    s = ControlAffineSystem(1, 1, lambda x: np.zeros_like(x), lambda x: np.ones(x.shape + (1,)),
                            [[-1, 1]], 1.0, CONTINUOUS)
    x1 = step_continuous(s, np.array([[0.0]]), np.array([2.0]), 0.1)
    assert x1[0] == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("name", ["vanderpol", "lotka"])
def test_integer_order_equals_explicit_euler(name):
    s = get_benchmark(name, alpha=1.0).system
    rng = np.random.default_rng(4)
    u = rng.uniform(-1, 1, (30, 1))
    traj = simulate(s, [0.3, -0.2], u, 30, 0.05)
    x = np.array([0.3, -0.2])
    for k in range(30):
        x = x + 0.05 * s.rhs(x, u[k])
        np.testing.assert_allclose(traj.states[k + 1], x, atol=1e-14)


def test_discrete_first_step_and_logistic_example():
    s = make_logistic_map().system
    np.testing.assert_allclose(step_discrete(s, np.array([[0.5]]), np.zeros(1)), [0.55], atol=1e-15)
    rng = np.random.default_rng(2)
    x0, u0 = rng.uniform(0, 1, 1), rng.uniform(-1, 1, 1)
    expected = s.f(x0) + s.g(x0)[:, 0] * u0 + 0.6 * x0
    np.testing.assert_allclose(step_discrete(s, x0[None], u0), expected, atol=1e-15)


def test_discrete_three_steps_by_hand():
    s = make_logistic_map().system
    u = [0.1, -0.2, 0.3]
    traj = simulate_discrete(s, [0.5], np.array(u)[:, None])
    f = lambda x: x * (1 - x)
    g = lambda x: 1 - np.cos(x) * np.exp(3 * (np.sin(x - 0.7 * np.pi) - 1))
    p = [psi_product(0.6, j) for j in range(4)]
    x = [0.5]
    x.append(f(x[0]) + g(x[0]) * u[0] - p[1] * x[0])
    x.append(f(x[1]) + g(x[1]) * u[1] - p[1] * x[1] - p[2] * x[0])
    x.append(f(x[2]) + g(x[2]) * u[2] - p[1] * x[2] - p[2] * x[1] - p[3] * x[0])
    np.testing.assert_allclose(traj.states[:, 0], x, atol=1e-15)


def test_discrete_integer_order_is_memoryless():
    s = make_logistic_map(alpha=1.0).system
    traj = simulate_discrete(s, [0.3], np.full((6, 1), 0.1))
    for k in range(6):
        x = traj.states[k]
        np.testing.assert_allclose(traj.states[k + 1], s.rhs(x, [0.1]) + x, atol=1e-15)


def _random_poly_system(rng, n):
    """Smooth random fields with coefficients held in closures."""
    A = rng.normal(size=(n, n)) * 0.3
    c = rng.normal(size=n) * 0.2
    B = rng.normal(size=(n, 2)) * 0.5
    alphas = rng.uniform(0.05, 1.0, n)

    def f_np(x):
        return np.tanh(x @ A.T) + c * np.cos(x)

    def g_np(x):
        return B * (1 + 0.1 * np.sin(x))[..., None]

    def f_ref(x):
        return [float(np.tanh(sum(A[i, k] * x[k] for k in range(n)))) + c[i] * float(np.cos(x[i])) for i in range(n)]

    def g_ref(x):
        return [[B[i, l] * (1 + 0.1 * float(np.sin(x[i]))) for l in range(2)] for i in range(n)]

    system = ControlAffineSystem(n, 2, f_np, g_np, [[-5, 5]] * n, alphas, DISCRETE)
    return system, f_ref, g_ref, alphas


def test_step_discrete_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(0, 11))
        system, f_ref, g_ref, alphas = _random_poly_system(rng, n)
        history = rng.uniform(-1, 1, (k + 1, n))
        u = rng.uniform(-1, 1, 2)
        got = step_discrete(system, history, u)
        want = brute_discrete_next(f_ref, g_ref, list(alphas), history.tolist(), u.tolist())
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


@pytest.mark.parametrize("name", ["vanderpol", "lotka"])
def test_equilibrium_hold(name):
    s = get_benchmark(name).system
    traj = simulate(s, [0.0, 0.0], None, 25, 0.1)
    np.testing.assert_array_equal(traj.states, 0.0)


def test_memory_changes_trajectory_from_second_step():
    base = make_van_der_pol(alpha=0.9).system
    u = np.random.default_rng(0).uniform(-1, 1, (5, 1))
    a = simulate(base, [0.5, 0.5], u, 5, 0.1).states
    b = simulate(base.with_alpha(1.0), [0.5, 0.5], u, 5, 0.1).states
    assert not np.allclose(a[2:], b[2:])


def _continued_and_reset(system, x0, u, h):
    if system.is_continuous:
        traj = simulate(system, x0, u[:2], 2, h)
        x1 = reinitialize(traj, 1)
        xt2 = step_continuous(system, x1[None], u[1], h)
        return traj.states, xt2, None
    traj = simulate(system, x0, u[:3], 3)
    x2 = reinitialize(traj, 2)
    xt3 = step_discrete(system, x2[None], u[2])
    xt2 = step_discrete(system, reinitialize(traj, 1)[None], u[1])
    return traj.states, xt2, xt3


@pytest.mark.parametrize("name", ["vanderpol", "lotka", "logistic", "ultracap"])
def test_memory_reset_identities(name):
    s = get_benchmark(name).system
    a = s.alpha.orders
    rng = np.random.default_rng(5)
    for _ in range(50):
        x0 = rng.uniform(s.domain[:, 0], s.domain[:, 1])
        u = rng.uniform(-1, 1, (3, 1))
        states, xt2, xt3 = _continued_and_reset(s, x0, u, 0.1)
        tol = 1e-12 * max(1.0, np.max(np.abs(states)))     # logistic states reach ~1e7
        if s.is_continuous:
            np.testing.assert_allclose(states[2] - xt2, (1 - a) * (states[0] - states[1]), atol=tol)
        else:
            np.testing.assert_allclose(states[2] - xt2, 0.5 * (a - a**2) * states[0], atol=tol)
            c3 = (a**3 - 3 * a**2 + 2 * a) / 6
            np.testing.assert_allclose(states[3] - xt3, 0.5 * (a - a**2) * states[1] + c3 * states[0],
                                       atol=tol)


def test_reinitialize_semantics():
    s = make_van_der_pol(alpha=1.0).system
    u = np.array([[0.3], [-0.4]])
    traj = simulate(s, [0.2, 0.1], u, 2, 0.1)
    fresh = reinitialize(traj, 1)
    np.testing.assert_allclose(step_continuous(s, fresh[None], u[1], 0.1), traj.states[2], atol=1e-15)
    np.testing.assert_array_equal(reinitialize(traj, 0), traj.states[0])
    fresh[0] = 99.0
    assert traj.states[1, 0] != 99.0


def test_divergence_reports_step():
    s = ControlAffineSystem(1, 1, lambda x: np.where(x > 2, np.inf, 3 * x), lambda x: np.zeros(x.shape + (1,)),
                            [[0, 1]], 1.0, DISCRETE)
    with pytest.raises(SimulationDiverged) as err:
        simulate_discrete(s, [1.0], None, 10)
    assert err.value.step == 2
    assert err.value.partial.states.shape[0] == 2


def test_config_and_input_validation():
    with pytest.raises(ValueError):
        SimulationConfig(h=0.0)
    with pytest.raises(ValueError):
        SimulationConfig(horizon=0)
    s = make_van_der_pol().system
    with pytest.raises(UsageError):
        simulate_continuous(s, [0, 0], np.zeros((3, 1)), SimulationConfig(horizon=4))
    with pytest.raises(UsageError):
        step_discrete(s, np.zeros((1, 2)), np.zeros(1))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_trajectory_csv_json_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    s = make_van_der_pol(alpha=float(rng.uniform(0.5, 1.0))).system
    traj = simulate(s, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, (15, 1)), 15, 0.1)
    back = Trajectory.from_csv(traj.to_csv(), CONTINUOUS, 0.1)
    np.testing.assert_array_equal(back.states, traj.states)
    np.testing.assert_array_equal(back.inputs, traj.inputs)
    again = Trajectory.from_json(traj.to_json())
    np.testing.assert_array_equal(again.states, traj.states)
    assert again.h == traj.h and again.time_kind == traj.time_kind
    path = tmp_path_factory.mktemp("traj") / "t.csv"
    traj.to_csv(path)
    assert path.read_text() == traj.to_csv()


def test_csv_layout():
    traj = simulate(make_logistic_map().system, [0.5], np.array([[0.1], [0.2]]), 2)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "k,t,x1,u1"
    assert len(lines) == 4
    assert lines[-1].endswith(",")


def test_batched_simulation_matches_single_runs():
    s = make_logistic_map().system
    rng = np.random.default_rng(9)
    x0 = rng.uniform(0, 1, (4, 1))
    u = rng.uniform(-0.5, 0.5, (6, 4, 1))
    batch = simulate_discrete(s, x0, u, 6).states
    for b in range(4):
        single = simulate_discrete(s, x0[b], u[:, b], 6).states
        np.testing.assert_array_equal(batch[:, b], single)
