import numpy as np
import pytest

from brezis_ekeland.discretization import apply_A, build_grid, build_robin_operator
from brezis_ekeland.potentials import CoefficientField, PotentialSpec, RegularizedPotential
from brezis_ekeland.state_dynamics import (FieldPreset, ProblemData, Trajectory,
                                           adjoint_gradient, coefficient_table,
                                           constraint_residual, integrate_state, make_problem,
                                           midpoint_states)
from brezis_ekeland.variational_solver import eval_J

from conftest import catalog, small_problem


def loop_integrate(w, data):
    """Step-by-step dense recursion, independent of the vectorized one."""
    A = np.diag(1 / data.grid.weights) @ data.op.stiffness.toarray()
    y = [data.y0.copy()]
    for k in range(data.K):
        y.append(y[-1] + data.dt * (data.f[k] - A @ w[k]))
    return np.array(y)


def test_field_presets():
    x = np.array([[0.0], [0.5], [1.0]])
    assert FieldPreset("constant", 2.0).evaluate(0.3, x).tolist() == [2.0, 2.0, 2.0]
    step = FieldPreset("step_in_time", 1.5, switch_time=0.05)
    assert step.evaluate(0.04, x).tolist() == [0.0] * 3
    assert step.evaluate(0.05, x).tolist() == [1.5] * 3
    g = FieldPreset("gaussian_bump", 1.0, (0.5,), 0.25).evaluate(0.0, x)
    assert g.tolist() == pytest.approx([np.exp(-2.0), 1.0, np.exp(-2.0)])
    with pytest.raises(ValueError):
        FieldPreset("sine")


def test_make_problem_sampling():
    data = small_problem(cells=8, K=4, T=0.2)
    assert data.f.shape == (4, 9) and data.y0.shape == (9,)
    assert data.dt == pytest.approx(0.05)
    assert data.times.tolist() == pytest.approx([0.05, 0.1, 0.15, 0.2])
    assert np.allclose(apply_A(data.op, data.g), data.f)


def test_problem_validation():
    g = build_grid(1, [1.0], [4])
    op = build_robin_operator(g, 1.0)
    with pytest.raises(ValueError):
        ProblemData(g, op, 0.0, 2, np.zeros((2, 5)), np.zeros(5))
    with pytest.raises(ValueError):
        ProblemData(g, op, 1.0, 2, np.zeros((3, 5)), np.zeros(5))
    with pytest.raises(ValueError):
        ProblemData(g, op, 1.0, 2, np.full((2, 5), np.nan), np.zeros(5))
    with pytest.raises(ValueError):
        ProblemData(g, op, 1.0, 2, np.zeros((2, 5)), np.zeros(5), box=(1.0, 0.0))
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 5)), np.zeros((3, 5)))


def test_integrate_state_matches_loop(small):
    w = np.random.default_rng(0).normal(size=small.f.shape)
    traj = integrate_state(w, small)
    assert np.allclose(traj.y, loop_integrate(w, small), atol=1e-12)
    assert constraint_residual(traj, small) < 1e-10
    assert np.allclose(midpoint_states(traj)[0], 0.5 * (traj.y[0] + traj.y[1]))


def test_integrate_state_shape_check(small):
    with pytest.raises(ValueError):
        integrate_state(np.zeros((small.K + 1, small.grid.n_nodes)), small)


def test_coefficient_table_shapes(small):
    assert np.ndim(coefficient_table(PotentialSpec("log_type"), small)) == 0
    ramp = PotentialSpec("log_type", coefficient=CoefficientField("time_ramp", 1.0, 1.0, small.T))
    tab = coefficient_table(ramp, small)
    assert tab.shape == (small.K, small.grid.n_nodes)
    assert tab[-1, 0] == pytest.approx(2.0)
    assert tab[0, 0] == pytest.approx(1.0 + 1.0 / small.K)


def test_functional_equals_gap_form(small):
    # J equals the space-time quadrature of phi(ybar) + phi*(w) - ybar w, by the energy identity
    reg = RegularizedPotential(catalog()["log"], 0.05, 0.05)
    w = np.random.default_rng(1).normal(size=small.f.shape)
    traj = integrate_state(w, small)
    yb = midpoint_states(traj)
    phi, _ = reg.value_and_derivative_a(yb, 1.0)
    phis, _ = reg.conjugate_a(w, 1.0)
    gap_form = small.dt * np.sum(small.grid.weights * (phi + phis - yb * w))
    assert eval_J(w, small, reg) == pytest.approx(gap_form, rel=1e-10)
    assert gap_form >= 0


@pytest.mark.parametrize("name", list(catalog()))
def test_adjoint_gradient_central_differences(name):
    data = small_problem(cells=8, K=4)
    reg = RegularizedPotential(catalog()[name], 1e-2, 1e-2)
    w = np.random.default_rng(3).normal(size=data.f.shape)
    g = adjoint_gradient(w, data, reg)
    fd = np.empty_like(w)
    h = 1e-6
    for idx in np.ndindex(*w.shape):
        e = np.zeros_like(w)
        e[idx] = h
        fd[idx] = (eval_J(w + e, data, reg) - eval_J(w - e, data, reg)) / (2 * h)
    assert np.linalg.norm(fd - g) / np.linalg.norm(fd) < 1e-5


def test_gradient_needs_sigma(small):
    with pytest.raises(ValueError):
        adjoint_gradient(np.zeros(small.f.shape), small, RegularizedPotential(catalog()["quadratic"], 0.1, 0.0))


def test_state_examples(small):
    zero = np.zeros(small.f.shape)
    data0 = ProblemData(small.grid, small.op, small.T, small.K, zero, small.y0)
    assert np.all(integrate_state(zero, data0).y == small.y0)
    # stationary balance: w = A^{-1} f keeps y at y0
    traj = integrate_state(small.g, small)
    assert np.allclose(traj.y, small.y0, atol=1e-12)
    # one unit step with A w = g gives y0 - g
    g = np.random.default_rng(4).normal(size=small.grid.n_nodes)
    one = ProblemData(small.grid, small.op, 1.0, 1, np.zeros((1, g.size)), small.y0)
    from brezis_ekeland.discretization import solve_A
    y = integrate_state(solve_A(small.op, g)[None, :], one).y
    assert np.allclose(y[1], small.y0 - g, atol=1e-10)


def test_midpoint_examples():
    y = np.array([[0.0, 1.0], [2.0, 1.0]])
    assert midpoint_states(Trajectory(y, np.zeros((1, 2)))).tolist() == [[1.0, 1.0]]


def test_constraint_residual_examples(small):
    zero = np.zeros(small.f.shape)
    data0 = ProblemData(small.grid, small.op, small.T, small.K, zero, small.y0)
    assert constraint_residual(integrate_state(zero, data0), data0) == 0.0
    traj = integrate_state(np.random.default_rng(5).normal(size=small.f.shape), small)
    assert constraint_residual(traj, small) < 1e-12 * max(1.0, np.abs(traj.y).max() / small.dt)
    res = []
    for eps in (1e-3, 2e-3):
        y = traj.y.copy()
        y[3, 5] += eps
        res.append(constraint_residual(Trajectory(y, traj.w), small))
    # the residual is affine in the perturbation
    assert res[1] == pytest.approx(2 * res[0], rel=1e-6)
    assert res[0] == pytest.approx(1e-3 / small.dt * np.sqrt(small.grid.weights[5]), rel=1e-6)


def test_gradient_zero_at_zero_data():
    base = small_problem(f_amp=0.0)
    data = ProblemData(base.grid, base.op, base.T, base.K, base.f, np.zeros_like(base.y0))
    for name in ("quadratic", "log", "exp", "abs", "power3"):
        g = adjoint_gradient(np.zeros(data.f.shape), data, RegularizedPotential(catalog()[name], 0.1, 0.1))
        assert not np.any(g)


def test_gradient_vanishes_at_quadratic_minimizer():
    data = small_problem(cells=16, K=8)
    reg = RegularizedPotential(PotentialSpec("quadratic"), 0.1, 0.1)
    n = data.f.size
    b = adjoint_gradient(np.zeros(data.f.shape), data, reg).ravel()
    H = np.column_stack([adjoint_gradient(e.reshape(data.f.shape), data, reg).ravel() - b for e in np.eye(n)])
    w = np.linalg.solve(0.5 * (H + H.T), -b).reshape(data.f.shape)
    assert np.linalg.norm(adjoint_gradient(w, data, reg)) < 1e-8
