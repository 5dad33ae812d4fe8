"""Implicit Euler on the Yosida-regularized equation, used as an independent oracle.

Each step solves ``M y + dt S beta_lam(t_k, y) = M (y_prev + dt f_k)`` by damped
Newton with Jacobian ``M + dt S diag(beta_lam')``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .discretization import vdual_inner
from .errors import NewtonError
from .potentials import PotentialSpec, RegularizedPotential
from .state_dynamics import ProblemData, Trajectory, coefficient_table


@dataclass(frozen=True)
class NewtonConfig:
    """Damped Newton controls; the residual is measured in nodal (max) form."""

    tol: float = 1e-10
    max_iter: int = 100
    min_damping: float = 2.0 ** -30
    max_damping: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (0 < self.min_damping <= self.max_damping <= 1):
            raise ValueError("damping bounds must satisfy 0 < min <= max <= 1")


def _coeff_row(coeff, k):
    c = np.asarray(coeff)
    return c[k - 1] if c.ndim == 2 else c


def implicit_euler_step(y_prev, data: ProblemData, spec: PotentialSpec, lam, k,
                        cfg: NewtonConfig = NewtonConfig(), coeff=None):
    """Advance one implicit step ``k`` (1-based) from ``y_prev``.

    Returns
    -------
    y_next, w_next : ndarray
        ``w_next = beta_lam(t_k, y_next)``.

    Raises
    ------
    NewtonError
        On nonconvergence, carrying the residual history.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    reg = RegularizedPotential(spec, lam)
    if coeff is None:
        coeff = coefficient_table(spec, data)
    a = _coeff_row(coeff, k)
    q, dt, S = data.grid.weights, data.dt, data.op.stiffness
    rhs = q * (np.asarray(y_prev, float) + dt * data.f[k - 1])

    def residual(y):
        _, b = reg.value_and_derivative_a(y, a)
        F = q * y + dt * (S @ b) - rhs
        return F, b, float(np.max(np.abs(F / q)))

    y = np.array(y_prev, float)
    F, b, res = residual(y)
    history = [res]
    for _ in range(cfg.max_iter):
        if res <= cfg.tol:
            return y, b
        Jac = sp.diags(q) + dt * (S @ sp.diags(reg.slope_a(y, a)))
        dy = spsolve(Jac.tocsc(), -F)
        t = cfg.max_damping
        while True:
            y_try = y + t * dy
            F_try, b_try, res_try = residual(y_try)
            if res_try < res:
                break
            t *= 0.5
            if t < cfg.min_damping:
                raise NewtonError(f"damping underflow at step {k} (residual {res:.3e})", history)
        y, F, b, res = y_try, F_try, b_try, res_try
        history.append(res)
    if res <= cfg.tol:
        return y, b
    raise NewtonError(f"Newton did not converge at step {k} (residual {res:.3e})", history)


def solve_reference(data: ProblemData, spec: PotentialSpec, lam=1e-4,
                    cfg: NewtonConfig = NewtonConfig(), y0=None) -> Trajectory:
    """March all ``K`` implicit steps; same layout as the variational output."""
    coeff = coefficient_table(spec, data)
    y = np.empty((data.K + 1, data.grid.n_nodes))
    w = np.empty((data.K, data.grid.n_nodes))
    y[0] = data.y0 if y0 is None else np.asarray(y0, float)
    for k in range(1, data.K + 1):
        y[k], w[k - 1] = implicit_euler_step(y[k - 1], data, spec, lam, k, cfg, coeff)
    return Trajectory(y, w)


def contraction_check(data: ProblemData, spec: PotentialSpec, lam, y0_a, y0_b,
                      cfg: NewtonConfig = NewtonConfig()):
    """Dual-norm distances ``d_k = |y_a[k] - y_b[k]|_{V'}``, ``k = 0..K``, of two runs."""
    ta = solve_reference(data, spec, lam, cfg, y0=y0_a)
    tb = solve_reference(data, spec, lam, cfg, y0=y0_b)
    diff = ta.y - tb.y
    return np.sqrt(np.maximum([vdual_inner(data.op, d, d) for d in diff], 0.0))


def step_differences(traj_a: Trajectory, traj_b: Trajectory, data: ProblemData):
    """Per-level weighted L2 and dual-norm differences, arrays over ``k = 0..K``."""
    diff = traj_a.y - traj_b.y
    l2 = np.sqrt(np.sum(data.grid.weights * diff * diff, axis=1))
    vd = np.sqrt(np.maximum([vdual_inner(data.op, d, d) for d in diff], 0.0))
    return l2, vd


def relative_l2q_distance(traj_a: Trajectory, traj_b: Trajectory, data: ProblemData):
    """``|y_a - y_b|_{L2(Q)} / |y_b|_{L2(Q)}`` over the levels ``k = 1..K``."""
    q, dt = data.grid.weights, data.dt
    num = dt * np.sum(q * (traj_a.y[1:] - traj_b.y[1:]) ** 2)
    den = dt * np.sum(q * traj_b.y[1:] ** 2)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num / den))
