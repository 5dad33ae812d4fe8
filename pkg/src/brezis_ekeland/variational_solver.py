"""Minimization of the discrete Brezis-Ekeland functional and its certificate.

The state is eliminated through the explicit recursion, so the functional is
a convex function of the flux trajectory ``w`` alone:

    J(w) = sum_k dt sum_i q_i [phi(ybar_k) + phi*(w_k)]
           + |y_K|^2_{V'} / 2 - |y_0|^2_{V'} / 2 - sum_k dt <ybar_k, A^{-1} f_k>.

By the exact discrete energy identity this equals the quadrature of the
pointwise Fenchel gap ``phi(ybar) + phi*(w) - ybar w`` for every ``w``.
"""

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import vdual_inner
from .errors import LineSearchError
from .potentials import PotentialSpec, RegularizedPotential, check_coercivity, check_symmetry
from .state_dynamics import (ProblemData, Trajectory, _gradient, coefficient_table,
                             constraint_residual, integrate_state, midpoint_states)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Continuation schedule and inner-solver controls.

    ``grad_tol`` bounds the preconditioned gradient norm ``sqrt(g^T P g)``,
    which is about ``sqrt(2 (J - min J))``.
    """

    lambda_schedule: tuple = (1e-1, 1e-2, 1e-3)
    sigma_schedule: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    grad_tol: float = 1e-7
    gap_tol: float = 1e-6
    max_inner_iters: int = 500
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    warm_start: bool = True
    refresh_every: int = 10
    max_cg_iters: int = 20

    def __post_init__(self):
        for name in ("lambda_schedule", "sigma_schedule"):
            s = np.asarray(getattr(self, name), float)
            if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) >= 0):
                raise ValueError(f"{name} must be strictly decreasing and positive")
        if not (self.grad_tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_cg_iters < 1:
            raise ValueError("iteration limits must be at least 1")
        if not (0 < self.shrink < 1 and 0 < self.armijo < 1 and self.initial_step > 0):
            raise ValueError("invalid backtracking parameters")

    @property
    def stages(self):
        # sigma decreases inside each lambda level
        return [(lam, sig) for lam in self.lambda_schedule for sig in self.sigma_schedule]


def _integrand_values(pot, ybar, w, coeff):
    if isinstance(pot, RegularizedPotential):
        v, _ = pot.value_and_derivative_a(ybar, coeff)
        s, _ = pot.conjugate_a(w, coeff)
    else:
        v = pot.j_a(ybar, coeff)
        s = pot.jstar_a(w, coeff)
    return v, s


def _spec_of(pot):
    return pot.base if isinstance(pot, RegularizedPotential) else pot


def eval_J(w, data: ProblemData, reg, coeff=None):
    """Functional value through the explicit formula (potential part plus dual-norm terms).

    ``reg`` is a ``RegularizedPotential`` or, for the unregularized value, a
    ``PotentialSpec``.
    """
    if coeff is None:
        coeff = coefficient_table(_spec_of(reg), data)
    traj = integrate_state(w, data)
    ybar = midpoint_states(traj)
    v, s = _integrand_values(reg, ybar, traj.w, coeff)
    q, dt = data.grid.weights, data.dt
    pot = dt * float(np.sum(q * (v + s)))
    yK, y0 = traj.y[-1], data.y0
    energy = 0.5 * vdual_inner(data.op, yK, yK) - 0.5 * vdual_inner(data.op, y0, y0)
    return pot + energy - dt * float(np.sum(q * ybar * data.g))


def gap_integrand(traj: Trajectory, data: ProblemData, pot, coeff=None):
    """Pointwise ``phi(ybar) + phi*(w) - ybar w`` at every step and node, shape ``(K, n)``."""
    if coeff is None:
        coeff = coefficient_table(_spec_of(pot), data)
    ybar = midpoint_states(traj)
    v, s = _integrand_values(pot, ybar, traj.w, coeff)
    with np.errstate(invalid="ignore"):
        out = v + s - ybar * traj.w
    return np.where(np.isinf(s), np.inf, out)


@dataclass(frozen=True)
class GapValue:
    """Quadrature of the pointwise gap with the location of its largest entry."""

    value: float
    worst_step: int
    worst_node: int
    worst_integrand: float

    def __float__(self):
        return self.value


def pointwise_gap(traj: Trajectory, data: ProblemData, pot, coeff=None) -> GapValue:
    """Space-time quadrature of the pointwise Fenchel gap.

    With a ``PotentialSpec`` the unregularized ``j`` and ``j*`` are used.  A
    flux outside the domain of ``j*`` yields ``+inf`` with its location.
    """
    gi = gap_integrand(traj, data, pot, coeff)
    k, i = np.unravel_index(int(np.argmax(gi)), gi.shape)
    total = data.dt * float(np.sum(data.grid.weights * gi))
    return GapValue(total, int(k) + 1, int(i), float(gi[k, i]))


def energy_identity_sides(traj: Trajectory, data: ProblemData):
    """Both sides of the discrete energy identity.

    ``lhs = -sum_k dt <ybar_k, w_k>``,
    ``rhs = |y_K|^2_{V'}/2 - |y_0|^2_{V'}/2 - sum_k dt <ybar_k, A^{-1} f_k>``.
    """
    q, dt = data.grid.weights, data.dt
    ybar = midpoint_states(traj)
    lhs = -dt * float(np.sum(q * ybar * traj.w))
    yK, y0 = traj.y[-1], traj.y[0]
    rhs = (0.5 * vdual_inner(data.op, yK, yK) - 0.5 * vdual_inner(data.op, y0, y0)
           - dt * float(np.sum(q * ybar * data.g)))
    return lhs, rhs


def energy_identity_residual(traj: Trajectory, data: ProblemData):
    """``|lhs - rhs| / (1 + |rhs|)`` of the discrete energy identity."""
    lhs, rhs = energy_identity_sides(traj, data)
    return abs(lhs - rhs) / (1.0 + abs(rhs))


def inclusion_violation(traj: Trajectory, data: ProblemData, spec: PotentialSpec, coeff=None):
    """Largest distance of ``w_k`` to the interval ``beta(ybar_k)``."""
    if coeff is None:
        coeff = coefficient_table(spec, data)
    lo, hi = spec.bounds_a(midpoint_states(traj), coeff)
    d = np.maximum(np.maximum(lo - traj.w, traj.w - hi), 0.0)
    return float(np.max(d))


class _Objective:
    """Gap-form value, gradient and Gauss-Newton preconditioner for one stage."""

    def __init__(self, data, reg, coeff):
        self.data, self.reg, self.coeff = data, reg, coeff
        self.n_values = 0
        self.n_gradients = 0

    def value(self, w):
        traj = integrate_state(w, self.data)
        gi = gap_integrand(traj, self.data, self.reg, self.coeff)
        self.n_values += 1
        q, dt = self.data.grid.weights, self.data.dt
        val = dt * float(np.sum(q * gi))
        # round-off level of the sum
        noise = 64.0 * _EPS * dt * float(np.sum(q * np.abs(gi)) + np.sum(q * np.abs(midpoint_states(traj) * w)))
        return val, noise, traj

    def gradient(self, traj):
        self.n_gradients += 1
        return _gradient(traj, self.data, self.reg, self.coeff)

    def _ybar_map(self, v):
        # linearized midpoint states: L v
        dt, A = self.data.dt, self.data.op.matrix
        dy = -dt * np.cumsum((A @ v.T).T, axis=0)
        out = 0.5 * dy
        out[1:] += 0.5 * dy[:-1]
        return out

    def _ybar_map_t(self, a):
        # transpose of the midpoint map (Euclidean pairing)
        p = 0.5 * a
        p[:-1] += 0.5 * a[1:]
        P = np.cumsum(p[::-1], axis=0)[::-1]
        q = self.data.grid.weights
        return -self.data.dt * (self.data.op.stiffness @ (P / q).T).T

    def hessian(self, traj):
        """Generalized Hessian-vector product of the gap-form value."""
        q, dt = self.data.grid.weights, self.data.dt
        cy = self.reg.slope_a(midpoint_states(traj), self.coeff)
        _, rstar = self.reg.conjugate_a(traj.w, self.coeff)
        dw = 1.0 / self.reg.slope_a(rstar, self.coeff)

        def apply(v):
            Lv = self._ybar_map(v)
            return dt * (self._ybar_map_t(q * (cy * Lv - v)) + q * (dw * v - Lv))

        return apply

    def preconditioner(self, traj):
        """Inverse Gauss-Newton Hessian ``P = JR^{-1} C (dt M)^{-1} JR^{-T}``.

        ``R(w) = w - phi'(ybar(w))`` vanishes at the minimizer and the
        functional is ``~ sum dt q R^2 / (2 C)`` with ``C = phi''(ybar)``.  Both
        triangular sweeps factor ``diag(q / C_k) + (dt / 2) S`` once per step.
        """
        data = self.data
        q, dt, S = data.grid.weights, data.dt, data.op.stiffness
        C = self.reg.slope_a(midpoint_states(traj), self.coeff)
        C = np.broadcast_to(C, traj.w.shape)
        lus = [splu((sp.diags(q / Ck) + 0.5 * dt * S).tocsc()) for Ck in C]
        K = traj.K

        def apply(g):
            # backward sweep: JR^{-T} g
            v = np.empty_like(g)
            V = np.zeros(g.shape[1])
            for m in range(K - 1, -1, -1):
                z = lus[m].solve(g[m] - dt * (S @ (V / q)))
                v[m] = (q / C[m]) * z
                V += q * z
            v *= C / (dt * q)
            # forward sweep: JR^{-1} v
            u = np.empty_like(v)
            U = np.zeros(v.shape[1])
            for k in range(K):
                u[k] = lus[k].solve((q / C[k]) * v[k] - dt * (S @ U))
                U += u[k]
            return u

        return apply


@dataclass
class InnerStats:
    iterations: int
    converged: bool
    grad_norm: float
    values: list = field(repr=False)
    cg_iterations: int = 0
    stalled: bool = False
    n_values: int = 0
    n_gradients: int = 0


def _newton_direction(H, P, g, max_cg):
    """Truncated preconditioned CG on ``H d = -g``.

    The first iterate is the preconditioned gradient step ``-P g`` (up to
    scaling); CG stops on the usual forcing term or on nonpositive curvature.
    """
    x = np.zeros_like(g)
    r = -g
    z = P(r)
    rz = float(np.sum(r * z))
    g_norm = np.sqrt(max(rz, 0.0))
    eta = min(0.5, np.sqrt(g_norm))
    d = z.copy()
    for it in range(1, max_cg + 1):
        Hd = H(d)
        curv = float(np.sum(d * Hd))
        if not curv > 0:
            return (x if it > 1 else z), it
        alpha = rz / curv
        x += alpha * d
        r -= alpha * Hd
        z = P(r)
        rz_new = float(np.sum(r * z))
        if np.sqrt(max(rz_new, 0.0)) <= eta * g_norm:
            return x, it
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, max_cg


def inner_minimize(w_init, data: ProblemData, reg: RegularizedPotential, cfg: SolverConfig,
                   coeff=None):
    """Preconditioned descent with Armijo backtracking on the regularized functional.

    Directions come from a few conjugate-gradient steps on the generalized
    Hessian, preconditioned by the inverse Gauss-Newton Hessian ``P``.  With
    one CG step this is preconditioned gradient descent; more steps
    accelerate it to inexact Newton.  Accepted iterates strictly decrease the
    value.  The exit test is ``sqrt(g^T P g) <= cfg.grad_tol``.

    Returns
    -------
    w : ndarray
    traj : Trajectory
    stats : InnerStats

    Raises
    ------
    LineSearchError
        If backtracking cannot decrease the value above its round-off level.
    """
    if not reg.sigma > 0:
        raise ValueError("inner_minimize needs sigma > 0")
    if coeff is None:
        coeff = coefficient_table(reg.base, data)
    obj = _Objective(data, reg, coeff)
    w = np.array(w_init, float)
    f, noise, traj = obj.value(w)
    values = [f]
    stalled, converged, gnorm = False, False, np.inf
    it = cg_total = 0
    P = None
    while True:
        g = obj.gradient(traj)
        if P is None or it % cfg.refresh_every == 0:
            P = obj.preconditioner(traj)
        Pg = P(g)
        gnorm = float(np.sqrt(max(np.sum(g * Pg), 0.0)))
        if gnorm <= cfg.grad_tol:
            converged = True
            break
        if it >= cfg.max_inner_iters:
            break
        it += 1
        d, n_cg = _newton_direction(obj.hessian(traj), P, g, cfg.max_cg_iters)
        cg_total += n_cg
        step = _backtrack(obj, w, f, g, d, cfg)
        if step is None and n_cg > 1:
            step = _backtrack(obj, w, f, g, -Pg, cfg)
        if step is None:
            # no decrease above round-off: accept the noise floor if the
            # predicted decrease is itself at round-off level
            if 0.5 * gnorm ** 2 <= 1e3 * noise:
                stalled = converged = True
                break
            raise LineSearchError(
                f"backtracking failed at iteration {it}: value {f:.6e}, "
                f"preconditioned gradient norm {gnorm:.3e}")
        f, noise, traj = step
        w = traj.w.copy()
        values.append(f)
    stats = InnerStats(it, converged, gnorm, values, cg_total, stalled, obj.n_values, obj.n_gradients)
    return w, traj, stats


def _backtrack(obj, x, fx, gx, d, cfg):
    slope = float(np.sum(gx * d))
    if not slope < 0:
        return None
    t = cfg.initial_step
    while t >= 1e-12:
        fn, nn, tn = obj.value(x + t * d)
        if fn <= fx + cfg.armijo * t * slope and fn < fx:
            return fn, nn, tn
        t *= cfg.shrink
    return None


@dataclass
class StageRecord:
    index: int
    lam: float
    sigma: float
    iterations: int
    converged: bool
    stalled: bool
    regularized_J: float
    gap: float
    grad_norm: float
    cg_iterations: int


@dataclass
class SolveReport:
    """Outcome of a continuation solve; certificate values use the unregularized potential."""

    J: float
    gap: float
    gap_location: tuple
    energy_residual: float
    inclusion_violation: float
    constraint_residual: float
    stages: list
    stage_seconds: list
    verdict: bool
    converged: bool
    failed_stage: Optional[int] = None
    warnings: list = field(default_factory=list)
    short_circuit: bool = False

    @property
    def stage_gaps(self):
        return [s.gap for s in self.stages]

    @property
    def total_iterations(self):
        return sum(s.iterations for s in self.stages)


def _zero_is_stationary(spec, coeff):
    lo, hi = spec.bounds_a(np.zeros(np.shape(coeff)), coeff)
    return bool(np.all(lo <= 0.0) and np.all(hi >= 0.0))


def _assumption_warnings(spec):
    out = []
    if not check_coercivity(spec).weakly_coercive:
        out.append("potential is not weakly coercive on the probe ladder")
    if not check_symmetry(spec, 10.0).holds:
        out.append("potential fails the symmetry probe with gamma1=1, gamma2=0")
    return out


def certify(traj: Trajectory, data: ProblemData, spec: PotentialSpec, coeff=None):
    """Unregularized certificate values of a trajectory."""
    if coeff is None:
        coeff = coefficient_table(spec, data)
    gap = pointwise_gap(traj, data, spec, coeff)
    return dict(
        J=eval_J(traj.w, data, spec, coeff) if np.isfinite(gap.value) else np.inf,
        gap=gap.value,
        gap_location=(gap.worst_step, gap.worst_node),
        energy_residual=energy_identity_residual(traj, data),
        inclusion_violation=inclusion_violation(traj, data, spec, coeff),
        constraint_residual=constraint_residual(traj, data),
    )


def continuation_solve(data: ProblemData, spec: PotentialSpec, cfg: SolverConfig = SolverConfig()):
    """Solve the regularized problems along the ``(lambda, sigma)`` schedule.

    Each stage starts from the previous minimizer (or from zero without warm
    starts).  The final certificate uses the unregularized potential; the
    verdict is ``gap <= cfg.gap_tol``.  A stage that hits the iteration cap
    ends the continuation and the report carries its index.

    Returns
    -------
    Trajectory, SolveReport
    """
    coeff = coefficient_table(spec, data)
    notes = _assumption_warnings(spec)
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    zero = np.zeros_like(data.f)
    if data.is_zero and _zero_is_stationary(spec, coeff):
        traj = integrate_state(zero, data)
        cert = certify(traj, data, spec, coeff)
        return traj, SolveReport(**cert, stages=[], stage_seconds=[],
                                 verdict=bool(cert["gap"] <= cfg.gap_tol), converged=True,
                                 warnings=notes, short_circuit=True)
    w = zero
    stages, seconds = [], []
    failed = None
    traj = integrate_state(w, data)
    for idx, (lam, sig) in enumerate(cfg.stages):
        reg = RegularizedPotential(spec, lam, sig)
        start = w if cfg.warm_start else zero
        t0 = time.perf_counter()
        w, traj, st = inner_minimize(start, data, reg, cfg, coeff)
        seconds.append(time.perf_counter() - t0)
        gap = pointwise_gap(traj, data, spec, coeff).value
        stages.append(StageRecord(idx, lam, sig, st.iterations, st.converged, st.stalled,
                                  st.values[-1], gap, st.grad_norm, st.cg_iterations))
        if not st.converged:
            failed = idx
            break
    cert = certify(traj, data, spec, coeff)
    report = SolveReport(**cert, stages=stages, stage_seconds=seconds,
                         verdict=bool(cert["gap"] <= cfg.gap_tol), converged=failed is None,
                         failed_stage=failed, warnings=notes)
    return traj, report


@dataclass(frozen=True)
class VerifyTolerances:
    constraint: float = 1e-8
    energy: float = 1e-9
    gap: float = 1e-8


@dataclass(frozen=True)
class WeakSolutionVerdict:
    constraint_residual: float
    energy_residual: float
    gap: float
    box_ok: Optional[bool]
    y_min: float
    y_max: float
    verdict: bool


def verify_weak_solution(traj: Trajectory, data: ProblemData, spec: PotentialSpec,
                         tolerances: VerifyTolerances = VerifyTolerances()) -> WeakSolutionVerdict:
    """Check feasibility, the energy identity and the gap of a candidate solution.

    The verdict combines the first three checks; the optional box is reported
    on its own.
    """
    cr = constraint_residual(traj, data)
    er = energy_identity_residual(traj, data)
    gap = pointwise_gap(traj, data, spec).value
    y_min, y_max = float(np.min(traj.y)), float(np.max(traj.y))
    box_ok = None
    if data.box is not None:
        box_ok = bool(data.box[0] <= y_min and y_max <= data.box[1])
    ok = cr <= tolerances.constraint and er <= tolerances.energy and gap <= tolerances.gap
    return WeakSolutionVerdict(cr, er, gap, box_ok, y_min, y_max, bool(ok))
