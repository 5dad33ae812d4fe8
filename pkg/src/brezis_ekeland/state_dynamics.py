"""Discrete state equation ``dy/dt + A w = f`` and the adjoint gradient.

Time stepping is the backward difference

    y[k] = y[k-1] + dt * (f[k] - A w[k]),   k = 1..K,

with the potential evaluated at the midpoints ``ybar[k] = (y[k-1] + y[k]) / 2``.
With this pairing the energy balance in the dual norm telescopes exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .discretization import Grid, RobinOperator, apply_A, solve_A

FIELD_KINDS = ("constant", "gaussian_bump", "step_in_time")


@dataclass(frozen=True)
class FieldPreset:
    """Preset space-time field.

    ``constant``: ``amplitude`` everywhere.
    ``gaussian_bump``: ``amplitude * exp(-|x - center|^2 / (2 width^2))``.
    ``step_in_time``: ``amplitude`` for ``t >= switch_time``, zero before.
    """

    kind: str = "constant"
    amplitude: float = 0.0
    center: tuple = (0.5,)
    width: float = 0.1
    switch_time: float = 0.0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field preset {self.kind!r}")
        if not self.width > 0:
            raise ValueError("width must be positive")

    def evaluate(self, t, coords):
        coords = np.asarray(coords, float)
        n = coords.shape[0]
        if self.kind == "constant":
            return np.full(n, float(self.amplitude))
        if self.kind == "step_in_time":
            return np.full(n, float(self.amplitude) if t >= self.switch_time else 0.0)
        c = np.resize(np.asarray(self.center, float), coords.shape[1])
        d2 = np.sum((coords - c) ** 2, axis=1)
        return self.amplitude * np.exp(-d2 / (2.0 * self.width ** 2))

    @property
    def is_zero(self):
        return self.amplitude == 0.0


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Discrete data of the evolution problem.

    Attributes
    ----------
    f : ndarray, shape (K, n)
        Source sampled at ``t_k = k dt``, ``k = 1..K``.
    y0 : ndarray, shape (n,)
    box : tuple or None
        Optional state bounds ``(y_m, y_M)``; verified, never enforced.
    """

    grid: Grid
    op: RobinOperator
    T: float
    K: int
    f: np.ndarray = field(repr=False)
    y0: np.ndarray = field(repr=False)
    box: Optional[tuple] = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        n = self.grid.n_nodes
        if self.f.shape != (self.K, n) or self.y0.shape != (n,):
            raise ValueError("f must have shape (K, n) and y0 shape (n,)")
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.y0))):
            raise ValueError("f and y0 must be finite")
        if self.box is not None and not self.box[0] < self.box[1]:
            raise ValueError("box needs y_m < y_M")

    @property
    def dt(self):
        return self.T / self.K

    @property
    def times(self):
        """Step times ``t_1..t_K``."""
        return self.dt * np.arange(1, self.K + 1)

    @cached_property
    def g(self):
        """``A^{-1} f[k]`` for every step."""
        return solve_A(self.op, self.f)

    @property
    def is_zero(self):
        return not (np.any(self.f) or np.any(self.y0))


def make_problem(grid, op, T, K, f: FieldPreset, y0: FieldPreset, box=None) -> ProblemData:
    """Sample the presets on the grid and time levels."""
    K = int(K)
    dt = T / K
    fk = np.stack([f.evaluate(k * dt, grid.coords) for k in range(1, K + 1)])
    return ProblemData(grid, op, float(T), K, fk, y0.evaluate(0.0, grid.coords),
                       None if box is None else (float(box[0]), float(box[1])))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``y[0..K]`` (shape ``(K+1, n)``) and fluxes ``w[1..K]`` (shape ``(K, n)``)."""

    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if self.y.ndim != 2 or self.w.ndim != 2 or self.y.shape != (self.w.shape[0] + 1, self.w.shape[1]):
            raise ValueError("trajectory needs y of shape (K+1, n) and w of shape (K, n)")

    @property
    def K(self):
        return self.w.shape[0]


def integrate_state(w, data: ProblemData) -> Trajectory:
    """Run the state recursion for a given flux trajectory."""
    w = np.asarray(w, float)
    if w.shape != data.f.shape:
        raise ValueError(f"flux has shape {w.shape}, expected {data.f.shape}")
    incr = data.dt * (data.f - apply_A(data.op, w))
    y = np.cumsum(np.vstack([data.y0, incr]), axis=0)
    return Trajectory(y, w)


def midpoint_states(traj: Trajectory):
    """``ybar[k] = (y[k-1] + y[k]) / 2`` for ``k = 1..K``."""
    return 0.5 * (traj.y[:-1] + traj.y[1:])


def constraint_residual(traj: Trajectory, data: ProblemData):
    """Max over steps of the weighted L2 norm of ``(y[k]-y[k-1])/dt + A w[k] - f[k]``."""
    r = np.diff(traj.y, axis=0) / data.dt + apply_A(data.op, traj.w) - data.f
    return float(np.max(np.sqrt(np.sum(data.grid.weights * r * r, axis=1))))


def coefficient_table(spec, data: ProblemData):
    """Coefficient ``a(t_k, x_i)`` on the step times, shape ``(K, n)`` or broadcastable."""
    if not (spec.time_dependent or spec.space_dependent):
        return spec.coefficient_at(0.0, data.grid.coords[0])[()]
    return spec.coefficient_at(data.times[:, None], data.grid.coords[None, :, :])


def adjoint_gradient(w, data: ProblemData, reg, coeff=None):
    """Gradient of the regularized functional with respect to the flux.

    One backward sweep accumulates the state sensitivities; the flux enters
    through ``-dt A`` in every later state, hence the transpose ``S M^{-1}``.

    Parameters
    ----------
    w : ndarray, shape (K, n)
    data : ProblemData
    reg : RegularizedPotential
        Needs ``sigma > 0``.
    coeff : array_like, optional
        Precomputed coefficient table (see ``coefficient_table``).

    Returns
    -------
    ndarray, shape (K, n)
    """
    if not reg.sigma > 0:
        raise ValueError("the gradient needs sigma > 0")
    if coeff is None:
        coeff = coefficient_table(reg.base, data)
    traj = integrate_state(w, data)
    return _gradient(traj, data, reg, coeff)


def _gradient(traj, data, reg, coeff):
    q, dt = data.grid.weights, data.dt
    ybar = midpoint_states(traj)
    _, dphi = reg.value_and_derivative_a(ybar, coeff)
    _, dphis = reg.conjugate_a(traj.w, coeff)
    a = dt * q * (dphi - data.g)
    p = 0.5 * a
    p[:-1] += 0.5 * a[1:]
    p[-1] += q * solve_A(data.op, traj.y[-1])
    P = np.cumsum(p[::-1], axis=0)[::-1]
    return dt * q * dphis - dt * (data.op.stiffness @ (P / q).T).T
