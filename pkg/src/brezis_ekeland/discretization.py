"""Vertex-centered grids and the discrete Robin Laplacian.

The operator is assembled from its bilinear form.  With the lumped mass
``M = diag(q)`` (trapezoid weights) and the stiffness matrix ``S`` of

    sum over edges c_e (u_a - u_b)(v_a - v_b) + alpha * sum_b s_b u_b v_b,

the operator is ``A = M^{-1} S``.  It is self-adjoint in the weighted product
``<u, v> = sum_i q_i u_i v_i`` and every identity involving ``A``, ``A^{-1}``
and the dual norm holds exactly at the algebraic level.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import UnsupportedConfigurationError


def _trapezoid_weights(n_cells, h):
    w = np.full(n_cells + 1, h)
    w[[0, -1]] = 0.5 * h
    return w


@dataclass(frozen=True)
class Grid:
    """Uniform vertex-centered lattice on a box ``[0, L_1] x ... x [0, L_d]``.

    Nodes are ordered lexicographically with the first axis slowest.

    Attributes
    ----------
    coords : ndarray, shape (n_nodes, dim)
    weights : ndarray, shape (n_nodes,)
        Trapezoid volume weights.
    boundary : ndarray of int
        Indices of nodes on the box faces.
    boundary_weights : ndarray
        Surface measure attached to each boundary node (counting measure in 1D).
    """

    dim: int
    lengths: tuple
    cells: tuple
    coords: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    boundary_weights: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.weights.size

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def shape(self):
        return tuple(n + 1 for n in self.cells)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    def check_field(self, u, name="field"):
        u = np.asarray(u, float)
        if u.shape != (self.n_nodes,):
            raise ValueError(f"{name} has shape {u.shape}, expected ({self.n_nodes},)")
        return u


def build_grid(dim, lengths, cells) -> Grid:
    """Build a uniform vertex-centered grid.

    Parameters
    ----------
    dim : int
        1 or 2.
    lengths : sequence of float
        Box extents per axis.
    cells : sequence of int
        Cell counts per axis, each at least 2.

    Returns
    -------
    Grid

    Examples
    --------
    >>> g = build_grid(1, [1.0], [4])
    >>> g.weights.tolist()
    [0.125, 0.25, 0.25, 0.25, 0.125]
    """
    if dim not in (1, 2):
        raise UnsupportedConfigurationError(f"dim = {dim} is not supported (1 or 2)")
    lengths = tuple(float(v) for v in np.atleast_1d(lengths))
    cells = tuple(int(v) for v in np.atleast_1d(cells))
    if len(lengths) != dim or len(cells) != dim:
        raise ValueError(f"lengths and cells need {dim} entries")
    if any(n < 2 for n in cells):
        raise ValueError("cells must be at least 2 per axis")
    if any(not L > 0 for L in lengths):
        raise ValueError("lengths must be positive")

    axes = [np.linspace(0.0, L, n + 1) for L, n in zip(lengths, cells)]
    w1d = [_trapezoid_weights(n, L / n) for L, n in zip(lengths, cells)]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)

    if dim == 1:
        weights = w1d[0].copy()
        boundary = np.array([0, cells[0]])
        bw = np.ones(2)
    else:
        wx, wy = w1d
        weights = np.outer(wx, wy).ravel()
        nx, ny = cells[0] + 1, cells[1] + 1
        surf = np.zeros((nx, ny))
        # faces x = const carry the y-trapezoid weights, and vice versa
        surf[0, :] += wy
        surf[-1, :] += wy
        surf[:, 0] += wx
        surf[:, -1] += wx
        flat = surf.ravel()
        boundary = np.flatnonzero(flat > 0)
        bw = flat[boundary]
    return Grid(dim, lengths, cells, coords, weights, boundary, bw)


@dataclass(frozen=True, eq=False)
class RobinOperator:
    """Discrete Robin Laplacian ``A = M^{-1} S`` with a cached factorization of ``S``."""

    grid: Grid
    alpha: float
    stiffness: sp.csc_matrix = field(repr=False)

    @cached_property
    def _lu(self):
        return splu(self.stiffness.tocsc())

    @property
    def mass(self):
        return self.grid.weights

    @cached_property
    def matrix(self):
        """Sparse matrix of ``A`` acting on nodal values."""
        return sp.diags(1.0 / self.grid.weights) @ self.stiffness

    def stiffness_solve(self, b):
        """``S^{-1} b``; ``b`` may carry several columns."""
        return self._lu.solve(np.asarray(b, float))


def build_robin_operator(grid: Grid, alpha) -> RobinOperator:
    """Assemble the stiffness of the Robin form and wrap it as an operator.

    Raises
    ------
    ValueError
        If ``alpha <= 0``.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("robin_alpha must be > 0")
    shape = grid.shape
    idx = np.arange(grid.n_nodes).reshape(shape)
    w1d = [_trapezoid_weights(n, L / n) for L, n in zip(grid.lengths, grid.cells)]
    rows, cols, vals = [], [], []
    for d in range(grid.dim):
        h = grid.spacing[d]
        lo = np.take(idx, np.arange(shape[d] - 1), axis=d)
        hi = np.take(idx, np.arange(1, shape[d]), axis=d)
        # transverse trapezoid weight of each edge
        c = np.ones(lo.shape) / h
        for e in range(grid.dim):
            if e != d:
                bshape = [1] * grid.dim
                bshape[e] = -1
                c = c * w1d[e].reshape(bshape)
        a, b, c = lo.ravel(), hi.ravel(), c.ravel()
        rows += [a, b, a, b]
        cols += [a, b, b, a]
        vals += [c, c, -c, -c]
    rows.append(grid.boundary)
    cols.append(grid.boundary)
    vals.append(alpha * grid.boundary_weights)
    n = grid.n_nodes
    S = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsc()
    S.sum_duplicates()
    return RobinOperator(grid, alpha, S)


def apply_A(op: RobinOperator, u):
    """``A u`` (accepts a field or a stack of fields on the last axis)."""
    u = np.asarray(u, float)
    if u.shape[-1] != op.grid.n_nodes:
        raise ValueError(f"field size {u.shape[-1]} does not match grid ({op.grid.n_nodes})")
    return (op.stiffness @ u.T).T / op.grid.weights


def solve_A(op: RobinOperator, rhs, tol=1e-10):
    """``A^{-1} rhs`` by the cached sparse LU factorization.

    Stacks of fields along the leading axis are solved together.  ``tol``
    bounds the relative residual; a violation signals an internal error.
    """
    rhs = np.asarray(rhs, float)
    if rhs.shape[-1] != op.grid.n_nodes:
        raise ValueError(f"field size {rhs.shape[-1]} does not match grid ({op.grid.n_nodes})")
    out = op.stiffness_solve((rhs * op.grid.weights).T).T
    res = np.linalg.norm(apply_A(op, out) - rhs)
    if res > tol * max(np.linalg.norm(rhs), 1.0):
        raise RuntimeError(f"Robin solve residual {res:.3e} exceeds tolerance")
    return out


def weighted_inner(grid: Grid, u, v):
    """Quadrature inner product ``sum_i q_i u_i v_i``."""
    return float(np.dot(grid.weights * np.asarray(u, float), np.asarray(v, float)))


def v_norm(op: RobinOperator, u):
    """``sqrt(<A u, u>)``, the discrete ``|grad u|^2 + alpha |u|^2_boundary`` norm."""
    u = op.grid.check_field(u)
    return float(np.sqrt(u @ (op.stiffness @ u)))


def vdual_inner(op: RobinOperator, u, v):
    """``<u, A^{-1} v>`` in the weighted product, i.e. ``(M u)^T S^{-1} (M v)``."""
    q = op.grid.weights
    u = op.grid.check_field(u)
    v = op.grid.check_field(v)
    return float((q * u) @ op.stiffness_solve(q * v))


def bilinear_form(op: RobinOperator, u, v):
    """Edge-by-edge evaluation of the Robin form, independent of the matrix."""
    g = op.grid
    u = g.check_field(u).reshape(g.shape)
    v = g.check_field(v).reshape(g.shape)
    w1d = [_trapezoid_weights(n, L / n) for L, n in zip(g.lengths, g.cells)]
    total = 0.0
    for d in range(g.dim):
        du = np.diff(u, axis=d) / g.spacing[d]
        dv = np.diff(v, axis=d) / g.spacing[d]
        c = np.full(du.shape, g.spacing[d])
        for e in range(g.dim):
            if e != d:
                bshape = [1] * g.dim
                bshape[e] = -1
                c = c * w1d[e].reshape(bshape)
        total += float(np.sum(c * du * dv))
    ub, vb = u.ravel()[g.boundary], v.ravel()[g.boundary]
    return total + op.alpha * float(np.sum(g.boundary_weights * ub * vb))
