"""Convex potentials j(t, x, r), their subdifferentials and regularizations."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ..errors import UnsupportedConfigurationError
from . import _kernels

FAMILIES = ("quadratic", "power", "log_type", "exp_type", "abs_value", "custom_tabulated")
COEFFICIENT_KINDS = ("constant", "time_ramp", "space_bump")


def _as_points(x):
    x = np.asarray(x, float)
    if x.ndim == 0:
        x = x.reshape(1)
    return x


@dataclass(frozen=True)
class CoefficientField:
    """Preset coefficient a(t, x).

    ``constant``: ``base``.  ``time_ramp``: ``base + amplitude * min(t / horizon, 1)``.
    ``space_bump``: ``base + amplitude * exp(-|x - center|^2 / (2 width^2))``.

    Points ``x`` carry their coordinates on the last axis; a bare float is a
    1-d point.
    """

    kind: str = "constant"
    base: float = 1.0
    amplitude: float = 0.0
    horizon: float = 1.0
    center: tuple = (0.5,)
    width: float = 0.1

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.horizon <= 0 or self.width <= 0:
            raise ValueError("coefficient horizon and width must be positive")

    def evaluate(self, t, x):
        t = np.asarray(t, float)
        x = _as_points(x)
        spatial_shape = x.shape[:-1]
        shape = np.broadcast_shapes(t.shape, spatial_shape)
        if self.kind == "constant":
            v = np.float64(self.base)
        elif self.kind == "time_ramp":
            v = self.base + self.amplitude * np.clip(t / self.horizon, 0.0, 1.0)
        else:
            c = np.resize(np.asarray(self.center, float), x.shape[-1])
            d2 = np.sum((x - c) ** 2, axis=-1)
            v = self.base + self.amplitude * np.exp(-d2 / (2.0 * self.width ** 2))
        return np.broadcast_to(v, shape).copy()

    @property
    def minimum(self):
        return min(self.base, self.base + self.amplitude)

    @property
    def time_dependent(self):
        return self.kind == "time_ramp" and self.amplitude != 0.0

    @property
    def space_dependent(self):
        return self.kind == "space_bump" and self.amplitude != 0.0


@dataclass(frozen=True)
class ScalarGraphValue:
    """Closed interval ``[lo, hi]`` of a (possibly multivalued) graph value."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def selection(self):
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def distance(self, w):
        """Distance of ``w`` to the interval."""
        w = np.asarray(w, float)
        return np.maximum(np.maximum(self.lo - w, w - self.hi), 0.0)


@dataclass(frozen=True)
class PotentialSpec:
    """A convex potential family together with its parameters.

    Parameters
    ----------
    family : str
        One of ``quadratic``, ``power``, ``log_type``, ``exp_type``,
        ``abs_value``, ``custom_tabulated``.
    p : float
        Exponent of the power family, ``p > 1``.
    coefficient : CoefficientField
        a(t, x) for the log/exp families.
    a0 : float
        Required positive lower bound of a(t, x) (log/exp families).
    table : tuple of (r, lo, hi) rows
        Breakpoints of the tabulated graph, strictly increasing in ``r``.
    """

    family: str
    p: float = 2.0
    coefficient: CoefficientField = field(default_factory=CoefficientField)
    a0: float = 1e-3
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "power" and not self.p > 1.0:
            raise ValueError(f"power family needs p > 1, got {self.p}")
        if self.family in ("log_type", "exp_type"):
            if not self.a0 > 0:
                raise ValueError("a0 must be positive")
            if self.coefficient.minimum < self.a0:
                raise ValueError(
                    f"coefficient minimum {self.coefficient.minimum} is below a0 = {self.a0}")
            # sgn(r) log(|r| + a) is only monotone at the origin when a >= 1
            if self.family == "log_type" and self.coefficient.minimum < 1.0:
                raise ValueError("log_type needs a(t, x) >= 1 for a monotone graph")
        if self.family == "custom_tabulated":
            _validate_table(self.table)

    @cached_property
    def kernel(self):
        return _kernels.make_kernel(self.family, p=self.p, table=self.table)

    @property
    def time_dependent(self):
        return self.family in ("log_type", "exp_type") and self.coefficient.time_dependent

    @property
    def space_dependent(self):
        return self.family in ("log_type", "exp_type") and self.coefficient.space_dependent

    def coefficient_at(self, t, x):
        return self.coefficient.evaluate(t, x)

    # array-level evaluation with a precomputed coefficient
    def j_a(self, r, a):
        return self.kernel.j(r, a)

    def bounds_a(self, r, a):
        return self.kernel.beta_bounds(r, a)

    def jstar_a(self, w, a):
        v = self.kernel.jstar(w, a)
        if v is not None:
            return np.asarray(v, float)
        w = np.asarray(w, float)
        a = np.broadcast_to(np.asarray(a, float), w.shape)
        out = np.empty(w.shape)
        for av in np.unique(a):
            m = a == av
            out[m], _ = _kernels.numeric_conjugate(
                lambda r: self.kernel.j(r, av), lambda r: self.kernel.beta_bounds(r, av), w[m])
        return out


def _validate_table(table):
    if table is None:
        raise ValueError("custom_tabulated needs a breakpoint table")
    tab = np.asarray(table, float)
    if tab.ndim != 2 or tab.shape[1] != 3 or tab.shape[0] < 2:
        raise ValueError("table must have at least two (r, lo, hi) rows")
    if not np.all(np.isfinite(tab)):
        raise ValueError("table entries must be finite")
    for i, (r, lo, hi) in enumerate(tab):
        if lo > hi:
            raise ValueError(f"table breakpoint {i} (r={r}): lo > hi")
        if i > 0:
            rp, _, hip = tab[i - 1]
            if r <= rp:
                raise ValueError(f"table breakpoint {i} (r={r}): r not strictly increasing")
            if hip > lo:
                raise ValueError(f"table breakpoint {i} (r={r}): graph not monotone")


@dataclass(frozen=True)
class RegularizedPotential:
    """``j_{lambda,sigma}(r) = j_lambda(r) + sigma r^2 / 2`` for a base potential.

    ``j_lambda`` is the Moreau envelope with parameter ``lam``; its derivative
    is the Yosida approximation of beta.
    """

    base: PotentialSpec
    lam: float
    sigma: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    def value_and_derivative_a(self, r, a):
        r = np.asarray(r, float)
        z, _ = self.base.kernel.resolvent(r, self.lam, a)
        b = (r - z) / self.lam
        value = 0.5 * self.lam * b * b + self.base.kernel.j(z, a) + 0.5 * self.sigma * r * r
        return value, b + self.sigma * r

    def slope_a(self, r, a):
        """Second derivative of ``j_{lambda,sigma}`` (one-sided at kinks)."""
        return self.base.kernel.yosida_slope(r, self.lam, a) + self.sigma

    def conjugate_a(self, omega, a):
        """Value and derivative (the maximizer) of the conjugate of ``j_{lambda,sigma}``.

        With ``b`` in beta(z) and ``r = z + lam b``, the optimality condition
        ``omega = beta_lam(r) + sigma r`` becomes ``(1 + sigma lam) b + sigma z = omega``,
        i.e. ``z`` is the resolvent of beta with parameter
        ``(1 + sigma lam) / sigma`` at ``omega / sigma``.
        """
        omega = np.asarray(omega, float)
        if self.sigma <= 0:
            # (j_lambda)^* = j^* + lambda omega^2 / 2; no smooth maximizer in general
            return self.base.jstar_a(omega, a) + 0.5 * self.lam * omega * omega, None
        mu = (1.0 + self.sigma * self.lam) / self.sigma
        z, _ = self.base.kernel.resolvent(omega / self.sigma, mu, a)
        b = (omega - self.sigma * z) / (1.0 + self.sigma * self.lam)
        r = z + self.lam * b
        jval = 0.5 * self.lam * b * b + self.base.kernel.j(z, a) + 0.5 * self.sigma * r * r
        return omega * r - jval, r

    def value_and_derivative(self, t, x, r):
        return self.value_and_derivative_a(r, self.base.coefficient_at(t, x))

    def conjugate(self, t, x, omega):
        return self.conjugate_a(omega, self.base.coefficient_at(t, x))


def _scalarize(v):
    v = np.asarray(v, float)
    return float(v) if v.ndim == 0 else v


def eval_j(spec: PotentialSpec, t, x, r):
    """Potential value j(t, x, r)."""
    return _scalarize(spec.j_a(r, spec.coefficient_at(t, x)))


def eval_beta(spec: PotentialSpec, t, x, r) -> ScalarGraphValue:
    """Full subdifferential interval of j(t, x, .) at ``r``."""
    lo, hi = spec.bounds_a(r, spec.coefficient_at(t, x))
    return ScalarGraphValue(_scalarize(lo), _scalarize(hi))


def resolvent(spec: PotentialSpec, t, x, lam, r):
    """``(1 + lam beta)^{-1} r``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    z, _ = spec.kernel.resolvent(r, lam, spec.coefficient_at(t, x))
    return _scalarize(z)


def yosida_beta(spec: PotentialSpec, t, x, lam, r):
    """Yosida approximation ``(r - resolvent(r)) / lam``."""
    z = resolvent(spec, t, x, lam, r)
    return _scalarize((np.asarray(r, float) - z) / lam)


def moreau_j(spec: PotentialSpec, t, x, lam, r):
    """Moreau envelope evaluated through the resolvent.

    ``j_lam(r) = |r - z|^2 / (2 lam) + j(z)`` with ``z = resolvent(r)``.
    """
    a = spec.coefficient_at(t, x)
    r = np.asarray(r, float)
    z, _ = spec.kernel.resolvent(r, lam, a)
    return _scalarize((r - z) ** 2 / (2.0 * lam) + spec.kernel.j(z, a))


def eval_j_reg(reg: RegularizedPotential, t, x, r):
    """Value and derivative of ``j_{lambda,sigma}``."""
    v, d = reg.value_and_derivative(t, x, r)
    return _scalarize(v), _scalarize(d)


def conjugate_reg(reg: RegularizedPotential, t, x, omega):
    """Value and maximizer of ``sup_r (omega r - j_{lambda,sigma}(r))``.

    Raises
    ------
    UnsupportedConfigurationError
        If ``sigma == 0``.
    """
    if reg.sigma <= 0:
        raise UnsupportedConfigurationError("conjugate_reg needs sigma > 0")
    v, d = reg.conjugate(t, x, omega)
    return _scalarize(v), _scalarize(d)


def eval_j_star(spec: PotentialSpec, t, x, omega):
    """Convex conjugate ``j*(t, x, omega)``; ``inf`` outside its domain."""
    return _scalarize(spec.jstar_a(omega, spec.coefficient_at(t, x)))


def numeric_j_star(spec: PotentialSpec, t, x, omega):
    """Numeric Legendre transform, regardless of any closed form.

    Returns
    -------
    value, argmax
    """
    a = np.asarray(spec.coefficient_at(t, x), float).flat[0]
    v, r = _kernels.numeric_conjugate(
        lambda s: spec.kernel.j(s, a), lambda s: spec.kernel.beta_bounds(s, a), omega)
    return _scalarize(v), _scalarize(r)
