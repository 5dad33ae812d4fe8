"""Vectorized scalar kernels for the potential families.

Every kernel works elementwise on numpy arrays.  ``a`` is the pointwise
coefficient value a(t, x), already broadcast against ``r``; families that do
not use it ignore it.
"""

import numpy as np
from scipy import special

from ..errors import RootSolveError

_EPS = np.finfo(float).eps


def monotone_newton(fun, target, lo, hi, x0, maxiter=200):
    """Solve ``g(x) = target`` for increasing ``g`` by safeguarded Newton.

    Parameters
    ----------
    fun : callable
        ``fun(x, mask)`` returns ``(g(x), g'(x))`` for the entries selected by
        the boolean ``mask`` (``x`` is already restricted to them).
    target, lo, hi, x0 : ndarray
        Same-shape 1-d arrays.  ``[lo, hi]`` must bracket the root.

    Returns
    -------
    x : ndarray

    Raises
    ------
    RootSolveError
        If some entries fail to converge within ``maxiter`` iterations.
    """
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    x = np.clip(x0.astype(float), lo, hi)
    active = np.ones(x.shape, dtype=bool)
    resid = np.zeros_like(x)
    # steps one and two iterations back; a Newton step that is not at most
    # half the older one is replaced by bisection
    step1 = np.full(x.shape, np.inf)
    step2 = np.full(x.shape, np.inf)
    for _ in range(maxiter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return x
        xi = x[idx]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            g, dg = fun(xi, idx)
            g = g - target[idx]
            # round-off level of g near xi
            scale = np.abs(target[idx]) + np.abs(dg * xi)
        resid[idx] = g
        done = np.abs(g) <= 4.0 * _EPS * np.where(np.isfinite(scale), scale, 0.0)
        pos = g > 0
        hi[idx[pos]] = xi[pos]
        lo[idx[~pos]] = xi[~pos]
        width = hi[idx] - lo[idx]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            xn = xi - g / dg
        slow = np.abs(xn - xi) > 0.5 * step2[idx]
        bad = ~np.isfinite(xn) | (xn <= lo[idx]) | (xn >= hi[idx]) | slow
        xn = np.where(bad, 0.5 * (lo[idx] + hi[idx]), xn)
        step2[idx] = step1[idx]
        step1[idx] = np.abs(xn - xi)
        done |= width <= 2.0 * _EPS * np.maximum(1.0, np.abs(xi))
        done |= np.abs(xn - xi) <= _EPS * np.maximum(1.0, np.abs(xi))
        x[idx] = np.where(done, xi, xn)
        active[idx[done]] = False
    idx = np.flatnonzero(active)
    if idx.size:
        raise RootSolveError(
            f"monotone root solve did not converge for {idx.size} entries",
            lo=lo[idx], hi=hi[idx], residual=resid[idx])
    return x


class OddFamily:
    """Odd maximal monotone graph with a possible jump at the origin.

    Subclasses define the positive branch ``beta_pos`` on ``z > 0``, its
    derivative, the primitive ``j`` and ``jump(a) = beta(0+) >= 0``.
    """

    name = ""

    def jump(self, a):
        return np.zeros_like(a)

    def beta_bounds(self, r, a):
        r, a = np.broadcast_arrays(np.asarray(r, float), np.asarray(a, float))
        with np.errstate(over="ignore"):
            v = np.sign(r) * self.beta_pos(np.abs(r), a)
        jmp = self.jump(a)
        zero = r == 0
        lo = np.where(zero, -jmp, v)
        hi = np.where(zero, jmp, v)
        return lo, hi

    def resolvent(self, r, lam, a):
        """Return ``(z, dz/dr)`` with ``z + lam * beta(z) = r``."""
        r, lam, a = (np.asarray(v, float) for v in np.broadcast_arrays(r, lam, a))
        shape = r.shape
        r, lam, a = r.ravel(), lam.ravel(), a.ravel()
        t = np.abs(r)
        thresh = lam * self.jump(a)
        z = np.zeros_like(t)
        slope = np.zeros_like(t)
        out = t > thresh
        if np.any(out):
            to, lo_, ao = t[out], lam[out], a[out]

            def fun(x, idx):
                b = self.beta_pos(x, ao[idx])
                db = self.dbeta_pos(x, ao[idx])
                return x + lo_[idx] * b, 1.0 + lo_[idx] * db

            hi = to - lo_ * self.jump(ao)
            zo = monotone_newton(fun, to, np.zeros_like(to), hi, hi)
            z[out] = zo
            with np.errstate(over="ignore", invalid="ignore"):
                db = self.dbeta_pos(zo, ao)
                s = 1.0 / (1.0 + lo_ * db)
            slope[out] = np.where(np.isfinite(db), s, 0.0)
        return (np.sign(r) * z).reshape(shape), slope.reshape(shape)

    def yosida_slope(self, r, lam, a):
        """Derivative of the Yosida approximation at ``r``."""
        z, _ = self.resolvent(r, lam, a)
        lam = np.asarray(lam, float)
        t = np.abs(np.asarray(r, float))
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            db = self.dbeta_pos(np.abs(z), a)
            s = 1.0 / (lam + 1.0 / db)
        kink = t <= lam * self.jump(np.asarray(a, float))
        s = np.where(kink, 1.0 / lam, s)
        return np.where(np.isnan(s), 1.0 / lam, s)

    def jstar(self, w, a):
        return None


class Quadratic(OddFamily):
    name = "quadratic"

    def j(self, r, a):
        r = np.asarray(r, float)
        return 0.5 * r * r + 0.0 * np.asarray(a, float)

    def beta_pos(self, z, a):
        return z + 0.0 * a

    def dbeta_pos(self, z, a):
        return np.ones_like(z) + 0.0 * a

    def resolvent(self, r, lam, a):
        r, lam, a = np.broadcast_arrays(np.asarray(r, float), np.asarray(lam, float), np.asarray(a, float))
        return r / (1.0 + lam), 1.0 / (1.0 + lam)

    def jstar(self, w, a):
        w = np.asarray(w, float)
        return 0.5 * w * w + 0.0 * np.asarray(a, float)


class Power(OddFamily):
    name = "power"

    def __init__(self, p):
        self.p = float(p)
        self.q = self.p / (self.p - 1.0)

    def j(self, r, a):
        r = np.asarray(r, float)
        return np.abs(r) ** self.p / self.p + 0.0 * np.asarray(a, float)

    def beta_pos(self, z, a):
        return z ** (self.p - 1.0) + 0.0 * a

    def dbeta_pos(self, z, a):
        with np.errstate(divide="ignore"):
            return (self.p - 1.0) * z ** (self.p - 2.0) + 0.0 * a

    def jstar(self, w, a):
        w = np.asarray(w, float)
        return np.abs(w) ** self.q / self.q + 0.0 * np.asarray(a, float)


class AbsValue(OddFamily):
    name = "abs_value"

    def j(self, r, a):
        return np.abs(np.asarray(r, float)) + 0.0 * np.asarray(a, float)

    def jump(self, a):
        return np.ones_like(np.asarray(a, float))

    def beta_pos(self, z, a):
        return np.ones_like(z) + 0.0 * a

    def dbeta_pos(self, z, a):
        return np.zeros_like(z) + 0.0 * a

    def resolvent(self, r, lam, a):
        r, lam, a = np.broadcast_arrays(np.asarray(r, float), np.asarray(lam, float), np.asarray(a, float))
        t = np.abs(r)
        z = np.sign(r) * np.maximum(t - lam, 0.0)
        return z, np.where(t > lam, 1.0, 0.0)

    def jstar(self, w, a):
        w = np.asarray(w, float)
        return np.where(np.abs(w) <= 1.0, 0.0, np.inf) + 0.0 * np.asarray(a, float)


class LogType(OddFamily):
    """beta(r) = sgn(r) log(|r| + a), requires a >= 1 for monotonicity."""

    name = "log_type"

    def j(self, r, a):
        t = np.abs(np.asarray(r, float))
        a = np.asarray(a, float)
        return t * np.log(a) + (t + a) * np.log1p(t / a) - t

    def jump(self, a):
        return np.log(np.asarray(a, float))

    def beta_pos(self, z, a):
        return np.log(z + a)

    def dbeta_pos(self, z, a):
        return 1.0 / (z + a)

    def jstar(self, w, a):
        m = np.abs(np.asarray(w, float))
        a = np.asarray(a, float)
        d = np.maximum(m - np.log(a), 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            v = a * (np.expm1(d) - d)
        return np.where(np.isnan(v), np.inf, v)


class ExpType(OddFamily):
    """beta(r) = sgn(r) exp(a r^2); jump [-1, 1] at the origin."""

    name = "exp_type"

    def j(self, r, a):
        t = np.abs(np.asarray(r, float))
        a = np.asarray(a, float)
        sa = np.sqrt(a)
        with np.errstate(over="ignore"):
            return 0.5 * np.sqrt(np.pi) / sa * special.erfi(sa * t)

    def jump(self, a):
        return np.ones_like(np.asarray(a, float))

    def beta_pos(self, z, a):
        with np.errstate(over="ignore"):
            return np.exp(a * z * z)

    def dbeta_pos(self, z, a):
        with np.errstate(over="ignore", invalid="ignore"):
            return 2.0 * a * z * np.exp(a * z * z)

    def jstar(self, w, a):
        m = np.abs(np.asarray(w, float))
        a = np.asarray(a, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            rstar = np.sqrt(np.maximum(np.log(m), 0.0) / a)
        return np.where(m <= 1.0, 0.0, m * rstar - self.j(rstar, a))


class Tabulated:
    """Piecewise-linear monotone graph from a sorted ``(r, lo, hi)`` table.

    Between breakpoints beta runs linearly from ``hi[i]`` to ``lo[i+1]``;
    outside the table it continues with the slope of the end segment.  The
    primitive is anchored at ``j(0) = 0``.
    """

    name = "custom_tabulated"

    def __init__(self, table):
        tab = np.asarray(table, float)
        self.r = tab[:, 0].copy()
        self.lo = tab[:, 1].copy()
        self.hi = tab[:, 2].copy()
        dr = np.diff(self.r)
        self.slope = (self.lo[1:] - self.hi[:-1]) / dr
        F = np.zeros_like(self.r)
        F[1:] = np.cumsum(0.5 * (self.hi[:-1] + self.lo[1:]) * dr)
        self.F = F
        self.F0 = self._primitive(np.zeros(1))[0]

    def _locate(self, r):
        return np.searchsorted(self.r, r, side="right") - 1

    def _primitive(self, r):
        r = np.asarray(r, float)
        i = self._locate(r)
        n = self.r.size
        ic = np.clip(i, 0, n - 2)
        d = r - self.r[ic]
        inner = self.F[ic] + self.hi[ic] * d + 0.5 * self.slope[ic] * d * d
        dl = r - self.r[0]
        left = self.lo[0] * dl + 0.5 * self.slope[0] * dl * dl
        dr_ = r - self.r[-1]
        right = self.F[-1] + self.hi[-1] * dr_ + 0.5 * self.slope[-1] * dr_ * dr_
        return np.where(i < 0, left, np.where(i >= n - 1, right, inner))

    def j(self, r, a=None):
        return self._primitive(r) - self.F0

    def beta_bounds(self, r, a=None):
        r = np.asarray(r, float)
        i = self._locate(r)
        n = self.r.size
        ic = np.clip(i, 0, n - 1)
        exact = (i >= 0) & (self.r[ic] == r)
        seg = np.clip(i, 0, n - 2)
        v = np.where(
            i < 0, self.lo[0] + self.slope[0] * (r - self.r[0]),
            np.where(i >= n - 1, self.hi[-1] + self.slope[-1] * (r - self.r[-1]),
                     self.hi[seg] + self.slope[seg] * (r - self.r[seg])))
        lo = np.where(exact, self.lo[ic], v)
        hi = np.where(exact, self.hi[ic], v)
        return lo, hi

    def _knots(self, lam):
        xp = np.empty(2 * self.r.size)
        xp[0::2] = self.r + lam * self.lo
        xp[1::2] = self.r + lam * self.hi
        fp = np.repeat(self.r, 2)
        return xp, fp

    def resolvent(self, r, lam, a=None):
        r, lam = np.broadcast_arrays(np.asarray(r, float), np.asarray(lam, float))
        z = np.empty(r.shape)
        dz = np.empty(r.shape)
        for lv in np.unique(lam):
            m = lam == lv
            xp, fp = self._knots(lv)
            x = r[m]
            zi = np.interp(x, xp, fp)
            sl, sr = self.slope[0], self.slope[-1]
            zi = np.where(x < xp[0], self.r[0] + (x - xp[0]) / (1.0 + lv * sl), zi)
            zi = np.where(x > xp[-1], self.r[-1] + (x - xp[-1]) / (1.0 + lv * sr), zi)
            k = np.clip(np.searchsorted(xp, x, side="right") - 1, -1, xp.size - 1)
            # even knot index: inside a vertical piece; odd: on a sloped segment
            seg = np.clip((k - 1) // 2, 0, self.slope.size - 1)
            s = np.where(k < 0, sl, np.where(k >= xp.size - 1, sr, self.slope[seg]))
            vertical = (k >= 0) & (k % 2 == 0) & (k < xp.size - 1) & (xp[np.clip(k + 1, 0, xp.size - 1)] > x)
            z[m] = zi
            dz[m] = np.where(vertical, 0.0, 1.0 / (1.0 + lv * s))
        return z, dz

    def yosida_slope(self, r, lam, a=None):
        _, dz = self.resolvent(r, lam)
        return (1.0 - dz) / np.asarray(lam, float)

    def jstar(self, w, a=None):
        return None


def numeric_conjugate(jfun, bounds, omega, cap=2.0 ** 40, xtol=1e-10):
    """Numeric Legendre transform ``sup_r (omega r - j(r))``.

    The maximizer is bracketed by doubling from ``[-1, 1]`` until the slope
    ``omega - beta`` changes sign inside the bracket, then refined by golden
    section.  Entries whose bracket exceeds ``cap`` are reported as ``+inf``
    (the conjugate is infinite there).

    Parameters
    ----------
    jfun : callable
        ``jfun(r)`` evaluated elementwise.
    bounds : callable
        ``bounds(r)`` returns the subdifferential interval ``(lo, hi)``.
    omega : ndarray

    Returns
    -------
    value, argmax : ndarray
    """
    omega = np.asarray(omega, float)
    shape = omega.shape
    w = omega.ravel()
    value = np.empty_like(w)
    arg = np.zeros_like(w)
    lo0, hi0 = bounds(np.zeros_like(w))
    at_zero = (w >= lo0) & (w <= hi0)
    value[at_zero] = -jfun(np.zeros(int(at_zero.sum())))
    todo = np.flatnonzero(~at_zero)
    if todo.size:
        wt = w[todo]
        up = wt > hi0[todo]
        L = np.where(up, 0.0, -1.0)
        U = np.where(up, 1.0, 0.0)
        finite = np.ones(todo.size, dtype=bool)
        with np.errstate(over="ignore", invalid="ignore"):
            grow = up & (bounds(U)[0] < wt)
            while np.any(grow):
                U = np.where(grow, 2.0 * U, U)
                finite &= ~(grow & (U > cap))
                grow &= finite & (bounds(U)[0] < wt)
            grow = ~up & (bounds(L)[1] > wt)
            while np.any(grow):
                L = np.where(grow, 2.0 * L, L)
                finite &= ~(grow & (L < -cap))
                grow &= finite & (bounds(L)[1] > wt)
        L = np.where(up, U / 2.0 * (U > 1.0), L)
        U = np.where(up, U, L / 2.0 * (L < -1.0))
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        c = U - gr * (U - L)
        d = L + gr * (U - L)
        fc = wt * c - jfun(c)
        fd = wt * d - jfun(d)
        for _ in range(400):
            if np.all(U - L <= xtol * np.maximum(1.0, np.abs(L) + np.abs(U))):
                break
            left = fc > fd
            U = np.where(left, d, U)
            L = np.where(left, L, c)
            nd = np.where(left, c, L + gr * (U - L))
            nc = np.where(left, U - gr * (U - L), d)
            fn_c = np.where(left, wt * nc - jfun(nc), fd)
            fn_d = np.where(left, fc, wt * nd - jfun(nd))
            c, d, fc, fd = nc, nd, fn_c, fn_d
        mid = 0.5 * (L + U)
        cands = np.stack([c, d, mid])
        vals = np.stack([fc, fd, wt * mid - jfun(mid)])
        best = np.argmax(vals, axis=0)
        v = vals[best, np.arange(todo.size)]
        arg[todo] = cands[best, np.arange(todo.size)]
        value[todo] = np.where(finite, v, np.inf)
    return value.reshape(shape), arg.reshape(shape)


def make_kernel(family, p=None, table=None):
    if family == "quadratic":
        return Quadratic()
    if family == "power":
        return Power(p)
    if family == "abs_value":
        return AbsValue()
    if family == "log_type":
        return LogType()
    if family == "exp_type":
        return ExpType()
    if family == "custom_tabulated":
        return Tabulated(table)
    raise ValueError(f"unknown family {family!r}")
