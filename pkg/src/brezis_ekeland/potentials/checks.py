"""Sampled diagnostics for the structural assumptions on a potential.

None of these is a proof; each probes a finite sample and reports what it
saw.
"""

from dataclasses import dataclass

import numpy as np

from .core import PotentialSpec

# sampling ranges keep j and j* finite in double precision
_R_RANGE = {"exp_type": 2.5}
_W_RANGE = {"exp_type": 60.0, "log_type": 8.0, "abs_value": 1.0}


def _sample_points(spec, rng, n, dim=1):
    t = rng.uniform(0.0, spec.coefficient.horizon, n)
    x = rng.uniform(0.0, 1.0, (n, dim))
    return t, x


@dataclass(frozen=True)
class FenchelYoungReport:
    """``max_violation`` is max of ``r w - j - j*`` (should be <= 0);
    ``max_equality_defect`` is max ``|j + j* - r w|`` for ``w`` in beta(r)."""

    max_violation: float
    max_equality_defect: float
    samples: int


def check_fenchel_young(spec: PotentialSpec, sample_count=10_000, seed=0, r_range=None, w_range=None):
    """Probe the Fenchel-Young inequality and its equality case.

    Parameters
    ----------
    spec : PotentialSpec
    sample_count : int
        Number of random ``(t, x, r, w)`` tuples (and as many equality probes).
    seed : int
    r_range, w_range : float, optional
        Half-widths of the uniform samples of ``r`` and ``w``.

    Returns
    -------
    FenchelYoungReport
    """
    rng = np.random.default_rng(seed)
    n = int(sample_count)
    R = r_range if r_range is not None else _R_RANGE.get(spec.family, 6.0)
    W = w_range if w_range is not None else _W_RANGE.get(spec.family, 6.0)
    t, x = _sample_points(spec, rng, n)
    a = spec.coefficient_at(t, x)
    r = rng.uniform(-R, R, n)
    w = rng.uniform(-W, W, n)
    jr = spec.j_a(r, a)
    jw = spec.jstar_a(w, a)
    with np.errstate(invalid="ignore"):
        viol = r * w - jr - jw
    viol = np.where(np.isinf(jw), -np.inf, viol)

    # equality case: w drawn from the interval beta(r); include the kink
    r2 = rng.uniform(-R, R, n)
    r2[: n // 20] = 0.0
    lo, hi = spec.bounds_a(r2, a)
    theta = rng.uniform(0.0, 1.0, n)
    w2 = lo + theta * (hi - lo)
    defect = np.abs(spec.j_a(r2, a) + spec.jstar_a(w2, a) - r2 * w2)
    return FenchelYoungReport(float(np.max(viol)), float(np.max(defect)), n)


@dataclass(frozen=True)
class SymmetryCert:
    """Outcome of probing ``j(t, -r) <= gamma1 j(t, r) + gamma2``."""

    gamma1: float
    gamma2: float
    holds: bool
    worst_ratio_location: float
    worst_excess: float


def check_symmetry(spec: PotentialSpec, probe_radius, gamma1=1.0, gamma2=0.0,
                   n_r=2001, n_t=5, rtol=1e-12):
    """Scan ``r`` over ``[-probe_radius, probe_radius]`` and a few times.

    The worst location is where ``j(t, -r) - gamma1 j(t, r) - gamma2`` is
    largest.
    """
    if not probe_radius > 0:
        raise ValueError("probe_radius must be positive")
    r = np.linspace(-probe_radius, probe_radius, n_r)
    times = np.linspace(0.0, spec.coefficient.horizon, n_t)
    worst, loc = -np.inf, 0.0
    for t in times:
        a = spec.coefficient_at(t, 0.5)
        with np.errstate(over="ignore", invalid="ignore"):
            jm = spec.j_a(-r, a)
            jp = spec.j_a(r, a)
            excess = jm - gamma1 * jp - gamma2
            excess = np.where(np.isnan(excess), np.inf, excess)
            tol = rtol * (1.0 + np.abs(jm))
            scaled = excess - np.where(np.isfinite(tol), tol, 0.0)
        i = int(np.argmax(scaled))
        if scaled[i] > worst:
            worst, loc = float(scaled[i]), float(r[i])
    return SymmetryCert(gamma1, gamma2, bool(worst <= 0.0), loc, worst)


@dataclass(frozen=True)
class CoercivityReport:
    superlinear_j: bool
    superlinear_jstar: bool
    ratios_j: tuple
    ratios_jstar: tuple
    ladder: tuple

    @property
    def weakly_coercive(self):
        return self.superlinear_j and self.superlinear_jstar


def _superlinear(ratios, factor):
    # +inf (overflow) counts as growth beyond any finite factor
    ratios = np.asarray(ratios, float)
    with np.errstate(invalid="ignore"):
        nondecreasing = bool(np.all(ratios[1:] >= ratios[:-1] * (1.0 - 1e-12)))
        grows = bool(ratios[-1] >= factor * ratios[0]) if ratios[0] > 0 else bool(ratios[-1] > 0)
    return nondecreasing and grows


def check_coercivity(spec: PotentialSpec, r_max=1e6, factor=2.0, n_t=3):
    """Probe superlinear growth of ``j`` and ``j*`` on a decade ladder.

    Along ``10, 100, ..., r_max`` the ratios ``min_{+-} j(+-r) / r`` and
    ``min_{+-} j*(+-w) / w`` (minimized over sampled times) must be
    nondecreasing and grow by at least ``factor`` between the first and last
    rung.
    """
    if not r_max > 1:
        raise ValueError("r_max must exceed 1")
    top = max(int(np.floor(np.log10(r_max))), 2)
    ladder = 10.0 ** np.arange(1, top + 1)
    times = np.linspace(0.0, spec.coefficient.horizon, n_t)
    rj = np.full(ladder.size, np.inf)
    rs = np.full(ladder.size, np.inf)
    for t in times:
        a = spec.coefficient_at(t, 0.5)
        with np.errstate(over="ignore", invalid="ignore"):
            jv = np.minimum(spec.j_a(ladder, a), spec.j_a(-ladder, a))
            sv = np.minimum(spec.jstar_a(ladder, a), spec.jstar_a(-ladder, a))
        rj = np.minimum(rj, np.where(np.isnan(jv), np.inf, jv) / ladder)
        rs = np.minimum(rs, np.where(np.isnan(sv), np.inf, sv) / ladder)
    return CoercivityReport(_superlinear(rj, factor), _superlinear(rs, factor),
                            tuple(rj.tolist()), tuple(rs.tolist()), tuple(ladder.tolist()))


@dataclass(frozen=True)
class AffineMinorant:
    """``j(r) >= k1 r + k2`` and ``j*(w) >= k3 w + k4``."""

    k1: float
    k2: float
    k3: float
    k4: float
    verified: bool


def affine_minorant(spec: PotentialSpec, t=0.0, x=0.5, samples=2001, radius=10.0):
    """Affine minorants from subgradients at the origin.

    ``k1`` is the midpoint of beta(0), ``k2 = j(0)``; ``k3`` is the midpoint
    of the set where ``0`` lies in beta, ``k4 = j*(0)``.  The inequalities are
    then checked on a symmetric grid.
    """
    a = spec.coefficient_at(t, x)
    lo, hi = spec.bounds_a(0.0, a)
    k1 = 0.5 * (float(lo) + float(hi))
    k2 = float(spec.j_a(0.0, a))
    k3 = _zero_preimage_midpoint(spec, a)
    k4 = float(spec.jstar_a(0.0, a))
    s = np.linspace(-radius, radius, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        ok_j = np.all(spec.j_a(s, a) >= k1 * s + k2 - 1e-12 * (1 + np.abs(s)))
        js = spec.jstar_a(s, a)
        ok_s = np.all((js >= k3 * s + k4 - 1e-12 * (1 + np.abs(s))) | np.isinf(js))
    return AffineMinorant(k1, k2, k3, k4, bool(ok_j and ok_s))


def _zero_preimage_midpoint(spec, a):
    if spec.family != "custom_tabulated":
        # catalog graphs are odd, so 0 lies in beta(0) only
        return 0.0
    k = spec.kernel
    xp = np.column_stack([k.lo, k.hi]).ravel()
    fp = np.repeat(k.r, 2)
    hits = fp[xp == 0.0]
    if hits.size:
        return 0.5 * float(hits.min() + hits.max())
    if 0.0 < xp[0]:
        return float(k.r[0] - k.lo[0] / k.slope[0]) if k.slope[0] > 0 else float("nan")
    if 0.0 > xp[-1]:
        return float(k.r[-1] - k.hi[-1] / k.slope[-1]) if k.slope[-1] > 0 else float("nan")
    return float(np.interp(0.0, xp, fp))
