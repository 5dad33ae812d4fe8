import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from brezis_ekeland.errors import UnsupportedConfigurationError
from brezis_ekeland.potentials import (CoefficientField, PotentialSpec, RegularizedPotential,
                                       ScalarGraphValue, conjugate_reg, eval_beta, eval_j,
                                       eval_j_reg, eval_j_star, moreau_j, numeric_j_star,
                                       resolvent, yosida_beta)

from conftest import catalog, exp_table

Q = PotentialSpec("quadratic")
LOG = PotentialSpec("log_type")
EXP = PotentialSpec("exp_type")
ABS = PotentialSpec("abs_value")
P3 = PotentialSpec("power", p=3.0)


def grid_sup(fun, omega, lo=-10.0, hi=10.0, n=2_000_001):
    """Brute-force sup_r (omega r - fun(r)) with its argmax."""
    r = np.linspace(lo, hi, n)
    v = omega * r - fun(r)
    i = int(np.argmax(v))
    return v[i], r[i]


def grid_moreau(jfun, lam, r, lo=-10.0, hi=10.0, n=2_000_001):
    s = np.linspace(lo, hi, n)
    return float(np.min((s - r) ** 2 / (2 * lam) + jfun(s)))


# --- values -----------------------------------------------------------------

def test_eval_j_quadratic():
    assert eval_j(Q, 0.0, 0.5, 2.0) == 2.0


def test_eval_j_log_matches_quadrature():
    r = math.e - 1
    oracle, _ = integrate.quad(lambda s: math.log(s + 1.0), 0.0, r)
    assert eval_j(LOG, 0.0, 0.5, r) == pytest.approx(oracle, abs=1e-13)
    assert eval_j(LOG, 0.0, 0.5, r) == pytest.approx(1.0, abs=1e-14)


def test_eval_j_power():
    assert eval_j(P3, 0.0, 0.5, -2.0) == pytest.approx(8.0 / 3.0, rel=1e-15)


@pytest.mark.parametrize("name", ["log", "exp", "custom", "log_ramp"])
def test_eval_j_is_integral_of_beta(name):
    spec = catalog()[name]
    knots = np.linspace(-25, 25, 2001)
    for r in (-1.7, -0.3, 0.4, 1.9):
        pts = [0.0, *knots[(knots > min(0, r)) & (knots < max(0, r))]]
        oracle, _ = integrate.quad(lambda s: float(eval_beta(spec, 0.05, 0.5, s).selection),
                                   0.0, r, limit=500, points=pts)
        assert eval_j(spec, 0.05, 0.5, r) == pytest.approx(oracle, rel=1e-9, abs=1e-12)


def test_eval_beta_examples():
    b = eval_beta(Q, 0.0, 0.5, 3.0)
    assert (b.lo, b.hi) == (3.0, 3.0)
    b = eval_beta(EXP, 0.0, 0.5, 0.0)
    assert (b.lo, b.hi) == (-1.0, 1.0)
    assert b.selection == 0.0
    b = eval_beta(LOG, 0.0, 0.5, math.e - 1)
    assert b.lo == pytest.approx(1.0, abs=1e-15) and b.hi == b.lo


def test_graph_value_distance():
    g = ScalarGraphValue(-1.0, 1.0)
    assert g.distance(0.3) == 0.0
    assert g.distance(1.5) == pytest.approx(0.5)
    assert g.distance(-3.0) == pytest.approx(2.0)


@pytest.mark.parametrize("name", list(catalog()))
def test_beta_monotone(name):
    spec = catalog()[name]
    r = np.sort(np.random.default_rng(0).uniform(-3, 3, 2000))
    b = eval_beta(spec, 0.05, 0.5, r)
    assert np.all(b.hi[:-1] <= b.lo[1:] + 1e-12)
    assert np.all(b.lo <= b.hi)


# --- resolvent and Yosida -----------------------------------------------------

def test_resolvent_examples():
    assert resolvent(Q, 0.0, 0.5, 1.0, 2.0) == 1.0
    # soft-threshold against a brute-force prox
    s = np.linspace(-5, 5, 2_000_001)
    oracle = s[np.argmin((s - 2.0) ** 2 / (2 * 0.5) + np.abs(s))]
    assert resolvent(ABS, 0.0, 0.5, 0.5, 2.0) == pytest.approx(oracle, abs=1e-5)
    assert resolvent(ABS, 0.0, 0.5, 0.5, 2.0) == 1.5
    for spec in catalog().values():
        assert resolvent(spec, 0.0, 0.5, 0.3, 0.0) == 0.0


def test_yosida_examples():
    assert yosida_beta(Q, 0.0, 0.5, 1.0, 2.0) == 1.0
    assert yosida_beta(ABS, 0.0, 0.5, 0.5, 0.25) == 0.5
    for spec in catalog().values():
        assert yosida_beta(spec, 0.0, 0.5, 0.1, 0.0) == 0.0


def test_resolvent_rejects_bad_lambda():
    with pytest.raises(ValueError):
        resolvent(Q, 0.0, 0.5, 0.0, 1.0)


@pytest.mark.parametrize("name", list(catalog()))
def test_resolvent_solves_inclusion(name):
    spec = catalog()[name]
    r = np.random.default_rng(1).uniform(-20, 20, 500)
    lam = 0.05
    z = resolvent(spec, 0.05, 0.5, lam, r)
    b = eval_beta(spec, 0.05, 0.5, z)
    target = (r - z) / lam
    scale = 1.0 + np.abs(target)
    assert np.all(target >= b.lo - 1e-9 * scale) and np.all(target <= b.hi + 1e-9 * scale)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(catalog())), st.floats(-30, 30), st.floats(-30, 30),
       st.floats(1e-4, 1.0))
def test_resolvent_nonexpansive(name, r1, r2, lam):
    spec = catalog()[name]
    z1 = resolvent(spec, 0.0, 0.5, lam, r1)
    z2 = resolvent(spec, 0.0, 0.5, lam, r2)
    assert abs(z1 - z2) <= abs(r1 - r2) * (1 + 1e-12) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(catalog())), st.floats(-10, 10), st.floats(-10, 10),
       st.floats(1e-3, 1.0))
def test_yosida_monotone_and_lipschitz(name, r1, r2, lam):
    spec = catalog()[name]
    b1 = yosida_beta(spec, 0.0, 0.5, lam, r1)
    b2 = yosida_beta(spec, 0.0, 0.5, lam, r2)
    assert (b1 - b2) * (r1 - r2) >= -1e-9 * (1 + abs(b1) + abs(b2))
    assert abs(b1 - b2) <= abs(r1 - r2) / lam * (1 + 1e-9) + 1e-9


# --- Moreau envelope -----------------------------------------------------------

def test_moreau_examples():
    assert moreau_j(Q, 0.0, 0.5, 1.0, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert moreau_j(ABS, 0.0, 0.5, 0.5, 2.0) == pytest.approx(1.75, rel=1e-15)
    assert moreau_j(ABS, 0.0, 0.5, 0.5, 2.0) == pytest.approx(grid_moreau(np.abs, 0.5, 2.0), abs=1e-9)
    for spec in catalog().values():
        assert moreau_j(spec, 0.0, 0.5, 0.1, 0.0) == 0.0


@pytest.mark.parametrize("name", ["log", "exp", "power3", "custom"])
def test_moreau_matches_grid_minimization(name):
    spec = catalog()[name]
    jfun = lambda s: spec.j_a(s, 1.0)
    for r in (-2.0, 0.3, 1.7):
        got = moreau_j(spec, 0.0, 0.5, 0.2, r)
        assert got == pytest.approx(grid_moreau(jfun, 0.2, r, -6, 6, 1_200_001), abs=1e-9)


@pytest.mark.parametrize("name", list(catalog()))
def test_moreau_ordering(name):
    spec = catalog()[name]
    r = np.linspace(-5, 5, 201)
    j = eval_j(spec, 0.0, 0.5, r)
    prev = -np.inf
    for lam in (1e-1, 1e-2, 1e-3, 1e-4):
        m = moreau_j(spec, 0.0, 0.5, lam, r)
        assert np.all(m <= j + 1e-12)
        assert np.all(m >= prev - 1e-12)
        prev = m


# --- regularized potential ------------------------------------------------------

def test_eval_j_reg_examples():
    v, d = eval_j_reg(RegularizedPotential(Q, 1.0, 0.5), 0.0, 0.5, 2.0)
    assert (v, d) == (pytest.approx(2.0), pytest.approx(2.0))
    v, d = eval_j_reg(RegularizedPotential(ABS, 0.5, 0.0), 0.0, 0.5, 2.0)
    assert (v, d) == (pytest.approx(1.75), pytest.approx(1.0))
    for spec in catalog().values():
        v, d = eval_j_reg(RegularizedPotential(spec, 0.1, 0.1), 0.0, 0.5, 0.0)
        assert (v, d) == (0.0, 0.0)


@pytest.mark.parametrize("name", list(catalog()))
def test_eval_j_reg_derivative_matches_fd(name):
    reg = RegularizedPotential(catalog()[name], 0.05, 0.01)
    r = np.random.default_rng(2).uniform(-3, 3, 200)
    # avoid the images of kinks, where the second derivative jumps
    spec = reg.base
    jump = np.abs(spec.bounds_a(0.0, 1.0)[1]) * reg.lam
    r = r[np.abs(np.abs(r) - jump) > 1e-3]
    _, d = eval_j_reg(reg, 0.0, 0.5, r)
    h = 1e-6
    vp, _ = eval_j_reg(reg, 0.0, 0.5, r + h)
    vm, _ = eval_j_reg(reg, 0.0, 0.5, r - h)
    fd = (vp - vm) / (2 * h)
    assert np.all(np.abs(fd - d) <= 1e-6 * np.maximum(1.0, np.abs(d)))


@pytest.mark.parametrize("name", list(catalog()))
def test_regularized_derivative_lipschitz(name):
    reg = RegularizedPotential(catalog()[name], 0.1, 0.2)
    r = np.sort(np.random.default_rng(3).uniform(-5, 5, 2000))
    _, d = eval_j_reg(reg, 0.0, 0.5, r)
    q = np.diff(d) / np.diff(r)
    assert np.all(q <= (1 / reg.lam + reg.sigma) * (1 + 1e-8))
    assert np.all(q >= -1e-8)


@pytest.mark.parametrize("name", list(catalog()))
def test_moreau_upper_bound_from_growth(name):
    # j_{lam,sigma}(r) lies between j(0)-type lower values and j(r) + sigma r^2 / 2
    reg = RegularizedPotential(catalog()[name], 0.1, 0.01)
    r = np.linspace(-4, 4, 81)
    v, _ = eval_j_reg(reg, 0.0, 0.5, r)
    j = eval_j(reg.base, 0.0, 0.5, r)
    assert np.all(v <= j + 0.5 * reg.sigma * r * r + 1e-12)
    assert np.all(v >= 0.5 * reg.sigma * r * r - 1e-12)


def test_conjugate_reg_examples():
    v, d = conjugate_reg(RegularizedPotential(Q, 0.5, 0.5), 0.0, 0.5, 1.0)
    assert v == pytest.approx(3.0 / 7.0, rel=1e-14)
    assert d == pytest.approx(6.0 / 7.0, rel=1e-14)
    ov, od = grid_sup(lambda r: (7.0 / 12.0) * r * r, 1.0)
    assert v == pytest.approx(ov, abs=1e-9) and d == pytest.approx(od, abs=1e-5)
    for spec in catalog().values():
        v, _ = conjugate_reg(RegularizedPotential(spec, 0.1, 0.1), 0.0, 0.5, 0.0)
        assert v == 0.0
    v, d = conjugate_reg(RegularizedPotential(Q, 1e-6, 1.0), 0.0, 0.5, 2.0)
    ov, od = grid_sup(lambda r: 0.5 * (1 / (1 + 1e-6) + 1.0) * r * r, 2.0)
    assert v == pytest.approx(1.0, abs=1e-5) and d == pytest.approx(1.0, abs=1e-5)
    assert v == pytest.approx(ov, abs=1e-9)


def test_conjugate_reg_needs_sigma():
    with pytest.raises(UnsupportedConfigurationError):
        conjugate_reg(RegularizedPotential(Q, 0.5, 0.0), 0.0, 0.5, 1.0)


@pytest.mark.parametrize("name", list(catalog()))
def test_conjugate_reg_fenchel_equality_and_lipschitz(name):
    reg = RegularizedPotential(catalog()[name], 0.1, 0.2)
    w = np.sort(np.random.default_rng(4).uniform(-8, 8, 500))
    v, r = conjugate_reg(reg, 0.0, 0.5, w)
    jr, _ = eval_j_reg(reg, 0.0, 0.5, r)
    assert np.all(np.abs(jr + v - w * r) <= 1e-9 * (1 + np.abs(w * r)))
    assert np.all(np.diff(r) / np.diff(w) <= 1 / reg.sigma * (1 + 1e-8))


@pytest.mark.parametrize("name", ["quadratic", "log", "exp", "abs"])
def test_conjugate_reg_biconjugation(name):
    reg = RegularizedPotential(catalog()[name], 0.1, 0.5)
    omega = np.linspace(-40, 40, 400_001)
    cv, _ = conjugate_reg(reg, 0.0, 0.5, omega)
    for r in (-1.5, -0.2, 0.0, 0.7, 2.0):
        back = float(np.max(r * omega - cv))
        jr, _ = eval_j_reg(reg, 0.0, 0.5, r)
        assert back == pytest.approx(jr, abs=1e-6)


# --- conjugate ------------------------------------------------------------------

def test_eval_j_star_examples():
    assert eval_j_star(Q, 0.0, 0.5, 3.0) == 4.5
    assert eval_j_star(P3, 0.0, 0.5, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    ov, _ = grid_sup(lambda r: np.abs(r) ** 3 / 3, 1.0, -3, 3)
    assert eval_j_star(P3, 0.0, 0.5, 1.0) == pytest.approx(ov, abs=1e-9)
    assert eval_j_star(LOG, 0.0, 0.5, 1.0) == pytest.approx(math.e - 2, rel=1e-14)
    ov, _ = grid_sup(lambda r: LOG.j_a(r, 1.0), 1.0, -5, 5)
    assert eval_j_star(LOG, 0.0, 0.5, 1.0) == pytest.approx(ov, abs=1e-9)


def test_eval_j_star_infinite_outside_domain():
    assert eval_j_star(ABS, 0.0, 0.5, 1.5) == math.inf
    assert eval_j_star(ABS, 0.0, 0.5, 0.5) == 0.0


@pytest.mark.parametrize("name", ["log", "exp", "log_ramp", "power3"])
def test_closed_form_conjugate_matches_numeric_transform(name):
    spec = catalog()[name]
    for w in (-7.0, -1.3, -0.2, 0.0, 0.6, 2.5, 9.0):
        v, r = numeric_j_star(spec, 0.05, 0.5, w)
        assert eval_j_star(spec, 0.05, 0.5, w) == pytest.approx(v, rel=1e-10, abs=1e-10)


def test_numeric_conjugate_of_table_matches_exp_closed_form():
    # j(r) = e^r - r - 1 has j*(w) = (1 + w) log(1 + w) - w for w > -1
    spec = PotentialSpec("custom_tabulated", table=exp_table(10.0, 20001))
    for w in (-0.5, 0.0, 1.0, 5.0):
        exact = (1 + w) * math.log1p(w) - w
        assert eval_j_star(spec, 0.0, 0.5, w) == pytest.approx(exact, abs=2e-5)


# --- construction ---------------------------------------------------------------

@pytest.mark.parametrize("kwargs, match", [
    (dict(family="power", p=1.0), "p > 1"),
    (dict(family="polytropic"), "unknown"),
    (dict(family="log_type", coefficient=CoefficientField("constant", 1e-4)), "a0"),
    (dict(family="log_type", coefficient=CoefficientField("constant", 0.5)), "a\\(t, x\\) >= 1"),
    (dict(family="custom_tabulated", table=((0, 0, 0), (1, -1, -1))), "breakpoint 1"),
    (dict(family="custom_tabulated"), "table"),
])
def test_invalid_specs_rejected(kwargs, match):
    with pytest.raises(ValueError, match=match):
        PotentialSpec(**kwargs)


def test_coefficient_presets():
    c = CoefficientField("time_ramp", 1.0, 1.0, horizon=0.1)
    assert c.evaluate(0.0, 0.5) == 1.0
    assert c.evaluate(0.05, 0.5) == pytest.approx(1.5)
    assert c.evaluate(1.0, 0.5) == 2.0
    b = CoefficientField("space_bump", 2.0, 1.0, center=(0.5, 0.5), width=0.2)
    x = np.array([[0.5, 0.5], [0.5, 0.7]])
    assert b.evaluate(0.0, x).tolist() == pytest.approx([3.0, 2.0 + math.exp(-0.5)])
    spec = PotentialSpec("exp_type", coefficient=b)
    assert spec.space_dependent and not spec.time_dependent


def test_time_dependent_coefficient_changes_values():
    spec = catalog()["log_ramp"]
    assert eval_j(spec, 0.0, 0.5, 2.0) != eval_j(spec, 0.1, 0.5, 2.0)
    b = eval_beta(spec, 0.1, 0.5, 0.0)
    assert (b.lo, b.hi) == pytest.approx((-math.log(2.0), math.log(2.0)))
