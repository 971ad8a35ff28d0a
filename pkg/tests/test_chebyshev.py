import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermiblock.chebyshev import (
    ChebyshevApprox,
    bernstein_bound,
    cheb_multiply,
    chebyshev_fit,
    eval_poly,
    exp_taylor,
    fermi_dirac_approx,
    fermi_ellipse,
    fermi_formula_bound,
    greens_scalar_approx,
    log_fermi_approx,
    resolvent_formula_bound,
)

GRID = np.linspace(-1, 1, 10_000)


def test_fit_identity():
    a = chebyshev_fit(lambda x: x, 1)
    assert a.coeffs[1] == pytest.approx(1.0, abs=1e-15)
    assert abs(a.coeffs[0]) < 1e-15


def test_fit_cos():
    a = chebyshev_fit(np.cos, 20)
    assert np.max(np.abs(a(GRID) - np.cos(GRID))) < 1e-15


def test_fit_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        chebyshev_fit(lambda x: np.where(x > 0.5, np.inf, x), 5)


def test_fit_with_ellipse_certifies():
    # exp is entire; |exp| <= e^{a_r} on E_r
    r = 3.0
    a = chebyshev_fit(np.exp, 12, ellipse=(r, math.exp((r + 1 / r) / 2)))
    assert a.provenance == "bernstein"
    assert np.max(np.abs(a(GRID) - np.exp(GRID))) <= a.certified_bound


def test_fermi_dirac_c4_d100_within_bound():
    a = fermi_dirac_approx(4.0, 100)
    assert a.grid_error() <= a.certified_bound


def test_fermi_dirac_c8_d2000_formula_value():
    a = fermi_dirac_approx(8.0, 2000)
    assert a.certified_bound == pytest.approx(12 / 2000 * (8 / math.pi) ** 4, rel=1e-12)
    assert a.certified_bound == pytest.approx(0.2527, abs=1e-3)
    assert a.grid_error() <= a.certified_bound


def test_fermi_dirac_midpoint_and_small_c_limit():
    for c in [0.5, 3.0, 20.0]:
        assert eval_poly(fermi_dirac_approx(c, 400), 0.0) == pytest.approx(0.125, abs=1e-12)
    tiny = fermi_dirac_approx(1e-9, 10)
    assert tiny.coeffs[0] == pytest.approx(0.125, abs=1e-9)
    assert np.max(np.abs(tiny.coeffs[1:])) < 1e-9
    zero = fermi_dirac_approx(0.0, 10)
    assert zero.coeffs[0] == 0.125 and zero.certified_bound == 0


@pytest.mark.parametrize("c", [1.0, 4.0, 8.0, 16.0])
@pytest.mark.parametrize("d", [100, 1000, 4000])
def test_fermi_dirac_grid(c, d):
    a = fermi_dirac_approx(c, d)
    assert a.grid_error() <= a.certified_bound
    assert a.certified_bound >= fermi_formula_bound(c, d)


def test_bernstein_monotone_in_degree():
    vals = [bernstein_bound(1.3, 2.0, d) for d in range(0, 60, 5)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert bernstein_bound(1.0, 1.0, 10) == math.inf


def test_fermi_ellipse_keeps_poles_outside():
    for c in [0.3, 2.0, 10.0]:
        r = fermi_ellipse(c)
        b = (r - 1 / r) / 2  # imaginary semi-axis
        assert c * b <= math.pi / 2
        assert b < math.pi / c


def test_greens_resolvent_term_example():
    assert resolvent_formula_bound(1.0, 4.0, 1000) == pytest.approx(0.002)


def test_greens_rejects_odd_degree():
    with pytest.raises(ValueError):
        greens_scalar_approx(1.0, 1.0, 0.5, 0.0, 101)


def test_greens_beta_zero_reduces_to_resolvents():
    a = greens_scalar_approx(0.0, 1.0, 1.0, 0.3, 200)
    g1 = 1 / (1j - (GRID + 0.3))
    g2 = -1 / (1j + (GRID + 0.3))
    target = (1.0 / 16) * (g1 + g2)
    err = np.max(np.abs(a(GRID) - target))
    assert err <= resolvent_formula_bound(1.0, 1.0, 200)


@pytest.mark.parametrize("beta,eta,omega", [(2.0, 0.5, 0.0), (2.0, 1.0, -1.0), (0.5, 2.0, 1.0), (4.0, 1.0, 0.5)])
def test_greens_grid_and_half_bound(beta, eta, omega):
    a = greens_scalar_approx(beta, 2.0, eta, omega, 4000)
    assert a.grid_error() <= a.certified_bound
    assert np.max(np.abs(a.target_fn(GRID))) <= 0.5
    if a.certified_bound < 0.1:
        assert np.max(np.abs(a(GRID))) <= 0.5


def test_greens_certificate_is_at_least_closed_form_terms():
    a = greens_scalar_approx(2.0, 2.0, 1.0, 0.0, 20_000)
    closed_form = fermi_formula_bound(4.0, 20_000) + resolvent_formula_bound(2.0, 1.0, 20_000)
    assert a.target["factor_precondition"]
    assert a.certified_bound >= closed_form


def test_greens_eta_doubling_shrinks_resolvent_term():
    for s, eta in [(1.0, 4.0), (2.0, 0.5)]:
        ratio = resolvent_formula_bound(s, eta, 100) / resolvent_formula_bound(s, 2 * eta, 100)
        assert ratio >= 4 - 1e-12


def test_log_fermi_examples():
    a0 = log_fermi_approx(0.0, 1.0, 10)
    assert a0.coeffs[0] == pytest.approx(math.log(2))
    a = log_fermi_approx(4.0, 1.0, 500)
    assert a.grid_error() <= a.certified_bound
    big = log_fermi_approx(30.0, 1.0, 2000)
    assert abs(big(1.0)) < 1e-10


def test_exp_taylor_examples():
    p0 = exp_taylor(0.0, 5)
    assert np.allclose(p0.evaluate(GRID), 1.0)
    p = exp_taylor(1.0, 20)
    assert p.max_error(points=201, precision=60) < 1e-18
    assert exp_taylor(5.0, 40).max_error() < exp_taylor(5.0, 10).max_error()


@pytest.mark.parametrize("t,K", [(1.0, 4), (2.0, 4), (2.0, 9), (3.0, 16), (4.0, 25), (5.0, 30)])
def test_exp_taylor_instantiated_bound(t, K):
    assert t <= math.sqrt(K)
    p = exp_taylor(t, K)
    assert p.max_error(precision=40) <= p.bound


def test_eval_poly_examples():
    assert eval_poly(np.array([0.0, 1.0]), 0.3) == pytest.approx(0.3)
    assert eval_poly(np.array([0.0, 0.0, 1.0]), 0.5) == pytest.approx(-0.5)
    with pytest.warns(RuntimeWarning):
        eval_poly(np.array([1.0, 1.0]), 1.5)


def test_eval_poly_matches_trig_definition():
    rng = np.random.default_rng(3)
    a = rng.normal(size=31)
    x = rng.uniform(-1, 1, 100)
    direct = np.cos(np.outer(np.arccos(x), np.arange(31))) @ a
    assert np.max(np.abs(eval_poly(a, x) - direct)) < 1e-12


def test_clenshaw_stable_high_degree():
    a = fermi_dirac_approx(8.0, 100_000)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v = a(GRID)
    assert np.all(np.isfinite(v))


@settings(max_examples=30, deadline=None)
@given(
    a=st.lists(st.floats(-1, 1), min_size=1, max_size=12),
    b=st.lists(st.floats(-1, 1), min_size=1, max_size=12),
)
def test_cheb_multiply_property(a, b):
    x = np.linspace(-1, 1, 37)
    prod = cheb_multiply(np.array(a), np.array(b))
    assert len(prod) == len(a) + len(b) - 1
    assert np.allclose(eval_poly(prod, x), eval_poly(np.array(a), x) * eval_poly(np.array(b), x), atol=1e-12)


def test_record_round_trip():
    a = greens_scalar_approx(1.0, 2.0, 1.0, 0.5, 40)
    b = ChebyshevApprox.from_record(a.to_record())
    assert np.array_equal(a.coeffs, b.coeffs)
    assert b.certified_bound == a.certified_bound and b.target == a.target
    assert b.degree == 40


def test_scaled_approx():
    a = fermi_dirac_approx(4.0, 200)
    b = a.scaled(2.0)
    assert b.certified_bound == 2 * a.certified_bound
    assert np.allclose(b.coeffs, 2 * a.coeffs)
