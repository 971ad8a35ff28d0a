import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import expit

from fermiblock.block_encoding import dilate, encode_sparse, extract_block
from fermiblock.chebyshev import resolvent_formula_bound
from fermiblock.correlation import (
    ErrorBudget,
    exact_reference,
    fermi_degree,
    greens_degree,
    greens_fourier,
    momentum_transform,
    thermal_correlation,
    time_evolved_correlation,
)
from fermiblock.oracles import (
    _from_row_dicts,
    build_diagonal,
    build_tight_binding,
    chain_spec,
    materialize,
    square_spec,
)

CHAIN8 = build_tight_binding(chain_spec(8))
H8 = materialize(CHAIN8)


def physical(be):
    return be.alpha * be.top_block


def diagonal_oracle(values):
    n = int(np.log2(len(values)))
    return _from_row_dicts(n, 1, lambda i: {i: values[i]} if values[i] else {}, label="diag")


def test_error_budget_sum():
    b = ErrorBudget(1e-3, 2e-4, 1e-5, 3e-6, alpha=4)
    assert b.eps_Tot == pytest.approx(1e-3 + 2e-4 + 1e-5 + 3e-6)
    assert b.physical == pytest.approx(4 * b.eps_Tot)
    with pytest.raises(ValueError):
        ErrorBudget(-1.0)


def test_thermal_beta_zero_half_identity():
    be = thermal_correlation(CHAIN8, 0.0, 4)
    assert np.allclose(physical(be), np.eye(8) / 2)


def test_thermal_chain_beta2_d2000():
    be = thermal_correlation(CHAIN8, 2.0, 2000)
    exact = exact_reference(H8, "thermal", beta=2.0)
    assert be.alpha == 4
    assert np.max(np.abs(physical(be) - exact)) <= be.eps
    assert be.meta["budget"]["physical"] == pytest.approx(be.eps)


def test_thermal_diagonal_levels():
    o = diagonal_oracle([1.0, -1.0, 1.0, -1.0])
    be = thermal_correlation(o, 4.0, eps_PA=1e-3)
    d = np.diag(physical(be)).real
    expected = np.array([1, -1, 1, -1], dtype=float)
    assert np.max(np.abs(d - 1 / (1 + np.exp(4 * expected)))) <= be.eps


def test_thermal_degree_insufficient_raises():
    with pytest.raises(ValueError, match="certifies"):
        thermal_correlation(CHAIN8, 4.0, 100, eps_PA=1e-3)


def test_fermi_degree_inverts_formula():
    for c, eps in [(1.0, 1e-3), (8.0, 1e-2), (16.0, 0.5)]:
        d = fermi_degree(c, eps)
        from fermiblock.chebyshev import fermi_formula_bound

        assert fermi_formula_bound(c, d) <= eps < fermi_formula_bound(c, max(1, d - 1)) or d == 1


def test_thermal_spectrum_and_trace():
    be = thermal_correlation(CHAIN8, 1.0, eps_PA=1e-3)
    M = physical(be)
    w = np.linalg.eigvalsh((M + M.conj().T) / 2)
    assert w.min() >= -be.eps and w.max() <= 1 + be.eps
    occ = expit(-np.linalg.eigvalsh(H8))
    assert abs(np.trace(M).real - occ.sum()) <= 8 * be.eps


def test_thermal_resource_metadata():
    be = thermal_correlation(CHAIN8, 4.0, eps_PA=0.5)
    assert be.meta["call_formula"].startswith("Theta(beta^4")
    be = thermal_correlation(CHAIN8, 1.0, eps_PA=0.5)
    assert be.meta["call_formula"].startswith("Theta(beta^2")


def test_evolved_zero_time_returns_m0():
    M0 = np.diag([1, 0, 0, 1, 0, 0, 0, 0]).astype(complex)
    be = time_evolved_correlation(CHAIN8, dilate(M0), 0.0, 0.0)
    assert np.allclose(physical(be), M0)


def test_evolved_stationary_fermi_sea():
    w, V = np.linalg.eigh(H8)
    M0 = V[:, :4] @ V[:, :4].conj().T
    be = time_evolved_correlation(CHAIN8, dilate(M0), 2.3, 2.3)
    assert np.max(np.abs(physical(be) - M0)) < 1e-10


def test_evolved_site_projector_t2():
    M0 = np.zeros((8, 8), complex)
    M0[3, 3] = 1
    be = time_evolved_correlation(CHAIN8, dilate(M0), 2.0, 2.0)
    exact = expm(2j * H8) @ M0 @ expm(-2j * H8)
    assert np.max(np.abs(physical(be) - exact)) <= be.eps + 1e-10
    assert abs(np.trace(physical(be)) - 1) < 1e-10


def test_evolved_error_composition():
    M0 = np.eye(8) * 0.5
    be = time_evolved_correlation(CHAIN8, dilate(M0), 1.0, 2.0, eps_be=1e-6)
    # every factor has alpha 1: eps adds over the two evolutions
    assert be.eps >= 2 * 1e-6 * 3
    assert be.eps == pytest.approx(2e-6 + 4e-6, rel=1e-3)


def test_greens_rejects_bad_arguments():
    with pytest.raises(ValueError, match="eta"):
        greens_fourier(CHAIN8, 1.0, 0.0, 0.0, 10)
    with pytest.raises(ValueError, match="omega"):
        greens_fourier(CHAIN8, 1.0, 1.0, 5.0, 10)
    with pytest.raises(ValueError):
        greens_fourier(CHAIN8, 1.0, 1.0, 0.0, 11)


def test_greens_zero_level_large_beta():
    # a single level at energy 0: the Fermi factor is 1/2 at every beta
    o = diagonal_oracle([0.0, 0.0])
    o = type(o)(n=1, s=1, row=o.row, entry=o.entry, label="zero")
    eta, omega = 1.0, 0.4
    be = greens_fourier(o, 4.0, eta, omega, eps_PA=0.2)
    expected = 0.5 / (1j * eta - omega) - 0.5 / (1j * eta + omega)
    assert be.alpha == pytest.approx(8 / eta)
    assert np.max(np.abs(physical(be) - expected * np.eye(2))) <= be.eps


def test_greens_chain_eta_half_omega_zero():
    be = greens_fourier(CHAIN8, 2.0, 0.5, 0.0, eps_PA=0.02)
    exact = exact_reference(H8, "greens", beta=2.0, eta=0.5, omega=0.0)
    assert np.max(np.abs(physical(be) - exact)) <= be.eps
    assert be.meta["budget"]["eps_Tot"] <= 0.02


def test_greens_all_empty_reduces_to_first_term():
    # every level far above zero at low temperature: only 1/(i eta - (w + omega)) survives
    levels = [0.9, 0.8, 0.95, 0.85]
    o = diagonal_oracle(levels)
    be = greens_fourier(o, 10.0, 1.0, 0.2, eps_PA=0.5)
    first = np.diag([1 / (1j - (w + 0.2)) for w in levels])
    assert np.max(np.abs(physical(be) - first)) <= be.eps + 2 * np.exp(-10 * 0.8)


def test_greens_degree_even_and_sufficient():
    d = greens_degree(2.0, 2.0, 1.0, 0.05)
    assert d % 2 == 0
    assert resolvent_formula_bound(2.0, 1.0, d) <= 0.05


def test_exact_reference_examples():
    assert np.allclose(exact_reference(H8, "thermal", beta=0.0), np.eye(8) / 2)
    M0 = np.diag(np.arange(8) % 2).astype(complex)
    assert np.allclose(exact_reference(H8, "evolved", M0=M0, t1=0.0, t2=0.0), M0)
    # two-level system with eigenvalues +-1 (h = sigma_x)
    h = np.array([[0, 1], [1, 0]], complex)
    beta, eta, omega = 2.0, 1.0, 0.0
    G = exact_reference(h, "greens", beta=beta, eta=eta, omega=omega)
    v = np.array([[1, 1], [1, -1]]) / np.sqrt(2)

    def g(e):
        f = 1 / (1 + np.exp(beta * e))
        return (1 - f) / (1j * eta - (e + omega)) - f / (1j * eta + e + omega)

    hand = v @ np.diag([g(1.0), g(-1.0)]) @ v.T
    assert np.allclose(G, hand, atol=1e-14)
    with pytest.raises(ValueError):
        exact_reference(h, "bogus")


def test_momentum_transform_examples():
    assert np.allclose(momentum_transform(np.eye(16), (4, 4)), np.eye(16))
    D = np.diag(np.arange(16) % 3).astype(complex)
    back = momentum_transform(momentum_transform(D, (4, 4), inverse=True), (4, 4))
    assert np.max(np.abs(back - D)) < 1e-12
    with pytest.raises(ValueError):
        momentum_transform(np.eye(8), (4, 4))


def test_momentum_half_filled_sea_is_projector():
    # periodic 8x4 torus: the half-filled ground state is momentum-diagonal
    spec = square_spec((8, 4), hop=-1.0, boundary="periodic")
    h = materialize(build_tight_binding(spec))
    hk = momentum_transform(h, (8, 4))
    assert np.max(np.abs(hk - np.diag(np.diag(hk)))) < 1e-12
    order = np.argsort(np.diag(hk).real, kind="stable")
    occ = np.zeros(32)
    occ[order[:16]] = 1
    M = momentum_transform(np.diag(occ).astype(complex), (8, 4), inverse=True)
    assert np.max(np.abs(M @ M - M)) < 1e-10
    assert np.trace(M).real == pytest.approx(16)
