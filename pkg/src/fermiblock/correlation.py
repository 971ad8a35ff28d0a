"""Encodings of thermal, time-evolved and Green's-function correlation matrices."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from functools import reduce

import numpy as np
from scipy.linalg import dft
from scipy.special import expit

from .block_encoding import (
    BlockEncoding,
    apply_polynomial,
    encode_sparse,
    evolve,
    multiply,
    rescale,
)
from .chebyshev import fermi_dirac_approx, greens_scalar_approx, resolvent_formula_bound
from .oracles import OracleTuple

THERMAL_SCALE = 4.0


@dataclass(frozen=True)
class ErrorBudget:
    """Additive error decomposition of a polynomial block-encoding.

    All terms refer to the normalized (alpha = 1) encoding; ``alpha`` converts
    them to the physical scale.
    """

    eps_PA: float
    eps_ph: float = 0.0
    delta_qsvt: float = 0.0
    eps_M: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("eps_PA", "eps_ph", "delta_qsvt", "eps_M"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def eps_Tot(self) -> float:
        return self.eps_PA + self.eps_ph + self.delta_qsvt + self.eps_M

    @property
    def physical(self) -> float:
        return self.alpha * self.eps_Tot

    def as_dict(self) -> dict:
        return {**asdict(self), "eps_Tot": self.eps_Tot, "physical": self.physical}


# ---------------------------------------------------------------------------
# Degree selection
# ---------------------------------------------------------------------------


def fermi_degree(c: float, eps_PA: float) -> int:
    """Smallest degree whose closed-form Fermi-Dirac bound is at most ``eps_PA``."""
    if eps_PA <= 0:
        raise ValueError("eps_PA must be positive")
    if c == 0:
        return 1
    K = 12 * (c / math.pi) ** 4 if c >= 2 * math.pi else 40 * (c / math.pi) ** 2
    return max(1, math.ceil(K / eps_PA))


def greens_degree(beta: float, s: float, eta: float, eps_PA: float) -> int:
    """Smallest even degree whose closed-form Green's bound is at most ``eps_PA``."""
    if eps_PA <= 0:
        raise ValueError("eps_PA must be positive")
    c = beta * s
    if c == 0:
        Kf = 0.0
    else:
        Kf = 12 * (c / math.pi) ** 4 if c >= 2 * math.pi else 40 * (c / math.pi) ** 2
    Kr = resolvent_formula_bound(s, eta, 1)
    d = math.ceil((Kf + Kr) / eps_PA)
    return d + (d % 2) if d > 0 else 2


def thermal_call_formula(beta: float, s: float, eps_PA: float) -> str:
    c = beta * s
    if c == 0:
        return "O(1) (constant polynomial at beta s = 0)"
    if c >= 2 * math.pi:
        return f"Theta(beta^4 s^4 / eps_PA) = Theta({c**4 / eps_PA:.6g})"
    return f"Theta(beta^2 s^2 / eps_PA) = Theta({c**2 / eps_PA:.6g})"


def greens_call_formula(beta: float, s: float, eta: float, eps_PA: float) -> str:
    c = beta * s
    fermi = c**4 / eps_PA if c >= 2 * math.pi else c**2 / eps_PA
    q = s / eta
    res = q**4 / eps_PA if 2 * q >= 1 else q**2 / eps_PA
    return f"Theta({fermi:.6g}) + Theta({res:.6g})"


def _oracle_encoding(source: OracleTuple | BlockEncoding, eps_be: float) -> BlockEncoding:
    be_h = encode_sparse(source) if isinstance(source, OracleTuple) else source
    if eps_be:
        be_h = replace(be_h, eps=eps_be)
    return be_h


def _attach(be: BlockEncoding, budget: ErrorBudget, **extra) -> BlockEncoding:
    meta = {**be.meta, "budget": budget.as_dict(), **extra}
    return replace(be, meta=meta)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def thermal_correlation(
    oracle_h: OracleTuple | BlockEncoding,
    beta: float,
    d: int | None = None,
    *,
    eps_PA: float | None = None,
    delta_qsvt: float = 0.0,
    eps_be: float = 0.0,
) -> BlockEncoding:
    """Encoding of ``(I + exp(beta h))^-1`` with alpha = 4.

    The polynomial acts on ``h/s`` and targets the quarter-scaled Fermi
    function, so the extracted block times 4 approximates the physical
    correlation matrix and the declared error is four times the normalized
    budget.

    Parameters
    ----------
    d : int, optional
        Polynomial degree. Chosen from ``eps_PA`` when omitted.
    eps_PA : float, optional
        Target approximation error at the normalized scale. If both ``d``
        and ``eps_PA`` are given, the certified bound at ``d`` must meet it.
    eps_be : float
        Declared precision of the sparse-oracle encoding (scale s).
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    be_h = _oracle_encoding(oracle_h, eps_be)
    s = be_h.alpha
    c = beta * s
    if d is None:
        if eps_PA is None:
            raise ValueError("give a degree or a target eps_PA")
        d = fermi_degree(c, eps_PA)
    approx = fermi_dirac_approx(c, d)
    if eps_PA is not None and approx.certified_bound > eps_PA:
        raise ValueError(
            f"degree {d} certifies {approx.certified_bound:.3g} > eps_PA = {eps_PA:.3g}"
        )
    be = apply_polynomial(be_h, approx, delta_qsvt)
    b = be.meta["budget"]
    budget = ErrorBudget(b["eps_PA"], b["eps_ph"], b["delta_qsvt"], alpha=THERMAL_SCALE)
    be = rescale(be, THERMAL_SCALE, "thermal(alpha=4)")
    return _attach(
        be, budget, oracle_calls=d, call_formula=thermal_call_formula(beta, s, approx.certified_bound),
        beta=beta, s=s,
    )


def time_evolved_correlation(
    oracle_h: OracleTuple | BlockEncoding,
    be_M0: BlockEncoding,
    t1: float,
    t2: float,
    *,
    eps_be: float = 0.0,
) -> BlockEncoding:
    """Encoding of ``exp(i h t1) M0 exp(-i h t2)`` with the alpha of ``be_M0``."""
    be_h = _oracle_encoding(oracle_h, eps_be)
    if be_h.n != be_M0.n:
        raise ValueError("initial-state encoding and Hamiltonian sizes differ")
    u1 = evolve(be_h, t1)
    u2 = evolve(be_h, -t2)
    be = multiply(multiply(u1, be_M0), u2)
    budget = ErrorBudget(
        eps_PA=0.0, eps_ph=(be.eps - be_M0.eps) / be.alpha, eps_M=be_M0.eps / be.alpha, alpha=be.alpha
    )
    return _attach(
        be, budget, t1=t1, t2=t2,
        call_formula=f"O(alpha (|t1| + |t2|)) with alpha = {be_h.alpha:g}",
    )


def greens_fourier(
    oracle_h: OracleTuple | BlockEncoding,
    beta: float,
    eta: float,
    omega: float,
    d: int | None = None,
    *,
    eps_PA: float | None = None,
    delta_qsvt: float = 0.0,
    eps_be: float = 0.0,
) -> BlockEncoding:
    """Encoding of the regularized thermal Green's function with alpha = 8/eta."""
    if eta <= 0:
        raise ValueError("eta must be positive: the resolvent poles would lie on the real axis")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    be_h = _oracle_encoding(oracle_h, eps_be)
    s = be_h.alpha
    if abs(omega) > s + 1:
        raise ValueError(f"|omega| = {abs(omega):g} exceeds s + 1 = {s + 1:g}")
    if d is None:
        if eps_PA is None:
            raise ValueError("give a degree or a target eps_PA")
        d = greens_degree(beta, s, eta, eps_PA)
    approx = greens_scalar_approx(beta, s, eta, omega, d)
    if eps_PA is not None and approx.certified_bound > eps_PA:
        raise ValueError(
            f"degree {d} certifies {approx.certified_bound:.3g} > eps_PA = {eps_PA:.3g}"
        )
    be = apply_polynomial(be_h, approx, delta_qsvt)
    b = be.meta["budget"]
    scale = 8.0 / eta
    budget = ErrorBudget(b["eps_PA"], b["eps_ph"], b["delta_qsvt"], alpha=scale)
    be = rescale(be, scale, f"greens(alpha=8/eta={scale:g})")
    return _attach(
        be, budget, oracle_calls=d,
        call_formula=greens_call_formula(beta, s, eta, approx.certified_bound),
        beta=beta, eta=eta, omega=omega, s=s,
    )


# ---------------------------------------------------------------------------
# Exact references
# ---------------------------------------------------------------------------


def _spectral(h: np.ndarray, values) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    w, V = np.linalg.eigh((h + h.conj().T) / 2)
    return (V * values(w)) @ V.conj().T


def exact_reference(h: np.ndarray, kind: str, **params) -> np.ndarray:
    """Ground-truth matrices through the spectral decomposition of ``h``.

    ``kind`` is ``"thermal"`` (``beta``), ``"evolved"`` (``M0``, ``t1``,
    ``t2``) or ``"greens"`` (``beta``, ``eta``, ``omega``).
    """
    if kind == "thermal":
        beta = params["beta"]
        return _spectral(h, lambda w: expit(-beta * w))
    if kind == "evolved":
        M0 = np.asarray(params["M0"], dtype=complex)
        t1, t2 = params.get("t1", 0.0), params.get("t2", 0.0)
        return _spectral(h, lambda w: np.exp(1j * t1 * w)) @ M0 @ _spectral(h, lambda w: np.exp(-1j * t2 * w))
    if kind == "greens":
        beta, eta, omega = params["beta"], params["eta"], params["omega"]

        def g(w):
            f = expit(-beta * w)
            return (1 - f) / (1j * eta - (w + omega)) - f / (1j * eta + (w + omega))

        return _spectral(h, g)
    raise ValueError(f"unknown reference kind {kind!r}")


def momentum_transform(M: np.ndarray, dims, inverse: bool = False) -> np.ndarray:
    """Conjugate M by the unitary multi-dimensional DFT over the lattice axes.

    Axis order follows the C-order site index, so the first axis is the most
    significant factor of the Kronecker product.
    """
    M = np.asarray(M, dtype=complex)
    size = int(np.prod(dims))
    if M.shape != (size, size):
        raise ValueError(f"matrix of shape {M.shape} does not match lattice of {size} sites")
    F = reduce(np.kron, [dft(int(L), scale="sqrtn") for L in dims], np.ones((1, 1)))
    if inverse:
        return F.conj().T @ M @ F
    return F @ M @ F.conj().T
