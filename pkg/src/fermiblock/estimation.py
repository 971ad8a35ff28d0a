"""Sampling estimators for entries, densities and Wick contractions."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .block_encoding import BlockEncoding, apply_polynomial, encode_sparse
from .chebyshev import log_fermi_approx
from .oracles import OracleTuple, scan_terms

DEFAULT_SAMPLE_CONSTANT = 8.0


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class EstimateResult:
    """Statistical estimate with its error decomposition.

    ``error_bound = eps1 + alpha * eps2`` holds with probability at least
    ``1 - delta``.
    """

    value: complex
    eps1: float
    eps2: float
    delta: float
    samples: int
    alpha: float = 1.0

    @property
    def error_bound(self) -> float:
        return self.eps1 + self.alpha * self.eps2


def hadamard_samples(eps2: float, delta: float, c: float = DEFAULT_SAMPLE_CONSTANT) -> int:
    """Total shot count ``ceil(c eps2^-2 log(4/delta))`` over both phase settings."""
    if eps2 <= 0 or not 0 < delta < 1:
        raise ValueError("need eps2 > 0 and 0 < delta < 1")
    return math.ceil(c * math.log(4.0 / delta) / eps2**2)


def _binomial(n: int, p: float, seeds, jobs: int = 1) -> int:
    """Sum of binomial draws over disjoint streams; order-independent merge."""
    p = min(1.0, max(0.0, p))
    parts = len(seeds)
    sizes = [n // parts + (k < n % parts) for k in range(parts)]

    def draw(k):
        return int(make_rng(seeds[k]).binomial(sizes[k], p))

    if jobs > 1 and parts > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return sum(pool.map(draw, range(parts)))
    return sum(draw(k) for k in range(parts))


def estimate_entry(
    be: BlockEncoding,
    i: int,
    j: int,
    eps2: float,
    delta: float,
    seed: int = 0,
    *,
    exact: bool = False,
    c: float = DEFAULT_SAMPLE_CONSTANT,
    batches: int = 1,
    jobs: int = 1,
) -> EstimateResult:
    """Simulated Hadamard-test estimate of ``alpha * <0 i| U |0 j>``.

    Half of the shots use the real-part setting, where the ancilla reads 0
    with probability ``(1 + Re a)/2``. The other half use the imaginary-part
    setting with probability ``(1 - Im a)/2``. With ``c = 8`` each part is
    within ``eps2/sqrt(2)`` with probability at least ``1 - delta/2``.

    ``exact=True`` returns the amplitude itself (the infinite-shot limit).
    """
    N = be.dim
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"entry ({i}, {j}) outside [0, {N})")
    a = be.amplitude(i, j)
    if exact:
        return EstimateResult(be.alpha * a, be.eps, 0.0, 0.0, 0, be.alpha)
    D = hadamard_samples(eps2, delta, c)
    half = math.ceil(D / 2)
    ss = np.random.SeedSequence(seed)
    re_seeds, im_seeds = (s.spawn(batches) for s in ss.spawn(2))
    k_re = _binomial(half, 0.5 + 0.5 * a.real, re_seeds, jobs)
    k_im = _binomial(half, 0.5 - 0.5 * a.imag, im_seeds, jobs)
    amp = complex(2 * k_re / half - 1, 1 - 2 * k_im / half)
    return EstimateResult(be.alpha * amp, be.eps, eps2, delta, 2 * half, be.alpha)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def term_values(oracle_h: OracleTuple, M: np.ndarray) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Expectation of every Hamiltonian term in the state with correlation matrix M.

    A term is an unordered pair ``i <= j`` with ``h_ij != 0``; its value is
    ``h_ii M_ii`` on the diagonal and ``2 Re(h_ij M_ji)`` otherwise.
    """
    terms = scan_terms(oracle_h)
    vals = np.empty(len(terms))
    for k, (i, j) in enumerate(terms):
        h = oracle_h.entry(i, j)
        vals[k] = (h * M[i, i]).real if i == j else 2.0 * (h * M[j, i]).real
    return terms, vals


def energy_samples(eps: float, delta: float, value_range: float) -> int:
    """Hoeffding count for a mean of values in ``[-value_range, value_range]``."""
    if eps <= 0 or not 0 < delta < 1:
        raise ValueError("need eps > 0 and 0 < delta < 1")
    return math.ceil(2 * value_range**2 * math.log(2.0 / delta) / eps**2)


def estimate_energy_density(
    be_M: BlockEncoding,
    hamiltonian_oracle: OracleTuple,
    eps: float,
    delta: float,
    seed: int = 0,
    *,
    exhaustive: bool = False,
) -> EstimateResult:
    """Mean term energy ``Tr(H rho)/K`` from uniformly sampled terms.

    Entries of M are read exactly from the block. Each term value lies in
    ``[-2b, 2b]`` with ``b`` the oracle's entry bound, so
    ``S = ceil(8 b^2 eps^-2 log(2/delta))`` samples suffice.
    """
    terms = scan_terms(hamiltonian_oracle)
    K = len(terms)
    if K == 0:
        raise ValueError("Hamiltonian has no terms")
    alpha = be_M.alpha
    block = be_M.top_block

    def value(i, j):
        h = hamiltonian_oracle.entry(i, j)
        if i == j:
            return (h * alpha * block[i, i]).real
        return 2.0 * (h * alpha * block[j, i]).real

    if exhaustive:
        total = math.fsum(value(i, j) for i, j in terms)
        return EstimateResult(total / K, be_M.eps, 0.0, 0.0, K, 1.0)
    S = energy_samples(eps, delta, 2.0 * hamiltonian_oracle.entry_bound)
    picks = make_rng(seed).integers(0, K, size=S)
    vals = [value(*terms[p]) for p in picks]
    return EstimateResult(math.fsum(vals) / S, be_M.eps, eps, delta, S, 1.0)


def particle_density(be_M: BlockEncoding, samples: int, seed: int = 0) -> float:
    """Mean of uniformly sampled diagonal entries; estimates ``Tr(M)/2^n``."""
    if samples < 1:
        raise ValueError("need at least one sample")
    idx = make_rng(seed).integers(0, be_M.dim, size=samples)
    diag = be_M.alpha * np.real(np.diagonal(be_M.top_block))
    return float(math.fsum(diag[idx]) / samples)


def wick_quartic(M: np.ndarray, i: int, j: int, k: int, l: int) -> complex:
    """``<a_i^dag a_j^dag a_k a_l> = M_il M_jk - M_ik M_jl``."""
    return complex(M[i, l] * M[j, k] - M[i, k] * M[j, l])


# ---------------------------------------------------------------------------
# Free energy
# ---------------------------------------------------------------------------


def free_energy_density(
    oracle_h: OracleTuple | BlockEncoding,
    beta: float,
    d: int,
    samples: int,
    seed: int = 0,
    *,
    delta: float = 0.05,
    tolerance: float | None = None,
) -> EstimateResult:
    """Sampled ``F / 2^n = -(beta 2^n)^-1 Tr log(I + exp(-beta h))``.

    The log-Fermi series is scaled by ``1/(2 (sup + bound))`` so it fits the
    polynomial-encoding contract; diagonal entries are read exactly and
    rescaled. ``eps1`` collects the polynomial error and ``eps2`` the
    Hoeffding half-width of the diagonal sample mean, both at the scale of F.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    be_h = encode_sparse(oracle_h) if isinstance(oracle_h, OracleTuple) else oracle_h
    s = be_h.alpha
    approx = log_fermi_approx(beta, s, d)
    sup = approx.target_sup
    factor = 1.0 / (2.0 * (sup + approx.certified_bound))
    be = apply_polynomial(be_h, approx.scaled(factor))
    eps1 = be.eps / factor / beta
    if tolerance is not None and eps1 > tolerance:
        raise ValueError(f"degree {d} certifies {eps1:.3g} > requested {tolerance:.3g}")
    diag = np.real(np.diagonal(be.top_block)) / factor
    idx = make_rng(seed).integers(0, be.dim, size=samples)
    mean = math.fsum(diag[idx]) / samples
    eps2 = (sup + approx.certified_bound) * math.sqrt(math.log(2.0 / delta) / (2 * samples)) / beta
    return EstimateResult(-mean / beta, eps1, eps2, delta, samples, 1.0)


def exact_free_energy_density(h: np.ndarray, beta: float) -> float:
    w = np.linalg.eigvalsh(h)
    return float(-np.sum(np.logaddexp(0.0, -beta * w)) / (beta * len(w)))
