"""Dense reference block-encodings and their composition rules.

An ``(alpha, m, eps)`` encoding of A is a unitary U on m ancilla qubits
(most significant) plus n system qubits with ``||A - alpha * U[:N, :N]|| <= eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chebyshev import ChebyshevApprox, clenshaw
from .oracles import MATERIALIZE_CAP, OracleTuple, materialize

DENSE_QUBIT_CAP = 12
UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """An (alpha, m, eps) block-encoding held as its top-left block.

    The full unitary of leaf encodings is stored; for products it is
    assembled on first access from the factors.

    Attributes
    ----------
    n : int
        System qubits.
    m : int
        Ancilla qubits on the reference path.
    alpha : float
        Scale; the encoded matrix is ``alpha * top_block``.
    eps : float
        Certified error against the intended target.
    top_block : ndarray
        ``<0|^m U |0>^m`` as an N x N array.
    provenance : tuple of str
        Construction history, outermost step last.
    meta : dict
        Resource metadata (emulated ancilla counts, query counts, budgets).
    """

    n: int
    m: int
    alpha: float
    eps: float
    top_block: np.ndarray = field(repr=False)
    provenance: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, repr=False)
    leaf_unitary: np.ndarray | None = field(default=None, repr=False)
    factors: tuple["BlockEncoding", ...] = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @cached_property
    def unitary(self) -> np.ndarray:
        if self.leaf_unitary is not None:
            return self.leaf_unitary
        if self.n + self.m > DENSE_QUBIT_CAP:
            raise MemoryError(f"dense unitary on {self.n + self.m} qubits exceeds cap {DENSE_QUBIT_CAP}")
        a, b = self.factors
        return _pad_ancilla(a.unitary, a.m, b.m, self.n, first=True) @ _pad_ancilla(
            b.unitary, b.m, a.m, self.n, first=False
        )

    def amplitude(self, i: int, j: int) -> complex:
        """``<0|<i| U |0>|j>``."""
        return complex(self.top_block[i, j])


def _pad_ancilla(U: np.ndarray, m_own: int, m_other: int, n: int, first: bool) -> np.ndarray:
    """Embed U (on own ancillas + system) into the joint ancilla register.

    The joint ancilla index is ``(a_first, a_second)`` with the first
    factor's ancillas most significant.
    """
    A, B, N = 1 << m_own, 1 << m_other, 1 << n
    T = U.reshape(A, N, A, N)
    eye = np.eye(B)
    if first:
        full = np.einsum("aibj,cd->acibdj", T, eye)
        return full.reshape(A * B * N, A * B * N)
    full = np.einsum("aibj,cd->caidbj", T, eye)
    return full.reshape(A * B * N, A * B * N)


def _qubits(dim: int) -> int:
    n = int(round(math.log2(dim)))
    if 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def dilate(A: np.ndarray, *, provenance: str = "dilate") -> BlockEncoding:
    """Exact one-ancilla unitary dilation of a contraction.

    ``U = [[A, sqrt(I - A A^dag)], [sqrt(I - A^dag A), -A^dag]]`` with the
    square roots built from a singular value decomposition, which keeps the
    off-diagonal blocks intertwined even for singular values near 1.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("dilate expects a square matrix")
    n = _qubits(A.shape[0])
    W, sig, Vh = np.linalg.svd(A)
    smax = float(sig.max(initial=0.0))
    if smax > 1.0 + UNITARY_TOL:
        raise ValueError(f"||A|| = {smax:.12g} exceeds 1")
    sig = np.clip(sig, 0.0, 1.0)
    S = np.sqrt(1.0 - sig**2)
    V = Vh.conj().T
    U = np.block(
        [
            [A, (W * S) @ W.conj().T],
            [(V * S) @ V.conj().T, -(V * sig) @ W.conj().T],
        ]
    )
    return BlockEncoding(
        n=n, m=1, alpha=1.0, eps=0.0, top_block=A.copy(),
        provenance=(provenance,), meta={"path": "reference"}, leaf_unitary=U,
    )


def extract_block(be: BlockEncoding) -> np.ndarray:
    return be.alpha * be.top_block


def encode_sparse(oracle: OracleTuple, cap: int = MATERIALIZE_CAP) -> BlockEncoding:
    """Reference encoding of a sparse Hermitian matrix with ``alpha = s * entry_bound``."""
    h = materialize(oracle, cap=cap)
    alpha = oracle.norm_bound
    be = dilate(h / alpha, provenance="encode_sparse")
    meta = {
        "path": "reference",
        "emulated_ancillas": oracle.n + 3,
        "oracle_calls": "O(1)",
        "sparsity": oracle.s,
        "label": oracle.label,
    }
    return BlockEncoding(
        n=oracle.n, m=1, alpha=alpha, eps=0.0, top_block=be.top_block,
        provenance=("encode_sparse",), meta=meta, leaf_unitary=be.leaf_unitary,
    )


def _check_half_bounded(approx: ChebyshevApprox) -> None:
    a = np.asarray(approx.coeffs)
    if np.abs(a).sum() <= 0.5:
        return
    if approx.target_sup is not None and approx.target_sup + approx.certified_bound <= 0.5:
        return
    x = np.linspace(-1.0, 1.0, 10_000)
    peak = float(np.max(np.abs(clenshaw(a, x))))
    if peak > 0.5 + 1e-12:
        raise ValueError(f"polynomial reaches {peak:.6g} > 1/2 on [-1, 1]")


def apply_polynomial(
    be_h: BlockEncoding, approx: ChebyshevApprox, delta_qsvt: float = 0.0
) -> BlockEncoding:
    """Encode ``p(B)`` where B is the Hermitian block of ``be_h`` and p the series.

    The block is diagonalized, p is applied to its eigenvalues and the result
    re-dilated. The declared error is
    ``certified_bound + 4 d sqrt(eps_h / alpha_h) + delta_qsvt``.
    """
    B = be_h.top_block
    if np.max(np.abs(B - B.conj().T), initial=0.0) > UNITARY_TOL:
        raise ValueError("block is not Hermitian")
    _check_half_bounded(approx)
    w, V = np.linalg.eigh((B + B.conj().T) / 2)
    w = np.clip(w, -1.0, 1.0)
    pw = clenshaw(approx.coeffs, w)
    P = (V * pw) @ V.conj().T
    d = approx.degree
    eps_ph = 4 * d * math.sqrt(be_h.eps / be_h.alpha) if be_h.eps else 0.0
    eps = approx.certified_bound + eps_ph + delta_qsvt
    base = dilate(P)
    meta = {
        "path": "reference",
        "emulated_ancillas": be_h.n + 5,
        "oracle_calls": d,
        "degree": d,
        "budget": {"eps_PA": approx.certified_bound, "eps_ph": eps_ph, "delta_qsvt": delta_qsvt},
        "target": approx.target,
    }
    return BlockEncoding(
        n=be_h.n, m=1, alpha=1.0, eps=eps, top_block=base.top_block,
        provenance=be_h.provenance + ("apply_polynomial",), meta=meta,
        leaf_unitary=base.leaf_unitary,
    )


def evolve(source: BlockEncoding | OracleTuple, t: float) -> BlockEncoding:
    """Encoding of ``exp(i t H)`` with H the matrix encoded by ``source``.

    The declared error is ``2 |t| eps`` of the input encoding plus a
    rounding allowance for the dense eigendecomposition.
    """
    be_h = encode_sparse(source) if isinstance(source, OracleTuple) else source
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    rounding = 0.0
    if t == 0:
        U = np.eye(be_h.dim, dtype=complex)
    else:
        rounding = 64 * be_h.dim * np.finfo(float).eps * (1 + abs(t) * be_h.alpha)
        H = extract_block(be_h)
        w, V = np.linalg.eigh((H + H.conj().T) / 2)
        U = (V * np.exp(1j * t * w)) @ V.conj().T
    base = dilate(U)
    meta = {
        "path": "reference",
        "emulated_ancillas": be_h.n + 5,
        "oracle_calls": f"O(alpha |t| + log(1/eps)) with alpha |t| = {be_h.alpha * abs(t):.6g}",
        "time": t,
    }
    return BlockEncoding(
        n=be_h.n, m=1, alpha=1.0, eps=2 * abs(t) * be_h.eps + rounding, top_block=base.top_block,
        provenance=be_h.provenance + (f"evolve(t={t:g})",), meta=meta,
        leaf_unitary=base.leaf_unitary,
    )


def multiply(be_a: BlockEncoding, be_b: BlockEncoding) -> BlockEncoding:
    """Encoding of A B on the concatenated ancilla registers.

    Error ``alpha_A eps_B + alpha_B eps_A + eps_A eps_B``: the first-order
    budget plus the cross term, which keeps it an upper bound.
    """
    if be_a.n != be_b.n:
        raise ValueError(f"system sizes differ: {be_a.n} vs {be_b.n}")
    eps = be_a.alpha * be_b.eps + be_b.alpha * be_a.eps + be_a.eps * be_b.eps
    meta = {
        "path": "reference",
        "emulated_ancillas": be_a.meta.get("emulated_ancillas", be_a.m)
        + be_b.meta.get("emulated_ancillas", be_b.m),
    }
    return BlockEncoding(
        n=be_a.n, m=be_a.m + be_b.m, alpha=be_a.alpha * be_b.alpha, eps=eps,
        top_block=be_a.top_block @ be_b.top_block,
        provenance=(f"multiply[{'>'.join(be_a.provenance)} | {'>'.join(be_b.provenance)}]",),
        meta=meta, factors=(be_a, be_b),
    )


def rescale(be: BlockEncoding, factor: float, note: str = "") -> BlockEncoding:
    """Reinterpret an encoding of A as one of ``factor * A`` (same unitary)."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    return BlockEncoding(
        n=be.n, m=be.m, alpha=be.alpha * factor, eps=be.eps * factor,
        top_block=be.top_block, provenance=be.provenance + (note or f"rescale({factor:g})",),
        meta=dict(be.meta), leaf_unitary=be.leaf_unitary, factors=be.factors,
    )


def eps_be_for(eps_ph: float, d: int, s: float) -> float:
    """Oracle-encoding precision needed for a target propagation error at degree d."""
    return s * eps_ph**2 / (16 * d**2)


def resource_report(be: BlockEncoding) -> str:
    lines = [
        "[block-encoding]",
        f"alpha = {be.alpha!r}",
        f"ancillas_reference = {be.m}",
        f"eps = {be.eps!r}",
        f"provenance = {' > '.join(be.provenance)}",
        f"reference_matrix = {1 << (be.n + be.m)} x {1 << (be.n + be.m)}",
    ]
    for key in ("emulated_ancillas", "oracle_calls", "degree"):
        if key in be.meta:
            lines.append(f"{key} = {be.meta[key]}")
    budget = be.meta.get("budget")
    if budget:
        lines.extend(f"budget.{k} = {v!r}" for k, v in budget.items())
    return "\n".join(lines)
