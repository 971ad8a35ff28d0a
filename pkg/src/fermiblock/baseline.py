"""Classical light-cone algorithms for single correlation-matrix entries.

Vectors are sparse dicts ``index -> amplitude``; only exact zeros are
dropped, so an entry outside the reachable region is exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .chebyshev import bernstein_bound, fermi_dirac_approx, fermi_ellipse, fermi_formula_bound
from .oracles import OracleTuple

SparseVec = dict[int, complex]
_U = 2.220446049250313e-16


@dataclass
class LocalKrylovState:
    """Sparse sequence of vectors grown from a single site.

    ``vectors[k]`` is ``T_k(h/s)|center>`` (Chebyshev) or the normalized
    ``h^k|center>`` (power); ``support_sizes[k]`` is its number of nonzeros.
    """

    center: int
    max_order: int
    vectors: list[SparseVec] = field(default_factory=list)
    support_sizes: list[int] = field(default_factory=list)
    entry_calls: int = 0


class _Counter:
    def __init__(self, oracle: OracleTuple):
        self.oracle = oracle
        self.calls = 0

    def apply(self, v: SparseVec, scale: float = 1.0) -> SparseVec:
        """``scale * h v`` using column access (h is Hermitian)."""
        out: SparseVec = {}
        entry, row = self.oracle.entry, self.oracle.row
        for c, amp in v.items():
            if amp == 0:
                continue
            for r in row(c):
                self.calls += 1
                out[r] = out.get(r, 0) + scale * entry(r, c) * amp
        return {k: a for k, a in out.items() if a != 0}


def _axpy(a: complex, x: SparseVec, y: SparseVec) -> SparseVec:
    out = dict(y)
    for k, v in x.items():
        out[k] = out.get(k, 0) + a * v
    return {k: v for k, v in out.items() if v != 0}


def chebyshev_vectors(oracle_h: OracleTuple, j: int, K: int) -> LocalKrylovState:
    """``T_k(h/s)|j>`` for k = 0..K by the three-term recurrence."""
    op = _Counter(oracle_h)
    s = oracle_h.norm_bound
    state = LocalKrylovState(center=j, max_order=K)
    prev: SparseVec = {j: 1.0}
    state.vectors.append(prev)
    if K >= 1:
        cur = op.apply(prev, 1.0 / s)
        state.vectors.append(cur)
        for _ in range(2, K + 1):
            nxt = _axpy(-1.0, prev, op.apply(cur, 2.0 / s))
            prev, cur = cur, nxt
            state.vectors.append(cur)
    state.support_sizes = [len(v) for v in state.vectors]
    state.entry_calls = op.calls
    return state


def thermal_entry_bound(beta: float, s: float, K: int) -> float:
    """Certified error of the degree-K Fermi-Dirac series for a single entry.

    The smaller of the closed-form and raw ellipse bounds, scaled from the
    quarter-scaled fit to the physical function, plus a rounding allowance
    for the recurrence.
    """
    c = beta * s
    if c == 0:
        return (K + 1) ** 2 * _U
    r = fermi_ellipse(c)
    raw = bernstein_bound(r, 1.0, K) * (1.0 + r ** (-6 * K - 8))
    return 4.0 * min(fermi_formula_bound(c, K), raw) + (K + 1) ** 2 * _U


def local_thermal_entry(
    oracle_h: OracleTuple, beta: float, i: int, j: int, K: int, *, with_work: bool = False
):
    """``<i| p_K(h/s) |j>`` for the degree-K Chebyshev fit of the Fermi function.

    With ``with_work=True`` returns ``(value, entry_evaluations)``.
    """
    if K < 1:
        raise ValueError("order K must be at least 1")
    s = oracle_h.norm_bound
    coeffs = 4.0 * fermi_dirac_approx(beta * s, K).coeffs
    state = chebyshev_vectors(oracle_h, j, K)
    value = 0j
    for a, v in zip(coeffs, state.vectors):
        value += a * v.get(i, 0)
    return (value, state.entry_calls) if with_work else value


def _taylor_apply(op: _Counter, v: SparseVec, tau: complex, K: int) -> SparseVec:
    """``sum_{k<=K} (tau x)^k/k! v`` with x = h/s applied sparsely."""
    s = op.oracle.norm_bound
    total = dict(v)
    term = dict(v)
    for k in range(1, K + 1):
        term = op.apply(term, tau / (k * s))
        total = _axpy(1.0, term, total)
    return total


def local_dynamics_entry(
    oracle_h: OracleTuple,
    M0_entry: Callable[[int, int], complex],
    t: float,
    i: int,
    j: int,
    K: int,
    *,
    with_work: bool = False,
):
    """Entry (i, j) of ``exp(i h t) M0 exp(-i h t)`` from truncated Taylor series.

    Both ``exp(-i h t)|i>`` and ``exp(-i h t)|j>`` are expanded to order K in
    ``x = h/s`` with time ``t s``, then contracted through ``M0_entry``.
    """
    if K < 1:
        raise ValueError("order K must be at least 1")
    op = _Counter(oracle_h)
    tau = -1j * t * oracle_h.norm_bound
    u = _taylor_apply(op, {i: 1.0}, tau, K)
    w = _taylor_apply(op, {j: 1.0}, tau, K)
    acc = 0j
    for k, uk in u.items():
        cu = uk.conjugate()
        for l, wl in w.items():
            m = M0_entry(k, l)
            if m:
                acc += cu * m * wl
    return (acc, op.calls) if with_work else acc


def dynamics_entry_bound(t: float, s: float, K: int) -> dict:
    """Truncation bounds for ``local_dynamics_entry`` with ``||M0|| <= 1``.

    ``instantiated`` is ``(|t| s / sqrt(K))^(K+1)``, meaningful for
    ``|t| s <= sqrt(K)``. ``rigorous`` uses the Lagrange remainder
    ``r = (|t| s)^(K+1)/(K+1)! e^{|t| s}`` per vector, giving ``r (2 + r)``
    for the sandwiched entry.
    """
    x = abs(t) * s
    inst = 0.0 if x == 0 else (x / math.sqrt(K)) ** (K + 1)
    log_r = (K + 1) * math.log(x) - math.lgamma(K + 2) + x if x > 0 else -math.inf
    r = math.exp(log_r) if log_r > -700 else 0.0
    return {"instantiated": inst, "rigorous": r * (2 + r)}


def support_growth(oracle_h: OracleTuple, j: int, K: int) -> list[int]:
    """Number of nonzeros of ``h^k|j>`` for k = 0..K (vectors renormalized each step)."""
    op = _Counter(oracle_h)
    v: SparseVec = {j: 1.0}
    sizes = [1]
    for _ in range(K):
        v = op.apply(v)
        norm = math.sqrt(sum(abs(a) ** 2 for a in v.values())) or 1.0
        v = {k: a / norm for k, a in v.items()}
        sizes.append(len(v))
    return sizes


def bfs_ball_sizes(oracle_h: OracleTuple, j: int, K: int) -> list[int]:
    """Sizes of graph balls of radius k around j (reference for support growth)."""
    seen = {j}
    frontier = {j}
    sizes = [1]
    for _ in range(K):
        frontier = {r for c in frontier for r in oracle_h.row(c)} - seen
        seen |= frontier
        sizes.append(len(seen))
    return sizes
