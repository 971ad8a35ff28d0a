"""Clock (history-state) Hamiltonians built from two-qubit gate lists.

Index layout: the clock register holds ``l - 1`` for ``l = 1 .. L+1`` in
binary and is the most significant part of a mode index; the circuit
register follows, with qubit 0 as its most significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .block_encoding import dilate
from .correlation import exact_reference, time_evolved_correlation
from .estimation import EstimateResult, estimate_entry
from .oracles import OracleTuple, _from_row_dicts, build_diagonal, materialize

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_T = np.diag([1, np.exp(1j * math.pi / 4)])
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
SINGLE_QUBIT = {"H": _H, "X": _X, "T": _T}


@dataclass(frozen=True)
class Gate:
    """Two-qubit unitary on qubits ``q1 < q2``; basis order ``|b_q1 b_q2>``."""

    q1: int
    q2: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("gate matrix must be 4 x 4")
        if not self.q1 < self.q2:
            raise ValueError("gate qubits must satisfy q1 < q2")
        if np.max(np.abs(m.conj().T @ m - np.eye(4))) > 1e-12:
            raise ValueError("gate matrix is not unitary")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class GateList:
    q: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("circuits need at least two qubits")
        for g in self.gates:
            if g.q2 >= self.q:
                raise ValueError(f"gate on qubit {g.q2} but circuit has {self.q} qubits")

    @property
    def L(self) -> int:
        return len(self.gates)

    def padded(self) -> "GateList":
        """Append identities on (0, 1) until L + 1 is a power of two."""
        target = 1 << max(1, math.ceil(math.log2(self.L + 1)))
        extra = target - 1 - self.L
        ident = Gate(0, 1, np.eye(4))
        return GateList(self.q, self.gates + (ident,) * extra)


def make_gate(name_or_matrix, qubits: tuple[int, ...], q: int) -> Gate:
    """Gate from a name (H, X, T, CNOT) or a 4x4 matrix on the given qubits.

    Single-qubit gates are paired with a neighbouring qubit acting trivially.
    """
    if isinstance(name_or_matrix, str):
        name = name_or_matrix.upper()
        if name in SINGLE_QUBIT:
            (k,) = qubits
            u = SINGLE_QUBIT[name]
            if k + 1 < q:
                return Gate(k, k + 1, np.kron(u, np.eye(2)))
            return Gate(k - 1, k, np.kron(np.eye(2), u))
        if name == "CNOT":
            m = _CNOT
        else:
            raise ValueError(f"unknown gate {name_or_matrix!r}")
    else:
        m = np.asarray(name_or_matrix, dtype=complex)
    a, b = qubits
    if a == b:
        raise ValueError("two-qubit gate needs distinct qubits")
    if a > b:
        m = _SWAP @ m @ _SWAP
        a, b = b, a
    return Gate(a, b, m)


def parse_gate_file(text: str) -> GateList:
    """Parse the gate-list text format.

    One gate per line: ``NAME q [q2]`` for H, X, T, CNOT, or
    ``U q1 q2 re im re im ...`` with 16 complex entries in row-major order.
    An optional ``qubits N`` line fixes the register size. ``#`` starts a
    comment.
    """
    specs = []
    q = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.replace(",", " ").split()
        head = tok[0].upper()
        try:
            if head == "QUBITS":
                q = int(tok[1])
            elif head == "U":
                nums = [float(v) for v in tok[3:]]
                if len(nums) != 32:
                    raise ValueError("U gate needs 16 complex entries (32 numbers)")
                m = (np.array(nums[0::2]) + 1j * np.array(nums[1::2])).reshape(4, 4)
                specs.append((m, (int(tok[1]), int(tok[2]))))
            elif head in SINGLE_QUBIT:
                specs.append((head, (int(tok[1]),)))
            elif head == "CNOT":
                specs.append((head, (int(tok[1]), int(tok[2]))))
            else:
                raise ValueError(f"unknown gate {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if q is None:
        q = max(2, 1 + max((max(qs) for _, qs in specs), default=1))
    return GateList(q, tuple(make_gate(g, qs, q) for g, qs in specs))


def read_gate_file(path) -> GateList:
    return parse_gate_file(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


def _bit(x: int, k: int, q: int) -> int:
    return (x >> (q - 1 - k)) & 1


def _gate_column(g: Gate, x: int, q: int) -> list[tuple[int, complex]]:
    """Nonzero ``(y, W[y, x])`` for the gate acting on the full register."""
    s1, s2 = q - 1 - g.q1, q - 1 - g.q2
    col = 2 * _bit(x, g.q1, q) + _bit(x, g.q2, q)
    base = x & ~((1 << s1) | (1 << s2))
    out = []
    for r in range(4):
        v = g.matrix[r, col]
        if v != 0:
            out.append((base | ((r >> 1) << s1) | ((r & 1) << s2), v))
    return out


def _gate_row(g: Gate, x: int, q: int) -> list[tuple[int, complex]]:
    """Nonzero ``(y, W[x, y])``."""
    s1, s2 = q - 1 - g.q1, q - 1 - g.q2
    row = 2 * _bit(x, g.q1, q) + _bit(x, g.q2, q)
    base = x & ~((1 << s1) | (1 << s2))
    out = []
    for c in range(4):
        v = g.matrix[row, c]
        if v != 0:
            out.append((base | ((c >> 1) << s1) | ((c & 1) << s2), v))
    return out


def build_clock_hamiltonian(gates: GateList) -> OracleTuple:
    """Sparse oracle of ``sum_l |l+1><l| (x) W_l + h.c.`` (gates padded first).

    Row ``(l, x)`` holds ``W_{l-1}[x, y]`` toward clock ``l-1`` and
    ``conj(W_l[y, x])`` toward clock ``l+1``; at most 8 entries in total.
    """
    gl = gates.padded()
    L, q = gl.L, gl.q
    q_clock = int(round(math.log2(L + 1)))
    n = q_clock + q
    dim_q = 1 << q

    def row_dict(i: int) -> dict[int, complex]:
        c, x = divmod(i, dim_q)
        l = c + 1
        out: dict[int, complex] = {}
        if l >= 2:
            for y, v in _gate_row(gl.gates[l - 2], x, q):
                out[(c - 1) * dim_q + y] = v
        if l <= L:
            for y, v in _gate_column(gl.gates[l - 1], x, q):
                out[(c + 1) * dim_q + y] = np.conj(v)
        return out

    return _from_row_dicts(n, 8, row_dict, label=f"clock L={L} q={q}")


def brute_force_clock(gates: GateList) -> np.ndarray:
    """Dense tensor-product construction used as an independent reference."""
    gl = gates.padded()
    L, q = gl.L, gl.q
    h = np.zeros(((L + 1) << q, (L + 1) << q), dtype=complex)
    for l, g in enumerate(gl.gates, start=1):
        W = full_gate(g, q)
        up = np.zeros((L + 1, L + 1))
        up[l, l - 1] = 1.0  # |l+1><l| in 0-based rows
        h += np.kron(up, W) + np.kron(up.T, W.conj().T)
    return h


def full_gate(g: Gate, q: int) -> np.ndarray:
    """Gate on the full q-qubit register via explicit tensor products and permutation."""
    others = [k for k in range(q) if k not in (g.q1, g.q2)]
    order = [g.q1, g.q2] + others
    op = np.kron(g.matrix, np.eye(1 << len(others)))
    T = op.reshape([2] * (2 * q))
    inv = np.argsort(order)
    T = T.transpose(list(inv) + [q + a for a in inv])
    return T.reshape(1 << q, 1 << q)


def circuit_unitary(gates: GateList) -> np.ndarray:
    U = np.eye(1 << gates.q, dtype=complex)
    for g in gates.gates:
        U = full_gate(g, gates.q) @ U
    return U


# ---------------------------------------------------------------------------
# Hopping chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainSpectrum:
    J: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    analytic_eigenvalues: np.ndarray
    analytic_amplitudes: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(np.min(np.diff(np.sort(self.analytic_eigenvalues))))


def hopping_chain(L: int) -> ChainSpectrum:
    """(L+1)-site uniform chain with analytic modes ``2 cos(pi k/(L+2))``.

    ``analytic_amplitudes[j-1, k-1] = sqrt(2/(L+2)) sin(pi j k/(L+2))``.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    m = L + 1
    J = np.diag(np.ones(L), 1) + np.diag(np.ones(L), -1)
    w, V = np.linalg.eigh(J)
    k = np.arange(1, m + 1)
    eps = 2 * np.cos(np.pi * k / (L + 2))
    amp = math.sqrt(2 / (L + 2)) * np.sin(np.pi * np.outer(k, k) / (L + 2))
    return ChainSpectrum(J, w, V, eps, amp)


def gap_lower_bound(L: int) -> float:
    return 2 * math.pi / (L + 2) * math.sin(math.pi / (L + 2))


def overlap_probe(L: int, t):
    """``|<L+1| exp(-i J t) |1>|^2`` from the analytic spectral sum."""
    k = np.arange(1, L + 2)
    weights = (2 / (L + 2)) * np.sin(np.pi * k / (L + 2)) * np.sin(np.pi * (L + 1) * k / (L + 2))
    eps = 2 * np.cos(np.pi * k / (L + 2))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    amp = np.exp(-1j * np.outer(ts, eps)) @ weights
    out = np.abs(amp) ** 2
    return out if np.ndim(t) else float(out[0])


def average_target(L: int) -> float:
    return 3 / (2 * (L + 2))


def default_horizon(L: int) -> float:
    return (L + 2) ** 2 * math.log(2 * (L + 2))


def time_grid(L: int, T: float, points: int | None = None) -> np.ndarray:
    """Uniform grid on [0, T) with at least ``8 (L+2)^2`` points and spacing <= pi/16."""
    if points is None:
        # the analytic spectrum spans less than 4, so pi/16 spacing avoids aliasing
        points = max(8 * (L + 2) ** 2, math.ceil(16 * T / math.pi))
    return np.arange(points) * (T / points)


def randomized_time_average(L: int, T: float | None = None, points: int | None = None) -> float:
    """Mean of the endpoint overlap over a uniform time grid."""
    T = default_horizon(L) if T is None else T
    return float(np.mean(overlap_probe(L, time_grid(L, T, points))))


def best_time(L: int, t_max: float | None = None, spacing: float = math.pi / 16) -> tuple[float, float]:
    """Grid search for the largest endpoint overlap on ``[0, t_max]``."""
    if t_max is None:
        t_max = 4 * L**2 * math.log(max(L, 2))
    ts = np.arange(0.0, t_max + spacing, spacing)
    vals = overlap_probe(L, ts)
    k = int(np.argmax(vals))
    return float(ts[k]), float(vals[k])


def clock_amplitudes(gates: GateList, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Evolved history state and its predicted form.

    Returns ``(psi, predicted)``, both shaped ``(L+1, 2^q)``: ``psi`` is
    ``exp(-i h t)|1>|0..0>`` and ``predicted[l-1]`` is
    ``(exp(-i J t))_{l,1} W_{l-1}..W_1 |0..0>``.
    """
    gl = gates.padded()
    h = materialize(build_clock_hamiltonian(gl))
    w, V = np.linalg.eigh(h)
    psi0 = np.zeros(len(h), dtype=complex)
    psi0[0] = 1.0
    psi = (V * np.exp(-1j * t * w)) @ (V.conj().T @ psi0)
    chain = hopping_chain(gl.L)
    a = chain.eigenvectors @ (np.exp(-1j * t * chain.eigenvalues) * chain.eigenvectors[0].conj())
    state = np.zeros(1 << gl.q, dtype=complex)
    state[0] = 1.0
    pred = []
    for l in range(gl.L + 1):
        pred.append(a[l] * state)
        if l < gl.L:
            state = full_gate(gl.gates[l], gl.q) @ state
    return psi.reshape(gl.L + 1, -1), np.array(pred)


# ---------------------------------------------------------------------------
# Decision-problem demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromiseGapResult:
    t: float
    estimate: EstimateResult
    exact: float
    overlap: float
    yes_threshold: float
    no_threshold: float

    @property
    def decision(self) -> str:
        mid = 0.5 * (self.yes_threshold + self.no_threshold)
        return "YES" if self.estimate.value.real >= mid else "NO"


def answer_projector(gates: GateList) -> OracleTuple:
    """Diagonal M0 selecting the final clock value and qubit 0 in state 1."""
    gl = gates.padded()
    q = gl.q
    q_clock = int(round(math.log2(gl.L + 1)))
    last = gl.L

    def occupied(i: int) -> bool:
        c, x = divmod(i, 1 << q)
        return c == last and _bit(x, 0, q) == 1

    return build_diagonal(q_clock + q, occupied, label="answer projector")


def theorem1_instance(
    gates: GateList, t: float, eps2: float, delta: float, seed: int = 0, *, cap: int = 12
) -> PromiseGapResult:
    """Run the full pipeline for ``<psi(t)| M0 |psi(t)>`` and its exact value."""
    gl = gates.padded()
    h_oracle = build_clock_hamiltonian(gl)
    if h_oracle.n > cap:
        raise ValueError(f"{h_oracle.n} qubits exceeds desk-scale cap {cap}")
    M0 = materialize(answer_projector(gl))
    be = time_evolved_correlation(h_oracle, dilate(M0), t, t)
    est = estimate_entry(be, 0, 0, eps2, delta, seed)
    exact = exact_reference(materialize(h_oracle), "evolved", M0=M0, t1=t, t2=t)[0, 0].real
    ov = overlap_probe(gl.L, t)
    return PromiseGapResult(t, est, float(exact), ov, 2 / 3 * ov, 1 / 3 * ov)
