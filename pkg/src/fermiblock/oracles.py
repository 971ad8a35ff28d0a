"""Sparse-access models for single-particle Hamiltonians and correlation matrices.

Every model is exposed as an :class:`OracleTuple`: a row function listing the
nonzero columns of a row and an entry function returning matrix elements.
Mode indices are n-bit integers; models whose natural mode count is not a
power of two are padded with decoupled zero modes at the end of the index range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

MATERIALIZE_CAP = 12

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class OracleTuple:
    """Sparse access to a 2^n x 2^n Hermitian matrix.

    Attributes
    ----------
    n : int
        Number of index qubits; the matrix dimension is ``2**n``.
    s : int
        Upper bound on the number of nonzeros in any row or column.
    row : callable
        ``row(i)`` returns the nonzero column indices of row ``i`` in
        ascending order (at most ``s`` of them).
    entry : callable
        ``entry(i, j)`` returns the complex matrix element; zero whenever
        ``j`` is not in ``row(i)``.
    n_a : int
        Bits of entry precision. Metadata only: entries are held at native
        floating precision.
    entry_bound : float
        Upper bound on ``|entry(i, j)|``. Equals 1 for the standard models;
        larger when colliding hops accumulate (Margulis graph, tiny periodic
        lattices).
    label : str
        Human-readable model description.
    """

    n: int
    s: int
    row: Callable[[int], tuple[int, ...]] = field(repr=False)
    entry: Callable[[int, int], complex] = field(repr=False)
    n_a: int = 52
    entry_bound: float = 1.0
    label: str = ""

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def norm_bound(self) -> float:
        """Normalization used by block-encodings: ``s * entry_bound`` >= ||h||."""
        return float(self.s * self.entry_bound)

    def row_entries(self, i: int) -> list[tuple[int, complex]]:
        return [(j, self.entry(i, j)) for j in self.row(i)]


def _qubits_for(count: int) -> int:
    return max(0, math.ceil(math.log2(count))) if count > 1 else 0


def _from_row_dicts(
    n: int,
    s: int,
    row_dict: Callable[[int], Mapping[int, complex]],
    *,
    entry_bound: float = 1.0,
    label: str = "",
) -> OracleTuple:
    dim = 1 << n
    cached = lru_cache(maxsize=None)(row_dict)

    def row(i: int) -> tuple[int, ...]:
        if not 0 <= i < dim:
            raise IndexError(f"row index {i} outside [0, {dim})")
        return tuple(sorted(j for j, v in cached(i).items() if v != 0))

    def entry(i: int, j: int) -> complex:
        if not (0 <= i < dim and 0 <= j < dim):
            raise IndexError(f"entry ({i}, {j}) outside [0, {dim})")
        return complex(cached(i).get(j, 0.0))

    return OracleTuple(n=n, s=s, row=row, entry=entry, entry_bound=entry_bound, label=label)


# ---------------------------------------------------------------------------
# Pseudo-random onsite disorder
# ---------------------------------------------------------------------------


def _mix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def disorder_prf(key: int, site: Sequence[int] | int, amplitude: float = 1.0) -> float:
    """Keyed pseudo-random onsite energy in ``[-amplitude, amplitude]``.

    Deterministic in ``(key, site)``: each coordinate is absorbed through a
    splitmix64 avalanche round, and the top 53 bits are mapped affinely onto
    the interval.
    """
    coords = (site,) if isinstance(site, (int, np.integer)) else tuple(site)
    h = _mix64(int(key) & _MASK64)
    for axis, c in enumerate(coords):
        h = _mix64(h ^ _mix64((int(c) + (axis + 1) * _GOLDEN) & _MASK64))
    u = (h >> 11) * 2.0**-53
    return float(amplitude) * (2.0 * u - 1.0)


# ---------------------------------------------------------------------------
# Tight-binding lattices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle of lattice sites, corners inclusive."""

    label: str
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def contains(self, x: Sequence[int]) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def overlaps(self, other: "Domain") -> bool:
        return all(
            max(a1, a2) <= min(b1, b2)
            for a1, b1, a2, b2 in zip(self.lo, self.hi, other.lo, other.hi)
        )


@dataclass(frozen=True)
class Hopping:
    """One entry of the hopping table.

    The amplitude multiplies ``a^dag_{x+t,o2} a_{x,o1}``; the Hermitian
    conjugate is added automatically. ``domains`` gives the domain labels of
    ``x`` and ``x+t``; ``None`` matches any domain.
    """

    o1: int
    o2: int
    t: tuple[int, ...]
    amplitude: complex
    domains: tuple[str | None, str | None] = (None, None)


@dataclass(frozen=True)
class Disorder:
    key: int
    domain: str
    amplitude: float


@dataclass(frozen=True)
class LatticeSpec:
    dims: tuple[int, ...]
    boundary: str = "open"
    orbitals: int = 1
    domains: tuple[Domain, ...] = ()
    range: int = 1
    hoppings: tuple[Hopping, ...] = ()
    disorder: Disorder | None = None

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_modes(self) -> int:
        return self.n_sites * self.orbitals

    def domain_of(self, x: Sequence[int]) -> str | None:
        if not self.domains:
            return "*"
        for dom in self.domains:
            if dom.contains(x):
                return dom.label
        return None

    def mode_index(self, x: Sequence[int], o: int) -> int:
        return int(np.ravel_multi_index(tuple(x), self.dims)) * self.orbitals + o

    def mode_site(self, i: int) -> tuple[tuple[int, ...], int]:
        site, o = divmod(i, self.orbitals)
        return tuple(int(c) for c in np.unravel_index(site, self.dims)), o

    def hopping_amplitude(self, o1, o2, d1, d2, t) -> complex:
        """The hopping function g(o1, o2, D(x), D(x+t), t)."""
        return _HoppingTable(self).lookup(o1, o2, d1, d2, tuple(t))


def chain_spec(
    length: int,
    hop: complex = -1.0,
    *,
    onsite: float | None = None,
    boundary: str = "open",
    disorder: Disorder | None = None,
) -> LatticeSpec:
    """Nearest-neighbour 1D chain with uniform hopping."""
    hops = [Hopping(0, 0, (1,), hop)]
    if onsite is not None:
        hops.append(Hopping(0, 0, (0,), onsite))
    return LatticeSpec((length,), boundary=boundary, hoppings=tuple(hops), disorder=disorder)


def square_spec(dims: Sequence[int], hop: complex = -1.0, *, boundary: str = "periodic") -> LatticeSpec:
    """Hypercubic lattice with uniform nearest-neighbour hopping along every axis."""
    d = len(dims)
    hops = tuple(Hopping(0, 0, tuple(int(a == k) for a in range(d)), hop) for k in range(d))
    return LatticeSpec(tuple(dims), boundary=boundary, hoppings=hops)


def _is_canonical(t: tuple[int, ...], o1: int, o2: int) -> bool:
    for c in t:
        if c:
            return c > 0
    return o1 <= o2


class _HoppingTable:
    """Canonicalized hopping table: every hopping term stored once."""

    def __init__(self, spec: LatticeSpec):
        d = len(spec.dims)
        table: dict[tuple, complex] = {}
        for hop in spec.hoppings:
            t = tuple(int(c) for c in hop.t)
            if len(t) != d:
                raise ValueError(f"displacement {t} does not match lattice dimension {d}")
            if sum(abs(c) for c in t) > spec.range:
                raise ValueError(f"displacement {t} exceeds hopping range {spec.range}")
            if not (0 <= hop.o1 < spec.orbitals and 0 <= hop.o2 < spec.orbitals):
                raise ValueError(f"orbital index out of range in {hop}")
            amp = complex(hop.amplitude)
            if abs(amp) > 1.0 + 1e-12:
                raise ValueError(f"|hopping amplitude| = {abs(amp):.6g} exceeds 1")
            o1, o2, (d1, d2) = hop.o1, hop.o2, hop.domains
            if not _is_canonical(t, o1, o2):
                t, o1, o2, d1, d2, amp = tuple(-c for c in t), o2, o1, d2, d1, amp.conjugate()
            if not any(t) and o1 == o2:
                if amp.imag != 0.0:
                    raise ValueError("onsite energies must be real")
                if d1 != d2 and None not in (d1, d2):
                    continue  # a site cannot sit in two domains
            key = (o1, o2, t, d1, d2)
            if key in table and table[key] != amp:
                raise ValueError(f"conflicting amplitudes for hopping term {key}")
            table[key] = amp
        self.table = table
        self.shapes = sorted({(o1, o2, t) for (o1, o2, t, _, _) in table})

    def lookup(self, o1, o2, d1, d2, t) -> complex:
        if d1 is None or d2 is None:
            return 0.0
        if not _is_canonical(t, o1, o2):
            return self.lookup(o2, o1, d2, d1, tuple(-c for c in t)).conjugate()
        for k1, k2 in ((d1, d2), (d1, None), (None, d2), (None, None)):
            amp = self.table.get((o1, o2, t, k1, k2))
            if amp is not None:
                return amp
        return 0.0


def _validate_domains(spec: LatticeSpec) -> None:
    for dom in spec.domains:
        if len(dom.lo) != len(spec.dims) or len(dom.hi) != len(spec.dims):
            raise ValueError(f"domain {dom.label!r} has wrong dimension")
        if any(a < 0 or b >= L or a > b for a, b, L in zip(dom.lo, dom.hi, spec.dims)):
            raise ValueError(f"domain {dom.label!r} is not a rectangle inside the lattice")
    for a, b in ((a, b) for k, a in enumerate(spec.domains) for b in spec.domains[k + 1 :]):
        if a.overlaps(b):
            raise ValueError(f"domains {a.label!r} and {b.label!r} overlap")


def build_tight_binding(spec: LatticeSpec) -> OracleTuple:
    """Sparse oracle for the tight-binding single-particle matrix of ``spec``.

    ``h[(x,o1), (x+t,o2)] = g(o1, o2, D(x), D(x+t), t)`` with the Hermitian
    partner filled in. Inside the disorder domain, all onsite terms are
    replaced by ``delta_{o1,o2} * disorder_prf(key, x)``.
    """
    if spec.boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {spec.boundary!r}")
    if spec.orbitals < 1 or any(L < 1 for L in spec.dims):
        raise ValueError("dims and orbitals must be positive")
    _validate_domains(spec)
    table = _HoppingTable(spec)
    dis = spec.disorder
    if dis is not None:
        if abs(dis.amplitude) > 1.0:
            raise ValueError("disorder amplitude must satisfy |W| <= 1")
        if spec.domains and dis.domain not in {d.label for d in spec.domains}:
            raise ValueError(f"unknown disorder domain {dis.domain!r}")

    dims = spec.dims
    periodic = spec.boundary == "periodic"
    n_modes = spec.n_modes
    n = _qubits_for(n_modes)

    def neighbour(x, t):
        y = []
        for c, dc, L in zip(x, t, dims):
            v = c + dc
            if periodic:
                v %= L
            elif not 0 <= v < L:
                return None
            y.append(v)
        return tuple(y)

    def in_disorder(dom) -> bool:
        return dis is not None and dom is not None and (dom == dis.domain or not spec.domains)

    def row_dict(i: int) -> dict[int, complex]:
        out: dict[int, complex] = {}
        if i >= n_modes:
            return out
        x, o = spec.mode_site(i)
        dx = spec.domain_of(x)
        disordered = in_disorder(dx)
        for o1, o2, t in table.shapes:
            onsite = not any(t)
            if onsite and disordered:
                continue
            if o1 == o:
                y = neighbour(x, t)
                if y is not None:
                    amp = table.lookup(o1, o2, dx, spec.domain_of(y), t)
                    if amp:
                        j = spec.mode_index(y, o2)
                        out[j] = out.get(j, 0) + amp
            if o2 == o and not (onsite and o1 == o2):
                y = neighbour(x, tuple(-c for c in t))
                if y is not None:
                    amp = table.lookup(o1, o2, spec.domain_of(y), dx, t)
                    if amp:
                        j = spec.mode_index(y, o1)
                        out[j] = out.get(j, 0) + amp.conjugate()
        if disordered:
            out[i] = out.get(i, 0) + disorder_prf(dis.key, x, dis.amplitude)
        return {j: v for j, v in out.items() if v != 0}

    slots = []
    for o in range(spec.orbitals):
        fwd = {(t, o2) for o1, o2, t in table.shapes if o1 == o}
        rev = {(tuple(-c for c in t), o1) for o1, o2, t in table.shapes if o2 == o}
        cnt = fwd | rev
        if dis is not None:
            cnt.add((tuple(0 for _ in dims), o))
        slots.append(len(cnt))
    s = max(1, max(slots))

    oracle = _from_row_dicts(n, s, row_dict, label=f"tight-binding {dims} {spec.boundary}")
    collisions = periodic and any(L <= 2 * spec.range for L in dims)
    if collisions:
        # wrapped hops may land on the same mode and add up
        bound = max(
            (abs(v) for i in range(n_modes) for _, v in oracle.row_entries(i)),
            default=0.0,
        )
        oracle = OracleTuple(
            n=oracle.n, s=oracle.s, row=oracle.row, entry=oracle.entry,
            entry_bound=max(1.0, bound), label=oracle.label,
        )
    return oracle


# ---------------------------------------------------------------------------
# Margulis expander
# ---------------------------------------------------------------------------


def margulis_images(v: tuple[int, int], N: int) -> list[tuple[int, int]]:
    """The eight images t_l^{+1}(v), t_l^{-1}(v), l = 0..3, with repetitions."""
    a, b = v
    return [
        ((a + 1) % N, b), ((a - 1) % N, b),
        (a, (b + 1) % N), (a, (b - 1) % N),
        ((a + b) % N, b), ((a - b) % N, b),
        (a, (b + a) % N), (a, (b - a) % N),
    ]


def build_margulis(N: int) -> OracleTuple:
    """Adjacency-type oracle of the Margulis graph on ``N*N`` vertices.

    Vertex ``(v1, v2)`` has index ``v1*N + v2``. Repeated images accumulate,
    so ``entry(v, u)`` counts how many of the eight maps send ``v`` to ``u``.
    """
    if N < 2:
        raise ValueError("Margulis graph needs N >= 2")
    n_modes = N * N
    n = _qubits_for(n_modes)

    def row_dict(i: int) -> dict[int, complex]:
        if i >= n_modes:
            return {}
        out: dict[int, complex] = {}
        for a, b in margulis_images(divmod(i, N), N):
            j = a * N + b
            out[j] = out.get(j, 0) + 1.0
        return out

    if N <= 256:
        bound = max(
            max(row_dict(i).values()) for i in range(n_modes)
        )
    else:
        bound = 8.0
    return _from_row_dicts(n, 8, row_dict, entry_bound=float(bound), label=f"margulis N={N}")


# ---------------------------------------------------------------------------
# Diagonal correlation matrices
# ---------------------------------------------------------------------------


def build_diagonal(n: int, occupied: Iterable[int] | Callable[[int], bool], label: str = "") -> OracleTuple:
    """Diagonal 0/1 oracle: ``entry(i, i) = 1`` for occupied modes."""
    dim = 1 << n
    if callable(occupied):
        is_occ = occupied
    else:
        occ = frozenset(int(i) for i in occupied)
        if any(not 0 <= i < dim for i in occ):
            raise ValueError("occupied mode outside the index range")
        is_occ = occ.__contains__

    def row_dict(i: int) -> dict[int, complex]:
        return {i: 1.0} if is_occ(i) else {}

    return _from_row_dicts(n, 1, row_dict, label=label or "diagonal")


def build_fermi_sea(n: int, fill_fraction: float) -> OracleTuple:
    """Fermi sea with the lowest ``fill_fraction * 2**n`` modes occupied."""
    if not 0.0 <= fill_fraction <= 1.0:
        raise ValueError("fill_fraction must lie in [0, 1]")
    filled = fill_fraction * (1 << n)
    if abs(filled - round(filled)) > 1e-9:
        raise ValueError("fill_fraction * 2**n must be an integer")
    k = int(round(filled))
    return build_diagonal(n, lambda i: i < k, label=f"fermi-sea n={n} filled={k}")


# ---------------------------------------------------------------------------
# Dense bridge and norm bound
# ---------------------------------------------------------------------------


def materialize(oracle: OracleTuple, cap: int = MATERIALIZE_CAP) -> np.ndarray:
    if oracle.n > cap:
        raise MemoryError(f"refusing to materialize 2^{oracle.n} modes (cap 2^{cap})")
    dim = oracle.dim
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j, v in oracle.row_entries(i):
            h[i, j] = v
    return h


def gershgorin_bound(oracle: OracleTuple, cap: int = 16) -> float:
    """Largest absolute row sum; an upper bound on the spectral norm."""
    if oracle.n > cap:
        raise MemoryError(f"row scan over 2^{oracle.n} rows exceeds cap 2^{cap}")
    return max(
        (sum(abs(v) for _, v in oracle.row_entries(i)) for i in range(oracle.dim)),
        default=0.0,
    )


def scan_terms(oracle: OracleTuple) -> list[tuple[int, int]]:
    """Unordered nonzero pairs ``(i, j)``, ``i <= j``, in row-major order."""
    return [(i, j) for i in range(oracle.dim) for j in oracle.row(i) if j >= i]


def iter_lattice(dims: Sequence[int]):
    return product(*(range(L) for L in dims))
