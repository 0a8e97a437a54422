"""Stabilizer backend for mixed states: random Clifford circuits with
Monte-Carlo trace-out noise, computational-basis postselection, and an
analytic trace distance between mixed stabilizer states.

A mixed stabilizer state on ``n`` qubits is stored as ``r <= n`` independent,
mutually commuting signed Pauli generators; it represents
``rho = 2^-n sum_{g in <generators>} g`` with the signs carried by the group
elements.  Pauli rows are encoded as bit vectors ``x``, ``z`` plus a phase
exponent ``t`` modulo 4, the operator being ``i^t prod_j X_j^x_j Z_j^z_j``.
Everything here is qubits only (h = 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .circuit import brickwork_pairs
from .diagnostics import MarkovLengthFit, fit_markov_length
from .errors import InsufficientData

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


# ---------------------------------------------------------------------------
# GF(2) linear algebra (bit-packed into uint64 words)


def _gf2_pack(m: np.ndarray) -> np.ndarray:
    """Pack a (rows, cols) 0/1 matrix into (rows, words) uint64."""
    r, c = m.shape
    words = max(1, (c + 63) >> 6)
    if r == 0:
        return np.zeros((0, words), dtype=np.uint64)
    pad = words * 64 - c
    if pad:
        m = np.concatenate([m, np.zeros((r, pad), dtype=np.uint8)], axis=1)
    packed = np.packbits(np.ascontiguousarray(m, dtype=np.uint8), axis=1, bitorder="little")
    return packed.view(np.uint64)


def _gf2_unpack(packed: np.ndarray, cols: int) -> np.ndarray:
    if packed.shape[0] == 0:
        return np.zeros((0, cols), dtype=np.uint8)
    bits = np.unpackbits(packed.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :cols]


def _py_echelon_packed(
    work: np.ndarray, cols: int, trans: np.ndarray | None
) -> list[tuple[int, int]]:
    r = work.shape[0]
    pivots: list[tuple[int, int]] = []
    row = 0
    for col in range(cols):
        if row == r:
            break
        word, bit = col >> 6, np.uint64(col & 63)
        column = (work[row:, word] >> bit) & np.uint64(1)
        hit = np.nonzero(column)[0]
        if hit.size == 0:
            continue
        piv = row + int(hit[0])
        if piv != row:
            work[[row, piv]] = work[[piv, row]]
            if trans is not None:
                trans[[row, piv]] = trans[[piv, row]]
        column = (work[:, word] >> bit) & np.uint64(1)
        column[row] = 0
        others = np.nonzero(column)[0]
        if others.size:
            work[others] ^= work[row]
            if trans is not None:
                trans[others] ^= trans[row]
        pivots.append((row, col))
        row += 1
    return pivots


def _echelon_kernel(work, trans, cols, use_trans, piv_rows, piv_cols):
    r, words = work.shape
    twords = trans.shape[1]
    one = np.uint64(1)
    row = 0
    count = 0
    for col in range(cols):
        if row >= r:
            break
        word = col >> 6
        bit = np.uint64(col & 63)
        piv = -1
        for i in range(row, r):
            if (work[i, word] >> bit) & one:
                piv = i
                break
        if piv < 0:
            continue
        if piv != row:
            for w in range(words):
                tmp = work[row, w]
                work[row, w] = work[piv, w]
                work[piv, w] = tmp
            if use_trans:
                for w in range(twords):
                    tmp = trans[row, w]
                    trans[row, w] = trans[piv, w]
                    trans[piv, w] = tmp
        for i in range(r):
            if i != row and ((work[i, word] >> bit) & one):
                for w in range(words):
                    work[i, w] ^= work[row, w]
                if use_trans:
                    for w in range(twords):
                        trans[i, w] ^= trans[row, w]
        piv_rows[count] = row
        piv_cols[count] = col
        count += 1
        row += 1
    return count


try:  # numba gives the GF(2) kernel C-like speed; plain numpy works too
    from numba import njit as _njit

    _echelon_jit = _njit(cache=True)(_echelon_kernel)
except ImportError:  # pragma: no cover - numba is optional
    _echelon_jit = None


def _gf2_echelon_packed(
    work: np.ndarray, cols: int, trans: np.ndarray | None
) -> list[tuple[int, int]]:
    """In-place row reduction of a packed matrix; returns (pivot row, pivot
    col) pairs.  ``trans`` (also packed) receives the same row operations."""
    if _echelon_jit is None or work.shape[0] == 0:
        return _py_echelon_packed(work, cols, trans)
    piv_rows = np.empty(work.shape[0], dtype=np.int64)
    piv_cols = np.empty(work.shape[0], dtype=np.int64)
    dummy = trans if trans is not None else np.zeros((1, 1), dtype=np.uint64)
    count = _echelon_jit(work, dummy, cols, trans is not None, piv_rows, piv_cols)
    return list(zip(piv_rows[:count].tolist(), piv_cols[:count].tolist()))


def gf2_rank(m: np.ndarray) -> int:
    if m.size == 0 or m.shape[0] == 0:
        return 0
    work = _gf2_pack(m)
    return len(_gf2_echelon_packed(work, m.shape[1], None))


def gf2_left_nullspace(m: np.ndarray) -> np.ndarray:
    """Basis (as rows) of {v : v @ m == 0 mod 2}."""
    r = m.shape[0]
    if r == 0:
        return np.zeros((0, 0), dtype=np.uint8)
    work = _gf2_pack(m)
    trans = _gf2_pack(np.eye(r, dtype=np.uint8))
    rank = len(_gf2_echelon_packed(work, m.shape[1], trans))
    return _gf2_unpack(trans[rank:], r)


def gf2_solve_left(m: np.ndarray, target: np.ndarray) -> np.ndarray | None:
    """Some v with v @ m == target (mod 2), or None."""
    r = m.shape[0]
    if r == 0:
        return None if target.any() else np.zeros(0, dtype=np.uint8)
    work = _gf2_pack(m)
    trans = _gf2_pack(np.eye(r, dtype=np.uint8))
    pivots = _gf2_echelon_packed(work, m.shape[1], trans)
    residue = _gf2_pack(target.reshape(1, -1))[0]
    combo = np.zeros_like(trans[0])
    for row, col in pivots:
        if (residue[col >> 6] >> np.uint64(col & 63)) & np.uint64(1):
            residue ^= work[row]
            combo ^= trans[row]
    if residue.any():
        return None
    return _gf2_unpack(combo.reshape(1, -1), r)[0]


# ---------------------------------------------------------------------------
# Pauli rows


def _mul_phase(z_first: np.ndarray, x_second: np.ndarray) -> np.ndarray:
    """Phase increment (mod 4) when multiplying canonical Pauli rows:
    X^a Z^b . X^c Z^d = (-1)^(b.c) X^(a+c) Z^(b+d)."""
    return (2 * (z_first.astype(np.int64) @ x_second.astype(np.int64).T)) % 4


def _pauli_product(
    xs: np.ndarray, zs: np.ndarray, phases: np.ndarray, rows: Sequence[int]
) -> tuple[np.ndarray, np.ndarray, int]:
    """Ordered product of the selected rows (valid for commuting rows)."""
    n = xs.shape[1]
    px = np.zeros(n, dtype=np.uint8)
    pz = np.zeros(n, dtype=np.uint8)
    ph = 0
    for r in rows:
        ph = (ph + int(phases[r]) + 2 * int(pz @ xs[r])) % 4
        px ^= xs[r]
        pz ^= zs[r]
    return px, pz, ph


def _row_sign(x: np.ndarray, z: np.ndarray, phase: int) -> int:
    """+1/-1 for a Hermitian row i^phase X^x Z^z."""
    return 1 if (int(phase) - int(x @ z)) % 4 == 0 else -1


def _pauli_matrix(x: np.ndarray, z: np.ndarray, phase: int) -> np.ndarray:
    op = np.array([[1.0 + 0j]])
    for xb, zb in zip(x, z):
        local = np.eye(2, dtype=complex)
        if xb:
            local = local @ _X
        if zb:
            local = local @ _Z
        op = np.kron(op, local)
    return (1j ** int(phase)) * op


# ---------------------------------------------------------------------------
# stabilizer states


@dataclass(frozen=True)
class StabilizerState:
    """Mixed stabilizer state: r independent commuting signed Pauli rows."""

    n: int
    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.uint8) % 2
        z = np.ascontiguousarray(self.z, dtype=np.uint8) % 2
        ph = np.ascontiguousarray(self.phase, dtype=np.uint8) % 4
        if x.shape != z.shape or x.shape[1] != self.n or ph.shape != (x.shape[0],):
            raise ValueError("inconsistent tableau shapes")
        for arr in (x, z, ph):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", ph)

    @property
    def rank(self) -> int:
        return self.x.shape[0]

    @property
    def signs(self) -> np.ndarray:
        xz = (self.x.astype(np.int64) * self.z.astype(np.int64)).sum(axis=1)
        return np.where((self.phase.astype(np.int64) - xz) % 4 == 0, 1, -1)

    @classmethod
    def zero_state(cls, n: int) -> "StabilizerState":
        return cls(
            n=n,
            x=np.zeros((n, n), dtype=np.uint8),
            z=np.eye(n, dtype=np.uint8),
            phase=np.zeros(n, dtype=np.uint8),
        )

    @classmethod
    def maximally_mixed(cls, n: int) -> "StabilizerState":
        return cls(
            n=n,
            x=np.zeros((0, n), dtype=np.uint8),
            z=np.zeros((0, n), dtype=np.uint8),
            phase=np.zeros(0, dtype=np.uint8),
        )

    @classmethod
    def from_strings(cls, n: int, generators: Iterable[str]) -> "StabilizerState":
        """Build from strings like "+ZZI" or "-XY" (Y carries its i factor)."""
        xs, zs, phs = [], [], []
        for s in generators:
            s = s.strip()
            sign = 1
            if s[0] in "+-":
                sign = -1 if s[0] == "-" else 1
                s = s[1:]
            if len(s) != n:
                raise ValueError(f"generator {s!r} has length {len(s)}, expected {n}")
            x = np.array([c in "XY" for c in s], dtype=np.uint8)
            z = np.array([c in "ZY" for c in s], dtype=np.uint8)
            if any(c not in "IXYZ" for c in s):
                raise ValueError(f"bad Pauli letter in {s!r}")
            ph = (sum(c == "Y" for c in s) + (0 if sign > 0 else 2)) % 4
            xs.append(x)
            zs.append(z)
            phs.append(ph)
        state = cls(
            n=n,
            x=np.array(xs, dtype=np.uint8).reshape(len(phs), n),
            z=np.array(zs, dtype=np.uint8).reshape(len(phs), n),
            phase=np.array(phs, dtype=np.uint8),
        )
        state.validate()
        return state

    def validate(self) -> None:
        """Check independence, mutual commutation, and Hermitian phases."""
        xi, zi = self.x.astype(np.int64), self.z.astype(np.int64)
        if np.any((self.phase.astype(np.int64) - (xi * zi).sum(axis=1)) % 2):
            raise ValueError("a generator phase is not Hermitian")
        sym = (xi @ zi.T + zi @ xi.T) % 2
        if sym.any():
            raise ValueError("generators do not mutually commute")
        if gf2_rank(np.hstack([self.x, self.z])) != self.rank:
            raise ValueError("generators are not independent")

    def to_density_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (test oracle; n small)."""
        dim = 2**self.n
        rho = np.eye(dim, dtype=complex) / dim
        for r in range(self.rank):
            g = _pauli_matrix(self.x[r], self.z[r], int(self.phase[r]))
            rho = rho @ (np.eye(dim) + g)
        return rho


# ---------------------------------------------------------------------------
# Clifford gates


def _local_index(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Encode per-row local Pauli bits into a table index (qubit t occupies
    bits 2t and 2t+1)."""
    idx = np.zeros(x.shape[0], dtype=np.int64)
    for t in range(x.shape[1]):
        idx += (x[:, t].astype(np.int64) + 2 * z[:, t].astype(np.int64)) << (2 * t)
    return idx


@dataclass(frozen=True)
class CliffordGate:
    """A k-qubit Clifford as the signed Pauli images of X_1, Z_1, ...,
    X_k, Z_k under conjugation."""

    k: int
    image_x: np.ndarray = field(repr=False)  # (2k, k)
    image_z: np.ndarray = field(repr=False)
    image_phase: np.ndarray = field(repr=False)  # (2k,)

    def __post_init__(self):
        ix = np.ascontiguousarray(self.image_x, dtype=np.uint8) % 2
        iz = np.ascontiguousarray(self.image_z, dtype=np.uint8) % 2
        ip = np.ascontiguousarray(self.image_phase, dtype=np.uint8) % 4
        if ix.shape != (2 * self.k, self.k) or ip.shape != (2 * self.k,):
            raise ValueError("bad image shapes")
        xi, zi = ix.astype(np.int64), iz.astype(np.int64)
        sym = (xi @ zi.T + zi @ xi.T) % 2
        expected = np.zeros((2 * self.k, 2 * self.k), dtype=np.int64)
        for t in range(self.k):
            expected[2 * t, 2 * t + 1] = expected[2 * t + 1, 2 * t] = 1
        if not np.array_equal(sym, expected):
            raise ValueError("images do not preserve the commutation relations")
        if np.any((ip.astype(np.int64) - (xi * zi).sum(axis=1)) % 2):
            raise ValueError("an image phase is not Hermitian")
        for arr in (ix, iz, ip):
            arr.setflags(write=False)
        object.__setattr__(self, "image_x", ix)
        object.__setattr__(self, "image_z", iz)
        object.__setattr__(self, "image_phase", ip)
        object.__setattr__(self, "_table", None)

    # -- construction -------------------------------------------------

    @classmethod
    def from_images(cls, images: Sequence[tuple[np.ndarray, np.ndarray, int]]) -> "CliffordGate":
        k = len(images) // 2
        return cls(
            k=k,
            image_x=np.array([im[0] for im in images], dtype=np.uint8),
            image_z=np.array([im[1] for im in images], dtype=np.uint8),
            image_phase=np.array([im[2] for im in images], dtype=np.uint8),
        )

    @classmethod
    def named(cls, name: str) -> "CliffordGate":
        table = {
            # name: images of X1, Z1[, X2, Z2] as Pauli letter strings
            "H": ("+Z", "+X"),
            "S": ("+Y", "+Z"),
            "X": ("+X", "-Z"),
            "Z": ("-X", "+Z"),
            "CNOT": ("+XX", "+ZI", "+IX", "+ZZ"),
            "CZ": ("+XZ", "+ZI", "+ZX", "+IZ"),
            "SWAP": ("+IX", "+IZ", "+XI", "+ZI"),
        }
        if name not in table:
            raise ValueError(f"unknown named Clifford gate {name!r}")
        images = []
        for s in table[name]:
            sign = -1 if s[0] == "-" else 1
            letters = s[1:]
            x = np.array([c in "XY" for c in letters], dtype=np.uint8)
            z = np.array([c in "ZY" for c in letters], dtype=np.uint8)
            ph = (sum(c == "Y" for c in letters) + (0 if sign > 0 else 2)) % 4
            images.append((x, z, ph))
        return cls.from_images(images)

    # -- lookup-table application --------------------------------------

    def _build_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.k
        size = 4**k
        tx = np.zeros((size, k), dtype=np.uint8)
        tz = np.zeros((size, k), dtype=np.uint8)
        tp = np.zeros(size, dtype=np.uint8)
        for idx in range(size):
            px = np.zeros(k, dtype=np.uint8)
            pz = np.zeros(k, dtype=np.uint8)
            ph = 0
            for t in range(k):
                xb = (idx >> (2 * t)) & 1
                zb = (idx >> (2 * t + 1)) & 1
                # local canonical order is X^x Z^z per qubit, qubits ascending
                for use, img in ((xb, 2 * t), (zb, 2 * t + 1)):
                    if use:
                        ph = (ph + int(self.image_phase[img]) + 2 * int(pz @ self.image_x[img])) % 4
                        px ^= self.image_x[img]
                        pz ^= self.image_z[img]
            tx[idx], tz[idx], tp[idx] = px, pz, ph
        return tx, tz, tp

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.__dict__.get("_table") is None:
            object.__setattr__(self, "_table", self._build_table())
        return self.__dict__["_table"]

    # -- dense synthesis ------------------------------------------------

    def unitary(self) -> np.ndarray:
        """A unitary implementing the tableau (up to global phase)."""
        k, dim = self.k, 2**self.k
        proj = np.eye(dim, dtype=complex)
        for t in range(k):
            g = _pauli_matrix(self.image_x[2 * t + 1], self.image_z[2 * t + 1], int(self.image_phase[2 * t + 1]))
            proj = proj @ (np.eye(dim) + g) / 2.0
        col = np.argmax(np.linalg.norm(proj, axis=0))
        psi0 = proj[:, col] / np.linalg.norm(proj[:, col])
        xs = [
            _pauli_matrix(self.image_x[2 * t], self.image_z[2 * t], int(self.image_phase[2 * t]))
            for t in range(k)
        ]
        u = np.zeros((dim, dim), dtype=complex)
        for a in range(dim):
            vec = psi0
            for t in range(k):
                if (a >> (k - 1 - t)) & 1:
                    vec = xs[t] @ vec
            u[:, a] = vec
        return u


def _pauli2_sym(p: int, q: int) -> int:
    """Symplectic product of two 2-qubit Paulis encoded with bit 2t = x_t,
    bit 2t+1 = z_t."""
    xp, zp = p & 0b0101, (p >> 1) & 0b0101
    xq, zq = q & 0b0101, (q >> 1) & 0b0101
    return bin((xp & zq) ^ (zp & xq)).count("1") % 2


def _enumerate_symplectic2() -> list[tuple[int, int, int, int]]:
    """All 720 two-qubit symplectic tableaux (images of X1, Z1, X2, Z2 as
    Pauli codes) in a fixed deterministic order."""
    out = []
    for x1 in range(1, 16):
        for z1 in (q for q in range(16) if _pauli2_sym(x1, q)):
            cent = [
                q
                for q in range(1, 16)
                if not _pauli2_sym(q, x1) and not _pauli2_sym(q, z1)
            ]
            for x2 in cent:
                for z2 in (q for q in cent if _pauli2_sym(x2, q)):
                    out.append((x1, z1, x2, z2))
    return out


_SYMPLECTIC2: list[tuple[int, int, int, int]] = _enumerate_symplectic2()

#: exponent bits (x1, z1, x2, z2) of each 2-qubit local Pauli index
_LOCAL_BITS = np.array(
    [[(idx >> b) & 1 for b in range(4)] for idx in range(16)], dtype=np.uint8
)

_CLASS_TABLE_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _pauli_code_to_bits(code: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([code & 1, (code >> 2) & 1], dtype=np.uint8)
    z = np.array([(code >> 1) & 1, (code >> 3) & 1], dtype=np.uint8)
    return x, z


def _class_gate(sym_idx: int) -> CliffordGate:
    images = []
    for code in _SYMPLECTIC2[sym_idx]:
        x, z = _pauli_code_to_bits(code)
        images.append((x, z, int(x @ z) % 4))
    return CliffordGate.from_images(images)


def _class_tables(sym_idx: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cached = _CLASS_TABLE_CACHE.get(sym_idx)
    if cached is None:
        cached = _class_gate(sym_idx).table
        _CLASS_TABLE_CACHE[sym_idx] = cached
    return cached


def _draw_clifford(rng: np.random.Generator) -> tuple[int, np.ndarray]:
    return int(rng.integers(len(_SYMPLECTIC2))), rng.integers(0, 2, size=4, dtype=np.uint8)


def _random_gate_tables(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lookup tables (new x, new z, phase shift) of a uniformly random
    two-qubit Clifford; the fast path of the Monte-Carlo loop."""
    sym_idx, sbits = _draw_clifford(rng)
    tx, tz, tp = _class_tables(sym_idx)
    tp = (tp + 2 * (_LOCAL_BITS @ sbits)) % 4
    return tx, tz, tp.astype(np.uint8)


def random_clifford_gate(rng: np.random.Generator) -> CliffordGate:
    """Uniformly random two-qubit Clifford (up to global phase).

    The symplectic part is drawn uniformly from the 720 tableaux and the
    four image signs are independent fair bits, covering all
    720 * 16 = 11520 gates uniformly.
    """
    sym_idx, sbits = _draw_clifford(rng)
    images = []
    for code, sbit in zip(_SYMPLECTIC2[sym_idx], sbits):
        x, z = _pauli_code_to_bits(code)
        images.append((x, z, (int(x @ z) + 2 * int(sbit)) % 4))
    return CliffordGate.from_images(images)


# ---------------------------------------------------------------------------
# in-place tableau helpers (shared by the pure API and the Monte-Carlo loop)


def _apply_tables_inplace(x, z, ph, tables, sites: Sequence[int]) -> None:
    cols = list(sites)
    idx = _local_index(x[:, cols], z[:, cols])
    tx, tz, tp = tables
    ph += tp[idx]
    ph %= 4
    x[:, cols] = tx[idx]
    z[:, cols] = tz[idx]


def _apply_gate_inplace(x, z, ph, gate: CliffordGate, sites: Sequence[int]) -> None:
    _apply_tables_inplace(x, z, ph, gate.table, sites)


def _multiply_rows_inplace(x, z, ph, rows: np.ndarray, src: int) -> None:
    """g_r <- g_src g_r for every r in rows (src excluded by the caller)."""
    ph[rows] = (ph[rows] + int(ph[src]) + 2 * (x[rows].astype(np.int64) @ z[src].astype(np.int64))) % 4
    x[rows] ^= x[src]
    z[rows] ^= z[src]


def _trace_out_inplace(x, z, ph, site: int):
    """Remove the qubit's correlations: afterwards no row acts on ``site``.
    Returns the (possibly smaller) arrays."""
    drop = []
    rows_x = np.nonzero(x[:, site])[0]
    if rows_x.size:
        piv = int(rows_x[0])
        if rows_x.size > 1:
            _multiply_rows_inplace(x, z, ph, rows_x[1:], piv)
        drop.append(piv)
    rows_z = np.nonzero(z[:, site] & (x[:, site] == 0))[0]
    if rows_z.size:
        piv = int(rows_z[0])
        if rows_z.size > 1:
            _multiply_rows_inplace(x, z, ph, rows_z[1:], piv)
        drop.append(piv)
    if drop:
        keep = np.ones(x.shape[0], dtype=bool)
        keep[drop] = False
        return x[keep], z[keep], ph[keep]
    return x, z, ph


def _postselect_zero_inplace(x, z, ph, b_sites: Sequence[int]):
    """Project onto the computational outcome 0 on every listed site (forcing
    the opposite outcome where a sign obstruction makes 0 impossible) and
    mark each projected site with a dedicated +-Z row.

    Returns (x, z, ph, pivot row per site, consistent flag).
    """
    consistent = True
    pivot_rows: dict[int, int] = {}
    for s in b_sites:
        rows_x = np.nonzero(x[:, s])[0]
        if rows_x.size:
            piv = int(rows_x[0])
            if rows_x.size > 1:
                _multiply_rows_inplace(x, z, ph, rows_x[1:], piv)
            x[piv] = 0
            z[piv] = 0
            z[piv, s] = 1
            ph[piv] = 0
        else:
            combo = None
            if z[:, s].any():  # otherwise Z_s is trivially independent
                target = np.zeros(2 * x.shape[1], dtype=np.uint8)
                target[x.shape[1] + s] = 1
                combo = gf2_solve_left(np.hstack([x, z]), target)
            if combo is not None and combo.any():
                rows = np.nonzero(combo)[0]
                px, pz, pph = _pauli_product(x, z, ph, list(rows))
                if pph % 4 != 0:
                    consistent = False  # group contains -Z_s: outcome 0 impossible
                with_z = [int(r) for r in rows if z[r, s]]
                piv = with_z[0]
                x[piv], z[piv], ph[piv] = px, pz, pph
            else:
                piv = x.shape[0]
                x = np.vstack([x, np.zeros((1, x.shape[1]), dtype=np.uint8)])
                z = np.vstack([z, np.zeros((1, z.shape[1]), dtype=np.uint8)])
                ph = np.concatenate([ph, np.zeros(1, dtype=np.uint8)])
                z[piv, s] = 1
        others = np.nonzero(z[:, s])[0]
        others = others[others != piv]
        if others.size:
            _multiply_rows_inplace(x, z, ph, others, piv)
        pivot_rows[s] = piv
    return x, z, ph, pivot_rows, consistent


# ---------------------------------------------------------------------------
# public operations


def apply_clifford(
    state: StabilizerState, gate: CliffordGate, sites: Sequence[int]
) -> StabilizerState:
    """Conjugate every generator by the gate acting on ``sites``."""
    sites = [int(s) for s in sites]
    if len(sites) != gate.k or len(set(sites)) != gate.k:
        raise ValueError(f"gate acts on {gate.k} distinct sites, got {sites}")
    if not all(0 <= s < state.n for s in sites):
        raise ValueError(f"sites {sites} outside [0, {state.n})")
    x, z, ph = state.x.copy(), state.z.copy(), state.phase.astype(np.int64)
    _apply_gate_inplace(x, z, ph, gate, sites)
    return StabilizerState(n=state.n, x=x, z=z, phase=ph)


def trace_out(state: StabilizerState, site: int) -> StabilizerState:
    """Replace the site's state with the maximally mixed one (partial trace
    and re-tensor I/2); the generator count drops by 0, 1 or 2."""
    if not 0 <= site < state.n:
        raise ValueError(f"site {site} outside [0, {state.n})")
    x, z, ph = state.x.copy(), state.z.copy(), state.phase.copy()
    x, z, ph = _trace_out_inplace(x, z, ph, site)
    return StabilizerState(n=state.n, x=x, z=z, phase=ph)


def postselect_zero(
    state: StabilizerState, b_sites: Iterable[int]
) -> tuple[StabilizerState, bool]:
    """Project onto the all-zero computational outcome on ``b_sites`` and
    drop those qubits.

    Returns ``consistent = False`` when a sign obstruction makes the all-zero
    outcome impossible; the returned state is then the projection onto the
    sign-compatible outcome (same Pauli frame, flipped bits), which leaves
    outcome probabilities and trace distances unchanged.
    """
    b = sorted({int(s) for s in b_sites})
    if not all(0 <= s < state.n for s in b):
        raise ValueError(f"sites {b} outside [0, {state.n})")
    x, z, ph = state.x.copy(), state.z.copy(), state.phase.copy()
    x, z, ph, pivots, consistent = _postselect_zero_inplace(x, z, ph, b)
    keep_rows = np.setdiff1d(np.arange(x.shape[0]), list(pivots.values()))
    keep_cols = [s for s in range(state.n) if s not in set(b)]
    return (
        StabilizerState(
            n=len(keep_cols),
            x=x[np.ix_(keep_rows, keep_cols)],
            z=z[np.ix_(keep_rows, keep_cols)],
            phase=ph[keep_rows],
        ),
        consistent,
    )


def marginal(state: StabilizerState, keep: Sequence[int]) -> StabilizerState:
    """Partial trace onto ``keep`` (in the given order)."""
    keep = [int(s) for s in keep]
    keep_set = set(keep)
    if len(keep_set) != len(keep) or not all(0 <= s < state.n for s in keep):
        raise ValueError(f"bad site list {keep}")
    x, z, ph = state.x.copy(), state.z.copy(), state.phase.copy()
    for s in range(state.n):
        if s not in keep_set:
            x, z, ph = _trace_out_inplace(x, z, ph, s)
    return StabilizerState(n=len(keep), x=x[:, keep], z=z[:, keep], phase=ph)


def tensor(parts: Sequence[tuple[StabilizerState, Sequence[int]]], n: int) -> StabilizerState:
    """Tensor product of states embedded at the given site positions."""
    xs, zs, phs = [], [], []
    seen: set[int] = set()
    for state, positions in parts:
        positions = [int(p) for p in positions]
        if len(positions) != state.n or seen & set(positions):
            raise ValueError("tensor positions must be disjoint and match sizes")
        seen |= set(positions)
        bx = np.zeros((state.rank, n), dtype=np.uint8)
        bz = np.zeros((state.rank, n), dtype=np.uint8)
        bx[:, positions] = state.x
        bz[:, positions] = state.z
        xs.append(bx)
        zs.append(bz)
        phs.append(state.phase)
    return StabilizerState(
        n=n,
        x=np.vstack(xs) if xs else np.zeros((0, n), dtype=np.uint8),
        z=np.vstack(zs) if zs else np.zeros((0, n), dtype=np.uint8),
        phase=np.concatenate(phs) if phs else np.zeros(0, dtype=np.uint8),
    )


def stab_trace_distance(s1: StabilizerState, s2: StabilizerState) -> float:
    """Exact 1-norm distance ||rho1 - rho2||_1 between two mixed stabilizer
    states (range [0, 2]).

    The two stabilizer groups are compared through their symplectic
    canonical form: if any common group element carries opposite signs the
    supports are orthogonal and the distance is 2.  Otherwise the shared
    part factors out, the leftover groups intersect trivially, and a
    symplectic (Witt-extension) normal form reduces the operator difference
    to commuting diagonal blocks mixed by ``rho`` conjugate qubit pairs with
    overlap 2^-rho.  The distance depends only on the leftover ranks
    alpha, beta and the pairing rank rho:

        (1 - 2^-alpha) + (1 - 2^-beta)
            + sqrt((2^-alpha - 2^-beta)^2 + 4 * 2^-(alpha+beta) (1 - 2^-rho))
    """
    if s1.n != s2.n:
        raise ValueError(f"qubit counts differ: {s1.n} vs {s2.n}")
    r1, r2 = s1.rank, s2.rank
    m1 = np.hstack([s1.x, s1.z])
    m2 = np.hstack([s2.x, s2.z])
    stacked = np.vstack([m1, m2])
    t = r1 + r2 - gf2_rank(stacked)
    if t:
        for combo in gf2_left_nullspace(stacked):
            a, b = combo[:r1], combo[r1:]
            if not a.any():
                continue
            _, _, ph_a = _pauli_product(s1.x, s1.z, s1.phase, list(np.nonzero(a)[0]))
            _, _, ph_b = _pauli_product(s2.x, s2.z, s2.phase, list(np.nonzero(b)[0]))
            if (ph_a - ph_b) % 4:
                return 2.0
    pairing = (
        s1.x.astype(np.int64) @ s2.z.astype(np.int64).T
        + s1.z.astype(np.int64) @ s2.x.astype(np.int64).T
    ) % 2
    rho = gf2_rank(pairing.astype(np.uint8))
    alpha = r1 - t - rho
    beta = r2 - t - rho
    wa, wb = 2.0**-alpha, 2.0**-beta
    cross = (wa - wb) ** 2 + 4.0 * wa * wb * (1.0 - 2.0**-rho)
    return (1.0 - wa) + (1.0 - wb) + math.sqrt(cross)


# ---------------------------------------------------------------------------
# Monte-Carlo experiments on the 2D brickwork grid


@dataclass(frozen=True)
class DbarPoint:
    rows: int
    cols: int
    depth: int
    p: float
    l_ac: int
    shots: int
    dbar: float
    stderr: float
    seed: int
    values: tuple[float, ...] = field(repr=False, default=())


def _dbar_single_shot(
    rows: int, depth: int, p: float, l_ac: int, seed_key: Sequence[int]
) -> float:
    cols = 2 * depth + l_ac
    n = rows * cols
    geometry = (rows, cols)
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_key)))
    x = np.zeros((n, n), dtype=np.uint8)
    z = np.eye(n, dtype=np.uint8)
    ph = np.zeros(n, dtype=np.uint8)
    for layer in range(depth):
        pairs = brickwork_pairs(geometry, layer)
        sym = rng.integers(len(_SYMPLECTIC2), size=len(pairs))
        signs = rng.integers(0, 2, size=(len(pairs), 4), dtype=np.uint8)
        for (a, b), sym_idx, sbits in zip(pairs, sym, signs):
            tx, tz, tp = _class_tables(int(sym_idx))
            tp = (tp + 2 * (_LOCAL_BITS @ sbits)) % 4
            _apply_tables_inplace(x, z, ph, (tx, tz, tp), (a, b))
        coins = rng.random(n) < p
        for site in np.nonzero(coins)[0]:
            x, z, ph = _trace_out_inplace(x, z, ph, int(site))
    col_of = np.arange(n) % cols
    b_sites = [s for s in range(n) if depth <= col_of[s] < depth + l_ac]
    x, z, ph, pivots, _ = _postselect_zero_inplace(x, z, ph, b_sites)
    keep_rows = np.ones(x.shape[0], dtype=bool)
    keep_rows[list(pivots.values())] = False
    keep_cols = [s for s in range(n) if col_of[s] < depth or col_of[s] >= depth + l_ac]
    sigma = StabilizerState(
        n=len(keep_cols),
        x=x[keep_rows][:, keep_cols],
        z=z[keep_rows][:, keep_cols],
        phase=ph[keep_rows],
    )
    a_pos = [i for i, s in enumerate(keep_cols) if col_of[s] < depth]
    c_pos = [i for i, s in enumerate(keep_cols) if col_of[s] >= depth + l_ac]
    rho_a = marginal(sigma, a_pos)
    rho_c = marginal(sigma, c_pos)
    product = tensor([(rho_a, a_pos), (rho_c, c_pos)], sigma.n)
    return stab_trace_distance(sigma, product)


def dbar_clifford(
    rows: int,
    depth: int,
    p: float,
    l_ac: int,
    shots: int,
    seed: int = 0,
    workers: int = 1,
) -> DbarPoint:
    """Gate- and noise-averaged conditional trace distance on a 2D brickwork
    grid of ``rows x (2*depth + l_ac)`` qubits.

    The circuit is ``depth`` alternating horizontal/vertical brick-wall gate
    layers (open boundaries); regions A and C are the outer ``depth``-column
    blocks (wider blocks cannot change the result), B is the middle ``l_ac``
    columns.

    Per shot: fresh uniformly random two-qubit Cliffords on every brick,
    each spacetime site traced out with probability ``p`` after its gate
    layer, B postselected on the all-zero outcome, and the trace distance of
    the post-measurement state on A+C to the product of its marginals
    computed analytically.  Shot seeds derive from ``(seed, shot)`` so
    results are independent of ``workers``.
    """
    if l_ac < 0 or depth < 1 or rows < 1:
        raise ValueError("need rows >= 1, depth >= 1, l_ac >= 0")
    keys = [(int(seed), shot) for shot in range(shots)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(
                pool.map(
                    _dbar_shot_star,
                    [(rows, depth, p, l_ac, key) for key in keys],
                    chunksize=64,
                )
            )
    else:
        values = [_dbar_single_shot(rows, depth, p, l_ac, key) for key in keys]
    arr = np.array(values)
    return DbarPoint(
        rows=rows,
        cols=2 * depth + l_ac,
        depth=depth,
        p=p,
        l_ac=l_ac,
        shots=shots,
        dbar=float(arr.mean()),
        stderr=float(arr.std(ddof=1) / math.sqrt(shots)) if shots > 1 else 0.0,
        seed=int(seed),
        values=tuple(float(v) for v in values),
    )


def _dbar_shot_star(args) -> float:
    rows, depth, p, l_ac, key = args
    return _dbar_single_shot(rows, depth, p, l_ac, key)


@dataclass(frozen=True)
class ScanFit:
    rows: int
    depth: int
    p: float
    fit: MarkovLengthFit | None
    note: str = ""


def markov_length_scan(
    rows: int,
    depths: Sequence[int],
    ps: Sequence[float],
    l_values: Sequence[int],
    shots: int,
    seed: int = 0,
    workers: int = 1,
) -> tuple[list[DbarPoint], list[ScanFit]]:
    """Decay curves of the conditional trace distance versus separation, with
    a log-linear Markov-length fit per (depth, p) pair.

    Per-point seeds derive from (seed, depth, p, l), so the table is
    reproducible regardless of scheduling.  Fits that lack usable points
    (e.g. the noiseless row, which is not expected to decay) are flagged
    instead of raising.
    """
    points: list[DbarPoint] = []
    fits: list[ScanFit] = []
    for depth in depths:
        for p in ps:
            curve = []
            for l_ac in l_values:
                point_seed = _point_seed(seed, depth, p, l_ac)
                pt = dbar_clifford(rows, depth, p, l_ac, shots, point_seed, workers)
                points.append(pt)
                curve.append((l_ac, pt.dbar, pt.stderr))
            try:
                fit = fit_markov_length(curve)
                fits.append(ScanFit(rows=rows, depth=depth, p=p, fit=fit))
            except InsufficientData as exc:
                fits.append(
                    ScanFit(rows=rows, depth=depth, p=p, fit=None, note=str(exc))
                )
    return points, fits


def _point_seed(seed: int, depth: int, p: float, l_ac: int) -> int:
    ss = np.random.SeedSequence(
        [int(seed), int(depth), int(round(p * 10**9)), int(l_ac)]
    )
    return int(ss.generate_state(1, np.uint64)[0])
