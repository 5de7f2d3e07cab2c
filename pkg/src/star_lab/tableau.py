"""Aaronson-Gottesman stabilizer tableau with bit-packed rows.

Rows ``0..n-1`` are destabilizers and rows ``n..2n-1`` are stabilizers.  Each row is
stored as ``x`` and ``z`` bit masks packed into ``uint64`` words plus a phase
exponent of ``i`` (always 0 or 2 for the Hermitian rows kept here).  Row products
use the identity ``i^{x&z} X^x Z^z`` for each single-qubit label, which turns the
phase bookkeeping into a few popcounts.
"""

from __future__ import annotations

import numpy as np

from .circuit import CliffordOp, OpKind, MARKER_KINDS
from .pauli import PauliString

_ONE = np.uint64(1)


def _n_words(n: int) -> int:
    return max(1, (n + 63) // 64)


def _pack_mask(mask: int, n_words: int) -> np.ndarray:
    out = np.zeros(n_words, dtype=np.uint64)
    for w in range(n_words):
        out[w] = (mask >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
    return out


def _unpack_mask(words: np.ndarray) -> int:
    m = 0
    for w, v in enumerate(words.tolist()):
        m |= int(v) << (64 * w)
    return m


def _popcount_rows(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).sum(axis=-1, dtype=np.int64)


class StabilizerTableau:
    """Stabilizer state on ``n_qubits`` qubits, initialised to ``|0...0>``."""

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n = n_qubits
        self.n_words = _n_words(n)
        self.x = np.zeros((2 * n, self.n_words), dtype=np.uint64)
        self.z = np.zeros((2 * n, self.n_words), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.int64)
        for q in range(n):
            w, b = divmod(q, 64)
            self.x[q, w] = _ONE << np.uint64(b)
            self.z[n + q, w] = _ONE << np.uint64(b)
        self.random_log: list[tuple[int, bool]] = []

    # ----------------------------------------------------------------- helpers
    def copy(self) -> StabilizerTableau:
        other = StabilizerTableau.__new__(StabilizerTableau)
        other.n_qubits = self.n_qubits
        other.n_words = self.n_words
        other.x = self.x.copy()
        other.z = self.z.copy()
        other.r = self.r.copy()
        other.random_log = list(self.random_log)
        return other

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.n_qubits:
            raise IndexError(f"qubit {q} out of range for {self.n_qubits} qubits")

    def _bits(self, arr: np.ndarray, q: int) -> np.ndarray:
        w, b = divmod(q, 64)
        return ((arr[:, w] >> np.uint64(b)) & _ONE).astype(np.int64)

    def _flip(self, arr: np.ndarray, q: int, mask: np.ndarray) -> None:
        w, b = divmod(q, 64)
        arr[:, w] ^= mask.astype(np.uint64) << np.uint64(b)

    def row(self, i: int) -> PauliString:
        """Row ``i`` as a :class:`PauliString` in label form."""
        x = _unpack_mask(self.x[i])
        z = _unpack_mask(self.z[i])
        # stored sign applies to the label form directly
        return PauliString(self.n_qubits, x, z, int(self.r[i]))

    def stabilizers(self) -> list[PauliString]:
        n = self.n_qubits
        return [self.row(i) for i in range(n, 2 * n)]

    def destabilizers(self) -> list[PauliString]:
        return [self.row(i) for i in range(self.n_qubits)]

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` unless the symplectic structure is intact."""
        n = self.n_qubits
        x, z = self.x, self.z
        anti = (
            np.bitwise_count(x[:, None, :] & z[None, :, :]).sum(-1)
            + np.bitwise_count(z[:, None, :] & x[None, :, :]).sum(-1)
        ) % 2
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        idx = np.arange(n)
        expected[idx, n + idx] = 1
        expected[n + idx, idx] = 1
        assert np.array_equal(anti, expected), "tableau commutation structure broken"
        assert np.all(self.r % 2 == 0), "non-Hermitian row"

    # ------------------------------------------------------------------- gates
    def h(self, q: int) -> None:
        self._check_qubit(q)
        xb, zb = self._bits(self.x, q), self._bits(self.z, q)
        self.r = (self.r + 2 * (xb & zb)) % 4
        t = xb ^ zb
        self._flip(self.x, q, t)
        self._flip(self.z, q, t)

    def cnot(self, c: int, t: int) -> None:
        self._check_qubit(c)
        self._check_qubit(t)
        if c == t:
            raise ValueError("CNOT control and target must differ")
        xc, zc = self._bits(self.x, c), self._bits(self.z, c)
        xt, zt = self._bits(self.x, t), self._bits(self.z, t)
        self.r = (self.r + 2 * (xc & zt & (xt ^ zc ^ 1))) % 4
        self._flip(self.x, t, xc)
        self._flip(self.z, c, zt)

    def swap(self, a: int, b: int) -> None:
        self._check_qubit(a)
        self._check_qubit(b)
        for arr in (self.x, self.z):
            ba, bb = self._bits(arr, a), self._bits(arr, b)
            t = ba ^ bb
            self._flip(arr, a, t)
            self._flip(arr, b, t)

    def apply_pauli(self, p: PauliString) -> None:
        """Conjugate the state by ``p``: flips the sign of every anticommuting row."""
        if p.n_qubits != self.n_qubits:
            raise ValueError("Pauli size does not match tableau")
        px = _pack_mask(p.x_mask, self.n_words)
        pz = _pack_mask(p.z_mask, self.n_words)
        anti = (_popcount_rows(self.x & pz) + _popcount_rows(self.z & px)) % 2
        self.r = (self.r + 2 * anti) % 4

    # ------------------------------------------------------------ measurement
    def _rowmul_into(self, rows: np.ndarray, src: int) -> None:
        """Replace each row ``h`` in ``rows`` with ``P_src * P_h``."""
        if rows.size == 0:
            return
        xs, zs = self.x[src], self.z[src]
        xh, zh = self.x[rows], self.z[rows]
        e = (
            self.r[src]
            + self.r[rows]
            + _popcount_rows(xs & zs)
            + _popcount_rows(xh & zh)
            + 2 * _popcount_rows(zs & xh)
        )
        nx, nz = xh ^ xs, zh ^ zs
        e -= _popcount_rows(nx & nz)
        self.x[rows] = nx
        self.z[rows] = nz
        self.r[rows] = e % 4

    def measure_z(self, q: int, rng: np.random.Generator | None = None) -> int:
        """Measure ``Z_q``; returns ``+1`` or ``-1`` and collapses the state."""
        return 1 - 2 * self._measure_bit(q, rng)

    def _measure_bit(self, q: int, rng: np.random.Generator | None) -> int:
        self._check_qubit(q)
        n = self.n_qubits
        xq = self._bits(self.x, q)
        stab_hits = np.flatnonzero(xq[n:]) + n
        if stab_hits.size:
            p = int(stab_hits[0])
            others = np.flatnonzero(xq)
            others = others[others != p]
            self._rowmul_into(others, p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            w, b = divmod(q, 64)
            self.z[p, w] = _ONE << np.uint64(b)
            if rng is None:
                raise ValueError("random measurement outcome needs an rng")
            bit = int(rng.integers(2))
            self.r[p] = 2 * bit
            self.random_log.append((q, True))
            return bit
        self.random_log.append((q, False))
        return self._deterministic_bit(np.flatnonzero(xq[:n]) + n)

    def _deterministic_bit(self, stab_rows: np.ndarray) -> int:
        """Sign of the product of the given (mutually commuting) stabilizer rows."""
        x = np.zeros(self.n_words, dtype=np.uint64)
        z = np.zeros(self.n_words, dtype=np.uint64)
        e = 0
        for i in stab_rows.tolist():
            xi, zi = self.x[i], self.z[i]
            e += int(self.r[i])
            e += int(np.bitwise_count(x & z).sum()) + int(np.bitwise_count(xi & zi).sum())
            e += 2 * int(np.bitwise_count(z & xi).sum())
            x, z = x ^ xi, z ^ zi
            e -= int(np.bitwise_count(x & z).sum())
        e %= 4
        if e % 2:
            raise ArithmeticError("stabilizer product acquired an imaginary phase")
        return e // 2

    def peek_pauli(self, p: PauliString) -> int:
        """Expectation of a Hermitian Pauli: ``+1``/``-1`` if determined, else ``0``."""
        if p.n_qubits != self.n_qubits:
            raise ValueError("Pauli size does not match tableau")
        n = self.n_qubits
        px = _pack_mask(p.x_mask, self.n_words)
        pz = _pack_mask(p.z_mask, self.n_words)
        anti = (_popcount_rows(self.x & pz) + _popcount_rows(self.z & px)) % 2
        if anti[n:].any():
            return 0
        rows = np.flatnonzero(anti[:n]) + n
        # product of stabilizers equal to +-p up to the label phase of p itself
        x = np.zeros(self.n_words, dtype=np.uint64)
        z = np.zeros(self.n_words, dtype=np.uint64)
        e = 0
        for i in rows.tolist():
            xi, zi = self.x[i], self.z[i]
            e += int(self.r[i])
            e += int(np.bitwise_count(x & z).sum()) + int(np.bitwise_count(xi & zi).sum())
            e += 2 * int(np.bitwise_count(z & xi).sum())
            x, z = x ^ xi, z ^ zi
            e -= int(np.bitwise_count(x & z).sum())
        assert np.array_equal(x, px) and np.array_equal(z, pz)
        rel = (e - p.phase_exp) % 4
        if rel % 2:
            raise ValueError("operator is not Hermitian")
        return 1 if rel == 0 else -1

    # ------------------------------------------------------------- resets/ops
    def reset_z(self, q: int, rng: np.random.Generator | None = None) -> None:
        rng = rng if rng is not None else np.random.default_rng(0)
        if self._measure_bit(q, rng):
            self.apply_pauli(PauliString.single(self.n_qubits, q, "X"))

    def reset_x(self, q: int, rng: np.random.Generator | None = None) -> None:
        self.reset_z(q, rng)
        self.h(q)

    def apply(self, op: CliffordOp, rng: np.random.Generator | None = None) -> int | None:
        """Apply one circuit op; returns the measurement bit for ``MEASURE_Z``."""
        return apply_clifford(self, op, rng)


def apply_clifford(tableau: StabilizerTableau, op: CliffordOp, rng: np.random.Generator | None = None):
    """Apply ``op`` to ``tableau`` in place.

    Measurement ops return the outcome bit (0 for ``+1``, 1 for ``-1``); other ops return ``None``.
    Rotation markers are rejected: they carry non-Clifford angles.
    """
    kind = op.kind
    if kind in MARKER_KINDS:
        raise ValueError(f"rotation marker {kind.value} cannot be applied to a tableau")
    if kind is OpKind.H:
        tableau.h(op.targets[0])
    elif kind is OpKind.CNOT:
        tableau.cnot(*op.targets)
    elif kind is OpKind.SWAP:
        tableau.swap(*op.targets)
    elif kind is OpKind.INIT_Z:
        tableau.reset_z(op.targets[0], rng)
    elif kind is OpKind.INIT_X:
        tableau.reset_x(op.targets[0], rng)
    elif kind is OpKind.PAULI:
        tableau.apply_pauli(op.pauli)
    elif kind is OpKind.MEASURE_Z:
        return tableau._measure_bit(op.targets[0], rng)
    elif kind is OpKind.TICK:
        pass
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unsupported op {kind}")
    return None


def measure_z(tableau: StabilizerTableau, qubit: int, rng: np.random.Generator) -> int:
    """Measure ``Z`` on ``qubit``, returning ``+1`` or ``-1``."""
    return tableau.measure_z(qubit, rng)
