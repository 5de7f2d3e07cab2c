"""Bit-packed Pauli strings with exact phase tracking.

A :class:`PauliString` stores ``phase * P_0 (x) P_1 (x) ... (x) P_{n-1}`` where each
single-qubit factor is chosen by the bits of ``x_mask`` and ``z_mask``
(``(0,0)=I, (1,0)=X, (1,1)=Y, (0,1)=Z``).  Masks are Python integers, so the
bitwise work runs over machine words and ``int.bit_count`` gives popcounts.
The phase is kept as an exponent of ``i`` modulo 4.
"""

from __future__ import annotations

from dataclasses import dataclass

_PHASE_LABELS = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LABEL_PHASES = {"+": 0, "+i": 1, "i": 1, "-": 2, "-i": 3, "": 0}


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli operator with a phase in ``{+1, +i, -1, -i}``."""

    n_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    phase_exp: int = 0

    def __post_init__(self) -> None:
        if self.n_qubits < 0:
            raise ValueError("n_qubits must be non-negative")
        limit = 1 << self.n_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError("mask has bits outside the qubit range")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    # ------------------------------------------------------------------ builders
    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(n_qubits)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse labels such as ``"XIZ"``, ``"-YY"`` or ``"+iZ_"``.

        Character ``j`` of the body acts on qubit ``j``; ``_`` is accepted for identity.
        """
        body = label.lstrip("+-i")
        prefix = label[: len(label) - len(body)]
        if prefix not in _LABEL_PHASES:
            raise ValueError(f"bad phase prefix {prefix!r}")
        x = z = 0
        for q, ch in enumerate(body):
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
            if ch not in "IXYZ_":
                raise ValueError(f"bad Pauli character {ch!r}")
        return cls(len(body), x, z, _LABEL_PHASES[prefix])

    @classmethod
    def single(cls, n_qubits: int, qubit: int, kind: str) -> PauliString:
        """Single-qubit Pauli ``kind`` in {"X", "Y", "Z"} acting on ``qubit``."""
        return cls.from_sparse(n_qubits, {qubit: kind})

    @classmethod
    def from_sparse(cls, n_qubits: int, factors: dict[int, str], phase_exp: int = 0) -> PauliString:
        x = z = 0
        for q, kind in factors.items():
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")
            if kind in "XY":
                x |= 1 << q
            if kind in "ZY":
                z |= 1 << q
        return cls(n_qubits, x, z, phase_exp)

    @classmethod
    def z_string(cls, n_qubits: int, qubits) -> PauliString:
        return cls(n_qubits, 0, _mask(qubits))

    @classmethod
    def x_string(cls, n_qubits: int, qubits) -> PauliString:
        return cls(n_qubits, _mask(qubits), 0)

    # ---------------------------------------------------------------- properties
    @property
    def phase(self) -> complex:
        return 1j**self.phase_exp

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def support(self) -> list[int]:
        m = self.x_mask | self.z_mask
        return [q for q in range(self.n_qubits) if m >> q & 1]

    def is_hermitian(self) -> bool:
        return self.phase_exp % 2 == 0

    def __getitem__(self, qubit: int) -> str:
        xb = self.x_mask >> qubit & 1
        zb = self.z_mask >> qubit & 1
        return "IXZY"[xb | zb << 1]

    def __str__(self) -> str:
        body = "".join(self[q] for q in range(self.n_qubits))
        return _PHASE_LABELS[self.phase_exp] + body

    # ------------------------------------------------------------------- algebra
    def commutes(self, other: PauliString) -> bool:
        self._check(other)
        anti = _popcount(self.x_mask & other.z_mask) + _popcount(self.z_mask & other.x_mask)
        return anti % 2 == 0

    def __mul__(self, other: PauliString) -> PauliString:
        self._check(other)
        # Each label factor equals i^{x&z} X^x Z^z; reorder Z^{z1} X^{x2} at cost (-1)^{|z1&x2|}.
        e = (
            self.phase_exp
            + other.phase_exp
            + _popcount(self.x_mask & self.z_mask)
            + _popcount(other.x_mask & other.z_mask)
            + 2 * _popcount(self.z_mask & other.x_mask)
        )
        x = self.x_mask ^ other.x_mask
        z = self.z_mask ^ other.z_mask
        e -= _popcount(x & z)
        return PauliString(self.n_qubits, x, z, e)

    def __neg__(self) -> PauliString:
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, self.phase_exp + 2)

    def with_phase(self, phase_exp: int) -> PauliString:
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, phase_exp)

    def to_matrix(self):
        """Dense matrix with qubit 0 as the most significant tensor factor (small n only)."""
        import numpy as np

        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[self.phase]], dtype=complex)
        for q in range(self.n_qubits):
            out = np.kron(out, mats[self[q]])
        return out

    def _check(self, other: PauliString) -> None:
        if self.n_qubits != other.n_qubits:
            raise ValueError("Pauli strings act on different numbers of qubits")


def _mask(qubits) -> int:
    m = 0
    for q in qubits:
        m |= 1 << q
    return m
