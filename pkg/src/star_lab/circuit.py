"""Circuit vocabulary shared by the tableau, the frame sampler and the code builders."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .pauli import PauliString


class OpKind(str, Enum):
    H = "H"
    CNOT = "CNOT"
    SWAP = "SWAP"
    INIT_Z = "INIT_Z"
    INIT_X = "INIT_X"
    MEASURE_Z = "MEASURE_Z"
    PAULI = "PAULI"
    RZ = "RZ"  # ideal single-qubit rotation marker (virtual Z)
    RZZ = "RZZ"  # noisy native two-qubit rotation marker
    TICK = "TICK"


CLIFFORD_KINDS = {OpKind.H, OpKind.CNOT, OpKind.SWAP, OpKind.INIT_Z, OpKind.INIT_X, OpKind.PAULI}
MARKER_KINDS = {OpKind.RZ, OpKind.RZZ}
_ARITY = {
    OpKind.H: 1,
    OpKind.CNOT: 2,
    OpKind.SWAP: 2,
    OpKind.INIT_Z: 1,
    OpKind.INIT_X: 1,
    OpKind.MEASURE_Z: 1,
    OpKind.RZ: 1,
    OpKind.RZZ: 2,
    OpKind.TICK: 0,
}


@dataclass(frozen=True)
class CliffordOp:
    """One circuit instruction.

    ``PAULI`` ops carry a :class:`PauliString` in ``pauli`` and have no targets.
    Rotation markers carry their angle but act as identities in every Clifford
    simulator; the branch sampler accounts for the rotation separately.
    """

    kind: OpKind
    targets: tuple[int, ...] = ()
    angle: float | None = None
    pauli: PauliString | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        kind = OpKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if kind is OpKind.PAULI:
            if self.pauli is None:
                raise ValueError("PAULI op needs a PauliString")
            return
        if len(self.targets) != _ARITY[kind]:
            raise ValueError(f"{kind.value} expects {_ARITY[kind]} targets, got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{kind.value} targets must be distinct")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.kind is OpKind.PAULI:
            return tuple(self.pauli.support)
        return self.targets


def H(q: int) -> CliffordOp:
    return CliffordOp(OpKind.H, (q,))


def CNOT(c: int, t: int) -> CliffordOp:
    return CliffordOp(OpKind.CNOT, (c, t))


def SWAP(a: int, b: int) -> CliffordOp:
    return CliffordOp(OpKind.SWAP, (a, b))


def INIT_Z(q: int) -> CliffordOp:
    return CliffordOp(OpKind.INIT_Z, (q,))


def INIT_X(q: int) -> CliffordOp:
    return CliffordOp(OpKind.INIT_X, (q,))


def MEASURE_Z(q: int) -> CliffordOp:
    return CliffordOp(OpKind.MEASURE_Z, (q,))


def PAULI(p: PauliString) -> CliffordOp:
    return CliffordOp(OpKind.PAULI, pauli=p)


def RZ(q: int, angle: float) -> CliffordOp:
    return CliffordOp(OpKind.RZ, (q,), angle=angle)


def RZZ(a: int, b: int, angle: float) -> CliffordOp:
    return CliffordOp(OpKind.RZZ, (a, b), angle=angle)


TICK = CliffordOp(OpKind.TICK)


def strip_markers(circuit) -> list[CliffordOp]:
    """Drop rotation markers, leaving the Clifford skeleton."""
    return [op for op in circuit if op.kind not in MARKER_KINDS]


def inverse(circuit) -> list[CliffordOp]:
    """Inverse of a unitary Clifford circuit (H, CNOT, SWAP, PAULI and TICK only)."""
    out = []
    for op in reversed(list(circuit)):
        if op.kind in (OpKind.INIT_Z, OpKind.INIT_X, OpKind.MEASURE_Z) or op.kind in MARKER_KINDS:
            raise ValueError(f"{op.kind.value} has no unitary inverse")
        out.append(op)
    return out


def count_measurements(circuit) -> int:
    return sum(op.kind is OpKind.MEASURE_Z for op in circuit)
