"""Circuit-level stochastic Pauli noise.

Placement convention: depolarizing noise right after each gate, a bit flip right
before each Z measurement, and a flip right after each initialization.  The
flip after ``INIT_X`` is a Z flip, which is the bit flip of the prepared basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import OpKind
from .pauli import PauliString

# single-qubit Pauli codes used throughout the samplers: 0=I, 1=X, 2=Y, 3=Z
CODE_X = np.array([0, 1, 1, 0], dtype=np.uint8)
CODE_Z = np.array([0, 0, 1, 1], dtype=np.uint8)
_CODE_CHAR = "IXYZ"

NOISE_CLASSES = ("init", "measure", "1q", "2q")


@dataclass(frozen=True)
class NoiseModel:
    """Parameters of the circuit-level noise model.

    :param p_ph: physical error rate shared by every enabled error class.
    :param native_2q_rotation: if true, rotation markers are noisy native gates;
        otherwise ``RZ`` markers are ideal virtual-Z rotations.
    :param idle: if true, qubits untouched between two ``TICK`` ops receive
        single-qubit depolarizing noise with rate ``p_idle`` (``p_ph`` when unset).
    """

    p_ph: float = 0.0
    init_flip: bool = True
    measure_flip: bool = True
    gate_1q: bool = True
    gate_2q: bool = True
    idle: bool = False
    p_idle: float | None = None
    native_2q_rotation: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_ph < 1.0:
            raise ValueError(f"p_ph must lie in [0, 1), got {self.p_ph}")
        if self.p_idle is not None and not 0.0 <= self.p_idle < 1.0:
            raise ValueError(f"p_idle must lie in [0, 1), got {self.p_idle}")

    @property
    def idle_rate(self) -> float:
        if not self.idle:
            return 0.0
        return self.p_ph if self.p_idle is None else self.p_idle

    def rate(self, noise_class: str) -> float:
        enabled = {
            "init": self.init_flip,
            "measure": self.measure_flip,
            "1q": self.gate_1q,
            "2q": self.gate_2q,
        }[noise_class]
        return self.p_ph if enabled else 0.0

    def noise_class(self, kind: OpKind) -> str | None:
        """Error class attached to an op kind, or ``None`` for noiseless ops."""
        kind = OpKind(kind)
        if kind in (OpKind.INIT_Z, OpKind.INIT_X):
            return "init"
        if kind is OpKind.MEASURE_Z:
            return "measure"
        if kind is OpKind.H:
            return "1q"
        if kind in (OpKind.CNOT, OpKind.SWAP, OpKind.RZZ):
            return "2q"
        if kind is OpKind.RZ:
            return "1q" if self.native_2q_rotation else None
        return None


def pauli_codes_2q(index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a two-qubit Pauli index in 1..15 into single-qubit codes (first, second)."""
    index = np.asarray(index)
    return index >> 2, index & 3


def sample_noise(model: NoiseModel, op_kind: str, qubits, rng: np.random.Generator, n_qubits: int | None = None):
    """Draw the error attached to one noisy location.

    :param op_kind: one of ``"init"``, ``"measure"``, ``"1q"``, ``"2q"``.
    :param qubits: the qubits the location acts on.
    :returns: a :class:`PauliString` over ``n_qubits`` qubits, or ``None`` if no error occurred.
    """
    if op_kind not in NOISE_CLASSES:
        raise ValueError(f"unknown noise class {op_kind!r}")
    qubits = tuple(qubits)
    n = n_qubits if n_qubits is not None else max(qubits) + 1
    p = model.rate(op_kind)
    if p == 0.0 or rng.random() >= p:
        return None
    if op_kind in ("init", "measure"):
        return PauliString.single(n, qubits[0], "X")
    if op_kind == "1q":
        return PauliString.single(n, qubits[0], _CODE_CHAR[int(rng.integers(1, 4))])
    a, b = pauli_codes_2q(int(rng.integers(1, 16)))
    factors = {}
    if a:
        factors[qubits[0]] = _CODE_CHAR[a]
    if b:
        factors[qubits[1]] = _CODE_CHAR[b]
    return PauliString.from_sparse(n, factors)
