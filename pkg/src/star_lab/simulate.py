"""Shot-by-shot noisy execution on the full tableau.

This path is slow but exact, and it serves as the reference the batched frame
sampler is checked against.
"""

from __future__ import annotations

import numpy as np

from .circuit import MARKER_KINDS, OpKind
from .noise import NoiseModel, sample_noise
from .pauli import PauliString
from .tableau import StabilizerTableau, apply_clifford


def run_noisy_circuit(circuit, model: NoiseModel, rng: np.random.Generator, n_qubits: int | None = None):
    """Execute ``circuit`` once with stochastic noise.

    :returns: ``(record, tableau)`` where ``record`` is an array of outcome bits
        (0 for ``+1``) in measurement order.
    """
    circuit = list(circuit)
    for op in circuit:
        if op.kind in MARKER_KINDS:
            raise ValueError("rotation markers must be handled by the branch sampler, not the tableau")
    if n_qubits is None:
        n_qubits = 1 + max((q for op in circuit for q in op.qubits), default=0)
    tab = StabilizerTableau(n_qubits)
    record: list[int] = []
    touched: set[int] = set()
    idle_rate = model.idle_rate

    def inject(err: PauliString | None) -> None:
        if err is not None:
            tab.apply_pauli(err)

    for op in circuit:
        kind = op.kind
        if kind is OpKind.TICK:
            if idle_rate > 0:
                for q in range(n_qubits):
                    if q not in touched and rng.random() < idle_rate:
                        inject(PauliString.single(n_qubits, q, "XYZ"[int(rng.integers(3))]))
            touched = set()
            continue
        touched |= set(op.qubits)
        cls = model.noise_class(kind)
        if kind is OpKind.MEASURE_Z:
            inject(sample_noise(model, "measure", op.targets, rng, n_qubits))
            record.append(apply_clifford(tab, op, rng))
            continue
        apply_clifford(tab, op, rng)
        if cls is None:
            continue
        err = sample_noise(model, cls, op.targets, rng, n_qubits)
        if err is not None and kind is OpKind.INIT_X:
            err = PauliString.single(n_qubits, op.targets[0], "Z")
        inject(err)
    return np.array(record, dtype=np.uint8), tab
