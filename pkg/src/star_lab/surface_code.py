"""Planar surface-code layouts, syndrome extraction and the transversal rotation schedule.

Coordinates are ``(row, col)`` on a square grid.  In the unrotated layout, data
qubits sit where ``row + col`` is even, X-type ancillas at (odd row, even col)
and Z-type ancillas at (even row, odd col).  The logical-Z support ``Q_z`` is the
straight chain of data qubits in column 0, so consecutive members are separated
by a single X-type ancilla, which the rotation schedule borrows for routing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .circuit import CNOT, H, INIT_Z, MEASURE_Z, RZ, RZZ, SWAP, TICK, CliffordOp, OpKind
from .frame import CompiledCircuit, FrameBatch, compile_circuit, enumerate_faults, fault_signatures, run_layers
from .noise import NoiseModel
from .pauli import PauliString

NORTH, SOUTH, WEST, EAST = (-1, 0), (1, 0), (0, -1), (0, 1)

# Step order of the four CNOT layers.  Every ancilla follows the same order so
# each layer touches every data qubit at most once; the order also interleaves
# the X and Z checks that share two data qubits consistently (checked in tests).
UNROTATED_ORDER = {"X": (NORTH, WEST, EAST, SOUTH), "Z": (NORTH, WEST, EAST, SOUTH)}
ROTATED_ORDER = {
    "X": ((-1, -1), (-1, 1), (1, -1), (1, 1)),
    "Z": ((-1, -1), (1, -1), (-1, 1), (1, 1)),
}

IMPLEMENTATIONS = ("virtual-Z", "native-2q")


@dataclass(frozen=True)
class Stabilizer:
    kind: str  # "X" or "Z"
    ancilla: int
    coord: tuple[int, int]
    support: tuple[int, ...]  # data qubits in CNOT order
    pauli: PauliString  # over the data register


@dataclass(frozen=True)
class LogicalOperatorSpec:
    q_z: tuple[int, ...]
    z_l: PauliString
    x_l: PauliString


@dataclass
class CodeLayout:
    distance: int
    style: str
    coords: list[tuple[int, int]]
    n_data: int
    stabilizers: list[Stabilizer]
    cnot_order: dict[str, tuple[tuple[int, int], ...]]
    logical: LogicalOperatorSpec

    @property
    def n_qubits(self) -> int:
        return len(self.coords)

    @property
    def data_qubits(self) -> range:
        return range(self.n_data)

    @property
    def ancillas(self) -> list[int]:
        return [s.ancilla for s in self.stabilizers]

    def index_of(self, coord: tuple[int, int]) -> int:
        return self.coords.index(tuple(coord))

    def stabilizer_indices(self, kind: str) -> list[int]:
        return [i for i, s in enumerate(self.stabilizers) if s.kind == kind]

    def syndrome_of(self, error: PauliString) -> np.ndarray:
        """Syndrome bits (one per stabilizer) of a data-register Pauli."""
        return np.array([not s.pauli.commutes(error) for s in self.stabilizers], dtype=bool)

    def to_json(self) -> str:
        return json.dumps(
            {
                "distance": self.distance,
                "style": self.style,
                "coords": self.coords,
                "n_data": self.n_data,
                "stabilizers": [
                    {"kind": s.kind, "ancilla": s.ancilla, "coord": s.coord, "support": s.support}
                    for s in self.stabilizers
                ],
                "q_z": self.logical.q_z,
                "cnot_order": self.cnot_order,
            }
        )


def build_layout(d: int, style: str = "unrotated") -> CodeLayout:
    """Planar surface code of distance ``d`` with ``Q_z`` a straight chain of ``d`` data qubits."""
    if d < 2:
        raise ValueError(f"distance must be at least 2, got {d}")
    if style == "unrotated":
        return _unrotated(d)
    if style == "rotated":
        return _rotated(d)
    raise ValueError(f"unknown layout style {style!r}")


def _finish(d, style, data, ancillas, order, q_z_coords, x_l_coords) -> CodeLayout:
    coords = list(data) + [a for a, _ in ancillas]
    index = {c: i for i, c in enumerate(coords)}
    n_data = len(data)
    stabs = []
    for coord, kind in ancillas:
        support = []
        for dr, dc in order[kind]:
            nb = (coord[0] + dr, coord[1] + dc)
            if nb in index and index[nb] < n_data:
                support.append(index[nb])
        if kind == "X":
            pauli = PauliString.x_string(n_data, support)
        else:
            pauli = PauliString.z_string(n_data, support)
        stabs.append(Stabilizer(kind, index[coord], coord, tuple(support), pauli))
    q_z = tuple(index[c] for c in q_z_coords)
    logical = LogicalOperatorSpec(
        q_z,
        PauliString.z_string(n_data, q_z),
        PauliString.x_string(n_data, [index[c] for c in x_l_coords]),
    )
    return CodeLayout(d, style, coords, n_data, stabs, order, logical)


def _unrotated(d: int) -> CodeLayout:
    size = 2 * d - 1
    data = [(r, c) for r in range(size) for c in range(size) if (r + c) % 2 == 0]
    ancillas = []
    for r in range(size):
        for c in range(size):
            if r % 2 == 1 and c % 2 == 0:
                ancillas.append(((r, c), "X"))
            elif r % 2 == 0 and c % 2 == 1:
                ancillas.append(((r, c), "Z"))
    q_z = [(2 * i, 0) for i in range(d)]
    x_l = [(0, 2 * j) for j in range(d)]
    return _finish(d, "unrotated", data, ancillas, UNROTATED_ORDER, q_z, x_l)


def _rotated(d: int) -> CodeLayout:
    data = [(2 * i + 1, 2 * j + 1) for i in range(d) for j in range(d)]
    data_set = set(data)
    ancillas = []
    for r in range(0, 2 * d + 1, 2):
        for c in range(0, 2 * d + 1, 2):
            nbrs = [(r + dr, c + dc) for dr in (-1, 1) for dc in (-1, 1) if (r + dr, c + dc) in data_set]
            kind = "X" if ((r + c) // 2) % 2 == 0 else "Z"
            if len(nbrs) == 4:
                ancillas.append(((r, c), kind))
            elif len(nbrs) == 2:
                if r in (0, 2 * d) and kind == "X":
                    ancillas.append(((r, c), kind))
                elif c in (0, 2 * d) and kind == "Z":
                    ancillas.append(((r, c), kind))
    q_z = [(1, 2 * j + 1) for j in range(d)]
    x_l = [(2 * i + 1, 1) for i in range(d)]
    return _finish(d, "rotated", data, ancillas, ROTATED_ORDER, q_z, x_l)


# --------------------------------------------------------------------------- circuits
def syndrome_circuit(layout: CodeLayout) -> list[CliffordOp]:
    """One round measuring every stabilizer; measurement ``i`` belongs to stabilizer ``i``."""
    ops: list[CliffordOp] = []
    x_anc = [s.ancilla for s in layout.stabilizers if s.kind == "X"]
    ops += [INIT_Z(s.ancilla) for s in layout.stabilizers] + [TICK]
    ops += [H(a) for a in x_anc] + [TICK]
    index = {c: i for i, c in enumerate(layout.coords)}
    for step in range(4):
        for s in layout.stabilizers:
            dr, dc = layout.cnot_order[s.kind][step]
            nb = index.get((s.coord[0] + dr, s.coord[1] + dc))
            if nb is None or nb >= layout.n_data:
                continue
            ops.append(CNOT(s.ancilla, nb) if s.kind == "X" else CNOT(nb, s.ancilla))
        ops.append(TICK)
    ops += [H(a) for a in x_anc] + [TICK]
    ops += [MEASURE_Z(s.ancilla) for s in layout.stabilizers] + [TICK]
    return ops


def data_plus_init(layout: CodeLayout) -> list[CliffordOp]:
    """Prepare every data qubit in ``|+>`` with native Z-basis reset and H."""
    return [INIT_Z(q) for q in layout.data_qubits] + [TICK] + [H(q) for q in layout.data_qubits] + [TICK]


@dataclass
class RotationSchedule:
    """Primitive ops for the product of ``k`` weight-``m`` Z rotations over ``Q_z``."""

    m: int
    k: int
    theta: float
    implementation: str
    blocks: list[tuple[int, ...]]
    ops: list[CliffordOp] = field(default_factory=list)

    def markers(self) -> list[CliffordOp]:
        return [op for op in self.ops if op.kind in (OpKind.RZ, OpKind.RZZ)]


def _router(layout: CodeLayout, a: int, b: int) -> int:
    """Ancilla adjacent to both data qubits ``a`` and ``b``."""
    for s in layout.stabilizers:
        if a in s.support and b in s.support:
            ra, ca = layout.coords[a]
            rb, cb = layout.coords[b]
            mid = ((ra + rb) / 2, (ca + cb) / 2)
            if layout.style == "rotated" or s.coord == mid:
                return s.ancilla
    raise ValueError(f"no routing ancilla between data qubits {a} and {b}")


def rotation_schedule(layout: CodeLayout, m: int, k: int, theta: float, implementation: str = "virtual-Z") -> RotationSchedule:
    """Schedule for ``prod_i exp(i theta Z...Z)`` on ``k`` consecutive weight-``m`` blocks of ``Q_z``."""
    if m not in (1, 2, 3):
        raise ValueError(f"unsupported rotation weight m={m}")
    if m * k != layout.distance:
        raise ValueError(f"m*k must equal d: {m}*{k} != {layout.distance}")
    if implementation not in IMPLEMENTATIONS:
        raise ValueError(f"unknown implementation {implementation!r}")
    qz = layout.logical.q_z
    blocks = [tuple(qz[i * m : (i + 1) * m]) for i in range(k)]
    sched = RotationSchedule(m, k, theta, implementation, blocks)
    layers: list[list[CliffordOp]] = []

    def put(step: int, op: CliffordOp) -> None:
        while len(layers) <= step:
            layers.append([])
        layers[step].append(op)

    for blk in blocks:
        if m == 1:
            put(0, RZ(blk[0], theta))
        elif m == 2:
            q0, q1 = blk
            a = _router(layout, q0, q1)
            put(0, SWAP(q0, a))
            if implementation == "native-2q":
                put(1, RZZ(a, q1, theta))
                put(2, SWAP(q0, a))
            else:
                put(1, CNOT(a, q1))
                put(2, RZ(q1, theta))
                put(3, CNOT(a, q1))
                put(4, SWAP(q0, a))
        else:
            q0, q1, q2 = blk
            a0 = _router(layout, q0, q1)
            a2 = _router(layout, q1, q2)
            put(0, SWAP(q0, a0))
            put(0, SWAP(q2, a2))
            if implementation == "native-2q":
                put(1, CNOT(a2, q1))
                put(2, RZZ(a0, q1, theta))
                put(3, CNOT(a2, q1))
                put(4, SWAP(q0, a0))
                put(4, SWAP(q2, a2))
            else:
                put(1, CNOT(a0, q1))
                put(2, CNOT(a2, q1))
                put(3, RZ(q1, theta))
                put(4, CNOT(a2, q1))
                put(5, CNOT(a0, q1))
                put(6, SWAP(q0, a0))
                put(6, SWAP(q2, a2))
    for layer in layers:
        sched.ops += layer + [TICK]
    return sched


# ------------------------------------------------------------------ protocol circuit
@dataclass(frozen=True)
class Detector:
    stabilizer: int
    round: int
    measurements: tuple[int, ...]


@dataclass
class ProtocolCircuit:
    """The full preparation circuit: ``|+>`` init, one round, rotation, two rounds.

    ``prep_end`` is the op index where the branch Pauli ``Z^b`` is inserted.
    """

    layout: CodeLayout
    schedule: RotationSchedule
    ops: list[CliffordOp]
    prep_end: int
    detectors: list[Detector]
    n_rounds: int = 3

    def detector_matrix(self, records: np.ndarray) -> np.ndarray:
        """Detector values from measurement flips of shape ``(n_meas, ...)``."""
        out = np.zeros((len(self.detectors),) + records.shape[1:], dtype=records.dtype)
        for i, det in enumerate(self.detectors):
            for mi in det.measurements:
                out[i] ^= records[mi]
        return out


def protocol_circuit(layout: CodeLayout, m: int, k: int, theta: float = 0.0, implementation: str = "virtual-Z", rounds_after: int = 2) -> ProtocolCircuit:
    sched = rotation_schedule(layout, m, k, theta, implementation)
    rnd = syndrome_circuit(layout)
    ops = data_plus_init(layout) + list(rnd)
    prep_end = len(ops)
    ops += sched.ops
    for _ in range(rounds_after):
        ops += rnd
    n_s = len(layout.stabilizers)
    detectors = []
    for s, st in enumerate(layout.stabilizers):
        if st.kind == "X":
            detectors.append(Detector(s, 0, (s,)))
    for r in range(1, rounds_after + 1):
        for s in range(n_s):
            detectors.append(Detector(s, r, ((r - 1) * n_s + s, r * n_s + s)))
    return ProtocolCircuit(layout, sched, ops, prep_end, detectors, rounds_after + 1)


# ------------------------------------------------------------------ post-selection
@dataclass(frozen=True)
class PostSelectionRegime:
    """Stabilizers whose unexpected syndromes reject the state, in every protocol round."""

    stabilizers: frozenset[int]
    core: frozenset[int]
    rounds: tuple[int, ...] = (0, 1, 2)

    def __len__(self) -> int:
        return len(self.stabilizers)

    def detector_mask(self, circuit: ProtocolCircuit) -> np.ndarray:
        return np.array(
            [det.stabilizer in self.stabilizers and det.round in self.rounds for det in circuit.detectors], dtype=bool
        )


def branch_signatures(circuit: ProtocolCircuit, compiled: CompiledCircuit) -> np.ndarray:
    """Detector patterns of each single-block branch ``Z_block`` (one row per block)."""
    k = len(circuit.schedule.blocks)
    batch = FrameBatch(compiled.n_qubits, k, compiled.n_measurements)
    split = _split_layer(compiled, circuit)
    run_layers(compiled, batch, None, layers=range(0, split))
    for j, blk in enumerate(circuit.schedule.blocks):
        batch.xor_mask(blk, batch.shot_mask(np.array([j])), "Z")
    run_layers(compiled, batch, None, layers=range(split, len(compiled.layers)))
    return circuit.detector_matrix(batch.unpack(batch.records)).T


def _split_layer(compiled: CompiledCircuit, circuit: ProtocolCircuit) -> int:
    """Index of the first compiled layer belonging to the rotation schedule."""
    n_prep_meas = sum(op.kind is OpKind.MEASURE_Z for op in circuit.ops[: circuit.prep_end])
    for li, layer in enumerate(compiled.layers):
        if layer.kind is OpKind.MEASURE_Z and layer.meas_index[-1] == n_prep_meas - 1:
            return li + 1
    raise RuntimeError("could not locate the end of the preparation round")


def fault_table(circuit: ProtocolCircuit, model: NoiseModel):
    """Single-fault detector signatures and final frames for the protocol circuit."""
    compiled = compile_circuit(circuit.ops, circuit.layout.n_qubits, model)
    faults = enumerate_faults(compiled)
    batch = fault_signatures(compiled, faults)
    dets = circuit.detector_matrix(batch.unpack(batch.records)).T
    return compiled, faults, dets, batch


def post_selection_regime(layout: CodeLayout, m: int, implementation: str = "virtual-Z") -> PostSelectionRegime:
    """Derive the rejection regime from single-fault enumeration.

    The core holds every stabilizer flipped by a single-block branch ``Z_block``.
    The regime adds every stabilizer that some single circuit fault flips together
    with a core stabilizer, so a fault can only hide a branch if its whole
    signature coincides with the branch signature.
    """
    k = layout.distance // m
    circ = protocol_circuit(layout, m, k, 0.0, implementation)
    model = NoiseModel(p_ph=1e-3, native_2q_rotation=implementation == "native-2q")
    compiled, _, dets, _ = fault_table(circ, model)
    det_stab = np.array([det.stabilizer for det in circ.detectors])
    branch = branch_signatures(circ, compiled)
    core = set(det_stab[branch.any(axis=0)].tolist())
    core_det = np.isin(det_stab, list(core))
    touching = dets[:, core_det].any(axis=1)
    regime = set(core)
    if touching.any():
        regime |= set(det_stab[dets[touching].any(axis=0)].tolist())
    return PostSelectionRegime(frozenset(regime), frozenset(core))
