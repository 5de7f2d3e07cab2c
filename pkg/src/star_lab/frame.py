"""Batched Pauli-frame sampling over bit-packed shots.

Every shot carries a Pauli frame (the difference between the noisy run and a
noiseless reference run).  Frames for many shots are packed 64 per ``uint64``
word, so each gate costs a few vectorised XORs over all shots.  Measurement
records hold the *flip* of each outcome relative to the reference, which is all
that is needed for detectors whose noiseless value is fixed.

Noise is sampled sparsely: for a layer with ``k`` noisy locations and ``N``
shots, fault positions among the ``k*N`` Bernoulli trials are drawn with
geometric gaps, so the cost is proportional to the number of faults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import CliffordOp, OpKind
from .noise import CODE_X, CODE_Z, NoiseModel, pauli_codes_2q

_ONE = np.uint64(1)
_SIX = np.uint64(6)
_MASK63 = np.uint64(63)


@dataclass
class Layer:
    """Same-kind ops on pairwise disjoint qubits, executed in one vectorised step."""

    kind: OpKind
    targets: np.ndarray  # shape (k,) or (k, 2)
    noise_class: str | None = None
    rate: float = 0.0
    flip_code: int = 1  # single-qubit code of the init/measure flip (1=X, 3=Z)
    meas_index: np.ndarray | None = None  # record slots for MEASURE_Z layers
    pauli_x: np.ndarray | None = None  # qubit indices for PAULI layers
    pauli_z: np.ndarray | None = None
    idle_qubits: np.ndarray | None = None  # TICK layers only
    first_location: int = 0  # id of the first noisy location in this layer

    @property
    def n_locations(self) -> int:
        if self.kind is OpKind.TICK:
            return 0 if self.idle_qubits is None else len(self.idle_qubits)
        if self.noise_class is None:
            return 0
        return len(self.targets)


@dataclass
class Fault:
    """A single noise event: ``codes`` are single-qubit Pauli codes on ``qubits``."""

    location: int
    layer: int
    kind: OpKind
    qubits: tuple[int, ...]
    codes: tuple[int, ...]
    probability: float


@dataclass
class CompiledCircuit:
    n_qubits: int
    layers: list[Layer] = field(default_factory=list)
    n_measurements: int = 0
    n_locations: int = 0


def compile_circuit(circuit, n_qubits: int, model: NoiseModel) -> CompiledCircuit:
    """Group a flat op list into vectorisable layers and attach noise classes."""
    out = CompiledCircuit(n_qubits)
    pending: list[CliffordOp] = []
    busy: set[int] = set()
    touched_since_tick: set[int] = set()
    meas = 0

    def flush():
        nonlocal meas, pending, busy
        if not pending:
            return
        kind = pending[0].kind
        if kind is OpKind.PAULI:
            x_q: list[int] = []
            z_q: list[int] = []
            for op in pending:
                p = op.pauli
                x_q += [q for q in range(p.n_qubits) if p.x_mask >> q & 1]
                z_q += [q for q in range(p.n_qubits) if p.z_mask >> q & 1]
            out.layers.append(
                Layer(kind, np.zeros(0, dtype=np.int64), pauli_x=np.array(x_q, dtype=np.int64), pauli_z=np.array(z_q, dtype=np.int64))
            )
        else:
            targets = np.array([op.targets for op in pending], dtype=np.int64)
            if targets.shape[1] == 1:
                targets = targets[:, 0]
            nc = model.noise_class(kind)
            rate = model.rate(nc) if nc is not None else 0.0
            layer = Layer(kind, targets, noise_class=nc if rate > 0 else None, rate=rate)
            if kind is OpKind.INIT_X:
                layer.flip_code = 3
            if kind is OpKind.MEASURE_Z:
                layer.meas_index = np.arange(meas, meas + len(pending), dtype=np.int64)
                meas += len(pending)
            out.layers.append(layer)
        pending = []
        busy = set()

    for op in circuit:
        if op.kind is OpKind.TICK:
            flush()
            idle_rate = model.idle_rate
            if idle_rate > 0:
                idle = np.array(sorted(set(range(n_qubits)) - touched_since_tick), dtype=np.int64)
                out.layers.append(Layer(OpKind.TICK, np.zeros(0, dtype=np.int64), "1q", idle_rate, idle_qubits=idle))
            touched_since_tick = set()
            continue
        qs = set(op.qubits)
        for q in qs:
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")
        if pending and (op.kind is not pending[0].kind or qs & busy):
            flush()
        pending.append(op)
        busy |= qs
        touched_since_tick |= qs
    flush()
    out.n_measurements = meas
    loc = 0
    for layer in out.layers:
        layer.first_location = loc
        loc += layer.n_locations
    out.n_locations = loc
    return out


def enumerate_faults(compiled: CompiledCircuit) -> list[Fault]:
    """Every single-location fault of the compiled circuit, one entry per nontrivial Pauli."""
    faults: list[Fault] = []
    for li, layer in enumerate(compiled.layers):
        if layer.n_locations == 0:
            continue
        if layer.kind is OpKind.TICK:
            sites = [(int(q),) for q in layer.idle_qubits]
        elif layer.targets.ndim == 1:
            sites = [(int(q),) for q in layer.targets]
        else:
            sites = [tuple(int(v) for v in row) for row in layer.targets]
        for j, qubits in enumerate(sites):
            loc = layer.first_location + j
            if layer.noise_class in ("init", "measure"):
                faults.append(Fault(loc, li, layer.kind, qubits[:1], (layer.flip_code,), layer.rate))
            elif layer.noise_class == "1q":
                for c in (1, 2, 3):
                    faults.append(Fault(loc, li, layer.kind, qubits[:1], (c,), layer.rate / 3))
            else:
                for idx in range(1, 16):
                    a, b = pauli_codes_2q(idx)
                    faults.append(Fault(loc, li, layer.kind, qubits, (int(a), int(b)), layer.rate / 15))
    return faults


class FrameBatch:
    """Pauli frames and measurement flips for ``shots`` packed shots."""

    def __init__(self, n_qubits: int, shots: int, n_measurements: int = 0):
        self.n_qubits = n_qubits
        self.shots = shots
        self.n_words = max(1, (shots + 63) // 64)
        self.x = np.zeros((n_qubits, self.n_words), dtype=np.uint64)
        self.z = np.zeros((n_qubits, self.n_words), dtype=np.uint64)
        self.records = np.zeros((n_measurements, self.n_words), dtype=np.uint64)

    # ----------------------------------------------------------- injections
    def xor_bits(self, qubits: np.ndarray, shots: np.ndarray, codes: np.ndarray) -> None:
        """Multiply single-qubit Paulis (codes 1..3) into the frames of the given shots."""
        if len(shots) == 0:
            return
        shots = np.asarray(shots, dtype=np.int64)
        words = shots >> 6
        vals = _ONE << (shots & 63).astype(np.uint64)
        flat = np.asarray(qubits, dtype=np.int64) * self.n_words + words
        codes = np.asarray(codes)
        mx = CODE_X[codes].astype(bool)
        mz = CODE_Z[codes].astype(bool)
        np.bitwise_xor.at(self.x.reshape(-1), flat[mx], vals[mx])
        np.bitwise_xor.at(self.z.reshape(-1), flat[mz], vals[mz])

    def xor_mask(self, qubits, mask: np.ndarray, kind: str) -> None:
        """XOR a packed shot mask into the X or Z frame of several qubits."""
        arr = self.x if kind == "X" else self.z
        for q in qubits:
            arr[q] ^= mask

    def shot_mask(self, shots: np.ndarray) -> np.ndarray:
        mask = np.zeros(self.n_words, dtype=np.uint64)
        shots = np.asarray(shots, dtype=np.int64)
        np.bitwise_or.at(mask, shots >> 6, _ONE << (shots & 63).astype(np.uint64))
        return mask

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        """Unpack ``(..., n_words)`` words into booleans ``(..., shots)``."""
        as_bytes = packed.astype("<u8").view(np.uint8)
        bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
        return bits[..., : self.shots].astype(bool)


def _sample_positions(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Indices of successes among ``total`` independent Bernoulli(p) trials."""
    if p <= 0.0 or total == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 0.05:
        return np.flatnonzero(rng.random(total) < p)
    chunks = []
    pos = -1
    while True:
        expect = (total - pos) * p
        m = int(expect + 6.0 * np.sqrt(expect) + 16)
        gaps = rng.geometric(p, size=m)
        cand = pos + np.cumsum(gaps)
        keep = cand[cand < total]
        chunks.append(keep)
        if len(keep) < m:
            break
        pos = int(cand[-1])
    return np.concatenate(chunks).astype(np.int64)


def run_layers(
    compiled: CompiledCircuit,
    batch: FrameBatch,
    rng: np.random.Generator | None,
    layers: range | None = None,
    forced: dict[int, list[tuple[int, Fault]]] | None = None,
) -> None:
    """Propagate the frames of ``batch`` through ``compiled`` layers.

    :param rng: source of random noise; ``None`` disables random noise.
    :param layers: subset of layer indices to execute (default: all, in order).
    :param forced: per-layer list of ``(shot, fault)`` injections used for fault enumeration.
    """
    x, z = batch.x, batch.z
    n_shots = batch.shots
    idx = range(len(compiled.layers)) if layers is None else layers
    for li in idx:
        layer = compiled.layers[li]
        kind = layer.kind
        t = layer.targets
        if kind is OpKind.MEASURE_Z:
            _inject(layer, batch, rng, n_shots, forced.get(li) if forced else None)
            batch.records[layer.meas_index] = x[t]
            continue
        if kind is OpKind.H:
            x[t], z[t] = z[t], x[t].copy()
        elif kind is OpKind.CNOT:
            c, g = t[:, 0], t[:, 1]
            x[g] ^= x[c]
            z[c] ^= z[g]
        elif kind is OpKind.SWAP:
            a, b = t[:, 0], t[:, 1]
            xa, za = x[a].copy(), z[a].copy()
            x[a], z[a] = x[b], z[b]
            x[b], z[b] = xa, za
        elif kind in (OpKind.INIT_Z, OpKind.INIT_X):
            x[t] = 0
            z[t] = 0
        elif kind is OpKind.PAULI:
            x[layer.pauli_x] ^= np.uint64(0xFFFFFFFFFFFFFFFF)
            z[layer.pauli_z] ^= np.uint64(0xFFFFFFFFFFFFFFFF)
        # RZ/RZZ markers and TICK are identities on the frame
        _inject(layer, batch, rng, n_shots, forced.get(li) if forced else None)


def _inject(layer: Layer, batch: FrameBatch, rng, n_shots: int, forced) -> None:
    if forced:
        shots = np.array([s for s, _ in forced], dtype=np.int64)
        for arity in (1, 2):
            sel = [i for i, (_, f) in enumerate(forced) if len(f.qubits) == arity]
            if not sel:
                continue
            for slot in range(arity):
                qs = np.array([forced[i][1].qubits[slot] for i in sel], dtype=np.int64)
                cs = np.array([forced[i][1].codes[slot] for i in sel], dtype=np.int64)
                nz = cs != 0
                batch.xor_bits(qs[nz], shots[sel][nz], cs[nz])
    if rng is None or layer.n_locations == 0 or layer.rate <= 0.0:
        return
    k = layer.n_locations
    flat = _sample_positions(rng, k * n_shots, layer.rate)
    if flat.size == 0:
        return
    loc = flat // n_shots
    shot = flat % n_shots
    if layer.kind is OpKind.TICK:
        sites = layer.idle_qubits
    else:
        sites = layer.targets
    cls = layer.noise_class
    if cls in ("init", "measure"):
        q = sites[loc] if sites.ndim == 1 else sites[loc, 0]
        batch.xor_bits(q, shot, np.full(len(shot), layer.flip_code))
    elif cls == "1q":
        q = sites[loc] if sites.ndim == 1 else sites[loc, 0]
        batch.xor_bits(q, shot, rng.integers(1, 4, size=len(shot)))
    else:
        a, b = pauli_codes_2q(rng.integers(1, 16, size=len(shot)))
        qa, qb = sites[loc, 0], sites[loc, 1]
        na, nb = a != 0, b != 0
        batch.xor_bits(qa[na], shot[na], a[na])
        batch.xor_bits(qb[nb], shot[nb], b[nb])


def fault_signatures(compiled: CompiledCircuit, faults: list[Fault]) -> FrameBatch:
    """Propagate each fault in its own shot column with all random noise off.

    The returned batch has one shot per fault; its ``records`` hold measurement
    flips and ``x``/``z`` the final frames.
    """
    batch = FrameBatch(compiled.n_qubits, max(1, len(faults)), compiled.n_measurements)
    forced: dict[int, list[tuple[int, Fault]]] = {}
    for s, f in enumerate(faults):
        forced.setdefault(f.layer, []).append((s, f))
    run_layers(compiled, batch, None, forced=forced)
    return batch
