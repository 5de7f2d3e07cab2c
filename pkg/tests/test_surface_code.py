import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from star_lab.circuit import PAULI, OpKind, strip_markers
from star_lab.frame import FrameBatch, compile_circuit, enumerate_faults, fault_signatures, run_layers
from star_lab.noise import NoiseModel
from star_lab.pauli import PauliString
from star_lab.simulate import run_noisy_circuit
from star_lab.surface_code import (
    branch_signatures,
    build_layout,
    data_plus_init,
    fault_table,
    post_selection_regime,
    protocol_circuit,
    rotation_schedule,
    syndrome_circuit,
)


@pytest.mark.parametrize("style", ["unrotated", "rotated"])
@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_layout_stabilizers_and_logicals(style, d):
    lay = build_layout(d, style)
    n_data = d * d + (d - 1) ** 2 if style == "unrotated" else d * d
    assert lay.n_data == n_data
    stabs = [s.pauli for s in lay.stabilizers]
    assert len(stabs) == n_data - 1
    for a, b in itertools.combinations(stabs, 2):
        assert a.commutes(b)
    zl, xl = lay.logical.z_l, lay.logical.x_l
    assert not zl.commutes(xl)
    assert all(zl.commutes(s) and xl.commutes(s) for s in stabs)
    assert len(lay.logical.q_z) == d and zl.weight == d


def test_small_unrotated_counts():
    lay = build_layout(2)
    assert lay.n_data == 5 and len(lay.stabilizers) == 4
    assert build_layout(6).n_data == 61


def test_layout_rejects_bad_input():
    with pytest.raises(ValueError):
        build_layout(1)
    with pytest.raises(ValueError):
        build_layout(3, "hexagonal")


def _adjacent(lay, q, kind):
    """Stabilizers of ``kind`` whose ancilla sits next to data qubit ``q`` on the grid."""
    r, c = lay.coords[q]
    out = set()
    for i, s in enumerate(lay.stabilizers):
        dr, dc = abs(s.coord[0] - r), abs(s.coord[1] - c)
        near = dr + dc == 1 if lay.style == "unrotated" else dr == dc == 1
        if s.kind == kind and near:
            out.add(i)
    return out


def _run_rounds(lay, inject=None, rounds=2, seed=0):
    """Noiseless tableau run of ``|+>^n`` plus ``rounds`` syndrome rounds; ``inject`` goes before the last round."""
    rnd = syndrome_circuit(lay)
    ops = data_plus_init(lay) + list(rnd)
    for _ in range(rounds - 1):
        if inject is not None:
            ops.append(PAULI(inject))
        ops += rnd
    rec, _ = run_noisy_circuit(ops, NoiseModel(), np.random.default_rng(seed), lay.n_qubits)
    return rec.reshape(rounds, len(lay.stabilizers))


@pytest.mark.parametrize("style", ["unrotated", "rotated"])
def test_noiseless_rounds_repeat_and_x_checks_are_trivial(style):
    lay = build_layout(4, style)
    rec = _run_rounds(lay, rounds=3, seed=3)
    assert (rec[0] == rec[1]).all() and (rec[1] == rec[2]).all()
    x_idx = lay.stabilizer_indices("X")
    assert not rec[0, x_idx].any()


@pytest.mark.parametrize("style", ["unrotated", "rotated"])
@pytest.mark.parametrize("kind,check", [("Z", "X"), ("X", "Z")])
def test_single_data_error_fires_adjacent_checks(style, kind, check):
    lay = build_layout(4, style)
    n_full = lay.n_qubits
    for q in range(lay.n_data):
        err = PauliString.single(n_full, q, kind)
        rec = _run_rounds(lay, inject=err, seed=q)
        fired = set(np.flatnonzero(rec[0] ^ rec[1]).tolist())
        assert fired == _adjacent(lay, q, check)


def test_layout_syndrome_matches_adjacency():
    lay = build_layout(5)
    for q in range(lay.n_data):
        syn = lay.syndrome_of(PauliString.single(lay.n_data, q, "Z"))
        assert set(np.flatnonzero(syn).tolist()) == _adjacent(lay, q, "X")


# ---------------------------------------------------------------- rotation schedules
def test_weight_one_blocks_are_single_markers():
    lay = build_layout(6)
    sched = rotation_schedule(lay, 1, 6, 0.1)
    marks = sched.markers()
    assert len(marks) == 6 and all(op.kind is OpKind.RZ for op in marks)
    assert {op.targets[0] for op in marks} == set(lay.logical.q_z)


def test_weight_two_virtual_z_blocks():
    lay = build_layout(6)
    sched = rotation_schedule(lay, 2, 3, 0.1, "virtual-Z")
    kinds = [op.kind for op in sched.ops if op.kind is not OpKind.TICK]
    assert kinds.count(OpKind.RZ) == 3
    assert kinds.count(OpKind.CNOT) == 6
    assert kinds.count(OpKind.SWAP) == 6
    assert len(sched.blocks) == 3 and all(len(b) == 2 for b in sched.blocks)


def test_single_weight_two_block():
    lay = build_layout(2)
    sched = rotation_schedule(lay, 2, 1, 0.1, "native-2q")
    assert [op.kind for op in sched.markers()] == [OpKind.RZZ]


def test_schedule_rejects_mismatched_distance():
    with pytest.raises(ValueError):
        rotation_schedule(build_layout(6), 2, 2, 0.1)


@pytest.mark.parametrize("m,k", [(1, 4), (2, 2)])
@pytest.mark.parametrize("impl", ["virtual-Z", "native-2q"])
def test_schedule_implements_block_parity_rotation(m, k, impl):
    """Conjugating each marker's Z back through the schedule gives the block's Z string."""
    lay = build_layout(4, "rotated")
    sched = rotation_schedule(lay, m, k, 0.3, impl)
    n = lay.n_qubits
    ops = list(sched.ops)
    got = []
    for pos, op in enumerate(ops):
        if op.kind not in (OpKind.RZ, OpKind.RZZ):
            continue
        p = PauliString.z_string(n, op.targets)
        # walk the Clifford prefix backwards: P -> C^dag P C
        for prev in reversed(ops[:pos]):
            p = _conjugate(p, prev)
        got.append(frozenset(p.support))
        assert p.z_mask and not p.x_mask
    assert sorted(map(sorted, got)) == sorted(map(sorted, sched.blocks))


def _conjugate(p, op):
    if op.kind is OpKind.SWAP:
        a, b = op.targets
        f = {q: p[q] for q in p.support}
        fa, fb = f.pop(a, None), f.pop(b, None)
        if fa:
            f[b] = fa
        if fb:
            f[a] = fb
        return PauliString.from_sparse(p.n_qubits, f)
    if op.kind is OpKind.CNOT:
        c, t = op.targets
        x, z = p.x_mask, p.z_mask
        if x >> c & 1:
            x ^= 1 << t
        if z >> t & 1:
            z ^= 1 << c
        return PauliString(p.n_qubits, x, z)
    return p


# ---------------------------------------------------------------- frame sampler vs tableau
@st.composite
def injected_faults(draw):
    d = draw(st.sampled_from([2, 3]))
    style = draw(st.sampled_from(["unrotated", "rotated"]))
    lay = build_layout(d, style)
    circ = protocol_circuit(lay, 1, d, 0.0)
    ops = strip_markers(circ.ops)
    pos = draw(st.integers(0, len(ops)))
    qubits = draw(st.lists(st.integers(0, lay.n_qubits - 1), min_size=1, max_size=2, unique=True))
    kinds = draw(st.lists(st.sampled_from("XYZ"), min_size=len(qubits), max_size=len(qubits)))
    err = PauliString.from_sparse(lay.n_qubits, dict(zip(qubits, kinds)))
    return circ, ops, pos, err


@settings(max_examples=60, deadline=None)
@given(injected_faults())
def test_frame_detectors_match_tableau(case):
    circ, ops, pos, err = case
    n = circ.layout.n_qubits
    faulty = ops[:pos] + [PAULI(err)] + ops[pos:]
    rec_clean, _ = run_noisy_circuit(ops, NoiseModel(), np.random.default_rng(11), n)
    rec_bad, _ = run_noisy_circuit(faulty, NoiseModel(), np.random.default_rng(11), n)
    assert not circ.detector_matrix(rec_clean[:, None]).any()
    expected = circ.detector_matrix(rec_bad[:, None])[:, 0]

    compiled = compile_circuit(faulty, n, NoiseModel())
    batch = FrameBatch(n, 1, compiled.n_measurements)
    run_layers(compiled, batch, None)
    got = circ.detector_matrix(batch.unpack(batch.records))[:, 0]
    assert np.array_equal(got.astype(bool), expected.astype(bool))


def test_fault_enumeration_probabilities_sum_to_location_rates():
    lay = build_layout(3)
    circ = protocol_circuit(lay, 1, 3, 0.0)
    p = 1e-3
    compiled = compile_circuit(circ.ops, lay.n_qubits, NoiseModel(p_ph=p))
    faults = enumerate_faults(compiled)
    per_loc = {}
    for f in faults:
        per_loc[f.location] = per_loc.get(f.location, 0.0) + f.probability
    assert len(per_loc) == compiled.n_locations
    np.testing.assert_allclose(list(per_loc.values()), p, rtol=1e-12)


def test_fault_signatures_agree_with_single_shot_runs():
    lay = build_layout(3, "rotated")
    circ = protocol_circuit(lay, 1, 3, 0.0)
    compiled = compile_circuit(circ.ops, lay.n_qubits, NoiseModel(p_ph=1e-3))
    faults = enumerate_faults(compiled)
    batch = fault_signatures(compiled, faults)
    table = batch.unpack(batch.records)
    rng = np.random.default_rng(0)
    for i in rng.choice(len(faults), size=40, replace=False):
        one = fault_signatures(compiled, [faults[i]])
        assert np.array_equal(one.unpack(one.records)[:, 0], table[:, i])


def test_syndrome_round_detection_rate_matches_first_order():
    """Random-noise pass rate of a d=6 memory round versus the single-fault oracle."""
    lay = build_layout(6)
    circ = protocol_circuit(lay, 2, 3, 0.0, rounds_after=1)
    # at this rate fault pairs that cancel each other's detection are far below 3 sigma
    p = 1e-4
    model = NoiseModel(p_ph=p)
    compiled, faults, dets, _ = fault_table(circ, model)
    probs = np.array([f.probability for f in faults])
    loc = np.array([f.location for f in faults])
    fires = dets.any(axis=1)
    q = np.bincount(loc[fires], weights=probs[fires], minlength=compiled.n_locations)
    predicted = float(np.exp(np.log1p(-q).sum()))
    shots = 400_000
    batch = FrameBatch(lay.n_qubits, shots, compiled.n_measurements)
    run_layers(compiled, batch, np.random.default_rng(5))
    clean = ~circ.detector_matrix(batch.unpack(batch.records)).any(axis=0)
    rate = clean.mean()
    sigma = np.sqrt(rate * (1 - rate) / shots)
    assert abs(rate - predicted) < 3 * sigma


# ---------------------------------------------------------------- post-selection regime
def test_regime_grows_linearly_with_distance():
    n6 = len(post_selection_regime(build_layout(6), 2))
    n12 = len(post_selection_regime(build_layout(12), 2))
    row = 12  # stabilizers per row of the d=12 unrotated lattice
    assert abs(n12 - 2 * n6) <= row
    assert n12 < 0.25 * len(build_layout(12).stabilizers)


def test_regime_contains_branch_syndromes_and_excludes_far_errors():
    lay = build_layout(6)
    regime = post_selection_regime(lay, 2)
    for q in lay.logical.q_z:
        syn = lay.syndrome_of(PauliString.single(lay.n_data, q, "Z"))
        assert set(np.flatnonzero(syn).tolist()) <= regime.stabilizers
    far = max(range(lay.n_data), key=lambda q: min(abs(lay.coords[q][0] - lay.coords[z][0]) + abs(lay.coords[q][1] - lay.coords[z][1]) for z in lay.logical.q_z))
    syn = lay.syndrome_of(PauliString.single(lay.n_data, far, "X"))
    assert syn.any()
    assert not set(np.flatnonzero(syn).tolist()) & regime.stabilizers


@pytest.mark.parametrize("impl,per_block", [("virtual-Z", 2), ("native-2q", 1)])
@pytest.mark.parametrize("mode", ["EC", "PS"])
def test_first_order_undetectable_weight(impl, per_block, mode):
    """Single faults that mimic a block flip on every checked detector: total weight ``per_block/15 p`` per block."""
    from star_lab.prep_protocol import ProtocolConfig, ProtocolSimulator

    p = 1e-3
    cfg = ProtocolConfig(2, 3, 1e-3, mode, NoiseModel(p, native_2q_rotation=impl == "native-2q"), impl)
    sim = ProtocolSimulator(cfg)
    compiled, faults, dets, _ = fault_table(sim.circuit, cfg.noise)
    checked = np.array([d.round <= 2 for d in sim.circuit.detectors])
    if sim.regime is not None:
        checked &= sim.regime.detector_mask(sim.circuit)
    sig = dets[:, checked]
    branch = branch_signatures(sim.circuit, compiled)[:, checked]
    assert branch.any(axis=1).all()
    probs = np.array([f.probability for f in faults])
    for b in branch:
        np.testing.assert_allclose(probs[(sig == b).all(axis=1)].sum(), per_block * p / 15, rtol=1e-9)
