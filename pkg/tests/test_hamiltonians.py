import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fermion_hubbard_matrix
from star_lab.hamiltonians import (
    ClockCostModel,
    PauliHamiltonian,
    avg_clock,
    heisenberg_disordered,
    heisenberg_expected_norm,
    hubbard_2d,
    max_evolution_time,
    qpe_norm_bound,
    trotter_angles,
)
from star_lab.pauli import PauliString


# ---------------------------------------------------------------- fermionic oracle comparison
def test_two_by_two_matches_fermionic_oracle():
    ham = hubbard_2d(2, 2, t=1.0, U=4.0)
    spin = ham.to_matrix()
    fermi = fermion_hubbard_matrix(2, 2, 1.0, 4.0)
    np.testing.assert_allclose(spin, fermi, atol=1e-12)
    # the spectrum agrees sector by sector in particle number
    counts = np.array([bin(i).count("1") for i in range(1 << 8)])
    for n_part in range(9):
        sel = counts == n_part
        ev_spin = np.linalg.eigvalsh(spin[np.ix_(sel, sel)])
        ev_fermi = np.linalg.eigvalsh(fermi[np.ix_(sel, sel)])
        np.testing.assert_allclose(ev_spin, ev_fermi, atol=1e-10)


def test_three_by_two_matches_fermionic_oracle_with_other_couplings():
    ham = hubbard_2d(3, 2, t=0.7, U=-2.5)
    np.testing.assert_allclose(ham.to_matrix(), fermion_hubbard_matrix(3, 2, 0.7, -2.5), atol=1e-12)


def test_majorana_images_anticommute():
    n = 8
    majoranas = []
    for q in range(n):
        string = {r: "Z" for r in range(q)}
        majoranas.append(PauliString.from_sparse(n, {**string, q: "X"}))
        majoranas.append(PauliString.from_sparse(n, {**string, q: "Y"}))
    for i, a in enumerate(majoranas):
        for b in majoranas[i + 1 :]:
            assert not a.commutes(b)


def test_hubbard_matrix_is_hermitian():
    m = hubbard_2d(2, 2).to_matrix()
    np.testing.assert_allclose(m, m.conj().T, atol=1e-14)


# ---------------------------------------------------------------- term counts and norms
@pytest.mark.parametrize("lx,ly", [(3, 3), (4, 4), (3, 5), (6, 6), (8, 8)])
def test_hubbard_counts(lx, ly):
    n_site = lx * ly
    ham = hubbard_2d(lx, ly, 1.0, 4.0)
    assert ham.n_qubits == 2 * n_site
    assert ham.n_terms == 9 * n_site
    assert ham.one_norm == pytest.approx(5 * n_site, rel=1e-14)
    assert avg_clock(ham) == pytest.approx(41 / 9, rel=1e-14)


def test_hubbard_eight_by_eight_values():
    ham = hubbard_2d(8, 8)
    assert ham.n_terms == 576
    assert ham.one_norm == 320.0


def test_two_by_two_merges_repeated_links():
    ham = hubbard_2d(2, 2)
    # both links of a length-2 periodic axis join the same pair, so hoppings merge
    assert ham.n_terms == 20
    assert ham.one_norm == pytest.approx(20.0)
    assert sorted({abs(c) for c, _ in ham.terms}) == [1.0]


def test_hubbard_without_interaction():
    ham = hubbard_2d(4, 4, t=1.0, U=0.0)
    assert ham.one_norm == pytest.approx(4 * 16)
    assert ham.n_terms == 8 * 16


def test_hubbard_rejects_small_lattice():
    with pytest.raises(ValueError):
        hubbard_2d(1, 4)


def test_norm_and_count_invariant_under_relabeling():
    ham = hubbard_2d(3, 3)
    perm = np.random.default_rng(0).permutation(ham.n_qubits)
    moved = ham.relabel(perm)
    assert moved.n_terms == ham.n_terms
    assert moved.one_norm == ham.one_norm


# ---------------------------------------------------------------- clock model
def test_clock_model_variants():
    ham = hubbard_2d(4, 4)
    assert avg_clock(ham, ClockCostModel(classes={"Z": 1, "X": 4, "Y": 4})) == pytest.approx(33 / 9)
    zz = PauliHamiltonian.from_terms(3, [(1.0, PauliString.from_label("ZZI")), (0.5, PauliString.from_label("IZZ"))])
    assert avg_clock(zz) == 1.0
    assert ClockCostModel(overrides={"XZX": 3}).clocks(PauliString.from_label("XZX")) == 3
    with pytest.raises(ValueError):
        ClockCostModel(classes={"Z": 0})
    with pytest.raises(ValueError):
        ClockCostModel(classes={"Z": 1}).clocks(PauliString.from_label("XX"))


# ---------------------------------------------------------------- Heisenberg chain
def test_heisenberg_norm_distribution():
    rng = np.random.default_rng(1)
    norms = np.array([heisenberg_disordered(100, 1.0, rng).one_norm for _ in range(1000)])
    assert abs(norms.mean() - 350.0) < 3 * norms.std() / math.sqrt(len(norms))
    assert heisenberg_expected_norm(100, 1.0) == 350.0
    assert norms.min() >= 300 and norms.max() <= 400


def test_heisenberg_without_field():
    ham = heisenberg_disordered(10, 0.0, np.random.default_rng(2))
    assert ham.one_norm == 30.0
    assert ham.n_terms == 30


def test_heisenberg_two_sites_merges_bonds():
    ham = heisenberg_disordered(2, 0.0, np.random.default_rng(0))
    assert ham.n_terms == 3
    assert ham.one_norm == 6.0


# ---------------------------------------------------------------- Trotter angles and bounds
@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.integers(1, 20), st.booleans())
def test_trotter_angle_total(total_time, steps, order2):
    ham = hubbard_2d(3, 3, t=1.3, U=2.0)
    angles = trotter_angles(ham, total_time, steps, order2)
    assert np.abs(angles).sum() == pytest.approx(ham.one_norm * total_time, rel=1e-12)
    assert len(angles) == ham.n_terms * steps * (2 if order2 else 1)


def test_trotter_step_doubling_halves_angles():
    ham = hubbard_2d(3, 3)
    a = trotter_angles(ham, 1.0, 4)
    b = trotter_angles(ham, 1.0, 8)
    np.testing.assert_allclose(b[: ham.n_terms], a[: ham.n_terms] / 2)
    assert np.abs(trotter_angles(hubbard_2d(8, 8), 1.0, 3)).sum() == pytest.approx(320.0)
    with pytest.raises(ValueError):
        trotter_angles(ham, 1.0, 0)


def test_second_order_step_is_palindromic():
    ham = hubbard_2d(3, 3)
    step = trotter_angles(ham, 2.0, 1)
    np.testing.assert_allclose(step, step[::-1])
    np.testing.assert_allclose(step[: ham.n_terms], -ham.coefficients * 2.0 / 2)


def test_evolution_time_bounds():
    assert max_evolution_time(hubbard_2d(8, 8), 1e-4) == pytest.approx(20.8, abs=0.05)
    assert max_evolution_time(heisenberg_expected_norm(100, 1.0), 1e-4) == pytest.approx(19.0, abs=0.1)
    assert max_evolution_time(320.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        max_evolution_time(0.0, 1e-4)
    assert qpe_norm_bound(1e-3) == pytest.approx(222.2, abs=0.1)


# ---------------------------------------------------------------- construction and serialisation
def test_jsonl_round_trip():
    ham = hubbard_2d(3, 3, t=0.5, U=3.0)
    back = PauliHamiltonian.from_jsonl(ham.to_jsonl())
    assert back == ham


def test_jsonl_rejects_bad_records():
    with pytest.raises(ValueError):
        PauliHamiltonian.from_jsonl('{"coeff": 1.0, "pauli": "XX", "extra": 1}\n')
    with pytest.raises(ValueError):
        PauliHamiltonian.from_jsonl('{"coeff": 1.0, "pauli": "XX"}\n{"coeff": 1.0, "pauli": "XXX"}\n')
    with pytest.raises(ValueError):
        PauliHamiltonian.from_jsonl("\n")


def test_duplicate_terms_rejected_and_merged():
    xx = PauliString.from_label("XX")
    with pytest.raises(ValueError):
        PauliHamiltonian(2, ((1.0, xx), (2.0, xx)))
    merged = PauliHamiltonian.from_terms(2, [(1.0, xx), (2.0, xx), (1.0, PauliString.from_label("-ZZ"))])
    assert merged.terms == ((3.0, xx), (-1.0, PauliString.from_label("ZZ")))
    assert PauliHamiltonian.from_terms(2, [(1.0, xx), (-1.0, xx)]).n_terms == 0
