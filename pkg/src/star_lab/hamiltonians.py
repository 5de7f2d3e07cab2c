"""Pauli-string Hamiltonians, Trotter angle sequences and lattice-surgery clock costs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .pauli import PauliString


@dataclass(frozen=True)
class PauliHamiltonian:
    """``H = sum_i a_i P_i`` with real coefficients and distinct Pauli strings."""

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        seen = set()
        for coeff, op in self.terms:
            if op.n_qubits != self.n_qubits:
                raise ValueError("term acts on the wrong number of qubits")
            if op.phase_exp != 0:
                raise ValueError("terms must carry a +1 phase; put signs in the coefficient")
            key = (op.x_mask, op.z_mask)
            if key in seen:
                raise ValueError(f"duplicate term {op}")
            seen.add(key)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[float, PauliString]], tol: float = 0.0) -> PauliHamiltonian:
        """Merge repeated strings and drop terms whose merged coefficient has magnitude ``<= tol``."""
        acc: dict[tuple[int, int], float] = {}
        order: list[tuple[int, int]] = []
        for coeff, op in terms:
            key = (op.x_mask, op.z_mask)
            sign = op.phase.real
            if op.phase_exp % 2:
                raise ValueError("non-Hermitian Pauli term")
            if key not in acc:
                acc[key] = 0.0
                order.append(key)
            acc[key] += float(coeff) * sign
        out = tuple(
            (acc[key], PauliString(n_qubits, key[0], key[1], 0)) for key in order if abs(acc[key]) > tol
        )
        return cls(n_qubits, out)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def one_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        if self.n_qubits > 14:
            raise ValueError("dense matrix too large")
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, op in self.terms:
            out += coeff * op.to_matrix()
        return out

    def relabel(self, perm) -> PauliHamiltonian:
        """Move qubit ``q`` to ``perm[q]``."""
        terms = []
        for coeff, op in self.terms:
            sparse = {perm[q]: op[q] for q in op.support}
            terms.append((coeff, PauliString.from_sparse(self.n_qubits, sparse)))
        return PauliHamiltonian(self.n_qubits, tuple(terms))

    # ----------------------------------------------------------------- JSON lines
    def to_jsonl(self) -> str:
        lines = [json.dumps({"coeff": c, "pauli": _label(op)}) for c, op in self.terms]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> PauliHamiltonian:
        terms = []
        n = None
        for ln, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if set(rec) != {"coeff", "pauli"}:
                raise ValueError(f"line {ln}: expected keys coeff and pauli")
            op = PauliString.from_label(rec["pauli"])
            if n is None:
                n = op.n_qubits
            elif op.n_qubits != n:
                raise ValueError(f"line {ln}: inconsistent qubit count")
            terms.append((float(rec["coeff"]), op))
        if n is None:
            raise ValueError("empty Hamiltonian")
        return cls(n, tuple(terms))


def _label(op: PauliString) -> str:
    return "".join(op[q] for q in range(op.n_qubits))


# ------------------------------------------------------------------------- models
def hubbard_bonds(lx: int, ly: int, periodic: bool = True) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds of a row-major ``lx x ly`` lattice, one entry per lattice link.

    On a periodic axis of length 2 the direct and wrapped links join the same pair,
    so that pair appears twice.
    """
    if lx < 2 or ly < 2:
        raise ValueError("Hubbard lattice needs Lx, Ly >= 2")
    bonds = []
    for y in range(ly):
        for x in range(lx):
            s = y * lx + x
            if x + 1 < lx or periodic:
                bonds.append((s, y * lx + (x + 1) % lx))
            if y + 1 < ly or periodic:
                bonds.append((s, ((y + 1) % ly) * lx + x))
    return bonds


def hubbard_2d(lx: int, ly: int, t: float = 1.0, U: float = 4.0, periodic: bool = True) -> PauliHamiltonian:
    """Jordan-Wigner image of the half-filling-shifted 2D Hubbard model.

    Qubit ``s`` holds the spin-up mode of site ``s`` (row-major) and qubit
    ``s + N_site`` the spin-down mode.
    """
    n_site = lx * ly
    n = 2 * n_site
    terms: list[tuple[float, PauliString]] = []
    for spin in range(2):
        off = spin * n_site
        for a, b in hubbard_bonds(lx, ly, periodic):
            p, q = sorted((a + off, b + off))
            string = {r: "Z" for r in range(p + 1, q)}
            terms.append((-t / 2, PauliString.from_sparse(n, {**string, p: "X", q: "X"})))
            terms.append((-t / 2, PauliString.from_sparse(n, {**string, p: "Y", q: "Y"})))
    for s in range(n_site):
        terms.append((U / 4, PauliString.from_sparse(n, {s: "Z", s + n_site: "Z"})))
    return PauliHamiltonian.from_terms(n, terms)


def heisenberg_disordered(n: int, h: float, rng: np.random.Generator) -> PauliHamiltonian:
    """Periodic XXX chain with uniform random Z fields in ``[-h, h]``."""
    if n < 2:
        raise ValueError("chain needs at least two sites")
    terms = []
    for j in range(n):
        nb = (j + 1) % n
        for p in "XYZ":
            terms.append((1.0, PauliString.from_sparse(n, {j: p, nb: p})))
    fields = rng.uniform(-h, h, size=n)
    for j in range(n):
        terms.append((float(fields[j]), PauliString.from_sparse(n, {j: "Z"})))
    return PauliHamiltonian.from_terms(n, terms)


def heisenberg_expected_norm(n: int, h: float) -> float:
    """Disorder-averaged 1-norm of :func:`heisenberg_disordered`: ``3n + n h / 2``."""
    return 3.0 * n + 0.5 * n * abs(h)


# ------------------------------------------------------------------------- Trotter
def trotter_angles(ham: PauliHamiltonian, total_time: float, steps: int, order2: bool = True) -> np.ndarray:
    """Rotation angles of the Trotter circuit in execution order.

    Second order: each step runs every term at ``-a_i T / 2N`` forward and then in reverse.
    """
    if steps < 1:
        raise ValueError("need at least one Trotter step")
    a = ham.coefficients
    if order2:
        half = -a * total_time / (2 * steps)
        one_step = np.concatenate([half, half[::-1]])
    else:
        one_step = -a * total_time / steps
    return np.tile(one_step, steps)


def max_evolution_time(ham_or_norm, p_ph: float, alpha_rus: float = 1.5) -> float:
    """Longest evolution time with an O(1) mitigation cost, ``1 / (alpha lambda p)``."""
    lam = ham_or_norm.one_norm if isinstance(ham_or_norm, PauliHamiltonian) else float(ham_or_norm)
    if lam <= 0:
        raise ValueError("1-norm must be positive")
    if p_ph == 0:
        return math.inf
    return 1.0 / (alpha_rus * lam * p_ph)


def qpe_norm_bound(epsilon: float, delta: float = 0.06, p_ph: float = 1e-4, alpha_rus: float = 1.5) -> float:
    """Largest 1-norm for QPE at precision ``epsilon`` with ``T_max = delta/epsilon``."""
    return 2.0 * epsilon / (alpha_rus * delta * p_ph)


# ------------------------------------------------------------------------- clocks
DEFAULT_CLOCKS = {"Z": 1, "X": 4, "Y": 6}


@dataclass(frozen=True)
class ClockCostModel:
    """Clocks per rotation, keyed by term class.

    The class of a Pauli string is ``"Y"`` if it contains a Y, ``"X"`` if it
    contains an X but no Y, and ``"Z"`` otherwise.  ``overrides`` maps exact
    labels (e.g. ``"XZX"`` with identities stripped) to clock counts.
    """

    classes: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_CLOCKS))
    overrides: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for v in list(self.classes.values()) + list(self.overrides.values()):
            if int(v) != v or v <= 0:
                raise ValueError("clock counts must be positive integers")

    @staticmethod
    def term_class(op: PauliString) -> str:
        if op.weight == 0:
            raise ValueError("identity term has no clock cost")
        chars = {op[q] for q in op.support}
        if "Y" in chars:
            return "Y"
        if "X" in chars:
            return "X"
        return "Z"

    def clocks(self, op: PauliString) -> int:
        key = "".join(op[q] for q in op.support)
        if key in self.overrides:
            return self.overrides[key]
        cls = self.term_class(op)
        if cls not in self.classes:
            raise ValueError(f"no clock cost for term class {cls}")
        return self.classes[cls]


def avg_clock(ham: PauliHamiltonian, model: ClockCostModel | None = None) -> float:
    """Mean clocks per rotation over the Hamiltonian's terms."""
    model = model or ClockCostModel()
    if ham.n_terms == 0:
        raise ValueError("empty Hamiltonian")
    return sum(model.clocks(op) for _, op in ham.terms) / ham.n_terms
