"""Monte Carlo of the transversal multi-rotation resource-state preparation.

The non-Clifford rotation is never simulated directly.  Its effect on the code
state is a superposition over flipped-block patterns ``b`` (see
:mod:`star_lab.prep_formulas`); each pattern is a Pauli ``Z^b`` inserted right
after the first syndrome round, so every trial is a Clifford circuit that the
batched frame sampler can run.  Trials are grouped by folded stratum
``n = min(|b|, k-|b|)``; the output state of an accepted stratum-``n`` trial is
rotated by the stratum angle, which turns pass counts into fidelity estimates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import prep_formulas as pf
from .channels import ZAxisChannel, single_patch_channel  # noqa: F401  (re-exported)
from .frame import FrameBatch, compile_circuit, run_layers
from .noise import NoiseModel
from .pauli import PauliString
from .prep_formulas import (  # noqa: F401  (public API of this module)
    BranchTable,
    branch_table,
    error_angle,
    error_probability,
    ideal_success,
    logical_angle,
    physical_angle,
)
from .surface_code import (
    IMPLEMENTATIONS,
    PostSelectionRegime,
    _split_layer,
    build_layout,
    post_selection_regime,
    protocol_circuit,
)

MODES = ("PS", "EC")
PLANS = ("stratified", "plain")
CYCLES_PER_TRIAL = 4
DEFAULT_BATCH = 1 << 16


@dataclass(frozen=True)
class ProtocolConfig:
    """One preparation experiment.

    :param extra_rounds: additional noisy syndrome rounds appended after the two
        checked rounds.  They never cause rejection; they exist to study the
        cost of simulating the measurement-error suppression rounds explicitly.
    """

    m: int
    k: int
    theta_star: float
    mode: str = "EC"
    noise: NoiseModel = field(default_factory=NoiseModel)
    implementation: str = "virtual-Z"
    style: str = "unrotated"
    extra_rounds: int = 0

    def __post_init__(self) -> None:
        if self.m < 1 or self.k < 1:
            raise ValueError("m and k must be positive")
        if not 0.0 < abs(self.theta_star) <= math.pi / 8 + 1e-15:
            raise ValueError("preparation needs 0 < |theta*| <= pi/8")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.implementation not in IMPLEMENTATIONS:
            raise ValueError(f"implementation must be one of {IMPLEMENTATIONS}")
        if self.extra_rounds < 0:
            raise ValueError("extra_rounds must be non-negative")

    @property
    def d(self) -> int:
        return self.m * self.k

    @property
    def theta(self) -> float:
        return pf.physical_angle(self.theta_star, self.k)


@dataclass
class PrepResult:
    accepted: bool
    stratum: int
    logical_x_flip: bool
    logical_z_flip: bool
    residual: PauliString  # data-register frame with the branch Pauli removed


@dataclass
class PrepStats:
    """Aggregated preparation statistics.

    ``counts[n] = (N_sample, N_pass)``.  ``defined`` is false when no stratum-0
    trial was accepted, in which case the derived quantities are NaN.
    """

    plan: str
    counts: dict[int, tuple[int, int]]
    weights: dict[int, float]
    p_suc: float
    p_suc_err: float
    infidelity: float
    infidelity_err: float
    trace_distance: float
    trace_distance_err: float
    supply_rate: float
    p_ud: float
    p_ud_err: float
    discard: float
    defined: bool = True

    def as_row(self) -> dict:
        row = {
            "plan": self.plan,
            "p_suc": self.p_suc,
            "p_suc_err": self.p_suc_err,
            "infidelity": self.infidelity,
            "infidelity_err": self.infidelity_err,
            "trace_distance": self.trace_distance,
            "trace_distance_err": self.trace_distance_err,
            "supply_rate": self.supply_rate,
            "p_ud": self.p_ud,
            "p_ud_err": self.p_ud_err,
            "discard": self.discard,
            "defined": self.defined,
        }
        for n, (ns, npass) in sorted(self.counts.items()):
            row[f"n{n}_sample"] = ns
            row[f"n{n}_pass"] = npass
        return row


class ProtocolSimulator:
    """Compiled protocol circuit plus rejection rule for one configuration."""

    def __init__(self, config: ProtocolConfig, regime: PostSelectionRegime | None = None):
        self.config = config
        self.layout = build_layout(config.d, config.style)
        self.theta = config.theta
        self.table = pf.branch_table(abs(self.theta), config.k)
        self.circuit = protocol_circuit(
            self.layout, config.m, config.k, self.theta, config.implementation, rounds_after=2 + config.extra_rounds
        )
        self.compiled = compile_circuit(self.circuit.ops, self.layout.n_qubits, config.noise)
        self.split = _split_layer(self.compiled, self.circuit)
        self.blocks = [np.array(b, dtype=np.int64) for b in self.circuit.schedule.blocks]
        checked = np.array([det.round <= 2 for det in self.circuit.detectors])
        if config.mode == "EC":
            if regime is None:
                regime = post_selection_regime(self.layout, config.m, config.implementation)
            checked &= regime.detector_mask(self.circuit)
        self.regime = regime
        dets = [det for det, keep in zip(self.circuit.detectors, checked) if keep]
        n_meas = self.compiled.n_measurements
        self._det_a = np.array([det.measurements[0] for det in dets], dtype=np.int64)
        self._det_b = np.array([det.measurements[1] if len(det.measurements) > 1 else n_meas for det in dets], dtype=np.int64)
        self._xl = np.array(sorted(self.layout.logical.x_l.support), dtype=np.int64)
        self._zl = np.array(sorted(self.layout.logical.z_l.support), dtype=np.int64)

    @property
    def n_rejecting_detectors(self) -> int:
        return len(self._det_a)

    # ------------------------------------------------------------------ sampling
    def run_batch(self, shots: int, rng: np.random.Generator, pattern: np.ndarray | None) -> tuple[FrameBatch, np.ndarray]:
        """Run ``shots`` trials; ``pattern[j, s]`` flips block ``j`` in shot ``s``.

        :returns: the final frame batch and a boolean acceptance array.
        """
        batch = FrameBatch(self.layout.n_qubits, shots, self.compiled.n_measurements)
        run_layers(self.compiled, batch, rng, layers=range(0, self.split))
        if pattern is not None:
            self._flip_blocks(batch, pattern)
        run_layers(self.compiled, batch, rng, layers=range(self.split, len(self.compiled.layers)))
        if len(self._det_a) == 0:
            return batch, np.ones(shots, dtype=bool)
        rec = np.vstack([batch.records, np.zeros((1, batch.n_words), dtype=np.uint64)])
        reject = np.bitwise_or.reduce(rec[self._det_a] ^ rec[self._det_b], axis=0)
        return batch, ~batch.unpack(reject)

    def _flip_blocks(self, batch: FrameBatch, pattern: np.ndarray) -> None:
        for j, blk in enumerate(self.blocks):
            sel = np.flatnonzero(pattern[j])
            if sel.size:
                batch.xor_mask(blk, batch.shot_mask(sel), "Z")

    def stratum_pattern(self, stratum: int, shots: int, rng: np.random.Generator) -> np.ndarray:
        """Flip patterns for a conditional stratum batch.

        Stratum 1 picks one block uniformly; complements share the syndrome and
        need no separate sampling.  Higher strata pick ``n`` distinct blocks.
        """
        k = self.config.k
        pattern = np.zeros((k, shots), dtype=bool)
        if stratum == 0:
            return pattern
        if not 0 < stratum <= k // 2:
            raise ValueError(f"stratum {stratum} out of range for k={k}")
        keys = rng.random((k, shots))
        picked = np.argsort(keys, axis=0)[:stratum]
        np.put_along_axis(pattern, picked, True, axis=0)
        return pattern

    def natural_pattern(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        """Independent block flips with probability ``sin^2(theta)``."""
        return rng.random((self.config.k, shots)) < math.sin(self.theta) ** 2

    def folded(self, pattern: np.ndarray) -> np.ndarray:
        w = pattern.sum(axis=0)
        return np.minimum(w, self.config.k - w)

    def logical_flips(self, batch: FrameBatch, pattern: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """Per-shot logical X and Z flips of the final frame with the branch Pauli removed."""
        if pattern is not None:
            self._flip_blocks(batch, pattern)
        x_flip = np.bitwise_xor.reduce(batch.x[self._zl], axis=0)
        z_flip = np.bitwise_xor.reduce(batch.z[self._xl], axis=0)
        if pattern is not None:
            self._flip_blocks(batch, pattern)
        return batch.unpack(x_flip), batch.unpack(z_flip)

    # ------------------------------------------------------------------ counting
    def count_stratum(self, stratum: int, shots: int, seed: int, threads: int = 1, batch_size: int = DEFAULT_BATCH) -> tuple[int, int]:
        """``(N_sample, N_pass)`` of a conditional stratum batch."""
        tasks = _split_shots(shots, batch_size)

        def work(item):
            idx, n = item
            rng = _batch_rng(seed, stratum, idx)
            pattern = self.stratum_pattern(stratum, n, rng)
            _, acc = self.run_batch(n, rng, pattern if stratum else None)
            return n, int(acc.sum())

        return _merge(_map(work, tasks, threads))

    def count_natural(self, shots: int, seed: int, threads: int = 1, batch_size: int = DEFAULT_BATCH) -> dict[int, tuple[int, int]]:
        """Per-stratum ``(N_sample, N_pass)`` with patterns drawn from the ideal distribution."""
        tasks = _split_shots(shots, batch_size)
        n_strata = self.config.k // 2 + 1

        def work(item):
            idx, n = item
            rng = _batch_rng(seed, -1, idx)
            pattern = self.natural_pattern(n, rng)
            _, acc = self.run_batch(n, rng, pattern)
            strata = self.folded(pattern)
            sample = np.bincount(strata, minlength=n_strata)
            passed = np.bincount(strata[acc], minlength=n_strata)
            return sample, passed

        sample = np.zeros(n_strata, dtype=np.int64)
        passed = np.zeros(n_strata, dtype=np.int64)
        for s, p in _map(work, tasks, threads):
            sample += s
            passed += p
        return {n: (int(sample[n]), int(passed[n])) for n in range(n_strata)}


def _split_shots(shots: int, batch_size: int) -> list[tuple[int, int]]:
    if shots < 1:
        raise ValueError("shots must be at least 1")
    full, rest = divmod(shots, batch_size)
    sizes = [batch_size] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _batch_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    # one stream per (stratum, batch) so results do not depend on the thread count
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream + 1, index)))


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _merge(parts) -> tuple[int, int]:
    ns = sum(p[0] for p in parts)
    npass = sum(p[1] for p in parts)
    return ns, npass


# ---------------------------------------------------------------------- public API
def run_protocol_trial(config: ProtocolConfig, rng: np.random.Generator, simulator: ProtocolSimulator | None = None) -> PrepResult:
    """One trial with the flip pattern drawn from the ideal distribution."""
    sim = simulator or ProtocolSimulator(config)
    pattern = sim.natural_pattern(1, rng)
    batch, acc = sim.run_batch(1, rng, pattern)
    x_flip, z_flip = sim.logical_flips(batch, pattern)
    sim._flip_blocks(batch, pattern)
    n_data = sim.layout.n_data
    xb = batch.unpack(batch.x[:n_data])[:, 0]
    zb = batch.unpack(batch.z[:n_data])[:, 0]
    residual = PauliString(
        n_data,
        sum(1 << q for q in np.flatnonzero(xb)),
        sum(1 << q for q in np.flatnonzero(zb)),
    )
    return PrepResult(bool(acc[0]), int(sim.folded(pattern)[0]), bool(x_flip[0]), bool(z_flip[0]), residual)


def _binomial_sigma(npass: int, nsample: int) -> float:
    if nsample == 0:
        return math.inf
    # a zero count still carries an uncertainty of about one event
    r = max(npass, 1) / nsample
    return math.sqrt(r * (1.0 - r) / nsample)


def combine_counts(config: ProtocolConfig, counts: dict[int, tuple[int, int]], weights: dict[int, float], plan: str) -> PrepStats:
    """Turn per-stratum counts into the fidelity estimator with binomial error propagation."""
    theta = pf.physical_angle(abs(config.theta_star), config.k)
    table = pf.branch_table(theta, config.k)
    target = table.angles[0]
    rates, sigmas = {}, {}
    for n, (ns, npass) in counts.items():
        if npass > ns:
            raise ValueError("pass count exceeds sample count")
        rates[n] = npass / ns if ns else 0.0
        sigmas[n] = _binomial_sigma(npass, ns)
    p_suc = sum(weights[n] * rates[n] for n in counts)
    nan = float("nan")
    r0 = rates.get(0, 0.0)
    if counts.get(0, (0, 0))[1] == 0 or p_suc <= 0.0:
        return PrepStats(plan, counts, weights, p_suc, nan, nan, nan, nan, nan, nan, nan, nan, nan, defined=False)
    sq = {n: math.sin(table.angles[n] - target) ** 2 for n in counts}
    ab = {n: abs(math.sin(table.angles[n] - target)) for n in counts}
    infid = sum(weights[n] * rates[n] * sq[n] for n in counts) / p_suc
    trd = sum(weights[n] * rates[n] * ab[n] for n in counts) / p_suc
    infid_err = math.sqrt(sum((weights[n] * (sq[n] - infid) / p_suc * sigmas[n]) ** 2 for n in counts))
    trd_err = math.sqrt(sum((weights[n] * (ab[n] - trd) / p_suc * sigmas[n]) ** 2 for n in counts))
    p_suc_err = math.sqrt(sum((weights[n] * sigmas[n]) ** 2 for n in counts))
    per_sample = config.k if config.k >= 3 else 1
    if 1 in counts:
        r1 = rates[1]
        p_ud = per_sample * r1 / r0
        p_ud_err = per_sample * math.hypot(sigmas[1] / r0, r1 * sigmas[0] / r0**2)
    else:
        p_ud = p_ud_err = nan
    rate = supply_rate(config, p_suc)
    return PrepStats(plan, counts, weights, p_suc, p_suc_err, infid, infid_err, trd, trd_err, rate, p_ud, p_ud_err, 1.0 - r0)


def estimate_stats(
    config: ProtocolConfig,
    plan: str = "stratified",
    shots: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    shots_stratum0: int | None = None,
    include_higher: bool = False,
    simulator: ProtocolSimulator | None = None,
    batch_size: int = DEFAULT_BATCH,
) -> PrepStats:
    """Estimate success rate, infidelity and trace distance.

    ``stratified`` runs conditional batches: ``shots_stratum0`` trials of stratum 0
    (default ``shots``) and ``shots`` trials of stratum 1, plus every higher stratum
    when ``include_higher`` is set.  ``plain`` draws flip patterns from the ideal
    distribution and uses empirical stratum weights.
    """
    if plan not in PLANS:
        raise ValueError(f"plan must be one of {PLANS}")
    sim = simulator or ProtocolSimulator(config)
    if plan == "plain":
        counts = sim.count_natural(shots, seed, threads, batch_size)
        total = sum(ns for ns, _ in counts.values())
        weights = {n: ns / total for n, (ns, _) in counts.items()}
        return combine_counts(config, counts, weights, plan)
    strata = [0] + [n for n in sim.table.strata if n >= 1 and (n == 1 or include_higher)]
    counts = {}
    for n in strata:
        n_shots = shots_stratum0 if (n == 0 and shots_stratum0) else shots
        counts[n] = sim.count_stratum(n, n_shots, seed, threads, batch_size)
    weights = {n: float(sim.table.weights[n]) for n in strata}
    return combine_counts(config, counts, weights, plan)


def supply_rate(config: ProtocolConfig, p_suc: float | None = None, trials_per_clock: float | None = None) -> float:
    """Resource states delivered per clock (``d`` code cycles, one trial every 4 cycles)."""
    if trials_per_clock is None:
        trials_per_clock = config.d / CYCLES_PER_TRIAL
    if p_suc is None:
        p_suc = pf.ideal_success(config.theta, config.k)
    return trials_per_clock * p_suc


def noise_rejection_hazard(stats_or_counts) -> float:
    """``-ln`` of the stratum-0 acceptance rate: the expected number of detected faults."""
    counts = stats_or_counts.counts if isinstance(stats_or_counts, PrepStats) else stats_or_counts
    ns, npass = counts[0]
    if npass == 0:
        return math.inf
    return math.log(ns / npass)
