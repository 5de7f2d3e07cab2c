"""Space-time cost of Trotterised QCELS phase estimation with analog rotations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

CLOCK_CYCLE_FACTOR = 4  # two teleportation attempts on average, two rotations per term and step


@dataclass(frozen=True)
class QcelsParams:
    delta: float = 0.06
    K: int = 5
    n_shots: int = 100

    def __post_init__(self) -> None:
        if self.delta <= 0 or self.K < 2 or self.n_shots < 1:
            raise ValueError("need delta > 0, K >= 2 and n_shots >= 1")


@dataclass(frozen=True)
class DeviceParams:
    p_ph: float = 1e-4
    cycle_time_us: float = 1.0
    alpha_rus: float = 1.5
    safety_factor: float = 100.0
    gamma2_cap: float = math.exp(8.0)

    def __post_init__(self) -> None:
        if min(self.p_ph, self.cycle_time_us, self.alpha_rus, self.safety_factor, self.gamma2_cap) <= 0:
            raise ValueError("device parameters must be positive")


@dataclass(frozen=True)
class ProblemParams:
    """Hamiltonian summary: term count, 1-norm, average clocks, system qubits, Trotter norm ``W``."""

    n_terms: int
    one_norm: float
    avg_clock: float
    n_sys: int
    trotter_norm: float

    def __post_init__(self) -> None:
        if self.n_terms < 1 or self.one_norm <= 0 or self.avg_clock <= 0 or self.n_sys < 1 or self.trotter_norm <= 0:
            raise ValueError("problem parameters must be positive")


@dataclass
class QcelsSchedule:
    J: int
    taus: np.ndarray
    T_max: float  # delta / epsilon
    T_max_schedule: float  # K * tau_J
    T_total: float
    sandwich: tuple[float, float]  # (2(K-1) N_s T_max, 4(K-1) N_s T_max)


def qcels_schedule(epsilon: float, params: QcelsParams = QcelsParams()) -> QcelsSchedule:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    J = math.ceil(math.log2(1.0 / epsilon)) + 1
    tau0 = params.delta / params.K
    taus = tau0 * 2.0 ** np.arange(J)
    K, ns = params.K, params.n_shots
    T_total = float(np.sum(K * (K - 1) * ns * taus))
    T_max = params.delta / epsilon
    bounds = (2 * (K - 1) * ns * T_max, 4 * (K - 1) * ns * T_max)
    return QcelsSchedule(J, taus, T_max, K * float(taus[-1]), T_total, bounds)


@dataclass
class TrotterSteps:
    dt: float
    N_total: float
    N_max: float


def trotter_steps(trotter_norm: float, eps_trotter: float, schedule: QcelsSchedule) -> TrotterSteps:
    if trotter_norm <= 0 or eps_trotter <= 0:
        raise ValueError("W and epsilon_Trotter must be positive")
    dt = math.sqrt(eps_trotter / trotter_norm)
    return TrotterSteps(dt, schedule.T_total / (2 * dt), schedule.T_max / (2 * dt))


def logical_error_rate(p_ph: float, d: int) -> float:
    """Per-cycle logical error rate ``0.1 (100 p)^((d+1)/2)``."""
    if not 0 < p_ph < 1e-2:
        raise ValueError("formula valid only for 0 < p_ph < 1e-2")
    return 0.1 * (100.0 * p_ph) ** ((d + 1) / 2)


def patch_and_qubit_count(n_sys: int, d: int) -> tuple[int, int]:
    """``(N_patch, physical qubits)`` for the sequential floor plan."""
    if n_sys < 1:
        raise ValueError("need at least one system qubit")
    n_patch = int(round(1.5 * (n_sys + 6)))
    return n_patch, n_patch * 2 * d * d


def select_code_distance(
    p_ph: float,
    n_terms: int,
    avg_clock: float,
    n_max: float,
    n_patch: int,
    safety_factor: float = 100.0,
    d_min: int = 3,
    d_max: int = 99,
) -> int:
    """Smallest ``d`` with ``1/p_L >= safety * 4 d L C_av N_max N_patch``."""
    for d in range(d_min, d_max + 1):
        need = safety_factor * CLOCK_CYCLE_FACTOR * d * n_terms * avg_clock * n_max * n_patch
        # compare in log space to stay finite for tiny p_L
        if -math.log(logical_error_rate(p_ph, d)) >= math.log(need):
            return d
    raise ArithmeticError(f"no code distance up to {d_max} satisfies the logical error budget")


@dataclass
class ResourceEstimate:
    eps_trotter: float
    eps_qpe: float
    J: int
    T_max: float
    T_max_schedule: float
    T_total: float
    N_max: float
    N_total: float
    d: int
    n_patch: int
    physical_qubits: int
    data_qubits: int
    time_total_s: float
    time_parallel_s: float
    gamma2_levels: list[float] = field(default_factory=list)
    gamma2_max: float = 1.0
    mitigation_dominated: bool = False

    @property
    def time_total_h(self) -> float:
        return self.time_total_s / 3600.0

    def as_dict(self) -> dict:
        out = asdict(self)
        out["time_total_h"] = self.time_total_h
        return out


def gamma2(tau: float, one_norm: float, device: DeviceParams) -> float:
    """Sampling overhead ``exp(2 alpha lambda tau p)`` of one Hadamard test of length ``tau``.

    Returns ``inf`` beyond the float range so that optimizers can step past hopeless splits.
    """
    exponent = 2.0 * device.alpha_rus * one_norm * tau * device.p_ph
    return math.exp(exponent) if exponent < 700.0 else math.inf


def estimate(
    problem: ProblemParams,
    device: DeviceParams,
    eps_trotter: float,
    eps_qpe: float,
    qcels: QcelsParams = QcelsParams(),
    d: int | None = None,
) -> ResourceEstimate:
    """Full cost for a fixed error split; ``d`` overrides the code-distance selection."""
    sched = qcels_schedule(eps_qpe, qcels)
    steps = trotter_steps(problem.trotter_norm, eps_trotter, sched)
    n_patch, _ = patch_and_qubit_count(problem.n_sys, 3)
    if d is None:
        d = select_code_distance(
            device.p_ph, problem.n_terms, problem.avg_clock, steps.N_max, n_patch, device.safety_factor
        )
    _, qubits = patch_and_qubit_count(problem.n_sys, d)
    per_step = CLOCK_CYCLE_FACTOR * d * problem.n_terms * problem.avg_clock
    root = math.sqrt(problem.trotter_norm / eps_trotter)
    total = 0.0
    levels = []
    worst = 1.0
    for tau in sched.taus:
        level = 0.0
        for n in range(qcels.K):
            g2 = gamma2(n * tau, problem.one_norm, device)
            worst = max(worst, g2)
            level += g2 * qcels.n_shots * n * tau * root
        total += level
        levels.append(gamma2((qcels.K - 1) * tau, problem.one_norm, device))
    cycle_s = device.cycle_time_us * 1e-6
    return ResourceEstimate(
        eps_trotter=eps_trotter,
        eps_qpe=eps_qpe,
        J=sched.J,
        T_max=sched.T_max,
        T_max_schedule=sched.T_max_schedule,
        T_total=sched.T_total,
        N_max=steps.N_max,
        N_total=steps.N_total,
        d=d,
        n_patch=n_patch,
        physical_qubits=qubits,
        data_qubits=problem.n_sys + 1,
        time_total_s=per_step * total * cycle_s,
        time_parallel_s=per_step * steps.N_max * cycle_s,
        gamma2_levels=levels,
        gamma2_max=worst,
        mitigation_dominated=worst > device.gamma2_cap,
    )


def execution_time(problem: ProblemParams, device: DeviceParams, eps_trotter: float, eps_qpe: float, qcels: QcelsParams = QcelsParams()) -> tuple[float, float]:
    """``(total, parallel)`` wall time in seconds."""
    est = estimate(problem, device, eps_trotter, eps_qpe, qcels)
    return est.time_total_s, est.time_parallel_s


def optimize_error_split(
    eps_target: float,
    problem: ProblemParams,
    device: DeviceParams,
    qcels: QcelsParams = QcelsParams(),
    grid: int = 199,
    objective: str = "total",
) -> ResourceEstimate:
    """Split ``eps_target`` between Trotter and QPE error to minimise the chosen wall time.

    The objective is piecewise smooth (the level count and code distance are
    integers), so a uniform grid locates the basin and a bounded golden-section
    search refines it inside the neighbouring grid cells.
    """
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    attr = "time_total_s" if objective == "total" else "time_parallel_s"

    def cost(frac: float) -> float:
        return getattr(estimate(problem, device, frac * eps_target, (1.0 - frac) * eps_target, qcels), attr)

    fracs = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    vals = np.array([cost(f) for f in fracs])
    i = int(np.argmin(vals))
    lo = fracs[max(i - 1, 0)] if i > 0 else fracs[0] / 2
    hi = fracs[min(i + 1, len(fracs) - 1)] if i < len(fracs) - 1 else (1.0 + fracs[-1]) / 2
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best = float(res.x) if res.fun <= vals[i] else float(fracs[i])
    eps_t = best * eps_target
    return estimate(problem, device, eps_t, eps_target - eps_t, qcels)


def hubbard_problem(lx: int, ly: int, trotter_norm: float, t: float = 1.0, U: float = 4.0) -> ProblemParams:
    """Problem summary of the periodic Hubbard model built term by term."""
    from .hamiltonians import avg_clock, hubbard_2d

    ham = hubbard_2d(lx, ly, t, U)
    return ProblemParams(ham.n_terms, ham.one_norm, avg_clock(ham), ham.n_qubits, trotter_norm)
