"""Analytic calculus of noisy logical Z rotations.

All channels here belong to the Z-axis family

    rho -> (1 - x) rho + i y (Z rho - rho Z) + x Z rho Z,

which is closed under composition.  Per-trial channels come from the resource
state model (an undetected error branch with probability ``P_L`` that rotates
by an extra angle ``Delta``).  Repeat-until-success accumulation, probabilistic
cancellation of the coherent part, protocol switching and quasi-probability
inversion are built on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import prep_formulas as pf

QUARTER_PI = math.pi / 4
EIGHTH_PI = math.pi / 8


@dataclass(frozen=True)
class ZAxisChannel:
    """The channel ``(1-x) rho + i y (Z rho - rho Z) + x Z rho Z``.

    ``order`` records the truncation order in ``p_ph`` of the algebra that produced it.
    """

    x: float = 0.0
    y: float = 0.0
    order: int = 1

    def __post_init__(self) -> None:
        if not -1e-15 <= self.x <= 1.0 + 1e-15:
            raise ValueError(f"x must lie in [0, 1], got {self.x}")

    @classmethod
    def identity(cls) -> ZAxisChannel:
        return cls(0.0, 0.0)

    @classmethod
    def over_rotation(cls, angle: float, probability: float = 1.0) -> ZAxisChannel:
        """Apply ``exp(i angle Z)`` with the given probability, identity otherwise."""
        return cls(probability * math.sin(angle) ** 2, 0.5 * probability * math.sin(2 * angle))

    @classmethod
    def z_flip(cls, probability: float) -> ZAxisChannel:
        return cls(probability, 0.0)

    @property
    def multiplier(self) -> complex:
        """Action on the Bloch-plane coordinate ``r_x + i r_y`` (an exact representation)."""
        return complex(1.0 - 2.0 * self.x, -2.0 * self.y)

    def compose(self, other: ZAxisChannel, exact: bool = False) -> ZAxisChannel:
        """``self`` after ``other``.  First order adds parameters; ``exact`` multiplies."""
        if not exact:
            return ZAxisChannel(self.x + other.x, self.y + other.y, min(self.order, other.order))
        lam = self.multiplier * other.multiplier
        return ZAxisChannel((1.0 - lam.real) / 2.0, -lam.imag / 2.0, 0)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        z = np.diag([1.0, -1.0]).astype(complex)
        return (1 - self.x) * rho + 1j * self.y * (z @ rho - rho @ z) + self.x * z @ rho @ z

    def choi(self) -> np.ndarray:
        """Choi matrix with the input on the first tensor factor."""
        out = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                e = np.zeros((2, 2), dtype=complex)
                e[i, j] = 1.0
                out += np.kron(e, self.apply(e))
        return out


def error_rates(ch: ZAxisChannel) -> tuple[float, float]:
    """Average and worst-case error rates ``(2x/3, sqrt(x^2 + y^2))``."""
    return 2.0 * ch.x / 3.0, math.hypot(ch.x, ch.y)


# ---------------------------------------------------------------- per-trial model
@dataclass(frozen=True)
class RotationChannelModel:
    """Noisy rotation produced by teleporting a multi-rotation resource state.

    :param k: number of transversal rotation blocks.
    :param p_ph: physical error rate.
    :param pud_per_block: undetectable-error probability per block in units of ``p_ph``
        (1/15 for a native two-qubit rotation, 2/15 with CNOT conjugation and virtual Z).
    :param include_pud_in_suc: normalise by ``p_ideal + p_error P_ud`` instead of ``p_ideal``.
    """

    k: int
    p_ph: float
    pud_per_block: float = 1.0 / 15.0
    include_pud_in_suc: bool = False

    @property
    def p_ud(self) -> float:
        return self.pud_per_block * self.k * self.p_ph

    def logical_error(self, theta_star: float) -> float:
        """``P_L``: probability that the teleported rotation carries the error angle."""
        a = abs(theta_star)
        if a == 0.0:
            return 0.0
        theta = pf.physical_angle(a, self.k)
        p_suc = pf.ideal_success(theta, self.k)
        if self.include_pud_in_suc:
            p_suc += pf.error_probability(theta, self.k) * self.p_ud
        return pf.error_probability(theta, self.k) * self.p_ud / p_suc

    def over_rotation(self, theta_star: float) -> float:
        """``Delta``: error angle minus target angle; odd in ``theta_star``."""
        a = abs(theta_star)
        if a == 0.0:
            return 0.0
        theta = pf.physical_angle(a, self.k)
        return math.copysign(1.0, theta_star) * (pf.error_angle(theta, self.k) - a)

    def channel(self, theta_star: float) -> ZAxisChannel:
        """Uncancelled per-trial error channel."""
        return ZAxisChannel.over_rotation(self.over_rotation(theta_star), self.logical_error(theta_star))

    def canceled_channel(self, theta_star: float) -> ZAxisChannel:
        """Per-trial channel after probabilistic cancellation of the coherent part."""
        pl = self.logical_error(theta_star)
        return ZAxisChannel.z_flip(2.0 * pl * math.sin(self.over_rotation(theta_star)) ** 2)


def single_trial_rates(model: RotationChannelModel, theta_star: float) -> tuple[float, float]:
    """``(eps_av, eps_diamond)`` of a single teleportation trial."""
    if abs(theta_star) > EIGHTH_PI + 1e-15:
        raise ValueError("single-trial angle must satisfy |theta*| <= pi/8")
    pl = model.logical_error(theta_star)
    delta = model.over_rotation(theta_star)
    return error_rates(ZAxisChannel.over_rotation(delta, pl))


@dataclass(frozen=True)
class CancellationRecipe:
    """Apply a rotation by ``angle`` with probability ``probability`` after each trial."""

    probability: float
    angle: float
    channel: ZAxisChannel


def coherent_cancel(model: RotationChannelModel, theta_star: float) -> CancellationRecipe:
    if abs(theta_star) > EIGHTH_PI + 1e-15:
        raise ValueError("cancellation is defined for |theta*| <= pi/8")
    return CancellationRecipe(
        model.logical_error(theta_star), -model.over_rotation(theta_star), model.canceled_channel(theta_star)
    )


def single_patch_channel(p_ph: float, improved: bool = True) -> ZAxisChannel:
    """Constant-rate Z-flip channel of the single-patch injection protocol."""
    if p_ph < 0:
        raise ValueError("p_ph must be non-negative")
    return ZAxisChannel.z_flip((1.0 if improved else 2.0) / 15.0 * p_ph)


# ---------------------------------------------------------------- repeat-until-success
def rus_angles(theta_star: float, n_trials: int) -> list[float]:
    """Signed angles actually applied when the ``n_trials``-th attempt succeeds.

    A failed attempt applies the opposite of the requested angle, so the request
    doubles.  Whenever the request exceeds pi/8 in magnitude, a logical S gate
    absorbs pi/4 and the analog request shrinks to ``|x - pi/4|``.  A request that
    wraps to exactly zero needs no further analog rotation; the list then ends early.
    """
    out: list[float] = []
    pending = theta_star
    for i in range(n_trials):
        if abs(pending) > EIGHTH_PI:
            pending -= math.copysign(QUARTER_PI, pending)
        if pending == 0.0:
            break
        if i == n_trials - 1:
            out.append(pending)
        else:
            out.append(-pending)
            pending = 2.0 * pending
    return out


def _trial_channel(model, angle, canceled, switching, switch_rate):
    ch = model.canceled_channel(angle) if canceled else model.channel(angle)
    if switching:
        alt = ZAxisChannel.z_flip(switch_rate * model.p_ph)
        if error_rates(alt)[1] < error_rates(ch)[1]:
            ch = alt
    return ch


def rus_compose(
    model: RotationChannelModel,
    theta_star: float,
    K: int,
    canceled: bool = False,
    switching: bool = False,
    switch_rate: float = 1.0 / 15.0,
    exact: bool = False,
) -> ZAxisChannel:
    """Accumulated error channel when the ``K``-th teleportation attempt succeeds."""
    if K < 1:
        raise ValueError("K must be at least 1")
    total = ZAxisChannel.identity()
    for angle in rus_angles(theta_star, K):
        total = _trial_channel(model, angle, canceled, switching, switch_rate).compose(total, exact=exact)
    return total


@dataclass
class RusAverage:
    channel: ZAxisChannel
    eps_av: float
    eps_diamond: float
    alpha: float
    k_max: int
    per_k: list[ZAxisChannel] = field(default_factory=list, repr=False)

    @property
    def p_tilde(self) -> float:
        return self.channel.x


def rus_average(
    model: RotationChannelModel,
    theta_star: float,
    canceled: bool = True,
    switching: bool = False,
    switch_rate: float = 1.0 / 15.0,
    tail: float = 1e-9,
    k_cap: int = 200,
) -> RusAverage:
    """Average the per-``K`` channels with weight ``2^-K``.

    The series stops once the remaining weight is below ``tail`` and a bound on the
    remaining contribution is below ``tail`` relative to the running sum.  Each
    trial adds at most ``2 P_ud`` to ``|x| + |y|``, which bounds the tail by
    ``2^-K (|prefix| + 2 bound)``.

    ``alpha`` is the worst-case error of the averaged channel divided by ``|theta*| p_ph``;
    with ``canceled=True`` this is the mitigated prefactor, otherwise the bare one.
    """
    if theta_star == 0.0:
        raise ValueError("theta_star must be nonzero")
    bound = 2.0 * model.p_ud + (switch_rate * model.p_ph if switching else 0.0)
    x = y = 0.0
    per_k = []
    k_max = 0
    # incremental sums: the K-th channel extends the (K-1)-th failure prefix
    prefix = ZAxisChannel.identity()
    pending = theta_star
    for K in range(1, k_cap + 1):
        if abs(pending) > EIGHTH_PI:
            pending -= math.copysign(QUARTER_PI, pending)
        if pending == 0.0:
            # deterministic completion by Clifford gates: remaining weight sees only the prefix
            w = 2.0 ** -(K - 1)
            x += w * prefix.x
            y += w * prefix.y
            per_k.append(prefix)
            k_max = K
            break
        success = _trial_channel(model, pending, canceled, switching, switch_rate).compose(prefix)
        per_k.append(success)
        w = 2.0**-K
        x += w * success.x
        y += w * success.y
        k_max = K
        prefix = _trial_channel(model, -pending, canceled, switching, switch_rate).compose(prefix)
        if w < tail and w * (abs(prefix.x) + abs(prefix.y) + 2.0 * bound) <= tail * (abs(x) + abs(y)):
            break
        pending = 2.0 * pending
    else:
        raise ArithmeticError(f"RUS series did not converge within {k_cap} terms")
    ch = ZAxisChannel(x, y)
    eps_av, eps_dia = error_rates(ch)
    denom = abs(theta_star) * model.p_ph
    alpha = eps_dia / denom if denom > 0 else 0.0
    return RusAverage(ch, eps_av, eps_dia, alpha, k_max, per_k)


# ---------------------------------------------------------------- quasi-probability
@dataclass(frozen=True)
class QuasiProbabilityRep:
    gamma: float
    weights: tuple[float, float]  # on (identity, Z correction)

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw corrections: returns (apply_z flags, signs)."""
        probs = np.abs(self.weights) / self.gamma
        pick = rng.random(size) < probs[1]
        signs = np.where(pick, np.sign(self.weights[1]), np.sign(self.weights[0]))
        return pick, signs


def pec_decomposition(p_tilde: float) -> QuasiProbabilityRep:
    """Inverse of the Z-flip channel with rate ``p_tilde`` as a signed mixture."""
    if not 0.0 <= p_tilde < 0.5:
        raise ValueError("PEC inversion needs 0 <= P < 1/2")
    gamma = 1.0 / (1.0 - 2.0 * p_tilde)
    return QuasiProbabilityRep(gamma, (gamma * (1.0 - p_tilde), -gamma * p_tilde))


@dataclass(frozen=True)
class MitigationCost:
    theta_total: float
    p_total: float
    gamma2_total: float
    gamma2_exponential: float


def mitigation_cost(angles, alpha_rus: float, p_ph: float) -> MitigationCost:
    """Sampling overhead of inverting every rotation's residual Z-flip channel."""
    if alpha_rus <= 0:
        raise ValueError("alpha_RUS must be positive")
    angles = np.abs(np.asarray(list(angles), dtype=float))
    log_g2 = 0.0
    for a in angles:
        p = alpha_rus * a * p_ph
        if p >= 0.5:
            raise ValueError(f"per-gate error {p} too large to invert")
        log_g2 -= 2.0 * math.log1p(-2.0 * p)
    theta_total = float(angles.sum())
    p_total = alpha_rus * theta_total * p_ph
    return MitigationCost(theta_total, p_total, math.exp(log_g2), math.exp(4.0 * p_total))


def angle_budget(p_ph: float, alpha_rus: float, p_total_cap: float = 1.0) -> float:
    """Largest total rotation angle whose mitigation cost stays within ``p_total_cap``."""
    if p_ph <= 0:
        raise ValueError("p_ph must be positive")
    return p_total_cap / (alpha_rus * p_ph)
