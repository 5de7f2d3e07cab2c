"""Closed forms for the transversal multi-rotation resource-state preparation.

Applying ``k`` rotations ``exp(i theta Z_block)`` to ``|+>_L`` and projecting onto
the code space keeps the branches with no block flipped or all blocks flipped.
Branches where exactly one block (or all but one) is flipped carry a weight-``m``
Z error; if that error slips through undetected the state is rotated by the
error angle instead of the target angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import comb

QUARTER_PI = math.pi / 4


def ideal_success(theta: float, k: int) -> float:
    """Post-selection probability in the noiseless case, ``sin^2k + cos^2k``."""
    s, c = math.sin(theta), math.cos(theta)
    return s ** (2 * k) + c ** (2 * k)


def logical_angle(theta: float, k: int) -> float:
    """Target angle produced by physical angle ``theta`` (odd in ``theta``)."""
    a = abs(theta)
    val = math.asin(math.sin(a) ** k / math.sqrt(ideal_success(a, k)))
    return math.copysign(val, theta)


def physical_angle(theta_star: float, k: int) -> float:
    """Invert :func:`logical_angle` on ``(0, pi/4]`` by bracketed root finding."""
    a = abs(theta_star)
    if not 0.0 < a <= math.pi / 8 + 1e-15:
        raise ValueError(f"need 0 < |theta*| <= pi/8, got {theta_star}")
    if k == 1:
        return theta_star

    # log form keeps the bracket well conditioned for tiny targets
    def f(t: float) -> float:
        return k * math.log(math.sin(t)) - 0.5 * math.log(ideal_success(t, k)) - math.log(math.sin(a))

    lo = max(a ** (1.0 / k) * 1e-3, 1e-300)
    if f(lo) > 0:
        lo = 1e-300
    if f(QUARTER_PI) < 0:
        raise ValueError(f"no physical angle in (0, pi/4) for theta*={theta_star}, k={k}")
    root = brentq(f, lo, QUARTER_PI, xtol=1e-300, rtol=1e-15, maxiter=500)
    return math.copysign(root, theta_star)


def error_probability(theta: float, k: int) -> float:
    """Weight of the single-flipped-block branches, ``sin^2 cos^2 (sin^(2k-4) + cos^(2k-4))``."""
    s, c = math.sin(theta), math.cos(theta)
    return s * s * c * c * (s ** (2 * k - 4) + c ** (2 * k - 4))


def error_angle(theta: float, k: int) -> float:
    """Rotation angle carried by a state that kept one flipped block."""
    a = abs(theta)
    s, c = math.sin(a), math.cos(a)
    val = math.asin(s ** (k - 1) * c / math.sqrt(error_probability(a, k)))
    return -math.copysign(val, theta)


def over_rotation(theta_star: float, k: int) -> float:
    """Error angle minus target angle at the physical angle that realises ``theta_star``."""
    theta = physical_angle(theta_star, k)
    return error_angle(theta, k) - theta_star


def infidelity_leading(theta_star: float, k: int, p_ud: float) -> float:
    """Leading-order infidelity ``P_ud (p_error/p_ideal) sin^2(Delta)``."""
    theta = physical_angle(theta_star, k)
    ratio = error_probability(theta, k) / ideal_success(theta, k)
    return p_ud * ratio * math.sin(error_angle(theta, k) - theta_star) ** 2


def trace_distance_leading(theta_star: float, k: int, p_ud: float) -> float:
    """Leading-order trace distance ``P_ud (p_error/p_ideal) |sin(Delta)|``."""
    theta = physical_angle(theta_star, k)
    ratio = error_probability(theta, k) / ideal_success(theta, k)
    return p_ud * ratio * abs(math.sin(error_angle(theta, k) - theta_star))


def infidelity_with_discard(theta_star: float, k: int, p_ud: float, q_discard: float) -> float:
    """Infidelity keeping the success normalisation ``p_ideal (1-Q) + p_error P_ud``."""
    theta = physical_angle(theta_star, k)
    p_err = error_probability(theta, k)
    p_suc = ideal_success(theta, k) * (1.0 - q_discard) + p_err * p_ud
    return p_err * p_ud / p_suc * math.sin(error_angle(theta, k) - theta_star) ** 2


@dataclass(frozen=True)
class BranchTable:
    """Folded Hamming-weight strata of the flipped-block pattern.

    Patterns ``b`` and its complement differ by the logical Z and produce the same
    syndrome, so they are merged into stratum ``n = min(|b|, k - |b|)``.
    """

    theta: float
    k: int
    amplitudes: np.ndarray  # |u_n| for n = 0..k
    weights: np.ndarray  # sampling weight per folded stratum
    angles: np.ndarray  # rotation angle of the post-selected state per stratum

    @property
    def strata(self) -> range:
        return range(len(self.weights))


def branch_table(theta: float, k: int) -> BranchTable:
    if not 0.0 < theta < QUARTER_PI + 1e-15:
        raise ValueError("theta must lie in (0, pi/4)")
    s, c = math.sin(theta), math.cos(theta)
    u = np.array([s**n * c ** (k - n) for n in range(k + 1)])
    weights, angles = [], []
    for n in range(k // 2 + 1):
        lo, hi = u[n] ** 2, u[k - n] ** 2
        if 2 * n == k:
            weights.append(comb(k, n, exact=True) * lo)
        else:
            weights.append(comb(k, n, exact=True) * (lo + hi))
        angles.append((-1) ** n * math.asin(u[k - n] / math.sqrt(lo + hi)))
    return BranchTable(theta, k, u, np.array(weights), np.array(angles))
