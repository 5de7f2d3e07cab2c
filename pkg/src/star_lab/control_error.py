"""Systematic over-rotation in the transversal rotation and its randomized suppression."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

EXACT_LIMIT = 20


@dataclass(frozen=True)
class OverRotationProfile:
    """Per-block shift angles, either fixed or drawn uniformly from ``[0, phi_max]``."""

    phis: tuple[float, ...] = ()
    phi_max: float | None = None
    seed: int | None = None

    def draw(self, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.phi_max is None:
            if len(self.phis) != k:
                raise ValueError(f"profile has {len(self.phis)} angles, need {k}")
            return np.asarray(self.phis, dtype=float)
        rng = rng or np.random.default_rng(self.seed)
        return rng.uniform(0.0, self.phi_max, size=k)


def shifted_angle(theta: float, k: int, phis) -> float:
    """Logical angle produced when block ``i`` rotates by ``theta + phis[i]``."""
    ang = theta + np.asarray(phis, dtype=float)
    if len(ang) != k:
        raise ValueError(f"need {k} shift angles, got {len(ang)}")
    if np.any(ang <= 0.0) or np.any(ang >= math.pi / 2):
        raise ValueError("every theta + phi_i must lie in (0, pi/2)")
    # products in log space avoid underflow for large k
    log_s = np.log(np.sin(ang)).sum()
    log_c = np.log(np.cos(ang)).sum()
    ratio = math.exp(log_s - log_c)
    return math.asin(ratio / math.sqrt(1.0 + ratio * ratio))


def _signed_shifted_angle(theta: float, phis: np.ndarray, signs: np.ndarray) -> float:
    """Angle from rotating block ``i`` by ``signs[i] * theta + phis[i]`` (direct product form)."""
    ang = signs * theta + phis
    s = np.prod(np.sin(ang))
    c = np.prod(np.cos(ang))
    return math.asin(s / math.sqrt(s * s + c * c))


def flip_identity_residual(theta: float, phis, signs) -> float:
    """Difference between the two sides of the direction-flip identity (zero up to rounding)."""
    phis = np.asarray(phis, dtype=float)
    signs = np.asarray(signs, dtype=float)
    lhs = _signed_shifted_angle(theta, phis, signs)
    parity = int(np.sum(signs < 0)) % 2
    rhs = (-1) ** parity * shifted_angle(theta, len(phis), signs * phis)
    return lhs - rhs


def randomized_average_angle(theta: float, k: int, phis, rng: np.random.Generator | None = None, samples: int = 4096) -> float:
    """Effective angle after averaging over random rotation directions.

    Exact enumeration of the ``2^k`` flip patterns for ``k <= 20``; beyond that a
    Monte Carlo fallback over ``samples`` random patterns needs ``rng``.
    """
    phis = np.asarray(phis, dtype=float)
    if len(phis) != k:
        raise ValueError(f"need {k} shift angles, got {len(phis)}")
    if k <= EXACT_LIMIT:
        patterns = itertools.product((1.0, -1.0), repeat=k)
    else:
        if rng is None:
            raise ValueError(f"k={k} exceeds exact enumeration; supply rng for sampling")
        patterns = rng.choice((1.0, -1.0), size=(samples, k))
    total = 0.0
    count = 0
    for sg in patterns:
        total += math.sin(2.0 * shifted_angle(theta, k, np.asarray(sg) * phis))
        count += 1
    return 0.5 * math.asin(total / count)


def relative_error(theta: float, k: int, phis, randomized: bool) -> float:
    from .prep_formulas import logical_angle

    target = logical_angle(theta, k)
    got = randomized_average_angle(theta, k, phis) if randomized else shifted_angle(theta, k, phis)
    return abs(got - target) / target


def relative_error_curves(theta_stars, k: int, profile: OverRotationProfile, randomized: bool, samples: int = 100) -> list[dict]:
    """Sample-averaged relative logical-angle error along a grid of target angles."""
    from .prep_formulas import physical_angle

    rng = np.random.default_rng(profile.seed)
    draws = [profile.draw(k, rng) for _ in range(samples if profile.phi_max is not None else 1)]
    rows = []
    for ts in theta_stars:
        theta = physical_angle(float(ts), k)
        errs = [relative_error(theta, k, ph, randomized) for ph in draws]
        plateau = float(np.mean([np.sum(ph**2) for ph in draws]))
        rows.append(
            {
                "theta_star": float(ts),
                "theta": theta,
                "k": k,
                "randomized": randomized,
                "relative_error": float(np.mean(errs)),
                "sum_phi_sq": plateau,
            }
        )
    return rows
