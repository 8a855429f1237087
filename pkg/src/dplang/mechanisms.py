"""Exponential and Gaussian mechanisms."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from dplang import _kernels
from dplang.errors import CalibrationWarning, EmptyCandidates, InvalidDelta


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget; ``delta == 0`` means pure DP.

    Attributes:
        epsilon: Positive privacy loss (``math.inf`` allowed for non-private runs).
        delta: Failure probability in [0, 1).
    """

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_pure(self):
        return self.delta == 0


@dataclass(frozen=True)
class ScoreVector:
    """Candidate scores with a declared sensitivity.

    Attributes:
        scores: 1-D float array, one score per candidate.
        sensitivity: Positive sensitivity bound.
        kind: ``"per-coordinate"`` (exponential mechanism) or ``"euclidean"``.
    """

    scores: np.ndarray
    sensitivity: float
    kind: str = "per-coordinate"

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be > 0")
        if self.kind not in ("per-coordinate", "euclidean"):
            raise ValueError(f"unknown sensitivity kind {self.kind!r}")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.size


def _check_em(sv):
    if sv.kind != "per-coordinate":
        raise ValueError("the exponential mechanism needs a per-coordinate sensitivity")
    if sv.scores.size == 0:
        raise EmptyCandidates("no candidates to select from")


def em_scale(epsilon, sensitivity):
    """Exponent factor epsilon / (2 * sensitivity)."""
    return float(epsilon) / (2.0 * float(sensitivity))


def exp_mech_log_probs(sv, epsilon):
    """Log output probabilities of the exponential mechanism."""
    _check_em(sv)
    z = em_scale(epsilon, sv.sensitivity) * (sv.scores - sv.scores.max())
    return z - np.logaddexp.reduce(z)


def exp_mech_probs(sv, epsilon):
    """Exact output distribution p_i ∝ exp(epsilon * q_i / (2 * sensitivity)).

    Args:
        sv: Per-coordinate score vector.
        epsilon: Privacy parameter.

    Returns:
        Probability vector aligned with ``sv.scores``.
    """
    _check_em(sv)
    w = np.exp(em_scale(epsilon, sv.sensitivity) * (sv.scores - sv.scores.max()))
    return w / math.fsum(w)


def exp_mech_sample(sv, epsilon, rng):
    """Draw one candidate (zero-based) using a single uniform from ``rng``."""
    _check_em(sv)
    u = np.array([rng.random()])
    return int(_kernels.em_select(sv.scores[None, :], em_scale(epsilon, sv.sensitivity), u)[0])


def gaussian_sigma(delta2, epsilon, delta):
    """Noise scale (delta2 / epsilon) * sqrt(2 ln(1.25 / delta)).

    Args:
        delta2: Euclidean sensitivity.
        epsilon: Privacy parameter; values >= 1 trigger a CalibrationWarning.
        delta: Failure probability in (0, 1).

    Raises:
        InvalidDelta: delta outside (0, 1).
    """
    if not 0 < delta < 1:
        raise InvalidDelta(f"delta must lie in (0, 1), got {delta}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if epsilon >= 1:
        warnings.warn(
            f"Gaussian calibration at epsilon={epsilon} >= 1 is conservative "
            "(the classical guarantee covers epsilon < 1)",
            CalibrationWarning,
            stacklevel=2,
        )
    return (float(delta2) / float(epsilon)) * math.sqrt(2.0 * math.log(1.25 / delta))


def gaussian_noise(size, sigma, rng):
    """``size`` independent N(0, sigma^2) draws, one standard normal each."""
    return float(sigma) * rng.standard_normal(int(size))


def gaussian_perturb(values, sigma, rng):
    """Add independent N(0, sigma^2) noise to each coordinate of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    return values + gaussian_noise(values.size, sigma, rng).reshape(values.shape)
