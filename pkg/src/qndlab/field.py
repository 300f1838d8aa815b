"""Photon-number distributions of the cavity field and their elementary statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "TruncationError",
    "PhotonDistribution",
    "CavityParams",
    "coherent_distribution",
    "flat_distribution",
    "fock_distribution",
    "mean_photon",
    "decayed_mean",
]

# Minimum Poisson mass a truncated coherent distribution must retain.
MIN_KEPT_MASS = 0.999


class TruncationError(ValueError):
    """A truncation bound drops too much probability mass."""


@dataclass
class PhotonDistribution:
    """Probability vector over photon numbers n = 0..n_max."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d vector")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1 within 1e-9")

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    @classmethod
    def from_weights(cls, weights) -> "PhotonDistribution":
        """Normalize a non-negative weight vector into a distribution."""
        w = np.asarray(weights, dtype=float)
        total = float(w.sum())
        if not math.isfinite(total) or total <= 0.0:
            raise ValueError("weights must have positive finite total mass")
        return cls(w / total)


@dataclass(frozen=True)
class CavityParams:
    """Damping time (s) and mean thermal photon number of the cavity."""

    damping_time: float
    thermal_occupancy: float = 0.0

    def __post_init__(self):
        if not self.damping_time > 0:
            raise ValueError("damping_time must be positive")
        if self.thermal_occupancy < 0:
            raise ValueError("thermal_occupancy must be non-negative")


def coherent_distribution(mean_n: float, n_max: int) -> PhotonDistribution:
    """Poissonian photon statistics of a coherent field, truncated at n_max.

    The residual tail mass beyond n_max is renormalized away; if the kept
    mass falls below 0.999 the truncation is rejected.
    """
    if mean_n < 0:
        raise ValueError("mean photon number must be non-negative")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if mean_n == 0:
        return fock_distribution(0, n_max)
    n = np.arange(n_max + 1)
    probs = np.exp(-mean_n + n * math.log(mean_n) - gammaln(n + 1))
    kept = float(probs.sum())
    if kept < MIN_KEPT_MASS:
        raise TruncationError(
            f"n_max={n_max} keeps only {kept:.4f} of the Poisson mass for mean {mean_n}"
        )
    return PhotonDistribution(probs / kept)


def flat_distribution(n_max: int) -> PhotonDistribution:
    """Uniform distribution over 0..n_max, the decoder's ignorance prior."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    return PhotonDistribution(np.full(n_max + 1, 1.0 / (n_max + 1)))


def fock_distribution(n: int, n_max: int | None = None) -> PhotonDistribution:
    """Unit mass at photon number n."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n_max is None:
        n_max = n
    if n > n_max:
        raise ValueError("n exceeds n_max")
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return PhotonDistribution(probs)


def mean_photon(dist: PhotonDistribution) -> float:
    """Mean photon number of a distribution."""
    return float(np.dot(np.arange(dist.probs.size), dist.probs))


def decayed_mean(mean_n: float, t: float, cavity: CavityParams) -> float:
    """Mean photon number of a coherent field after damping for a time t.

    The thermal floor is neglected, valid while thermal_occupancy is small
    against mean_n.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    return mean_n * math.exp(-t / cavity.damping_time)
