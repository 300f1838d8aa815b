"""Atomic-clock probe likelihood and the physics fixing its phase shift per photon.

A two-level atom crossing the cavity picks up a photon-number dependent
phase; reading it out through a Ramsey interferometer at detection angle
phi gives outcome j = 0 or 1 with probability

    P(j | phi, n) = [offset + (1 - 2 j) * contrast * cos(n * shift - phi)] / 2

which is the fringe formula with the j = 1 branch written as a sign flip so
that the two outcomes sum to `offset` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProbeParams",
    "PhysicalParams",
    "PHASE_LABELS",
    "paper_probe_params",
    "ideal_probe_params",
    "conditional_probability",
    "phase_per_photon",
    "effective_interaction_time",
]

PHASE_LABELS = ("a", "b", "c", "d")


@dataclass(frozen=True)
class ProbeParams:
    """Fringe offset, contrast, phase shift per photon, and the four detection angles.

    The four angles (radians) are cycled a -> b -> c -> d, one per
    preparation pulse.
    """

    offset: float
    contrast: float
    shift_per_photon: float
    phases: tuple[float, float, float, float]

    def __post_init__(self):
        if not (0 <= self.contrast <= self.offset):
            raise ValueError("need 0 <= contrast <= offset")
        if self.offset + self.contrast > 2:
            raise ValueError("offset + contrast must not exceed 2")
        if not (0 < self.shift_per_photon <= math.pi):
            raise ValueError("shift_per_photon must lie in (0, pi]")
        phases = tuple(float(p) for p in self.phases)
        if len(phases) != 4:
            raise ValueError("exactly four detection phases required")
        if any(not (-math.pi < p <= math.pi) for p in phases):
            raise ValueError("phases must lie in (-pi, pi]")
        object.__setattr__(self, "phases", phases)


@dataclass(frozen=True)
class PhysicalParams:
    """Vacuum Rabi frequency, detuning (both rad/s), mode waist (m), atom velocity (m/s)."""

    rabi_frequency: float
    detuning: float
    mode_waist: float
    velocity: float

    def __post_init__(self):
        if self.rabi_frequency <= 0:
            raise ValueError("rabi_frequency must be positive")
        if self.detuning == 0:
            raise ValueError("detuning must be nonzero")
        if self.mode_waist < 0:
            raise ValueError("mode_waist must be non-negative")
        if self.velocity <= 0:
            raise ValueError("velocity must be positive")


def paper_probe_params() -> ProbeParams:
    """Calibrated operating point used throughout the default configuration."""
    return ProbeParams(
        offset=0.907,
        contrast=0.674,
        shift_per_photon=0.233 * math.pi,
        phases=(-0.464 * math.pi, -0.229 * math.pi, -0.015 * math.pi, 0.261 * math.pi),
    )


def ideal_probe_params(q: int = 4) -> ProbeParams:
    """Lossless probe with shift pi/q and angles at -pi/2, -pi/4, 0, pi/4."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    return ProbeParams(
        offset=1.0,
        contrast=1.0,
        shift_per_photon=math.pi / q,
        phases=(-math.pi / 2, -math.pi / 4, 0.0, math.pi / 4),
    )


def conditional_probability(params: ProbeParams, j: int, phase: float, n):
    """Probability of outcome j at detection angle `phase` given n photons.

    `n` may be a scalar or an array, and need not be an integer: profile
    curves evaluate the same fringe formula on a continuous grid.
    """
    if j not in (0, 1):
        raise ValueError("outcome j must be 0 or 1")
    sign = 1.0 - 2.0 * j
    c = np.cos(np.asarray(n, dtype=float) * params.shift_per_photon - phase)
    value = 0.5 * (params.offset + sign * params.contrast * c)
    if np.ndim(n) == 0:
        return float(value)
    return value


def phase_per_photon(phys: PhysicalParams, t_eff: float) -> float:
    """Dispersive clock shift per photon for an effective interaction time t_eff."""
    return phys.rabi_frequency**2 * t_eff / (2.0 * phys.detuning)


def effective_interaction_time(phys: PhysicalParams) -> float:
    """Gaussian-mode crossing time, sqrt(pi/2) * waist / velocity."""
    return math.sqrt(math.pi / 2.0) * phys.mode_waist / phys.velocity
