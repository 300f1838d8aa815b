"""Adaptive binary photon counting: halving phase shifts read n out bit by
bit, least significant bit first, with the minimum number of atoms."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["AdaptiveStage", "AdaptiveSchedule", "adaptive_phase_schedule", "adaptive_measure"]


@dataclass(frozen=True)
class AdaptiveStage:
    """One probe atom: its per-photon shift and the detection angle rule."""

    index: int
    shift_per_photon: float

    def detection_phase(self, bits: tuple[int, ...]) -> float:
        """Angle aligned with the photon number already pinned down by `bits`
        (least significant first)."""
        known = sum(b << m for m, b in enumerate(bits))
        return self.shift_per_photon * known


@dataclass(frozen=True)
class AdaptiveSchedule:
    n_max: int
    stages: tuple[AdaptiveStage, ...]


def adaptive_phase_schedule(n_max: int) -> AdaptiveSchedule:
    """Stages with shifts pi, pi/2, pi/4, ...; ceil(log2(n_max + 1)) of them."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    n_stages = 0 if n_max == 0 else (n_max).bit_length()
    stages = tuple(
        AdaptiveStage(index=m, shift_per_photon=math.pi / 2**m) for m in range(n_stages)
    )
    return AdaptiveSchedule(n_max=n_max, stages=stages)


def adaptive_measure(
    n_true: int, n_max: int, offset: float = 1.0, contrast: float = 1.0
) -> tuple[int, int]:
    """Run the schedule against a fixed photon number; returns (estimate, atoms used).

    Requires an ideal probe (offset = contrast = 1): every stage's outcome
    probability is then exactly 0 or 1 and each atom yields one bit.
    """
    if not 0 <= n_true <= n_max:
        raise ValueError("n_true must lie in 0..n_max")
    if offset != 1.0 or contrast != 1.0:
        raise ValueError("the deterministic readout requires an ideal probe")
    schedule = adaptive_phase_schedule(n_max)
    bits: tuple[int, ...] = ()
    for stage in schedule.stages:
        angle = n_true * stage.shift_per_photon - stage.detection_phase(bits)
        p_one = 0.5 * (1.0 - math.cos(angle))
        if p_one not in (0.0, 1.0):
            raise AssertionError(f"stage {stage.index} outcome is not deterministic: {p_one}")
        bits = bits + (int(p_one),)
    estimate = sum(b << m for m, b in enumerate(bits))
    return estimate, len(schedule.stages)
