"""Ensemble statistics: reconstructed photon-number histograms, Poisson peak
fits, staircase extraction, dwell times and jump-detection latencies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .decoder import EstimateTrace
from .field import CavityParams
from .simulate import TruthEvent, jump_rates

__all__ = [
    "MeanHistogram",
    "PoissonPeakFit",
    "Staircase",
    "Step",
    "DwellStats",
    "JumpLatencies",
    "ensemble_histogram",
    "fit_poisson_peaks",
    "extract_staircase",
    "dwell_statistics",
    "truth_dwells",
    "staircase_dwells",
    "jump_latency",
]

# Alias terms kept when folding a Poisson law modulo the decoder period.
_FOLD_TERMS = 6


@dataclass
class MeanHistogram:
    """Histogram of decoded mean photon numbers, binned so integers fall at
    bin centers."""

    bin_width: float
    centers: np.ndarray
    masses: np.ndarray
    total_count: int

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([self.centers - self.bin_width / 2,
                               [self.centers[-1] + self.bin_width / 2]])

    def integer_bins(self) -> np.ndarray:
        """Indices of the bins centered on integer photon numbers."""
        per_unit = round(1.0 / self.bin_width)
        return np.arange(0, self.centers.size, per_unit)


@dataclass
class PoissonPeakFit:
    """Poisson law fitted to the integer peaks of a mean-photon histogram.

    The decoder reads photon numbers modulo a period (8 by default), so the
    fit maximizes the likelihood of the peak masses under the folded law
    q(n) = sum_m p_lambda(n + m * fold). lambda_hat is the mean of the
    unfolded law; the weighted mean of the observed peaks is lower because
    aliased events are folded down.
    """

    lambda_hat: float
    background_fraction: float
    peak_masses: np.ndarray
    fold: int

    @property
    def converged_mass(self) -> float:
        return float(self.peak_masses.sum())

    def predicted_peaks(self, folded: bool = False) -> np.ndarray:
        """Peak masses the fit implies: converged mass times the (optionally
        folded) Poisson law."""
        n = np.arange(self.peak_masses.size)
        if folded:
            shape = _folded_pmf(self.lambda_hat, self.peak_masses.size, self.fold)
        else:
            shape = poisson.pmf(n, self.lambda_hat)
        return self.converged_mass * shape

    def alias_excess(self) -> np.ndarray:
        """Observed peak masses minus the unfolded prediction; positive where
        aliased events pile up."""
        return self.peak_masses - self.predicted_peaks(folded=False)


@dataclass(frozen=True)
class Step:
    level: int
    t_start: float
    t_end: float


@dataclass
class Staircase:
    """Piecewise-constant decoded photon number: contiguous, time-ordered
    steps with distinct consecutive levels."""

    steps: list[Step] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class DwellStats:
    level: int
    count: int
    mean_dwell: float
    expected_lifetime: float


@dataclass
class JumpLatencies:
    """Decoded-step detection delays relative to matching truth jumps."""

    latencies: list[float]
    unmatched: list[float]


def ensemble_histogram(estimates, bin_width: float = 0.2, n_max: int = 7) -> MeanHistogram:
    """Bin final mean-photon estimates into integer-centered bins of the given
    width covering [-bin_width/2, n_max + bin_width/2]."""
    est = np.asarray(list(estimates), dtype=float)
    if est.size == 0:
        raise ValueError("estimates must be non-empty")
    per_unit = round(1.0 / bin_width)
    if per_unit < 1 or abs(per_unit * bin_width - 1.0) > 1e-9:
        raise ValueError("bin_width must divide 1 so integers land at bin centers")
    n_bins = n_max * per_unit + 1
    idx = np.floor(est / bin_width + 0.5).astype(int)
    if idx.min() < 0 or idx.max() >= n_bins:
        raise ValueError(f"estimates must lie within [0, {n_max}] up to half a bin")
    counts = np.bincount(idx, minlength=n_bins)
    return MeanHistogram(
        bin_width=bin_width,
        centers=np.arange(n_bins) * bin_width,
        masses=counts / counts.sum(),
        total_count=int(est.size),
    )


def _folded_pmf(lam: float, period: int, fold: int) -> np.ndarray:
    n = np.arange(period)
    terms = [poisson.pmf(n + m * fold, lam) for m in range(_FOLD_TERMS)]
    return np.sum(terms, axis=0)


def fit_poisson_peaks(hist: MeanHistogram, fold: int = 8) -> PoissonPeakFit:
    """Fit the integer peaks to a Poisson law folded modulo `fold`.

    The maximum-likelihood mean is found by expectation-maximization: each
    peak's mass is attributed to the alias ladder n, n+fold, ... in
    proportion to the current law, and lambda is re-estimated as the
    weighted mean of the completed photon numbers. On peaks that are exactly
    a (folded) Poisson law this recovers its mean to machine precision.
    """
    peaks = hist.masses[hist.integer_bins()].copy()
    total = float(peaks.sum())
    if total <= 0:
        raise ValueError("zero total peak mass: nothing to fit")
    weights = peaks / total
    n = np.arange(peaks.size)

    lam = float(np.dot(n, weights))
    if lam > 0:
        ladder = n[None, :] + fold * np.arange(_FOLD_TERMS)[:, None]
        for _ in range(500):
            pmf = poisson.pmf(ladder, lam)
            denom = pmf.sum(axis=0)
            completed = (ladder * pmf).sum(axis=0) / np.where(denom > 0, denom, 1.0)
            new_lam = float(np.dot(weights, completed))
            if abs(new_lam - lam) <= 1e-13 * max(1.0, lam):
                lam = new_lam
                break
            lam = new_lam

    return PoissonPeakFit(
        lambda_hat=lam,
        background_fraction=1.0 - total,
        peak_masses=peaks,
        fold=fold,
    )


def extract_staircase(
    trace: EstimateTrace, stability: int = 20, min_prob: float = 0.8
) -> Staircase:
    """Quantize a sliding-estimate trace into steps.

    A level is entered once round(mean_n) holds the same value for
    `stability` consecutive samples that all carry max_prob >= min_prob;
    the step boundary sits at the first sample of that stable run.
    """
    if stability < 1:
        raise ValueError("stability must be >= 1")
    if len(trace) == 0:
        return Staircase()

    levels = np.floor(trace.mean_n + 0.5).astype(int)
    levels[trace.max_prob < min_prob] = -1

    # Maximal runs of identical candidate levels.
    change = np.flatnonzero(np.diff(levels) != 0) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [levels.size]]))

    entered: list[tuple[int, int]] = []  # (level, first sample index)
    for start, length in zip(starts, lengths):
        level = levels[start]
        if level < 0 or length < stability:
            continue
        if entered and entered[-1][0] == level:
            continue
        entered.append((int(level), int(start)))

    steps = []
    for i, (level, start) in enumerate(entered):
        t_start = float(trace.t[start])
        t_end = float(trace.t[entered[i + 1][1]] if i + 1 < len(entered) else trace.t[-1])
        steps.append(Step(level, t_start, t_end))
    return Staircase(steps)


def truth_dwells(truth: list[TruthEvent]) -> dict[int, list[float]]:
    """Complete dwell intervals per level from a jump log, excluding the
    first (initial-draw) and last (cut off by the run end) intervals."""
    dwells: dict[int, list[float]] = {}
    for prev, nxt in zip(truth[1:], truth[2:]):
        dwells.setdefault(prev.n_after, []).append(nxt.t - prev.t)
    return dwells


def staircase_dwells(stairs: Staircase) -> dict[int, list[float]]:
    """Complete dwell intervals per level from a decoded staircase, excluding
    the censored first and last steps."""
    dwells: dict[int, list[float]] = {}
    for step in stairs.steps[1:-1]:
        dwells.setdefault(step.level, []).append(step.t_end - step.t_start)
    return dwells


def dwell_statistics(sources, cavity: CavityParams) -> dict[int, DwellStats]:
    """Per-level mean dwell versus the theoretical lifetime.

    `sources` is a list of truth logs (lists of TruthEvent) and/or decoded
    Staircase objects; censored first/last intervals are excluded either way.
    """
    pooled: dict[int, list[float]] = {}
    for source in sources:
        per = staircase_dwells(source) if isinstance(source, Staircase) else truth_dwells(source)
        for level, intervals in per.items():
            pooled.setdefault(level, []).extend(intervals)

    stats = {}
    for level in sorted(pooled):
        intervals = pooled[level]
        down, up = jump_rates(level, cavity)
        total = down + up
        expected = 1.0 / total if total > 0 else math.inf
        stats[level] = DwellStats(
            level=level,
            count=len(intervals),
            mean_dwell=float(np.mean(intervals)),
            expected_lifetime=expected,
        )
    return stats


def jump_latency(
    stairs: Staircase, truth: list[TruthEvent], fold: int | None = None
) -> JumpLatencies:
    """Delay between each decoded downward step and the nearest preceding
    truth jump of the same transition.

    With `fold` set, levels are compared modulo it, so a decoder reading
    photon numbers modulo 8 matches a truth jump 8 -> 7 decoded as 0 -> 7.
    Down steps with no preceding matching jump are reported in `unmatched`.
    """
    def down_transition(prev: int, nxt: int) -> bool:
        if fold is None:
            return prev - nxt == 1
        return (prev - nxt) % fold == 1

    truth_jumps = []
    for prev, nxt in zip(truth, truth[1:]):
        if prev.n_after - nxt.n_after == 1:
            truth_jumps.append((nxt.t, prev.n_after, nxt.n_after))

    latencies: list[float] = []
    unmatched: list[float] = []
    for prev_step, next_step in zip(stairs.steps, stairs.steps[1:]):
        if not down_transition(prev_step.level, next_step.level):
            continue
        boundary = next_step.t_start
        best = None
        for t_jump, from_n, to_n in truth_jumps:
            if t_jump > boundary:
                break
            if fold is None:
                match = (from_n, to_n) == (prev_step.level, next_step.level)
            else:
                match = (from_n % fold, to_n % fold) == (
                    prev_step.level % fold,
                    next_step.level % fold,
                )
            if match:
                best = t_jump
        if best is None:
            unmatched.append(boundary)
        else:
            latencies.append(boundary - best)
    return JumpLatencies(latencies=latencies, unmatched=unmatched)
