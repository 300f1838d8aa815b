"""Bayesian decimation decoder.

Each detected atom multiplies the photon-number distribution by its outcome
likelihood and renormalizes. Long products are accumulated in the log
domain with an explicit mask for exact zeros, because an ideal probe
(offset = contrast = 1) genuinely forbids some outcomes and the resulting
decimation must stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import PhotonDistribution
from .probe import ProbeParams, conditional_probability

__all__ = [
    "ImpossibleRecordError",
    "DetectionRecord",
    "LogAccumulator",
    "ProfileCurve",
    "EstimateTrace",
    "ConvergenceStatus",
    "likelihood_matrix",
    "bayes_update",
    "batch_posterior",
    "product_profile",
    "sliding_estimates",
    "posterior_evolution",
    "convergence_status",
]


class ImpossibleRecordError(ValueError):
    """Every photon number has zero likelihood: the data contradict the model."""


@dataclass(frozen=True)
class DetectionRecord:
    """One detected atom: sequence id, 1-based index k, time, phase index, outcome.

    truth_n carries the simulator's ground-truth photon number and is absent
    (None) for real data.
    """

    seq_id: int
    k: int
    t: float
    phase: int
    outcome: int
    truth_n: int | None = None

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError("outcome must be 0 or 1")
        if not 0 <= self.phase <= 3:
            raise ValueError("phase index must lie in 0..3")
        if self.k < 1:
            raise ValueError("atom index k must be >= 1")
        if self.t < 0:
            raise ValueError("detection time must be non-negative")
        if self.truth_n is not None and self.truth_n < 0:
            raise ValueError("truth_n must be non-negative")


@dataclass
class LogAccumulator:
    """Accumulated log likelihood product per photon number, with exact zeros masked.

    A masked entry contributes probability exactly 0 regardless of its
    log weight.
    """

    log_weights: np.ndarray
    zero_mask: np.ndarray

    def posterior(self, prior: PhotonDistribution) -> PhotonDistribution:
        """Combine the accumulated product with a prior and renormalize."""
        valid = ~self.zero_mask & (prior.probs > 0)
        if not np.any(valid):
            raise ImpossibleRecordError("impossible record stream: posterior vanishes everywhere")
        log_post = np.full(prior.probs.size, -np.inf)
        log_post[valid] = np.log(prior.probs[valid]) + self.log_weights[valid]
        shift = log_post[valid].max()
        post = np.zeros(prior.probs.size)
        post[valid] = np.exp(log_post[valid] - shift)
        return PhotonDistribution.from_weights(post)


@dataclass
class ProfileCurve:
    """Likelihood product on a continuous photon-number grid, integral-normalized.

    The grid covers one alias period [0, span) with uniform step; the
    normalizing integral is the periodic trapezoid step * sum(values).
    """

    grid: np.ndarray
    values: np.ndarray
    step: float


@dataclass
class EstimateTrace:
    """Time series of posterior summaries: (t, mean_n, max_prob, argmax_n)."""

    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_n: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_prob: np.ndarray = field(default_factory=lambda: np.empty(0))
    argmax_n: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __len__(self) -> int:
        return self.t.size


@dataclass(frozen=True)
class ConvergenceStatus:
    converged: bool
    n_star: int | None
    satellite_ratio: float


def likelihood_matrix(params: ProbeParams, records, n_values) -> np.ndarray:
    """Per-record outcome likelihoods, shape (len(records), len(n_values))."""
    n_values = np.asarray(n_values, dtype=float)
    phases = np.array([params.phases[r.phase] for r in records])
    signs = np.array([1.0 - 2.0 * r.outcome for r in records])
    angles = n_values[None, :] * params.shift_per_photon - phases[:, None]
    return 0.5 * (params.offset + signs[:, None] * params.contrast * np.cos(angles))


def bayes_update(
    prior: PhotonDistribution, params: ProbeParams, rec: DetectionRecord
) -> PhotonDistribution:
    """Single-atom update: posterior proportional to prior times outcome likelihood."""
    n = np.arange(prior.probs.size)
    w = conditional_probability(params, rec.outcome, params.phases[rec.phase], n)
    post = prior.probs * w
    total = float(post.sum())
    if total <= 0.0:
        raise ImpossibleRecordError(
            f"impossible record (seq {rec.seq_id}, k {rec.k}): all posterior weights vanish"
        )
    return PhotonDistribution(post / total)


def _accumulate(params: ProbeParams, records, n_values) -> LogAccumulator:
    size = len(n_values)
    if not records:
        return LogAccumulator(np.zeros(size), np.zeros(size, dtype=bool))
    w = likelihood_matrix(params, records, n_values)
    zero_mask = np.any(w <= 0.0, axis=0)
    log_w = np.log(np.where(w > 0.0, w, 1.0)).sum(axis=0)
    return LogAccumulator(log_w, zero_mask)


def batch_posterior(
    prior: PhotonDistribution, params: ProbeParams, records
) -> tuple[PhotonDistribution, LogAccumulator]:
    """Whole-sequence product posterior and its raw log-domain accumulator.

    Equivalent to folding bayes_update over the records, but immune to
    underflow for long sequences.
    """
    acc = _accumulate(params, records, np.arange(prior.probs.size))
    return acc.posterior(prior), acc


def product_profile(
    params: ProbeParams, records, step: float, span: float = 8.0
) -> ProfileCurve:
    """Likelihood product as a function of n treated as continuous on [0, span).

    The step must divide `span` evenly. Values are normalized so the
    periodic trapezoidal integral equals 1; with no records the curve is
    the constant 1/span.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    count = round(span / step)
    if count < 1 or abs(count * step - span) > 1e-9 * span:
        raise ValueError("step must divide the grid span evenly")
    grid = np.arange(count) * step
    acc = _accumulate(params, records, grid)
    values = np.zeros(count)
    valid = ~acc.zero_mask
    if not np.any(valid):
        raise ImpossibleRecordError("impossible record stream: profile vanishes everywhere")
    shift = acc.log_weights[valid].max()
    values[valid] = np.exp(acc.log_weights[valid] - shift)
    values /= step * values.sum()
    return ProfileCurve(grid=grid, values=values, step=step)


def _window_summaries(log_w, zero_counts, prior_probs, times, starts, ends):
    """Posterior summaries for windows [starts[i], ends[i]) of precomputed cumsums."""
    n_states = prior_probs.size
    log_prior = np.full(n_states, -np.inf)
    pos = prior_probs > 0
    log_prior[pos] = np.log(prior_probs[pos])

    sums = log_w[ends] - log_w[starts]
    zeros = zero_counts[ends] - zero_counts[starts]
    log_post = log_prior[None, :] + sums
    log_post[zeros > 0] = -np.inf

    keep = np.any(np.isfinite(log_post), axis=1)
    log_post = log_post[keep]
    shift = log_post.max(axis=1, keepdims=True)
    post = np.exp(log_post - shift)
    post /= post.sum(axis=1, keepdims=True)

    n = np.arange(n_states)
    return EstimateTrace(
        t=times[keep],
        mean_n=post @ n,
        max_prob=post.max(axis=1),
        argmax_n=post.argmax(axis=1),
    ), keep


def _cumulative_logs(params, records, n_states):
    w = likelihood_matrix(params, records, np.arange(n_states))
    log_w = np.zeros((len(records) + 1, n_states))
    np.cumsum(np.log(np.where(w > 0.0, w, 1.0)), axis=0, out=log_w[1:])
    zero_counts = np.zeros((len(records) + 1, n_states), dtype=int)
    np.cumsum(w <= 0.0, axis=0, out=zero_counts[1:])
    return log_w, zero_counts


def sliding_estimates(
    records, params: ProbeParams, window: int, prior: PhotonDistribution
) -> EstimateTrace:
    """Fixed-width sliding decoder: for every k >= window, the posterior over
    records k-window+1..k restarted from `prior`, summarized as
    (t_k, mean, max prob, argmax).

    Fewer records than the window yields an empty trace. Windows whose
    posterior vanishes everywhere (possible when an ideal probe straddles a
    quantum jump) are skipped.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(records) < window:
        return EstimateTrace()
    log_w, zero_counts = _cumulative_logs(params, records, prior.probs.size)
    ends = np.arange(window, len(records) + 1)
    starts = ends - window
    times = np.array([r.t for r in records])[ends - 1]
    trace, _ = _window_summaries(log_w, zero_counts, prior.probs, times, starts, ends)
    return trace


def posterior_evolution(
    prior: PhotonDistribution, params: ProbeParams, records
) -> EstimateTrace:
    """Growing-prefix posteriors: one summary after each atom k = 1..N."""
    if not records:
        return EstimateTrace()
    log_w, zero_counts = _cumulative_logs(params, records, prior.probs.size)
    ends = np.arange(1, len(records) + 1)
    starts = np.zeros_like(ends)
    times = np.array([r.t for r in records])
    trace, _ = _window_summaries(log_w, zero_counts, prior.probs, times, starts, ends)
    return trace


def convergence_status(dist: PhotonDistribution, threshold: float = 0.95) -> ConvergenceStatus:
    """Classify a distribution as collapsed onto one photon number or not.

    satellite_ratio is the second-largest probability over the largest,
    quantifying the residual competing peak.
    """
    n_states = dist.probs.size
    if not (1.0 / n_states < threshold <= 1.0):
        raise ValueError("threshold must lie in (1/(n_max+1), 1]")
    order = np.argsort(dist.probs, kind="stable")
    top = int(order[-1])
    largest = float(dist.probs[top])
    second = float(dist.probs[order[-2]]) if n_states > 1 else 0.0
    # argsort leaves the smallest index last among ties only by chance; enforce
    # the smallest-n tie break explicitly.
    ties = np.flatnonzero(dist.probs == largest)
    top = int(ties[0])
    if largest >= threshold:
        return ConvergenceStatus(True, top, second / largest)
    return ConvergenceStatus(False, None, second / largest)
