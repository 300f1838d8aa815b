"""Probe calibration: simulate spin-up fractions for a weak coherent field
and recover the seven fringe parameters from their multi-peaked
distributions.

Each batch freezes one photon number n drawn from a truncated Poisson law,
records `batch_size` spins at one detection angle, and keeps the fraction
found in j = 0. Over many batches the fractions cluster into one peak per
photon number, and a mixture likelihood over those peaks pins down offset,
contrast, shift per photon and the four angles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

from .probe import ProbeParams
from .simulate import SimConfig, outcome_zero_probability

__all__ = [
    "DegeneracyError",
    "CalibrationSamples",
    "CalibrationFit",
    "simulate_calibration_run",
    "fit_probe_params",
    "solve_peak_equations",
]

PARAM_NAMES = ("offset", "contrast", "shift_per_photon",
               "phase_a", "phase_b", "phase_c", "phase_d")

# Photon numbers resolved by the calibration field (tail above renormalized away).
CAL_N_MAX = 4

# Fitted contrast below this is treated as non-identifiable: the likelihood
# goes flat in the shift and angles as the contrast vanishes.
MIN_CONTRAST = 0.1


class DegeneracyError(RuntimeError):
    """The samples cannot identify the fringe parameters."""


@dataclass
class CalibrationSamples:
    """Per detection angle: list of (fraction of j = 0 outcomes, batch size)."""

    fractions: tuple[list[tuple[float, int]], ...]

    def __post_init__(self):
        if len(self.fractions) != 4:
            raise ValueError("samples must cover all four detection angles")
        for batches in self.fractions:
            for eta0, size in batches:
                if not 0 <= eta0 <= 1:
                    raise ValueError("fractions must lie in [0, 1]")
                if size < 1:
                    raise ValueError("batch sizes must be >= 1")

    def counts(self, phase_idx: int) -> tuple[np.ndarray, np.ndarray]:
        """(j = 0 counts, batch sizes) for one angle, as integer arrays."""
        batches = self.fractions[phase_idx]
        sizes = np.array([m for _, m in batches], dtype=int)
        counts = np.rint([eta0 * m for eta0, m in batches]).astype(int)
        return counts, sizes


@dataclass
class CalibrationFit:
    params: ProbeParams
    uncertainties: dict[str, float]
    objective: float


def truncated_poisson_weights(mean: float, n_max: int = CAL_N_MAX) -> np.ndarray:
    w = poisson.pmf(np.arange(n_max + 1), mean)
    return w / w.sum()


def simulate_calibration_run(
    config: SimConfig, batches: int, batch_size: int, n0_cal: float = 1.2
) -> CalibrationSamples:
    """Generate spin-up fractions: one frozen photon number per batch, angles
    cycled across batches, outcomes sampled in the config's outcome mode."""
    if batches < 1 or batch_size < 1:
        raise ValueError("batches and batch_size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    weights = truncated_poisson_weights(n0_cal)
    n_per_batch = rng.choice(CAL_N_MAX + 1, size=batches, p=weights)
    phase_per_batch = np.arange(batches) % 4

    p0 = np.array([
        outcome_zero_probability(config.probe, int(i), int(n), config.outcome_mode)
        for i, n in zip(phase_per_batch, n_per_batch)
    ])
    counts = rng.binomial(batch_size, p0)

    fractions: tuple[list[tuple[float, int]], ...] = ([], [], [], [])
    for i, c in zip(phase_per_batch, counts):
        fractions[i].append((float(c) / batch_size, batch_size))
    return CalibrationSamples(fractions)


def _peak_values(theta: np.ndarray, phase_idx: int) -> np.ndarray:
    """Model peak positions for n = 0..CAL_N_MAX at one detection angle."""
    offset, contrast, shift = theta[0], theta[1], theta[2]
    phi = theta[3 + phase_idx]
    n = np.arange(CAL_N_MAX + 1)
    return 0.5 * (offset + contrast * np.cos(n * shift - phi))


def _theta_violation(theta: np.ndarray) -> float:
    offset, contrast, shift = theta[0], theta[1], theta[2]
    v = 0.0
    v += max(0.0, 1e-6 - contrast)
    v += max(0.0, contrast - offset)
    v += max(0.0, offset + contrast - 2.0)
    v += max(0.0, 1e-6 - shift) + max(0.0, shift - math.pi / 2)
    for phi in theta[3:]:
        v += max(0.0, abs(phi) - math.pi)
    return v


class _MixtureNLL:
    """Negative log likelihood of the j = 0 counts under the peak mixture."""

    def __init__(self, samples: CalibrationSamples, n0_cal: float):
        self.log_weights = np.log(truncated_poisson_weights(n0_cal))
        self.data = []
        constant = 0.0
        for i in range(4):
            counts, sizes = samples.counts(i)
            self.data.append((counts, sizes))
            constant -= float(np.sum(
                gammaln(sizes + 1) - gammaln(counts + 1) - gammaln(sizes - counts + 1)
            ))
        self.constant = constant

    def phase_term(self, theta: np.ndarray, phase_idx: int) -> float:
        counts, sizes = self.data[phase_idx]
        if counts.size == 0:
            return 0.0
        mu = np.clip(_peak_values(theta, phase_idx), 1e-12, 1.0 - 1e-12)
        log_like = (
            self.log_weights[None, :]
            + counts[:, None] * np.log(mu)[None, :]
            + (sizes - counts)[:, None] * np.log1p(-mu)[None, :]
        )
        return -float(logsumexp(log_like, axis=1).sum())

    def __call__(self, theta: np.ndarray) -> float:
        violation = _theta_violation(theta)
        if violation > 0:
            return 1e15 * (1.0 + violation)
        return self.constant + sum(self.phase_term(theta, i) for i in range(4))


def _coarse_starts(nll: _MixtureNLL, samples: CalibrationSamples, n_starts: int = 3):
    """Grid over shift and per-angle phase cells, ranked by the mixture NLL."""
    all_eta = [eta for batches in samples.fractions for eta, _ in batches]
    lo, hi = min(all_eta), max(all_eta)
    offset0 = min(hi + lo, 2.0 - 1e-6)
    contrast0 = max(hi - lo, 1e-3)
    contrast0 = min(contrast0, offset0)

    shift_grid = np.linspace(0.05, 0.45, 17) * math.pi
    phi_grid = np.linspace(-math.pi + 1e-9, math.pi, 48)
    scored = []
    for shift in shift_grid:
        theta = np.empty(7)
        theta[:3] = offset0, contrast0, shift
        total = 0.0
        for i in range(4):
            best_phi, best_val = phi_grid[0], math.inf
            for phi in phi_grid:
                theta[3 + i] = phi
                val = nll.phase_term(theta, i)
                if val < best_val:
                    best_phi, best_val = phi, val
            theta[3 + i] = best_phi
            total += best_val
        scored.append((total, theta.copy()))
    scored.sort(key=lambda item: item[0])
    return [theta for _, theta in scored[:n_starts]]


def _hessian_standard_errors(nll: _MixtureNLL, theta: np.ndarray) -> dict[str, float]:
    """Standard errors from the observed information (central differences)."""
    k = theta.size
    h = 1e-4 * np.maximum(np.abs(theta), 0.05)
    hess = np.empty((k, k))
    f0 = nll(theta)
    for a in range(k):
        for b in range(a, k):
            ea = np.zeros(k); ea[a] = h[a]
            eb = np.zeros(k); eb[b] = h[b]
            if a == b:
                val = (nll(theta + ea) - 2 * f0 + nll(theta - ea)) / h[a] ** 2
            else:
                val = (
                    nll(theta + ea + eb) - nll(theta + ea - eb)
                    - nll(theta - ea + eb) + nll(theta - ea - eb)
                ) / (4 * h[a] * h[b])
            hess[a, b] = hess[b, a] = val
    try:
        cov = np.linalg.inv(hess)
        diag = np.diag(cov)
        if np.any(diag <= 0):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        warnings.warn("observed information not positive definite; "
                      "standard errors from pseudo-inverse", RuntimeWarning)
        diag = np.abs(np.diag(np.linalg.pinv(hess)))
    return dict(zip(PARAM_NAMES, np.sqrt(diag)))


def fit_probe_params(samples: CalibrationSamples, n0_cal: float = 1.2) -> CalibrationFit:
    """Maximum-likelihood fringe parameters from spin-up fraction samples.

    Multi-start: coarse grid over the shift and angles, then simplex
    refinement of the full seven-parameter vector from the best grid cells.
    Raises DegeneracyError when the fitted contrast is too small to pin the
    angles down, and warns when the optimum sits on a feasibility boundary.
    """
    if all(len(batches) == 0 for batches in samples.fractions):
        raise ValueError("samples are empty")
    nll = _MixtureNLL(samples, n0_cal)

    best = None
    for start in _coarse_starts(nll, samples):
        result = minimize(
            nll, start, method="Nelder-Mead",
            options={"fatol": 1e-8, "xatol": 1e-8, "maxfev": 10_000, "maxiter": 10_000},
        )
        if best is None or result.fun < best.fun:
            best = result
    theta = best.x

    if theta[1] < MIN_CONTRAST:
        raise DegeneracyError(
            f"fitted contrast {theta[1]:.3f} is below {MIN_CONTRAST}; "
            "shift and angles are not identifiable"
        )
    boundary_gap = min(
        theta[0] - theta[1], 2.0 - theta[0] - theta[1],
        theta[2], math.pi / 2 - theta[2],
        *(math.pi - abs(p) for p in theta[3:]),
    )
    if boundary_gap < 1e-4:
        warnings.warn("fit terminated at a feasibility boundary", RuntimeWarning)
    if not np.all(np.diff(theta[3:]) > 0):
        warnings.warn("fitted detection angles are not in increasing order", RuntimeWarning)

    params = ProbeParams(
        offset=float(theta[0]),
        contrast=float(theta[1]),
        shift_per_photon=float(theta[2]),
        phases=tuple(float(p) for p in theta[3:]),
    )
    return CalibrationFit(
        params=params,
        uncertainties=_hessian_standard_errors(nll, theta),
        objective=float(best.fun),
    )


def solve_peak_equations(peaks: np.ndarray) -> ProbeParams:
    """Recover the seven fringe parameters from noiseless peak positions.

    `peaks` has shape (4, CAL_N_MAX + 1): the j = 0 probability for each
    detection angle and photon number. Twenty equations in seven unknowns,
    solved by least squares; exact inputs give a zero residual.
    """
    peaks = np.asarray(peaks, dtype=float)
    if peaks.shape != (4, CAL_N_MAX + 1):
        raise ValueError(f"peaks must have shape (4, {CAL_N_MAX + 1})")

    def residuals(theta):
        return np.concatenate([
            _peak_values(theta, i) - peaks[i] for i in range(4)
        ])

    lo, hi = float(peaks.min()), float(peaks.max())
    offset0 = hi + lo
    contrast0 = max(hi - lo, 1e-3)
    best = None
    for shift0 in np.linspace(0.05, 0.45, 17) * math.pi:
        phi0 = []
        for i in range(4):
            grid = np.linspace(-math.pi + 1e-9, math.pi, 48)
            vals = [np.sum((
                0.5 * (offset0 + contrast0 * np.cos(np.arange(CAL_N_MAX + 1) * shift0 - phi))
                - peaks[i]) ** 2) for phi in grid]
            phi0.append(grid[int(np.argmin(vals))])
        x0 = np.array([offset0, contrast0, shift0, *phi0])
        result = least_squares(residuals, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or result.cost < best.cost:
            best = result
    theta = best.x
    return ProbeParams(
        offset=float(theta[0]),
        contrast=float(theta[1]),
        shift_per_photon=float(theta[2]),
        phases=tuple(float(p) for p in theta[3:]),
    )
