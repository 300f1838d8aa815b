"""Ground-truth generator: a birth-death jump process for the cavity photon
number, interleaved with pulsed atomic probes sampled from the fringe
likelihood.

Each sequence is driven by its own generator seeded from
(master seed, sequence id), so ensembles are reproducible and order
independent. Within a sequence the draw order is fixed: initial photon
number, then the jump trajectory, then pulse occupancies, then outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decoder import DetectionRecord
from .field import CavityParams, coherent_distribution
from .probe import ProbeParams, paper_probe_params

__all__ = [
    "BeamParams",
    "SimConfig",
    "TruthEvent",
    "OUTCOME_MODES",
    "paper_beam_params",
    "paper_sim_config",
    "jump_rates",
    "sample_pulse_occupancy",
    "outcome_zero_probability",
    "sample_outcome",
    "simulate_truth",
    "simulate_sequence",
    "simulate_ensemble",
    "sequence_rng",
]

OUTCOME_MODES = ("matched", "offset")


@dataclass(frozen=True)
class BeamParams:
    """Pulsed atom source: pulse rate (1/s), mean atoms prepared per pulse,
    and per-atom detection probability."""

    pulse_rate: float
    mean_prepared: float
    efficiency: float

    def __post_init__(self):
        if self.pulse_rate <= 0:
            raise ValueError("pulse_rate must be positive")
        if self.mean_prepared < 0:
            raise ValueError("mean_prepared must be non-negative")
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulated sequence depends on.

    outcome_mode picks how the two-outcome likelihoods (which sum to the
    fringe offset, not to 1) are turned into sampling probabilities:
    "matched" divides by the offset so sampling is exactly proportional to
    the decoder likelihood; "offset" uses P(j=0) as written and gives j=1
    the complement, a deliberately asymmetric detector.

    initial_fock, when set, overrides the coherent initial draw with a
    fixed photon number.
    """

    initial_mean: float
    cavity: CavityParams
    probe: ProbeParams
    beam: BeamParams
    duration: float
    seed: int
    n_max_sim: int = 15
    outcome_mode: str = "matched"
    initial_fock: int | None = None

    def __post_init__(self):
        if self.initial_mean < 0:
            raise ValueError("initial_mean must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.n_max_sim < 8:
            raise ValueError("n_max_sim must be >= 8")
        if self.outcome_mode not in OUTCOME_MODES:
            raise ValueError(f"outcome_mode must be one of {OUTCOME_MODES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit non-negative integer")
        if self.initial_fock is not None and not 0 <= self.initial_fock <= self.n_max_sim:
            raise ValueError("initial_fock must lie in 0..n_max_sim")


@dataclass(frozen=True)
class TruthEvent:
    """Photon number n_after holding from time t onward; the first event at
    t = 0 records the initial draw."""

    t: float
    n_after: int


def paper_beam_params() -> BeamParams:
    return BeamParams(pulse_rate=1.4e4, mean_prepared=0.6, efficiency=0.5)


def paper_sim_config(duration: float = 0.05, seed: int = 0) -> SimConfig:
    """Default operating point: n0 = 3.82 coherent field in a 0.130 s cavity
    at 0.05 thermal occupancy, probed at the calibrated fringe values."""
    return SimConfig(
        initial_mean=3.82,
        cavity=CavityParams(damping_time=0.130, thermal_occupancy=0.05),
        probe=paper_probe_params(),
        beam=paper_beam_params(),
        duration=duration,
        seed=seed,
    )


def sequence_rng(seed: int, seq_id: int) -> np.random.Generator:
    """Independent, reproducible stream for one sequence of an ensemble."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, seq_id)))


def jump_rates(n: int, cavity: CavityParams) -> tuple[float, float]:
    """Downward and upward jump rates at photon number n.

    down = n (1 + n_t) / T_c and up = (n + 1) n_t / T_c, so the total rate
    inverts to the thermally shortened lifetime T_c / [n + n_t (2 n + 1)].
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    nt = cavity.thermal_occupancy
    tc = cavity.damping_time
    return n * (1.0 + nt) / tc, (n + 1) * nt / tc


def sample_pulse_occupancy(beam: BeamParams, rng: np.random.Generator) -> tuple[int, int]:
    """Atoms prepared (Poisson) and detected (independent thinning) in one pulse."""
    prepared = int(rng.poisson(beam.mean_prepared))
    detected = int(rng.binomial(prepared, beam.efficiency)) if prepared else 0
    return prepared, detected


def outcome_zero_probability(probe: ProbeParams, phase_idx: int, n: int, mode: str) -> float:
    """Sampling probability of outcome j = 0 for the given truth photon number."""
    angle = n * probe.shift_per_photon - probe.phases[phase_idx]
    p0 = 0.5 * (probe.offset + probe.contrast * math.cos(angle))
    if mode == "matched":
        if probe.offset == 0:
            raise ValueError("matched mode requires a nonzero fringe offset")
        return p0 / probe.offset
    if mode == "offset":
        return p0
    raise ValueError(f"outcome_mode must be one of {OUTCOME_MODES}")


def sample_outcome(
    probe: ProbeParams, phase_idx: int, n_true: int, mode: str, rng: np.random.Generator
) -> int:
    """Draw one spin reading for an atom crossing a field of n_true photons."""
    return 0 if rng.random() < outcome_zero_probability(probe, phase_idx, n_true, mode) else 1


def simulate_truth(config: SimConfig, rng: np.random.Generator) -> list[TruthEvent]:
    """Jump trajectory of the photon number over [0, duration].

    Competing exponential clocks: at level n the next event time is
    exponential with the total rate and the direction is chosen down with
    probability down/(down + up). The level is capped at n_max_sim.
    """
    if config.initial_fock is not None:
        n = config.initial_fock
    else:
        probs = coherent_distribution(config.initial_mean, config.n_max_sim).probs
        n = int(rng.choice(config.n_max_sim + 1, p=probs))
    events = [TruthEvent(0.0, n)]
    t = 0.0
    while True:
        down, up = jump_rates(n, config.cavity)
        if n >= config.n_max_sim:
            up = 0.0
        total = down + up
        if total == 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t > config.duration:
            break
        n = n - 1 if rng.random() < down / total else n + 1
        events.append(TruthEvent(t, n))
    return events


def _truth_at(truth: list[TruthEvent], times: np.ndarray) -> np.ndarray:
    event_times = np.array([e.t for e in truth])
    levels = np.array([e.n_after for e in truth])
    idx = np.searchsorted(event_times, times, side="right") - 1
    return levels[idx]


def simulate_sequence(
    config: SimConfig, seq_id: int = 0
) -> tuple[list[DetectionRecord], list[TruthEvent]]:
    """One detection sequence plus its ground-truth jump log.

    Pulses fire at fixed intervals 1/pulse_rate starting one interval in;
    the detection angle cycles a -> b -> c -> d with the pulse index whether
    or not any atom is detected. Every detected atom in a pulse is sampled
    independently against the current truth photon number and shares the
    pulse's time stamp and angle. Atoms never change the photon number.
    """
    rng = sequence_rng(config.seed, seq_id)
    truth = simulate_truth(config, rng)

    n_pulses = int(math.floor(config.duration * config.beam.pulse_rate + 1e-9))
    if n_pulses == 0:
        return [], truth
    pulse_times = np.arange(1, n_pulses + 1) / config.beam.pulse_rate

    prepared = rng.poisson(config.beam.mean_prepared, n_pulses)
    detected = rng.binomial(prepared, config.beam.efficiency)

    occupied = np.flatnonzero(detected)
    atom_pulse = np.repeat(occupied, detected[occupied])
    truth_n = _truth_at(truth, pulse_times[atom_pulse])
    phases = atom_pulse % 4

    angles = truth_n * config.probe.shift_per_photon - np.array(config.probe.phases)[phases]
    p0 = 0.5 * (config.probe.offset + config.probe.contrast * np.cos(angles))
    if config.outcome_mode == "matched":
        p0 = p0 / config.probe.offset
    outcomes = (rng.random(atom_pulse.size) >= p0).astype(int)

    records = [
        DetectionRecord(
            seq_id=seq_id,
            k=i + 1,
            t=float(pulse_times[atom_pulse[i]]),
            phase=int(phases[i]),
            outcome=int(outcomes[i]),
            truth_n=int(truth_n[i]),
        )
        for i in range(atom_pulse.size)
    ]
    return records, truth


def simulate_ensemble(config: SimConfig, n_sequences: int):
    """Yield (seq_id, records, truth) for seq_id = 0..n_sequences-1."""
    for seq_id in range(n_sequences):
        records, truth = simulate_sequence(config, seq_id)
        yield seq_id, records, truth
