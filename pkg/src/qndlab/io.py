"""Serialization and run configuration.

Record streams are line-delimited JSON, one object per line, with the field
set {seq, k, t, i, j, truth_n?}; truth logs use {seq, t, n}. Lines starting
with '#' are comments and carry run metadata (config hash, seed). A flat
CSV rendering of the same fields is provided for spreadsheet use. All
writes are atomic: files appear complete or not at all.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

from .decoder import DetectionRecord
from .field import CavityParams
from .probe import ProbeParams, paper_probe_params
from .simulate import BeamParams, SimConfig, TruthEvent, paper_beam_params

__all__ = [
    "RecordFormatError",
    "ConfigError",
    "RunConfig",
    "default_config",
    "load_config",
    "save_config",
    "config_hash",
    "atomic_write",
    "format_records",
    "format_records_csv",
    "format_truth",
    "parse_record_stream",
    "parse_truth_stream",
    "read_records",
    "read_truth",
]

RECORD_FIELDS = ("seq", "k", "t", "i", "j", "truth_n")


class RecordFormatError(ValueError):
    """A malformed or out-of-order line in a record stream."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(ValueError):
    """An invalid or unknown entry in a run configuration."""


@dataclass
class RunConfig:
    """Simulation settings plus decoder and analysis knobs.

    Angles are radians. Defaults reproduce the reference operating point, so
    an empty configuration file is a valid complete run description.
    """

    initial_mean: float = 3.82
    initial_fock: int | None = None
    damping_time: float = 0.130
    thermal_occupancy: float = 0.05
    probe: ProbeParams = field(default_factory=paper_probe_params)
    beam: BeamParams = field(default_factory=paper_beam_params)
    n_max_sim: int = 15
    duration: float = 0.05
    outcome_mode: str = "matched"
    seed: int = 1
    window: int = 110
    decoder_n_max: int = 7
    profile_step: float = 0.01
    convergence_threshold: float = 0.95
    stability: int = 20
    min_step_prob: float = 0.8
    bin_width: float = 0.2
    out_dir: str | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.decoder_n_max < 0:
            raise ConfigError("decoder_n_max must be >= 0")
        if self.profile_step <= 0:
            raise ConfigError("profile_step must be positive")
        if not 0 < self.convergence_threshold <= 1:
            raise ConfigError("convergence_threshold must lie in (0, 1]")
        try:
            self.sim_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def sim_config(self) -> SimConfig:
        return SimConfig(
            initial_mean=self.initial_mean,
            cavity=CavityParams(self.damping_time, self.thermal_occupancy),
            probe=self.probe,
            beam=self.beam,
            duration=self.duration,
            seed=self.seed,
            n_max_sim=self.n_max_sim,
            outcome_mode=self.outcome_mode,
            initial_fock=self.initial_fock,
        )

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["probe"]["phases"] = list(data["probe"]["phases"])
        return data


def _from_dict(data: dict) -> RunConfig:
    data = dict(data)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "probe" in data:
        probe = dict(data["probe"])
        if "phases" in probe:
            probe["phases"] = tuple(probe["phases"])
        try:
            data["probe"] = ProbeParams(**probe)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"probe: {exc}") from exc
    if "beam" in data:
        try:
            data["beam"] = BeamParams(**data["beam"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"beam: {exc}") from exc
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def default_config() -> RunConfig:
    return RunConfig()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return _from_dict(data)


def save_config(path, config: RunConfig) -> None:
    atomic_write(path, json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def config_hash(config: RunConfig) -> str:
    """Stable digest of the resolved configuration, stamped into every output."""
    payload = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_line(meta: dict | None) -> str:
    if not meta:
        return ""
    parts = " ".join(f"{key}={meta[key]}" for key in sorted(meta))
    return f"# {parts}\n"


def format_records(records, meta: dict | None = None) -> str:
    """Render records as JSON lines. Floats use repr, so times round-trip
    losslessly."""
    lines = [_meta_line(meta)]
    for rec in records:
        obj = {"seq": rec.seq_id, "k": rec.k, "t": rec.t, "i": rec.phase, "j": rec.outcome}
        if rec.truth_n is not None:
            obj["truth_n"] = rec.truth_n
        lines.append(json.dumps(obj) + "\n")
    return "".join(lines)


def format_records_csv(records, meta: dict | None = None) -> str:
    lines = [_meta_line(meta), ",".join(RECORD_FIELDS) + "\n"]
    for rec in records:
        truth = "" if rec.truth_n is None else str(rec.truth_n)
        lines.append(f"{rec.seq_id},{rec.k},{rec.t!r},{rec.phase},{rec.outcome},{truth}\n")
    return "".join(lines)


def format_truth(events_by_seq, meta: dict | None = None) -> str:
    """Render {seq_id: [TruthEvent, ...]} as JSON lines."""
    lines = [_meta_line(meta)]
    for seq_id in sorted(events_by_seq):
        for event in events_by_seq[seq_id]:
            lines.append(json.dumps({"seq": seq_id, "t": event.t, "n": event.n_after}) + "\n")
    return "".join(lines)


def _require(obj: dict, key: str, line_no: int):
    if key not in obj:
        raise RecordFormatError(line_no, f"missing field '{key}'")
    return obj[key]


def _int_field(obj: dict, key: str, line_no: int) -> int:
    value = _require(obj, key, line_no)
    if isinstance(value, bool) or not isinstance(value, int):
        raise RecordFormatError(line_no, f"field '{key}' must be an integer, got {value!r}")
    return value


def _float_field(obj: dict, key: str, line_no: int) -> float:
    value = _require(obj, key, line_no)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise RecordFormatError(line_no, f"field '{key}' must be a finite number, got {value!r}")
    return float(value)


def _iter_json_lines(stream):
    if isinstance(stream, str):
        stream = stream.splitlines()
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordFormatError(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise RecordFormatError(line_no, "each line must be a JSON object")
        yield line_no, obj


def parse_record_stream(stream) -> list[DetectionRecord]:
    """Parse a JSON-lines record stream, validating per-record fields and
    per-sequence ordering (k strictly increasing, t non-decreasing)."""
    records = []
    last: dict[int, tuple[int, float]] = {}
    for line_no, obj in _iter_json_lines(stream):
        seq = _int_field(obj, "seq", line_no)
        k = _int_field(obj, "k", line_no)
        t = _float_field(obj, "t", line_no)
        i = _int_field(obj, "i", line_no)
        j = _int_field(obj, "j", line_no)
        truth_n = None
        if "truth_n" in obj and obj["truth_n"] is not None:
            truth_n = _int_field(obj, "truth_n", line_no)
        try:
            rec = DetectionRecord(seq_id=seq, k=k, t=t, phase=i, outcome=j, truth_n=truth_n)
        except ValueError as exc:
            raise RecordFormatError(line_no, str(exc)) from exc
        if seq in last:
            prev_k, prev_t = last[seq]
            if k <= prev_k:
                raise RecordFormatError(line_no, f"field 'k' out of order in seq {seq}: "
                                                 f"{k} after {prev_k}")
            if t < prev_t:
                raise RecordFormatError(line_no, f"field 't' decreases in seq {seq}")
        last[seq] = (k, t)
        records.append(rec)
    return records


def parse_truth_stream(stream) -> dict[int, list[TruthEvent]]:
    """Parse a JSON-lines truth log into {seq_id: [TruthEvent, ...]}."""
    events: dict[int, list[TruthEvent]] = {}
    for line_no, obj in _iter_json_lines(stream):
        seq = _int_field(obj, "seq", line_no)
        t = _float_field(obj, "t", line_no)
        n = _int_field(obj, "n", line_no)
        if n < 0:
            raise RecordFormatError(line_no, "field 'n' must be non-negative")
        per = events.setdefault(seq, [])
        if per and t <= per[-1].t:
            raise RecordFormatError(line_no, f"field 't' not increasing in seq {seq}")
        per.append(TruthEvent(t, n))
    return events


def read_records(path) -> list[DetectionRecord]:
    with open(path, encoding="utf-8") as handle:
        return parse_record_stream(handle)


def read_truth(path) -> dict[int, list[TruthEvent]]:
    with open(path, encoding="utf-8") as handle:
        return parse_truth_stream(handle)
