"""Event-log ingestion, cleaning, temporal features, and splits.

Logs are parsed from XES or CSV, exported/re-imported as line-delimited JSON
(one trace per line), and carried through the pipeline as immutable-by-convention
dataclasses. Internal time unit is seconds (float); timestamps are absolute UTC
seconds since the epoch with millisecond precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataError, LogParseError, LogSchemaError

XES_ACTIVITY_KEY = "concept:name"
XES_TIMESTAMP_KEY = "time:timestamp"


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: float  # UTC seconds since epoch
    attributes: tuple = ()  # opaque (name, value) pairs
    execution_time: float = 0.0  # seconds since previous event, 0 for the first
    remaining_time: float = 0.0  # seconds until the last event, 0 for the last


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise DataError(f"trace {self.case_id!r} is empty")

    def __len__(self):
        return len(self.events)

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class Provenance:
    source: str
    format: str
    fingerprint: str

    def derive(self, step: str) -> "Provenance":
        h = hashlib.sha256(f"{self.fingerprint}|{step}".encode()).hexdigest()[:16]
        return Provenance(self.source, self.format, h)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    activity_set: tuple[str, ...]
    provenance: Provenance

    def __len__(self):
        return len(self.traces)

    @property
    def case_ids(self) -> tuple[str, ...]:
        return tuple(t.case_id for t in self.traces)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "ratio-by-case"  # or "external-file"
    ratio: float = 0.8
    seed: int = 0
    external_path: Optional[str] = None


def _make_log(traces: Sequence[Trace], source: str, fmt: str) -> EventLog:
    activities = sorted({e.activity for t in traces for e in t.events})
    raw = "|".join(f"{t.case_id}:{len(t)}" for t in traces)
    fp = hashlib.sha256(f"{source}|{fmt}|{raw}".encode()).hexdigest()[:16]
    return EventLog(tuple(traces), tuple(activities), Provenance(source, fmt, fp))


def _sorted_trace(case_id: str, events: list[Event]) -> Trace:
    # stable sort: ties keep original file order
    return Trace(case_id, tuple(sorted(events, key=lambda e: e.timestamp)))


def _parse_xes_timestamp(value: str) -> float:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    # millisecond precision
    return round(dt.timestamp() * 1000.0) / 1000.0


def parse_xes(path: str | Path) -> EventLog:
    """Parse an XES 1.0 file. Only concept:name and time:timestamp are
    mandatory per event; other attributes are carried opaquely."""
    path = Path(path)
    if not path.exists():
        raise LogParseError(f"no such file: {path}")
    try:
        root = ET.parse(str(path)).getroot()
    except ET.ParseError as exc:
        line, col = exc.position
        raise LogParseError(f"{path}: malformed XML at line {line}, column {col}") from exc

    def strip_ns(tag: str) -> str:
        return tag.rsplit("}", 1)[-1]

    traces: list[Trace] = []
    for t_idx, trace_el in enumerate(el for el in root.iter() if strip_ns(el.tag) == "trace"):
        case_id = f"trace-{t_idx}"
        events: list[Event] = []
        for child in trace_el:
            tag = strip_ns(child.tag)
            if tag == "string" and child.get("key") == XES_ACTIVITY_KEY:
                case_id = child.get("value", case_id)
            elif tag == "event":
                e_idx = len(events)
                activity = None
                timestamp = None
                attrs = []
                for attr in child:
                    key = attr.get("key")
                    value = attr.get("value")
                    if key == XES_ACTIVITY_KEY:
                        activity = value
                    elif key == XES_TIMESTAMP_KEY:
                        try:
                            timestamp = _parse_xes_timestamp(value)
                        except (ValueError, TypeError) as exc:
                            raise LogSchemaError(
                                f"{path}: trace {t_idx}, event {e_idx}: "
                                f"bad {XES_TIMESTAMP_KEY} {value!r}"
                            ) from exc
                    else:
                        attrs.append((key, value))
                if activity is None:
                    raise LogSchemaError(
                        f"{path}: trace {t_idx}, event {e_idx}: missing {XES_ACTIVITY_KEY}"
                    )
                if timestamp is None:
                    raise LogSchemaError(
                        f"{path}: trace {t_idx}, event {e_idx}: missing {XES_TIMESTAMP_KEY}"
                    )
                events.append(Event(case_id, activity, timestamp, tuple(attrs)))
        if events:
            events = [replace(e, case_id=case_id) for e in events]
            traces.append(_sorted_trace(case_id, events))
    if not traces:
        raise LogSchemaError(f"{path}: no traces with events found")
    return _make_log(traces, str(path), "xes")


@dataclass(frozen=True)
class CsvMapping:
    case_col: str
    activity_col: str
    timestamp_col: str
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"


def parse_csv(path: str | Path, mapping: CsvMapping) -> EventLog:
    """Parse a CSV log; rows are grouped by case and sorted by timestamp."""
    path = Path(path)
    if not path.exists():
        raise LogParseError(f"no such file: {path}")
    by_case: dict[str, list[Event]] = {}
    order: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for col in (mapping.case_col, mapping.activity_col, mapping.timestamp_col):
            if col not in cols:
                raise LogSchemaError(f"{path}: unknown column {col!r} (have {cols})")
        for row_no, row in enumerate(reader, start=2):  # header is line 1
            raw_ts = row[mapping.timestamp_col]
            try:
                dt = datetime.strptime(raw_ts, mapping.timestamp_format)
            except ValueError as exc:
                raise LogParseError(
                    f"{path}: row {row_no}: unparseable timestamp {raw_ts!r} "
                    f"under format {mapping.timestamp_format!r}"
                ) from exc
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            case = row[mapping.case_col]
            extra = tuple(
                (k, v)
                for k, v in row.items()
                if k not in (mapping.case_col, mapping.activity_col, mapping.timestamp_col)
            )
            if case not in by_case:
                by_case[case] = []
                order.append(case)
            by_case[case].append(
                Event(case, row[mapping.activity_col], round(dt.timestamp() * 1000) / 1000.0, extra)
            )
    if not by_case:
        raise LogSchemaError(f"{path}: no rows")
    traces = [_sorted_trace(case, by_case[case]) for case in order]
    return _make_log(traces, str(path), "csv")


def length_cap(lengths: Sequence[int], quantile: float) -> int:
    """Nearest-rank quantile of the trace-length distribution.

    Uses the 0-based index ceil(q*n) into the sorted lengths, clamped to the
    last element, so q=0.9 over 10 values selects the maximum.
    """
    ordered = sorted(lengths)
    idx = min(math.ceil(quantile * len(ordered)), len(ordered) - 1)
    return ordered[idx]


def clean(log: EventLog, min_len: int = 3, max_len_percentile: float = 0.90) -> EventLog:
    """Drop traces shorter than min_len or longer than the length-distribution
    percentile cap, computed once on the input log (never iterated)."""
    if not log.traces:
        raise DataError("cannot clean an empty log")
    cap = length_cap([len(t) for t in log.traces], max_len_percentile)
    kept = [t for t in log.traces if min_len <= len(t) <= cap]
    if not kept:
        raise DataError(
            f"all traces filtered: none with length in [{min_len}, {cap}]"
        )
    activities = sorted({e.activity for t in kept for e in t.events})
    return EventLog(
        tuple(kept),
        tuple(activities),
        log.provenance.derive(f"clean(min_len={min_len},pct={max_len_percentile},cap={cap})"),
    )


def derive_times(log: EventLog) -> EventLog:
    """Populate execution_time (delta to previous event) and remaining_time
    (delta to final event) on every event."""
    traces = []
    for trace in log.traces:
        last_ts = trace.events[-1].timestamp
        events = []
        prev_ts = None
        for e in trace.events:
            exec_t = 0.0 if prev_ts is None else e.timestamp - prev_ts
            events.append(replace(e, execution_time=exec_t, remaining_time=last_ts - e.timestamp))
            prev_ts = e.timestamp
        traces.append(Trace(trace.case_id, tuple(events)))
    return EventLog(tuple(traces), log.activity_set, log.provenance.derive("derive_times"))


def split(log: EventLog, spec: SplitSpec) -> tuple[EventLog, EventLog]:
    """Case-level disjoint train/test partition, deterministic given the seed."""
    ids = list(log.case_ids)
    if spec.mode == "ratio-by-case":
        if not 0.0 < spec.ratio < 1.0:
            raise DataError(f"split ratio must be in (0,1), got {spec.ratio}")
        rng = random.Random(spec.seed)
        shuffled = sorted(ids)
        rng.shuffle(shuffled)
        n_train = int(spec.ratio * len(ids))
        train_ids = set(shuffled[:n_train])
    elif spec.mode == "external-file":
        with open(spec.external_path) as fh:
            listed = json.load(fh)
        train_ids = set(listed["train"])
        known = set(ids)
        for cid in list(train_ids) + list(listed.get("test", [])):
            if cid not in known:
                raise DataError(f"split file references unknown case_id {cid!r}")
    else:
        raise DataError(f"unknown split mode {spec.mode!r}")
    train = [t for t in log.traces if t.case_id in train_ids]
    test = [t for t in log.traces if t.case_id not in train_ids]
    prov = log.provenance

    def sub(traces, tag):
        acts = sorted({e.activity for t in traces for e in t.events})
        return EventLog(tuple(traces), tuple(acts), prov.derive(f"split-{tag}"))

    return sub(train, "train"), sub(test, "test")


def export_jsonl(log: EventLog, path: str | Path) -> None:
    """Write the canonical line-delimited JSON format, one trace per line."""
    with open(path, "w") as fh:
        for line in iter_jsonl(log):
            fh.write(line + "\n")


def iter_jsonl(log: EventLog) -> Iterable[str]:
    for trace in log.traces:
        fh_obj = {
            "case_id": trace.case_id,
            "events": [
                {"activity": e.activity, "timestamp_ms": int(round(e.timestamp * 1000))}
                for e in trace.events
            ],
        }
        yield json.dumps(fh_obj, sort_keys=True, separators=(",", ":"))


def parse_jsonl(path: str | Path) -> EventLog:
    """Read the canonical line-delimited JSON format back into an EventLog."""
    path = Path(path)
    if not path.exists():
        raise LogParseError(f"no such file: {path}")
    traces = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"{path}: line {line_no}: invalid JSON") from exc
            try:
                case_id = obj["case_id"]
                events = [
                    Event(case_id, ev["activity"], ev["timestamp_ms"] / 1000.0)
                    for ev in obj["events"]
                ]
            except (KeyError, TypeError) as exc:
                raise LogSchemaError(f"{path}: line {line_no}: missing field {exc}") from exc
            traces.append(_sorted_trace(case_id, events))
    if not traces:
        raise LogSchemaError(f"{path}: empty log")
    return _make_log(traces, str(path), "jsonl")


def log_from_sequences(
    sequences: Sequence[tuple[str, Sequence[tuple[str, float]]]],
    source: str = "<memory>",
) -> EventLog:
    """Build a log from (case_id, [(activity, timestamp_seconds), ...]) pairs.

    Convenience for simulated output and tests.
    """
    traces = [
        _sorted_trace(case_id, [Event(case_id, act, ts) for act, ts in evs])
        for case_id, evs in sequences
    ]
    return _make_log(traces, source, "memory")
