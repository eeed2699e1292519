"""Conditioned autoregressive trace generation under edited constraint vectors.

An edit set flips chosen coordinates of a base fulfillment vector; companion
coordinates of the same template family are auto-adjusted to keep the vector
consistent, and the edited-plus-adjusted coordinates form the graded mask. Each
generated trace is conformance-checked against that mask.
"""

from __future__ import annotations

import json
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .condnet.model import BOS, EOS, PAD, ConditionedNet
from .declare import (
    ConformanceReport,
    ConstraintInstance,
    ConstraintVector,
    check_consistency,
    conformance_report,
)
from .errors import ConsistencyError, DataError, FingerprintMismatchError


@dataclass(frozen=True)
class ConditionEdit:
    coordinate: int
    target: int  # 0 or 1

    def __post_init__(self):
        if self.target not in (0, 1):
            raise DataError(f"edit target must be 0 or 1, got {self.target}")


@dataclass(frozen=True)
class SeedEvent:
    activity: str
    execution_time: float = 0.0


@dataclass(frozen=True)
class SimulationConfig:
    n_traces: int = 300
    max_len: int = 50  # generated events per trace, beyond the seed event
    sampling: str = "multinomial"  # or "argmax"
    temperature: float = 1.0
    seed: int = 0
    edits: tuple[ConditionEdit, ...] = ()
    seed_events: tuple[SeedEvent, ...] = ()  # cycled across traces
    grade_full_vector: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.sampling not in ("multinomial", "argmax"):
            raise DataError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "multinomial" and self.temperature <= 0:
            raise DataError("temperature must be > 0 for multinomial sampling")
        if self.n_traces < 1:
            raise DataError("n_traces must be >= 1")

    def to_json(self) -> dict:
        return {
            "n_traces": self.n_traces,
            "max_len": self.max_len,
            "sampling": self.sampling,
            "temperature": self.temperature,
            "seed": self.seed,
            "edits": [[e.coordinate, e.target] for e in self.edits],
            "seed_events": [[s.activity, s.execution_time] for s in self.seed_events],
            "grade_full_vector": self.grade_full_vector,
            # worker count deliberately omitted: it must not affect results
        }


# Companion coordinates auto-adjusted when an edit would otherwise leave the
# vector contradictory. Only coordinates NOT explicitly edited are touched.
def _companion_adjustments(vector: ConstraintVector,
                           edited: dict[int, int]) -> dict[int, int]:
    uni = vector.universe
    bits = list(vector.bits)
    for k, t in edited.items():
        bits[k] = t
    adjust: dict[int, int] = {}

    def setco(template, a, b, value):
        k = uni.find(template, a, b)
        if k is not None and k not in edited and bits[k] != value:
            adjust[k] = value
            bits[k] = value

    for k, target in edited.items():
        inst = uni.instances[k]
        a, b = inst.activity_a, inst.activity_b
        if inst.template == "Existence":
            setco("Absence", a, None, 1 - target)
            if target == 0:
                setco("Exactly1", a, None, 0)
        elif inst.template == "Absence":
            setco("Existence", a, None, 1 - target)
            if target == 1:
                setco("Exactly1", a, None, 0)
        elif inst.template == "Exactly1":
            if target == 1:
                setco("Existence", a, None, 1)
                setco("Absence", a, None, 0)
        elif inst.template == "ChainResponse":
            if target == 1:
                setco("AlternateResponse", a, b, 1)
                setco("Response", a, b, 1)
        elif inst.template == "AlternateResponse":
            if target == 1:
                setco("Response", a, b, 1)
            else:
                setco("ChainResponse", a, b, 0)
        elif inst.template == "Response":
            if target == 0:
                setco("AlternateResponse", a, b, 0)
                setco("ChainResponse", a, b, 0)
    return adjust


def build_phi_s(
    base: ConstraintVector, edits: Sequence[ConditionEdit]
) -> tuple[ConstraintVector, tuple[int, ...], dict[int, int]]:
    """Apply edits to the base vector, auto-adjust companion coordinates, and
    return (simulation vector, graded mask, adjustments made).

    The mask is the edited coordinates plus every auto-adjusted companion;
    untouched coordinates are carried as conditioning input but not graded.
    """
    if not edits:
        raise DataError(
            "empty edit list: simulating with the unmodified vector would only "
            "reproduce training behavior"
        )
    uni = base.universe
    edited: dict[int, int] = {}
    for e in edits:
        if not 0 <= e.coordinate < len(uni):
            raise DataError(f"edit coordinate {e.coordinate} outside universe "
                            f"of size {len(uni)}")
        if e.coordinate in edited and edited[e.coordinate] != e.target:
            raise DataError(f"conflicting edits on coordinate {e.coordinate}")
        edited[e.coordinate] = e.target
    adjustments = _companion_adjustments(base, edited)
    bits = list(base.bits)
    for k, v in {**adjustments, **edited}.items():
        bits[k] = v
    phi_s = ConstraintVector(uni, tuple(bits))
    violations = check_consistency(phi_s)
    if violations:
        raise ConsistencyError(violations)
    mask = tuple(sorted(set(edited) | set(adjustments)))
    return phi_s, mask, adjustments


@dataclass(frozen=True)
class GeneratedTrace:
    activities: tuple[str, ...]           # seed event first
    remaining_times: tuple[float, ...]    # predicted seconds per generated step
    truncated: bool                       # hit max_len without sampling EOS


def generate_trace(
    net: ConditionedNet,
    phi_s: ConstraintVector,
    seed_event: SeedEvent,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> GeneratedTrace:
    """Autoregressively generate one trace from the seed event, conditioned on
    phi_s. PAD and BOS are excluded from the sampling support; generation stops
    at EOS or after max_len generated events."""
    if net.universe_fingerprint != phi_s.universe.fingerprint:
        raise FingerprintMismatchError(
            f"net was trained on universe {net.universe_fingerprint}, "
            f"got {phi_s.universe.fingerprint}"
        )
    cond = np.asarray(phi_s.bits, dtype=float)[None, :]
    p = net.params
    layers = p["layers"]
    hs = [np.zeros((1, layer["W"].shape[0])) for layer in layers]
    qcs = [cond @ layer["Q"].T + layer["b_h"] for layer in layers]

    def step(token: int, exec_seconds: float) -> tuple[np.ndarray, float]:
        t = float(net.exec_normalizer.normalize(max(exec_seconds, 0.0)))
        x = np.concatenate([p["embed"][token], t * p["time_w"] + p["time_b"]])[None, :]
        for i, layer in enumerate(layers):
            hs[i] = np.tanh(x @ layer["U"].T + hs[i] @ layer["W"].T + qcs[i])
            x = np.tanh(hs[i] @ layer["V"].T + layer["b_y"]) + x
        hid = np.tanh(x @ p["head_w1"].T + p["head_b1"])
        logits = (hid @ p["head_act_w"].T + p["head_act_b"])[0]
        time_pred = float((hid @ p["head_time_w"])[0] + p["head_time_b"][0])
        return logits, time_pred

    def denorm(z: float) -> float:
        return max(float(net.remaining_normalizer.denormalize(z)), 0.0)

    # the prediction made while consuming one event estimates the remaining
    # time at the NEXT event
    logits, pred = step(BOS, 0.0)
    rt_prev = denorm(pred)  # estimated remaining time at the seed event
    logits, pred = step(net.encode_activity(seed_event.activity),
                        seed_event.execution_time)
    rt_curr = denorm(pred)
    activities = [seed_event.activity]
    remaining = [rt_prev]
    truncated = False
    n_generated = 0
    while True:
        if n_generated >= config.max_len:
            truncated = True
            break
        masked = logits.copy()
        masked[PAD] = -np.inf
        masked[BOS] = -np.inf
        if config.sampling == "argmax":
            token = int(np.argmax(masked))
        else:
            z = masked / config.temperature
            z -= z.max()
            probs = np.exp(z)
            probs /= probs.sum()
            token = int(rng.choice(len(probs), p=probs))
        if token == EOS:
            break
        n_generated += 1
        activities.append(net.vocabulary.token(token))
        remaining.append(rt_curr)
        # the net predicts remaining time but consumes execution time: feed the
        # decrease of successive remaining-time predictions back as input
        logits, pred = step(token, max(rt_prev - rt_curr, 0.0))
        rt_prev, rt_curr = rt_curr, denorm(pred)
    return GeneratedTrace(tuple(activities), tuple(remaining), truncated)


@dataclass(frozen=True)
class SimulationReport:
    traces: tuple[GeneratedTrace, ...]
    phi_s: ConstraintVector
    mask: tuple[int, ...]
    adjustments: dict[int, int]
    conformance: ConformanceReport
    config: SimulationConfig
    wall_clock_seconds: float

    def to_json(self) -> dict:
        """Canonical report content: fully determined by (checkpoint, config,
        seed). Wall clock is reported separately so identical runs serialize
        byte-identically."""
        return {
            "config": self.config.to_json(),
            "universe": self.phi_s.universe.to_json(),
            "universe_fingerprint": self.phi_s.universe.fingerprint,
            "imposed_vector": list(self.phi_s.bits),
            "mask": list(self.mask),
            "auto_adjustments": {str(k): v for k, v in sorted(self.adjustments.items())},
            "traces": [
                {
                    "activities": list(t.activities),
                    "remaining_times": [round(x, 6) for x in t.remaining_times],
                    "truncated": t.truncated,
                }
                for t in self.traces
            ],
            "conformance": self.conformance.to_json(),
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True,
                          separators=(",", ":")).encode()


def simulate(
    net: ConditionedNet,
    base: ConstraintVector,
    config: SimulationConfig,
) -> SimulationReport:
    """Generate config.n_traces traces under the edited vector and grade them.

    Each trace draws from its own PRNG substream keyed by (seed, trace index),
    so results are byte-identical regardless of worker count.
    """
    started = _time.monotonic()
    phi_s, mask, adjustments = build_phi_s(base, config.edits)
    if config.grade_full_vector:
        mask = tuple(range(len(phi_s)))
    seeds = config.seed_events
    if not seeds:
        raise DataError("no seed events configured")

    def one(i: int) -> GeneratedTrace:
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, i)))
        return generate_trace(net, phi_s, seeds[i % len(seeds)], config, rng)

    indices = range(config.n_traces)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            traces = tuple(pool.map(one, indices))
    else:
        traces = tuple(one(i) for i in indices)
    conf = conformance_report([t.activities for t in traces], phi_s, mask)
    return SimulationReport(
        traces, phi_s, mask, adjustments, conf, config,
        _time.monotonic() - started,
    )


def generated_log_jsonl(report: SimulationReport) -> list[str]:
    """Canonical line-delimited JSON of the generated traces, with synthetic
    timestamps reconstructed from cumulative execution times starting at 0."""
    lines = []
    for i, trace in enumerate(report.traces):
        ts = 0.0
        events = []
        for j, act in enumerate(trace.activities):
            if j > 0:
                rem_prev = trace.remaining_times[j - 1]
                rem_cur = trace.remaining_times[j]
                ts += max(rem_prev - rem_cur, 0.0)
            events.append({"activity": act, "timestamp_ms": int(round(ts * 1000))})
        lines.append(json.dumps({"case_id": f"sim-{i}", "events": events},
                                sort_keys=True, separators=(",", ":")))
    return lines
