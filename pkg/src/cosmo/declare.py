"""DECLARE template semantics over finite traces.

Implements per-template satisfaction, universe discovery (grounding templates
on the activities of a log), per-trace fulfillment vectors, contradiction
guards for edited vectors, and conformance reporting for generated traces.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Optional, Sequence

from .errors import DataError
from .eventlog import EventLog, Trace

GROUP_EXISTENCE = "E"
GROUP_CHOICE = "C"
GROUP_POSITIVE = "PR"
GROUP_NEGATIVE = "NR"

# name -> (arity, group, symmetric in its two activities)
TEMPLATES: dict[str, tuple[int, str, bool]] = {
    "Existence": (1, GROUP_EXISTENCE, False),
    "Absence": (1, GROUP_EXISTENCE, False),
    "Exactly1": (1, GROUP_EXISTENCE, False),
    "Choice": (2, GROUP_CHOICE, True),
    "ExclusiveChoice": (2, GROUP_CHOICE, True),
    "Response": (2, GROUP_POSITIVE, False),
    "Precedence": (2, GROUP_POSITIVE, False),
    "AlternateResponse": (2, GROUP_POSITIVE, False),
    "ChainResponse": (2, GROUP_POSITIVE, False),
    "NotCoExistence": (2, GROUP_NEGATIVE, True),
    "NotSuccession": (2, GROUP_NEGATIVE, False),
    "NotChainSuccession": (2, GROUP_NEGATIVE, False),
}

ALL_GROUPS = (GROUP_EXISTENCE, GROUP_CHOICE, GROUP_POSITIVE, GROUP_NEGATIVE)


@dataclass(frozen=True, order=True)
class ConstraintInstance:
    template: str
    activity_a: str
    activity_b: Optional[str] = None

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise DataError(f"unknown template {self.template!r}")
        arity = TEMPLATES[self.template][0]
        if arity == 2 and self.activity_b is None:
            raise DataError(f"{self.template} needs two activities")
        if arity == 1 and self.activity_b is not None:
            raise DataError(f"{self.template} takes one activity")
        if self.activity_a == self.activity_b:
            raise DataError(f"{self.template}({self.activity_a!r}, …): activities must differ")

    @property
    def group(self) -> str:
        return TEMPLATES[self.template][1]

    def __str__(self):
        if self.activity_b is None:
            return f"{self.template}({self.activity_a})"
        return f"{self.template}({self.activity_a},{self.activity_b})"


def evaluate(instance: ConstraintInstance, activities: Sequence[str]) -> bool:
    """Finite-trace satisfaction of one grounded template.

    Relation templates with no activation are vacuously satisfied.
    """
    a, b = instance.activity_a, instance.activity_b
    seq = list(activities)
    n = len(seq)
    name = instance.template
    if name == "Existence":
        return a in seq
    if name == "Absence":
        return a not in seq
    if name == "Exactly1":
        return seq.count(a) == 1
    if name == "Choice":
        return a in seq or b in seq
    if name == "ExclusiveChoice":
        return (a in seq) != (b in seq)
    if name == "Response":
        # every a is followed, strictly later, by some b
        for i, x in enumerate(seq):
            if x == a and b not in seq[i + 1 :]:
                return False
        return True
    if name == "Precedence":
        # no b before the first a (vacuously true without any b)
        for x in seq:
            if x == a:
                return True
            if x == b:
                return False
        return True
    if name == "AlternateResponse":
        # every a is followed by a b occurring before the next a
        for i, x in enumerate(seq):
            if x != a:
                continue
            for y in seq[i + 1 :]:
                if y == b:
                    break
                if y == a:
                    return False
            else:
                return False
        return True
    if name == "ChainResponse":
        return all(i + 1 < n and seq[i + 1] == b for i, x in enumerate(seq) if x == a)
    if name == "NotCoExistence":
        return not (a in seq and b in seq)
    if name == "NotSuccession":
        # no b at any position after an a
        seen_a = False
        for x in seq:
            if x == a:
                seen_a = True
            elif x == b and seen_a:
                return False
        return True
    if name == "NotChainSuccession":
        return not any(seq[i] == a and seq[i + 1] == b for i in range(n - 1))
    raise DataError(f"unknown template {name!r}")


@dataclass(frozen=True)
class ConstraintUniverse:
    instances: tuple[ConstraintInstance, ...]
    min_support: float = 0.0
    source_fingerprint: str = ""

    def __post_init__(self):
        if len(set(self.instances)) != len(self.instances):
            raise DataError("duplicate constraint instances in universe")

    def __len__(self):
        return len(self.instances)

    def index_of(self, instance: ConstraintInstance) -> int:
        return self.instances.index(instance)

    def find(self, template: str, a: str, b: Optional[str] = None) -> Optional[int]:
        """Coordinate of the grounded template, honoring symmetric canonical
        order; None if absent from the universe."""
        if b is not None and TEMPLATES[template][2] and b < a:
            a, b = b, a
        try:
            return self.instances.index(ConstraintInstance(template, a, b))
        except ValueError:
            return None

    @property
    def fingerprint(self) -> str:
        payload = json.dumps(
            [[c.template, c.activity_a, c.activity_b] for c in self.instances],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json(self) -> list[dict]:
        return [
            {"template": c.template, "a": c.activity_a, "b": c.activity_b}
            for c in self.instances
        ]

    @classmethod
    def from_json(cls, data: list[dict], min_support: float = 0.0,
                  source_fingerprint: str = "") -> "ConstraintUniverse":
        instances = tuple(
            ConstraintInstance(d["template"], d["a"], d.get("b")) for d in data
        )
        return cls(instances, min_support, source_fingerprint)


@dataclass(frozen=True)
class ConstraintVector:
    universe: ConstraintUniverse
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != len(self.universe):
            raise DataError(
                f"vector length {len(self.bits)} != universe size {len(self.universe)}"
            )

    def __len__(self):
        return len(self.bits)

    def get(self, template: str, a: str, b: Optional[str] = None) -> Optional[int]:
        k = self.universe.find(template, a, b)
        return None if k is None else self.bits[k]


def instantiate_universe(
    log: EventLog,
    groups: Sequence[str] = ALL_GROUPS,
    min_support: float = 0.1,
) -> ConstraintUniverse:
    """Ground every selected template on the log's activities.

    Unary templates cover every activity; binary templates cover activity pairs
    co-occurring in at least min_support * |traces| traces. Symmetric templates
    (Choice, ExclusiveChoice, NotCoExistence) get one coordinate per unordered
    pair.
    """
    groups = set(groups)
    unknown = groups - set(ALL_GROUPS)
    if unknown:
        raise DataError(f"unknown template groups {sorted(unknown)}")
    acts = list(log.activity_set)
    threshold = min_support * len(log.traces)
    cooccur: dict[frozenset, int] = {}
    for trace in log.traces:
        present = set(trace.activities)
        for pair in combinations(sorted(present), 2):
            key = frozenset(pair)
            cooccur[key] = cooccur.get(key, 0) + 1

    def supported(a, b):
        return cooccur.get(frozenset((a, b)), 0) >= threshold

    instances = []
    for name, (arity, group, symmetric) in TEMPLATES.items():
        if group not in groups:
            continue
        if arity == 1:
            instances.extend(ConstraintInstance(name, a) for a in acts)
        elif symmetric:
            instances.extend(
                ConstraintInstance(name, a, b)
                for a, b in combinations(acts, 2)
                if supported(a, b)
            )
        else:
            instances.extend(
                ConstraintInstance(name, a, b)
                for a, b in permutations(acts, 2)
                if supported(a, b)
            )
    if not instances:
        raise DataError(
            f"empty constraint universe (min_support={min_support}); lower min_support"
        )
    instances.sort()
    fp = log.provenance.fingerprint
    return ConstraintUniverse(tuple(instances), min_support, fp)


def fulfillment_vector(universe: ConstraintUniverse, trace: Trace | Sequence[str]) -> ConstraintVector:
    """Evaluate every universe coordinate on one trace; timestamps are ignored."""
    if not len(universe):
        raise DataError("empty universe")
    activities = trace.activities if isinstance(trace, Trace) else tuple(trace)
    bits = tuple(int(evaluate(c, activities)) for c in universe.instances)
    return ConstraintVector(universe, bits)


@dataclass(frozen=True)
class AugmentedLog:
    log: EventLog
    universe: ConstraintUniverse
    vectors: tuple[ConstraintVector, ...]

    def __len__(self):
        return len(self.log.traces)

    def pairs(self):
        return list(zip(self.log.traces, self.vectors))


def augment(log: EventLog, universe: ConstraintUniverse) -> AugmentedLog:
    """Pair every trace with its fulfillment vector, order preserved."""
    vectors = tuple(fulfillment_vector(universe, t) for t in log.traces)
    return AugmentedLog(log, universe, vectors)


@dataclass(frozen=True)
class Violation:
    rule: str
    members: tuple[str, ...]  # offending instances, both named

    def __str__(self):
        return f"{self.rule}: " + " & ".join(self.members)


def check_consistency(vector: ConstraintVector) -> list[Violation]:
    """Flag contradictory demanded bits. Empty list means consistent.

    The negative-vs-positive relation rules only fire when Existence of the
    activating activity is also demanded: without an activation both sides are
    vacuously satisfiable together, and real traces do produce that combination.
    """
    uni = vector.universe
    acts = sorted({c.activity_a for c in uni.instances} |
                  {c.activity_b for c in uni.instances if c.activity_b})
    v = vector.get
    out: list[Violation] = []

    def flag(rule, *insts):
        out.append(Violation(rule, tuple(str(i) for i in insts)))

    for a in acts:
        ex, ab, x1 = v("Existence", a), v("Absence", a), v("Exactly1", a)
        if ex == 1 and ab == 1:
            flag("existence-vs-absence", ConstraintInstance("Existence", a),
                 ConstraintInstance("Absence", a))
        if x1 == 1 and ab == 1:
            flag("exactly1-vs-absence", ConstraintInstance("Exactly1", a),
                 ConstraintInstance("Absence", a))
        if x1 == 1 and ex == 0:
            flag("exactly1-without-existence", ConstraintInstance("Exactly1", a),
                 ConstraintInstance("Existence", a))
    for c in uni.instances:
        if c.template == "ExclusiveChoice" and vector.bits[uni.index_of(c)] == 1:
            if v("Existence", c.activity_a) == 1 and v("Existence", c.activity_b) == 1:
                flag("exclusive-choice-vs-both-existing", c,
                     ConstraintInstance("Existence", c.activity_a),
                     ConstraintInstance("Existence", c.activity_b))
    for neg, pos in (("NotChainSuccession", "ChainResponse"),
                     ("NotSuccession", "Response")):
        for c in uni.instances:
            if c.template != neg or vector.bits[uni.index_of(c)] != 1:
                continue
            a, b = c.activity_a, c.activity_b
            if v(pos, a, b) == 1 and v("Existence", a) == 1:
                flag("negative-vs-positive-relation", c, ConstraintInstance(pos, a, b))
    return out


@dataclass(frozen=True)
class ConformanceReport:
    overall_rate: float
    per_group: dict[str, float]
    per_constraint: list[dict]
    per_trace: list[dict]

    def to_json(self) -> dict:
        return {
            "overall_rate": self.overall_rate,
            "per_group": self.per_group,
            "per_constraint": self.per_constraint,
            "per_trace": self.per_trace,
        }


def conformance_report(
    traces: Sequence[Sequence[str]],
    imposed: ConstraintVector,
    imposed_mask: Sequence[int],
) -> ConformanceReport:
    """Grade generated traces against the imposed bits on the masked coordinates.

    A trace satisfies iff every masked coordinate evaluates to exactly its
    imposed bit, so an imposed 0 demands a violation of that constraint.
    """
    if not traces:
        raise DataError("no traces to check")
    uni = imposed.universe
    mask = sorted(set(imposed_mask))
    for k in mask:
        if not 0 <= k < len(uni):
            raise DataError(f"mask coordinate {k} outside universe of size {len(uni)}")
    per_trace = []
    coord_hits = {k: 0 for k in mask}
    group_totals: dict[str, list[int]] = {}
    satisfied_count = 0
    for idx, activities in enumerate(traces):
        coords = {}
        ok = True
        for k in mask:
            hit = int(evaluate(uni.instances[k], activities)) == imposed.bits[k]
            coords[k] = hit
            if hit:
                coord_hits[k] += 1
            else:
                ok = False
            group_totals.setdefault(uni.instances[k].group, []).append(int(hit))
        if ok:
            satisfied_count += 1
        per_trace.append({
            "trace": idx,
            "satisfied": ok,
            "coordinates": {str(k): bool(hit) for k, hit in coords.items()},
        })
    n = len(per_trace)
    per_constraint = [
        {
            "coordinate": k,
            "instance": str(uni.instances[k]),
            "imposed": imposed.bits[k],
            "rate": coord_hits[k] / n,
        }
        for k in mask
    ]
    per_group = {g: sum(hits) / len(hits) for g, hits in sorted(group_totals.items())}
    return ConformanceReport(satisfied_count / n, per_group, per_constraint, per_trace)
