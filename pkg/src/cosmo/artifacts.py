"""Analyst-facing outputs: directly-follows graphs, coverage deltas, DOT export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .errors import DataError
from .eventlog import EventLog

START = "__start__"
END = "__end__"


@dataclass(frozen=True)
class DirectlyFollowsGraph:
    # activity -> fraction of traces containing it
    coverage: dict[str, float]
    # (a, b) -> count of consecutive occurrences, including start/end pseudo-nodes
    edges: dict[tuple[str, str], int]
    n_traces: int


def _sequences(log) -> list[Sequence[str]]:
    if isinstance(log, EventLog):
        return [t.activities for t in log.traces]
    return [tuple(t) for t in log]


def build_dfg(log: EventLog | Sequence[Sequence[str]]) -> DirectlyFollowsGraph:
    """Count consecutive activity pairs and per-activity case coverage."""
    seqs = _sequences(log)
    if not seqs:
        raise DataError("cannot build a DFG from an empty trace set")
    edges: dict[tuple[str, str], int] = {}
    containing: dict[str, int] = {}
    for seq in seqs:
        for act in set(seq):
            containing[act] = containing.get(act, 0) + 1
        path = [START, *seq, END]
        for a, b in zip(path, path[1:]):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    n = len(seqs)
    coverage = {a: c / n for a, c in containing.items()}
    return DirectlyFollowsGraph(coverage, edges, n)


def coverage_delta(
    original: DirectlyFollowsGraph, simulated: DirectlyFollowsGraph
) -> list[dict]:
    """Per-activity coverage comparison over the union of activities; an
    activity missing from one side counts as coverage 0."""
    acts = sorted(set(original.coverage) | set(simulated.coverage))
    return [
        {
            "activity": a,
            "original_coverage": original.coverage.get(a, 0.0),
            "simulated_coverage": simulated.coverage.get(a, 0.0),
            "delta": simulated.coverage.get(a, 0.0) - original.coverage.get(a, 0.0),
        }
        for a in acts
    ]


def coverage_delta_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["activity", "original_coverage", "simulated_coverage", "delta"]
    )
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def export_dot(dfg: DirectlyFollowsGraph, edge_threshold: float = 0.0) -> str:
    """Graphviz DOT text; edges with count below threshold * max_count are
    pruned. Node and edge ordering is deterministic, so output is byte-stable."""
    if not 0.0 <= edge_threshold <= 1.0:
        raise DataError("edge_threshold must be in [0, 1]")
    max_count = max(dfg.edges.values())
    cutoff = edge_threshold * max_count
    kept = {e: c for e, c in dfg.edges.items() if c >= cutoff}
    nodes = sorted(dfg.coverage)
    lines = ["digraph dfg {", "  rankdir=LR;"]
    lines.append('  "__start__" [shape=circle, label="▶"];')
    lines.append('  "__end__" [shape=doublecircle, label="■"];')
    for a in nodes:
        pct = 100.0 * dfg.coverage[a]
        lines.append(f'  "{a}" [shape=box, label="{a}\\n{pct:.0f}% of cases"];')
    for (a, b), count in sorted(kept.items()):
        lines.append(f'  "{a}" -> "{b}" [label="{count}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
