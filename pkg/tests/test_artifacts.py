import pytest

from cosmo.artifacts import (
    END,
    START,
    build_dfg,
    coverage_delta,
    coverage_delta_csv,
    export_dot,
)
from cosmo.errors import DataError


class TestBuildDfg:
    def test_edge_counts_and_coverage(self):
        dfg = build_dfg([["A", "B"], ["A", "B"]])
        assert dfg.edges[("A", "B")] == 2
        assert dfg.coverage == {"A": 1.0, "B": 1.0}

    def test_partial_coverage(self):
        dfg = build_dfg([["A", "B"], ["A", "C"]])
        assert dfg.coverage["B"] == 0.5

    def test_pseudo_node_totals_equal_trace_count(self):
        traces = [["A", "B"], ["B"], ["A", "C", "A"]]
        dfg = build_dfg(traces)
        starts = sum(c for (a, _), c in dfg.edges.items() if a == START)
        ends = sum(c for (_, b), c in dfg.edges.items() if b == END)
        assert starts == ends == len(traces)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            build_dfg([])


class TestCoverageDelta:
    def test_paper_style_drop(self):
        original = build_dfg([["L"]] * 8 + [["M"]] * 2)       # L in 80% of cases
        simulated = build_dfg([["L"]] * 21 + [["M"]] * 79)    # L in 21%
        rows = {r["activity"]: r for r in coverage_delta(original, simulated)}
        assert rows["L"]["delta"] == pytest.approx(-0.59)

    def test_identical_logs_zero_delta(self):
        dfg = build_dfg([["A", "B"], ["B", "C"]])
        assert all(r["delta"] == 0.0 for r in coverage_delta(dfg, dfg))

    def test_missing_activity_counts_as_zero(self):
        original = build_dfg([["A", "B"]])
        simulated = build_dfg([["B"]])
        rows = {r["activity"]: r for r in coverage_delta(original, simulated)}
        assert rows["A"]["delta"] == -1.0

    def test_csv_header(self):
        dfg = build_dfg([["A"]])
        text = coverage_delta_csv(coverage_delta(dfg, dfg))
        assert text.splitlines()[0] == "activity,original_coverage,simulated_coverage,delta"


class TestExportDot:
    def test_threshold_zero_keeps_all(self):
        dfg = build_dfg([["A", "B", "C"], ["A", "C"]])
        dot = export_dot(dfg, 0.0)
        for (a, b) in dfg.edges:
            assert f'"{a}" -> "{b}"' in dot

    def test_threshold_one_keeps_only_max(self):
        dfg = build_dfg([["A", "B"], ["A", "B"], ["A", "C"]])
        dot = export_dot(dfg, 1.0)
        # max-count edge is the start pseudo-edge into A (count 3)
        assert f'"{START}" -> "A"' in dot
        assert '"A" -> "B"' not in dot
        assert '"A" -> "C"' not in dot

    def test_byte_stable(self):
        dfg = build_dfg([["A", "B"], ["B", "A"], ["A", "C"]])
        assert export_dot(dfg, 0.1) == export_dot(dfg, 0.1)

    def test_threshold_range_checked(self):
        dfg = build_dfg([["A"]])
        with pytest.raises(DataError):
            export_dot(dfg, 1.5)
