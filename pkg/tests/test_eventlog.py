import math

import pytest

from cosmo.errors import DataError, LogParseError, LogSchemaError
from cosmo.eventlog import (
    CsvMapping,
    SplitSpec,
    clean,
    derive_times,
    export_jsonl,
    length_cap,
    parse_csv,
    parse_jsonl,
    parse_xes,
    split,
)
from conftest import make_log

XES_MINIMAL = """<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="case-1"/>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2024-01-01T00:00:00.000+00:00"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2024-01-01T00:01:00.000+00:00"/>
    </event>
  </trace>
</log>
"""

XES_UNORDERED = XES_MINIMAL.replace(
    'value="A"', 'value="TMP"').replace(
    'value="B"', 'value="A"').replace(
    'value="TMP"', 'value="B"')

XES_MISSING_TS = """<?xml version="1.0"?>
<log>
  <trace>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2024-01-01T00:00:00+00:00"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
    </event>
  </trace>
</log>
"""


class TestParseXes:
    def test_minimal(self, tmp_path):
        p = tmp_path / "log.xes"
        p.write_text(XES_MINIMAL)
        log = parse_xes(p)
        assert len(log) == 1
        assert log.activity_set == ("A", "B")
        assert log.traces[0].case_id == "case-1"
        assert log.traces[0].activities == ("A", "B")

    def test_unordered_timestamps_resorted(self, tmp_path):
        # first event B at t=0min? no: swapped labels, so B comes first in file
        p = tmp_path / "log.xes"
        p.write_text(XES_UNORDERED)
        log = parse_xes(p)
        # events re-sorted by timestamp regardless of label swap
        ts = [e.timestamp for e in log.traces[0].events]
        assert ts == sorted(ts)

    def test_missing_timestamp_names_event(self, tmp_path):
        p = tmp_path / "log.xes"
        p.write_text(XES_MISSING_TS)
        with pytest.raises(LogSchemaError, match=r"trace 0, event 1"):
            parse_xes(p)

    def test_malformed_xml_reports_line(self, tmp_path):
        p = tmp_path / "log.xes"
        p.write_text("<log><trace></log>")
        with pytest.raises(LogParseError, match=r"line \d+"):
            parse_xes(p)


class TestParseCsv:
    MAPPING = CsvMapping("case", "activity", "ts", "%Y-%m-%d %H:%M:%S")

    def write(self, tmp_path, rows):
        p = tmp_path / "log.csv"
        p.write_text("case,activity,ts\n" + "\n".join(rows) + "\n")
        return p

    def test_single_case(self, tmp_path):
        p = self.write(tmp_path, [
            "c1,A,2024-01-01 00:00:00",
            "c1,B,2024-01-01 00:00:10",
            "c1,C,2024-01-01 00:00:20",
        ])
        log = parse_csv(p, self.MAPPING)
        assert len(log) == 1
        assert log.traces[0].activities == ("A", "B", "C")

    def test_interleaved_cases_sorted(self, tmp_path):
        p = self.write(tmp_path, [
            "c1,A,2024-01-01 00:00:05",
            "c2,X,2024-01-01 00:00:00",
            "c1,B,2024-01-01 00:00:01",
            "c2,Y,2024-01-01 00:00:09",
        ])
        log = parse_csv(p, self.MAPPING)
        assert len(log) == 2
        by_case = {t.case_id: t.activities for t in log.traces}
        assert by_case["c1"] == ("B", "A")
        assert by_case["c2"] == ("X", "Y")

    def test_bad_timestamp_names_row(self, tmp_path):
        p = self.write(tmp_path, [
            "c1,A,2024-01-01 00:00:00",
            "c1,B,2024-01-01 00:00:10",
            "c1,C,not-a-date",
        ])
        with pytest.raises(LogParseError, match="row 4"):
            parse_csv(p, self.MAPPING)

    def test_unknown_column(self, tmp_path):
        p = self.write(tmp_path, ["c1,A,2024-01-01 00:00:00"])
        with pytest.raises(LogSchemaError, match="nope"):
            parse_csv(p, CsvMapping("nope", "activity", "ts"))


class TestClean:
    def test_nearest_rank_cap_keeps_nine(self):
        lengths = [2, 3, 5, 5, 5, 5, 5, 5, 5, 50]
        log = make_log([
            (f"c{i}", [f"A{j}" for j in range(n)]) for i, n in enumerate(lengths)
        ])
        assert length_cap(lengths, 0.90) == 50
        cleaned = clean(log, min_len=3, max_len_percentile=0.90)
        assert len(cleaned) == 9
        assert {len(t) for t in cleaned.traces} == {3, 5, 50}

    def test_identity_when_nothing_filtered(self):
        log = make_log([(f"c{i}", ["A", "B", "C"]) for i in range(4)])
        cleaned = clean(log, min_len=3)
        assert cleaned.case_ids == log.case_ids

    def test_all_filtered_is_error(self):
        log = make_log([("c1", ["A", "B"])])
        with pytest.raises(DataError, match="all traces filtered"):
            clean(log, min_len=3)


class TestDeriveTimes:
    def test_arithmetic(self):
        log = make_log([("c1", ["A", "B", "C"])], step_seconds=1.0)
        # override: timestamps 0, 60, 180
        from cosmo.eventlog import log_from_sequences
        log = log_from_sequences([("c1", [("A", 0.0), ("B", 60.0), ("C", 180.0)])])
        out = derive_times(log)
        events = out.traces[0].events
        assert [e.execution_time for e in events] == [0.0, 60.0, 120.0]
        assert [e.remaining_time for e in events] == [180.0, 120.0, 0.0]

    def test_single_event(self):
        from cosmo.eventlog import log_from_sequences
        out = derive_times(log_from_sequences([("c1", [("A", 5.0)])]))
        e = out.traces[0].events[0]
        assert e.execution_time == 0.0 and e.remaining_time == 0.0

    def test_identical_timestamps(self):
        from cosmo.eventlog import log_from_sequences
        out = derive_times(log_from_sequences([("c1", [("A", 7.0), ("B", 7.0)])]))
        assert [e.execution_time for e in out.traces[0].events] == [0.0, 0.0]
        assert [e.remaining_time for e in out.traces[0].events] == [0.0, 0.0]

    def test_execution_sum_equals_first_remaining(self):
        log = make_log([("c1", list("ABCDE")), ("c2", list("AB"))],
                       step_seconds=13.0)
        out = derive_times(log)
        for t in out.traces:
            total = sum(e.execution_time for e in t.events)
            assert math.isclose(total, t.events[0].remaining_time)


class TestSplit:
    def test_deterministic_ratio(self):
        log = make_log([(f"c{i}", ["A", "B", "C"]) for i in range(10)])
        spec = SplitSpec(ratio=0.8, seed=42)
        tr1, te1 = split(log, spec)
        tr2, te2 = split(log, spec)
        assert len(tr1) == 8 and len(te1) == 2
        assert tr1.case_ids == tr2.case_ids and te1.case_ids == te2.case_ids

    def test_partition(self):
        log = make_log([(f"c{i}", ["A", "B"]) for i in range(7)])
        tr, te = split(log, SplitSpec(ratio=0.5, seed=1))
        assert set(tr.case_ids) | set(te.case_ids) == set(log.case_ids)
        assert set(tr.case_ids) & set(te.case_ids) == set()

    def test_half_on_two_cases(self):
        log = make_log([("c1", ["A", "B"]), ("c2", ["A", "B"])])
        tr, te = split(log, SplitSpec(ratio=0.5, seed=3))
        assert len(tr) == 1 and len(te) == 1

    def test_external_unknown_case(self, tmp_path):
        log = make_log([("c1", ["A", "B"])])
        p = tmp_path / "split.json"
        p.write_text('{"train": ["X"], "test": []}')
        with pytest.raises(DataError, match="'X'"):
            split(log, SplitSpec(mode="external-file", external_path=str(p)))


def test_jsonl_round_trip(tmp_path):
    log = make_log([("c1", ["A", "B", "C"]), ("c2", ["B", "A"])],
                   step_seconds=61.5)
    p = tmp_path / "log.jsonl"
    export_jsonl(log, p)
    back = parse_jsonl(p)
    assert back.case_ids == log.case_ids
    for t1, t2 in zip(log.traces, back.traces):
        assert t1.activities == t2.activities
        for e1, e2 in zip(t1.events, t2.events):
            assert abs(e1.timestamp - e2.timestamp) < 1e-3
