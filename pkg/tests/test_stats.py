import json

import pytest

from clothgrasp.core import Geometry, canonicalize
from clothgrasp.corpus import load_corpus_texts
from clothgrasp.notation import parse_grasp, print_grasp
from clothgrasp.planner import BoundExceeded
from clothgrasp.stats import (
    coverage_report,
    enumerate_grasps,
    enumerate_units,
    grasp_instance_tally,
    paper_task_totals,
    primitive_tally,
    task_distribution,
)


class TestTallies:
    def test_grasp_tally(self, corpus):
        t = grasp_instance_tally(corpus)
        assert t.total == 63
        assert t.counts[0] == ("PP", 17)
        assert t["2PP"] == 12
        assert "Table I" in t.note

    def test_primitive_tally(self, corpus):
        t = primitive_tally(corpus)
        assert t.as_dict() == {"Ex": 10, "G": 13, "R": 12, "RG": 12, "GM": 11, "S": 4}
        assert t.summary_line() == "Ex=10 G=13 R=12 RG=12 GM=11 S=4 total=62"

    def test_ledger_rows_match_printed(self, corpus):
        for d in primitive_tally(corpus).details:
            assert d["realized"] == d["printed"] or d["description"] in ("Add Pie to PP", "Rm Pie from PP+Pie")

    def test_task_distribution(self, corpus):
        t = task_distribution(corpus)
        for tid, n in {"1a": 6, "1b": 1, "1c": 3, "8": 5}.items():
            assert t[tid] == n

    def test_recount_follows_corpus(self, corpus):
        assert primitive_tally(corpus.without_task("11"))["RG"] == primitive_tally(corpus)["RG"] - 2

    def test_paper_totals(self, corpus):
        t = paper_task_totals(corpus)
        assert t["MaitinShepard2010"] == 5
        assert len(t.counts) == len(corpus.papers)

    def test_empty_corpus(self):
        empty = load_corpus_texts({})
        assert grasp_instance_tally(empty).total == 0
        assert primitive_tally(empty).total == 0
        assert task_distribution(empty).total == 0

    def test_deterministic_json(self, corpus):
        a = json.dumps(primitive_tally(corpus).to_json())
        b = json.dumps(primitive_tally(corpus).to_json())
        assert a == b


class TestEnumeration:
    def test_unit_counts(self):
        two = [u for u in enumerate_units(2) if len(u.vfs) == 2]
        assert len(two) == 21
        assert {str(u) for u in enumerate_units(1)} == {"Le", "Pe", "Pie"}

    def test_single_unit_single_vf(self):
        assert [print_grasp(s) for s in enumerate_grasps(1, 1, 2)] == ["Le", "Pe", "Pie"]

    def test_canonical_and_unique(self):
        states = enumerate_grasps(2, 2, 2)
        texts = [print_grasp(s) for s in states]
        assert len(set(texts)) == len(texts) == len(states)
        assert texts == sorted(texts)
        for s, t in zip(states, texts):
            assert canonicalize(s) == s
            assert parse_grasp(t) == s

    def test_hand_bound(self):
        assert all(print_grasp(s) in ("Le", "Pe", "Pie") or "e" in print_grasp(s) for s in enumerate_grasps(2, 2, 0))
        for s in enumerate_grasps(2, 2, 0):
            assert not s.hand_units

    def test_tools(self):
        with_tool = {print_grasp(s) for s in enumerate_grasps(1, 1, 2, (Geometry.L,))}
        assert with_tool == {"Le", "Pe", "Pie", "L"}

    def test_cap(self):
        with pytest.raises(BoundExceeded):
            enumerate_grasps(2, 2, 2, cap=10)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            enumerate_grasps(0, 1, 2)

    def test_corpus_inside_bounds(self, corpus):
        space = {print_grasp(s) for s in enumerate_grasps(3, 3, 2, (Geometry.L,))}
        assert {print_grasp(r.grasp) for r in corpus.instances} <= space


class TestCoverage:
    @pytest.fixture(scope="class")
    @staticmethod
    def report(corpus):
        return coverage_report(corpus)

    def test_partition(self, report, corpus):
        used = dict(report.used)
        assert not set(used) & set(report.unused)
        assert report.enumerated == len(enumerate_grasps(3, 3, 2, (Geometry.L,)))
        assert sum(used.values()) == 63
        assert not report.outside_bounds

    def test_most_used(self, report):
        assert report.used[0] == ("PP", 17)
        assert dict(report.used)["LL+Pie"] >= 1

    def test_small_bounds_report_outside(self, corpus):
        small = coverage_report(corpus, (2, 1, 2))
        assert small.outside_bounds
        assert "2PP" in dict(small.outside_bounds)

    def test_render(self, report):
        text = report.render(5)
        assert "never used (first 5 of" in text
        assert "Table I" in text
