"""Acceptance suite: one PASS/FAIL line per criterion.

Each test prints its verdict (visible with ``-s``) and records it for the
"acceptance criteria" section of the terminal summary. Sub-results that do
not hold against the reference corpus are reported as failures, with the
numbers involved, rather than adjusted.
"""

import random
import time

import pytest

from clothgrasp.corpus import Severity, validate_corpus, validate_task
from clothgrasp.notation import parse_grasp, print_grasp
from clothgrasp.planner import env_from_names, find_plan, plan_is_valid, regrasp_skeleton, task_feasible
from clothgrasp.stats import enumerate_grasps, grasp_instance_tally, paper_task_totals, primitive_tally, task_distribution

from conftest import ACCEPTANCE_LINES
from test_notation import variant_of
from test_planner import PP_ONLY, profile, run_oracle_queries


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def test_tally_grasp_instances(corpus):
    tally, dt = timed(grasp_instance_tally, corpus)
    record("tally/grasp-instances", tally.total == 63 and dt < 1, f"total {tally.total} (want 63) in {dt:.3f}s")


def test_tally_primitives(corpus):
    want = {"Ex": 10, "G": 13, "R": 12, "RG": 12, "GM": 11, "S": 4}
    tally, dt = timed(primitive_tally, corpus)
    ok = tally.as_dict() == want and tally.total == 62 and dt < 1
    record("tally/primitives", ok, f"{tally.summary_line()} in {dt:.3f}s")


def test_tally_task_distribution(corpus):
    want = {"1a": 6, "1b": 1, "1c": 3, "2": 8, "4": 5, "8": 5}
    tally, dt = timed(task_distribution, corpus)
    papers, dt2 = timed(paper_task_totals, corpus)
    wrong = [f"{k}={tally[k]} (printed {n})" for k, n in want.items() if tally[k] != n]
    tt = [f"{d['paper']}={d['counted']} (printed {d['printed']})" for d in papers.details if d["counted"] != d["printed"]]
    ok = not wrong and not tt and dt + dt2 < 1
    detail = "counts and per-paper totals match" if ok else "; ".join(["counts: " + ", ".join(wrong or ["ok"]), "TT row: " + ", ".join(tt or ["ok"])])
    record("tally/task-distribution", ok, detail)


def test_classifier_agreement(corpus):
    mismatches = [d for d in validate_corpus(corpus) if d.code == "label-mismatch"]
    traced = all("rule" in d.message for d in mismatches)
    has_task10 = any(d.where.startswith("task 10") for d in mismatches)
    errors = [d for d in mismatches if d.severity is Severity.ERROR]
    ok = len(mismatches) <= 2 and traced and has_task10 and not errors
    record("classifier/corpus-agreement", ok, f"{len(mismatches)} documented exception(s): " + "; ".join(f"{d.where}" for d in mismatches))


def test_chain_validity(corpus):
    bad = {t.id: n for t in corpus.tasks if (n := sum(d.is_error for d in validate_task(t)))}
    ok = len(corpus.tasks) == 20 and not bad
    record("corpus/chain-validity", ok, f"{len(corpus.tasks)} tasks, error counts {bad or 'none'}")


def test_notation_round_trip():
    states = enumerate_grasps(3, 3, 2)
    identity_fail = sum(parse_grasp(print_grasp(s)) != s for s in states)
    rnd = random.Random(2024)
    variant_fail = 0
    for s in rnd.sample(states, 1500):
        printed = print_grasp(s)
        if print_grasp(parse_grasp(variant_of(printed, rnd))) != printed:
            variant_fail += 1
    ok = identity_fail == 0 and variant_fail == 0
    record("notation/round-trip", ok, f"{len(states)} enumerated states ({identity_fail} failures), 1500 variants ({variant_fail} failures)")


def test_planner_oracle():
    results, planner_time = run_oracle_queries(50)
    disagree = [(s, g, got, want) for s, g, got, want, _ in results if got != (pytest.approx(want) if want is not None else None)]
    ok = len(results) == 50 and not disagree and planner_time < 10
    reachable = sum(w is not None for *_, w, _ in results)
    record(
        "planner/oracle-equivalence",
        ok,
        f"{len(results)} queries ({reachable} reachable), {len(disagree)} disagreements, find_plan total {planner_time:.2f}s",
    )


SKELETON_ENV = env_from_names(["table", "hook", "hanger"])


def test_planner_skeletons(corpus):
    notes = []
    ok = True
    for tid in ("2", "4", "8", "9"):
        skeleton = regrasp_skeleton(corpus.task(tid))
        # the first corpus gripper whose capabilities carry the whole skeleton
        grippers = [g for g in corpus.grippers if plan_is_valid(skeleton, g, SKELETON_ENV)]
        if not grippers:
            ok = False
            notes.append(f"{tid}: no gripper realizes the skeleton")
            continue
        g = grippers[0]
        cost = find_plan(skeleton[0].pre, skeleton[-1].post, g, SKELETON_ENV).cost
        ok &= cost <= len(skeleton)
        notes.append(f"{tid}: {len(skeleton)} steps, gripper {g.id}, plan cost {cost:g}")
    record("planner/corpus-skeletons", ok, "; ".join(notes))


def test_feasibility_discrimination(corpus):
    task = corpus.task("3a")
    table = env_from_names(["table"])
    without = task_feasible(task, PP_ONLY, table)
    both = profile(("P", "P"), ("L", "L"))
    with_ll = task_feasible(task, [both, both], table)
    ok = without[0] is False and with_ll == (True, None)
    record("planner/feasibility-3a", ok, f"PP only -> {without}, PP+LL -> {with_ll}")
