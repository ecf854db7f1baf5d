"""Recounts over the corpus and coverage of the enumerated grasp space.

Every report is a pure function of the corpus: nothing is read from the
printed totals except where a comparison is explicitly requested.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .classifier import PrimitiveType
from .core import (
    ALL_VF_KINDS,
    ENV,
    Geometry,
    GraspState,
    GraspUnit,
    HandAssignment,
    HandMode,
    InvalidState,
    Placement,
    VirtualFinger,
)
from .corpus import Corpus
from .notation import print_grasp, render_canonical
from .planner import BoundExceeded

PRIMITIVE_ORDER = (PrimitiveType.Ex, PrimitiveType.G, PrimitiveType.R, PrimitiveType.RG, PrimitiveType.GM, PrimitiveType.S)
DEFAULT_ENUMERATION_CAP = 200_000
DEFAULT_BOUNDS = (3, 3, 2)
DERIVED_NOTE = "per-grasp usage counts derived from Table I"


@dataclass(frozen=True)
class TallyReport:
    kind: str
    counts: tuple[tuple[str, int], ...]
    details: tuple[dict, ...] = field(default=(), compare=False)
    note: str = ""

    @property
    def total(self) -> int:
        return sum(n for _, n in self.counts)

    def __getitem__(self, key: str) -> int:
        return dict(self.counts).get(key, 0)

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "counts": dict(self.counts), "total": self.total}
        if self.details:
            out["details"] = list(self.details)
        if self.note:
            out["note"] = self.note
        return out

    def summary_line(self) -> str:
        return " ".join(f"{k}={n}" for k, n in self.counts) + f" total={self.total}"

    def render(self) -> str:
        width = max((len(k) for k, _ in self.counts), default=5)
        lines = [f"# {self.kind}" + (f" ({self.note})" if self.note else "")]
        lines += [f"{k:<{width}}  {n}" for k, n in self.counts]
        lines.append(f"{'total':<{width}}  {self.total}")
        return "\n".join(lines)


def grasp_instance_tally(corpus: Corpus) -> TallyReport:
    """How often each grasp form is listed across the literature table."""
    counts = Counter(print_grasp(rec.grasp) for rec in corpus.instances)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return TallyReport("grasps", tuple(ordered), note=DERIVED_NOTE)


def primitive_tally(corpus: Corpus) -> TallyReport:
    """Primitive counts over all tallied task steps, with per-ledger-row recounts."""
    counts = Counter(s.label for t in corpus.tasks for s in t.steps if s.tallied)
    live = {(t.id, s.id) for t in corpus.tasks for s in t.steps if s.tallied}
    details = []
    for block in corpus.ledger:
        for row in block.rows:
            realized = sum(1 for ref in row.realized_by if (ref.task_id, ref.step_id) in live)
            details.append(
                {"type": block.type.value, "description": row.description, "printed": row.multiplicity, "realized": realized}
            )
    return TallyReport("primitives", tuple((p.value, counts[p]) for p in PRIMITIVE_ORDER), tuple(details))


def task_distribution(corpus: Corpus) -> TallyReport:
    """Number of works citing each task, counted from the citation sets."""
    counts = tuple((d.task_id, len(d.citations)) for d in corpus.distribution)
    details = tuple(
        {"task_id": d.task_id, "printed": d.count, "citations": sorted(d.citations)} for d in corpus.distribution
    )
    return TallyReport("tasks", counts, details)


def paper_task_totals(corpus: Corpus) -> TallyReport:
    """Number of tasks each work is cited for (the per-paper total row)."""
    marks = Counter(c for d in corpus.distribution for c in d.citations)
    keys = [p.key for p in corpus.papers] or sorted(marks)
    printed = {p.key: p.tasks_total for p in corpus.papers}
    details = tuple({"paper": k, "printed": printed.get(k), "counted": marks[k]} for k in keys)
    return TallyReport("papers", tuple((k, marks[k]) for k in keys), details)


# ---------------------------------------------------------------------------
# enumeration


def _units(max_vfs: int, tool_geometries: Iterable[Geometry]) -> list[GraspUnit]:
    units = []
    for n in range(1, max_vfs + 1):
        for combo in itertools.combinations_with_replacement(ALL_VF_KINDS, n):
            try:
                units.append(GraspUnit(combo))
            except InvalidState:
                pass
    units += [GraspUnit((VirtualFinger(g, False, via_tool=True),)) for g in tool_geometries]
    return units


def enumerate_units(max_vfs_per_unit: int, tool_geometries: Iterable[Geometry] = ()) -> list[GraspUnit]:
    """Every valid unit with at most ``max_vfs_per_unit`` fingers, in canonical key order."""
    return sorted(set(_units(max_vfs_per_unit, tool_geometries)), key=lambda u: u.key)


def enumerate_grasps(
    max_vfs_per_unit: int,
    max_units: int,
    hands: int,
    tool_geometries: Iterable[Geometry] = (),
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[GraspState]:
    """All canonical states within the bounds, sorted by canonical print.

    A state counts its grasp units (``sh 2X`` is two units, ``bm X`` one) and
    its hands; tool-borne single-finger units are only included for the
    geometries listed in ``tool_geometries`` and are held by a single hand.
    """
    if min(max_vfs_per_unit, max_units) < 1 or hands < 0:
        raise ValueError("bounds must be >= 1 (hands >= 0)")
    units = enumerate_units(max_vfs_per_unit, tool_geometries)
    # (mode, unit, units consumed, hands consumed)
    groups: list[tuple[HandMode, GraspUnit, int, int]] = []
    for u in units:
        if u.environment_only:
            groups.append((HandMode.ENVIRONMENT, u, 1, 0))
            continue
        groups.append((HandMode.SINGLE, u, 1, 1))
        if u.tool_vfs:
            continue  # a held tool is one rigid object in one hand
        groups.append((HandMode.SHARED, u, 2, 1))
        groups.append((HandMode.BIMANUAL, u, 1, 2))
    groups = [g for g in groups if g[2] <= max_units and g[3] <= hands]
    # visiting groups in canonical order makes every chosen multiset come out
    # already canonical, and distinct multisets give distinct states
    groups.sort(key=lambda g: (int(g[1].environment_only), g[1].key, int(g[0])))

    found: list[tuple[str, GraspState]] = []

    def build(chosen: list[int]) -> GraspState:
        placements = []
        tag = 1
        for gi in chosen:
            mode, unit, _, _ = groups[gi]
            if mode is HandMode.ENVIRONMENT:
                placements.append(Placement(unit, ENV))
            elif mode is HandMode.SHARED:
                placements += [Placement(unit, HandAssignment(mode, tag))] * 2
                tag += 1
            else:
                placements.append(Placement(unit, HandAssignment(mode, tag)))
                tag += 2 if mode is HandMode.BIMANUAL else 1
        return GraspState(tuple(placements), hands)

    def rec(start: int, chosen: list[int], units_left: int, hands_left: int):
        if chosen:
            state = build(chosen)
            found.append((render_canonical(state), state))
            if len(found) > cap:
                raise BoundExceeded(len(found), cap)
        for gi in range(start, len(groups)):
            _, _, nu, nh = groups[gi]
            if nu <= units_left and nh <= hands_left:
                chosen.append(gi)
                rec(gi, chosen, units_left - nu, hands_left - nh)
                chosen.pop()

    rec(0, [], max_units, hands)
    found.sort(key=lambda kv: kv[0])
    return [st for _, st in found]


@dataclass(frozen=True)
class CoverageReport:
    bounds: tuple[int, int, int]
    used: tuple[tuple[str, int], ...]
    unused: tuple[str, ...]
    outside_bounds: tuple[tuple[str, int], ...] = ()
    note: str = DERIVED_NOTE

    @property
    def enumerated(self) -> int:
        return len(self.used) + len(self.unused)

    def to_json(self) -> dict:
        return {
            "bounds": {"max_vfs_per_unit": self.bounds[0], "max_units": self.bounds[1], "hands": self.bounds[2]},
            "note": self.note,
            "enumerated": self.enumerated,
            "used": dict(self.used),
            "unused_count": len(self.unused),
            "unused": list(self.unused),
            "outside_bounds": dict(self.outside_bounds),
        }

    def render(self, show_unused: int = 20) -> str:
        v, u, h = self.bounds
        lines = [
            f"# coverage at {v} VFs/unit, {u} units, {h} hands ({self.note})",
            f"enumerated {self.enumerated}; used {len(self.used)}; never used {len(self.unused)}",
            "used:",
        ]
        width = max((len(k) for k, _ in self.used), default=4)
        lines += [f"  {k:<{width}}  {n}" for k, n in self.used]
        if self.outside_bounds:
            lines.append("used but outside the bounds:")
            lines += [f"  {k}  {n}" for k, n in self.outside_bounds]
        if show_unused:
            lines.append(f"never used (first {min(show_unused, len(self.unused))} of {len(self.unused)}):")
            lines += [f"  {k}" for k in self.unused[:show_unused]]
        return "\n".join(lines)


def coverage_report(
    corpus: Corpus,
    bounds: Sequence[int] = DEFAULT_BOUNDS,
    tool_geometries: Iterable[Geometry] = (Geometry.L,),
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> CoverageReport:
    """Split the enumerated grasp space into forms used in the literature and forms never used."""
    max_vfs, max_units, hands = bounds
    states = enumerate_grasps(max_vfs, max_units, hands, tool_geometries, cap)
    usage = grasp_instance_tally(corpus).as_dict()
    keys = [print_grasp(s) for s in states]
    in_bounds = set(keys)
    used = sorted(((k, usage[k]) for k in keys if k in usage), key=lambda kv: (-kv[1], kv[0]))
    unused = tuple(k for k in keys if k not in usage)
    outside = sorted(((k, n) for k, n in usage.items() if k not in in_bounds), key=lambda kv: (-kv[1], kv[0]))
    return CoverageReport((max_vfs, max_units, hands), tuple(used), unused, tuple(outside))
