"""Grasp algebra: geometric virtual fingers, grasp units and bimanual grasp states.

All values are frozen dataclasses.  A :class:`GraspState` is only meaningful in
canonical form (see :func:`canonicalize`); equality of states is equality of
canonical forms.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

MAX_VFS_PER_UNIT = 3
DEFAULT_HANDS = 2


class InvalidState(ValueError):
    """A unit or state breaks an algebra invariant."""


class Geometry(enum.IntEnum):
    """Contact patch class; the value is the dimension rank."""

    P = 0
    L = 1
    Pi = 2

    @property
    def symbol(self) -> str:
        return self.name


@dataclass(frozen=True)
class VirtualFinger:
    geometry: Geometry
    extrinsic: bool = False
    # metadata only: a hanger line held by a hand is still an ordinary L
    via_tool: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.via_tool and self.extrinsic:
            raise InvalidState("a tool-borne virtual finger cannot be extrinsic")

    @property
    def key(self) -> tuple[int, int]:
        return (int(self.extrinsic), int(self.geometry))

    @property
    def kind(self) -> tuple[Geometry, bool]:
        return (self.geometry, self.extrinsic)

    def __str__(self) -> str:
        return self.geometry.symbol + ("e" if self.extrinsic else "")


def vf(symbol: str) -> VirtualFinger:
    """Build a VF from a compact symbol such as ``"P"``, ``"Pie"`` or ``"Le"``."""
    extrinsic = symbol.endswith("e") and symbol not in ("P", "L", "Pi")
    base = symbol[:-1] if extrinsic else symbol
    return VirtualFinger(Geometry[base], extrinsic)


ALL_VF_KINDS: tuple[VirtualFinger, ...] = tuple(
    VirtualFinger(g, ext) for ext in (False, True) for g in Geometry
)


@dataclass(frozen=True)
class GraspUnit:
    """A set of 1 to 3 opposing virtual fingers, stored in canonical order."""

    vfs: tuple[VirtualFinger, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.vfs, key=lambda f: f.key))
        object.__setattr__(self, "vfs", ordered)
        n = len(ordered)
        if n == 0:
            raise InvalidState("a grasp unit needs at least one virtual finger")
        if n > MAX_VFS_PER_UNIT:
            raise InvalidState(f"a grasp unit holds at most {MAX_VFS_PER_UNIT} virtual fingers, got {n}")
        if n == 1:
            (only,) = ordered
            if not (only.extrinsic or only.via_tool):
                raise InvalidState(
                    f"single-VF unit {only} must be extrinsic (gravity opposes it) or tool-borne"
                )

    @classmethod
    def of(cls, *vfs: VirtualFinger | str) -> "GraspUnit":
        return cls(tuple(v if isinstance(v, VirtualFinger) else vf(v) for v in vfs))

    @property
    def key(self) -> tuple[tuple[int, int], ...]:
        return tuple(f.key for f in self.vfs)

    @property
    def intrinsic(self) -> tuple[VirtualFinger, ...]:
        return tuple(f for f in self.vfs if not f.extrinsic)

    @property
    def extrinsic(self) -> tuple[VirtualFinger, ...]:
        return tuple(f for f in self.vfs if f.extrinsic)

    @property
    def environment_only(self) -> bool:
        return not self.intrinsic

    @property
    def hand_realizable(self) -> bool:
        """False for multi-VF units made only of environment contacts (e.g. PieLe)."""
        return not (self.environment_only and len(self.vfs) > 1)

    @property
    def tool_vfs(self) -> tuple[VirtualFinger, ...]:
        return tuple(f for f in self.vfs if f.via_tool)

    def __len__(self) -> int:
        return len(self.vfs)

    def __str__(self) -> str:
        return "".join(str(f) for f in self.vfs)


class HandMode(enum.IntEnum):
    SINGLE = 0  # one hand, printed H1/H2
    SHARED = 1  # sh: two units realized by the same hand
    BIMANUAL = 2  # bm: one unit realized by two hands
    ENVIRONMENT = 3  # no hand, environment-only unit


@dataclass(frozen=True)
class HandAssignment:
    mode: HandMode
    hand: int | None = None

    def __str__(self) -> str:
        if self.mode is HandMode.ENVIRONMENT:
            return "Env"
        if self.mode is HandMode.BIMANUAL:
            return f"bm(H{self.hand},H{self.hand + 1})" if self.hand else "bm"
        prefix = "sh " if self.mode is HandMode.SHARED else ""
        return f"{prefix}H{self.hand}" if self.hand else prefix.strip() or "H?"


ENV = HandAssignment(HandMode.ENVIRONMENT)


class GraspPointClass(str, enum.Enum):
    """Where on the cloth a grasp is taken."""

    Vertex = "Vertex"  # v
    EdgePoint = "EdgePoint"  # e
    InteriorPoint = "InteriorPoint"  # p
    Unspecified = "Unspecified"


class ClothStateTag(str, enum.Enum):
    Crumpled = "Crumpled"
    PartiallyFlat = "PartiallyFlat"
    Flat = "Flat"
    Folded = "Folded"
    UnfoldedHeld = "UnfoldedHeld"
    OnHanger = "OnHanger"
    Unspecified = "Unspecified"


@dataclass(frozen=True)
class Placement:
    unit: GraspUnit
    assignment: HandAssignment

    @property
    def sort_key(self):
        return (int(self.unit.environment_only), self.unit.key, int(self.assignment.mode))


@dataclass(frozen=True)
class GraspState:
    units: tuple[Placement, ...]
    hands_available: int = field(default=DEFAULT_HANDS, compare=False)

    def __iter__(self):
        return iter(self.units)

    def __len__(self) -> int:
        return len(self.units)

    @property
    def grasp_units(self) -> tuple[GraspUnit, ...]:
        return tuple(p.unit for p in self.units)

    @property
    def hand_units(self) -> tuple[Placement, ...]:
        return tuple(p for p in self.units if p.assignment.mode is not HandMode.ENVIRONMENT)

    @property
    def environment_units(self) -> tuple[GraspUnit, ...]:
        return tuple(p.unit for p in self.units if p.assignment.mode is HandMode.ENVIRONMENT)

    def extrinsic_multiset(self) -> Counter:
        return Counter(f.kind for p in self.units for f in p.unit.extrinsic)

    @property
    def is_single_extrinsic(self) -> bool:
        """True for the taxonomy's first row: one environment-only, one-VF unit."""
        return len(self.units) == 1 and self.units[0].unit.environment_only and len(self.units[0].unit) == 1

    def __str__(self) -> str:
        from .notation import print_grasp

        return print_grasp(self)


def hands_used(units: Iterable[Placement]) -> int:
    shared_tags = set()
    count = 0
    for p in units:
        mode = p.assignment.mode
        if mode is HandMode.SINGLE:
            count += 1
        elif mode is HandMode.BIMANUAL:
            count += 2
        elif mode is HandMode.SHARED:
            shared_tags.add(p.assignment.hand)
    return count + len(shared_tags)


def _check(units: tuple[Placement, ...], hands_available: int) -> None:
    if not units:
        raise InvalidState("a grasp state needs at least one unit")
    singles: list[int] = []
    shared: dict[int | None, list[GraspUnit]] = {}
    for p in units:
        mode = p.assignment.mode
        if (mode is HandMode.ENVIRONMENT) != p.unit.environment_only:
            if mode is HandMode.ENVIRONMENT:
                raise InvalidState(f"unit {p.unit} has intrinsic fingers and needs a hand")
            raise InvalidState(f"environment-only unit {p.unit} cannot be held by a hand")
        if mode is HandMode.SINGLE and p.assignment.hand is not None:
            singles.append(p.assignment.hand)
        elif mode is HandMode.SHARED:
            shared.setdefault(p.assignment.hand, []).append(p.unit)
    if len(set(singles)) != len(singles):
        raise InvalidState("two units assigned to the same hand without 'sh'")
    for tag, group in shared.items():
        if len(group) != 2 or group[0] != group[1]:
            raise InvalidState("a shared hand must hold exactly two identical units ('sh 2X')")
        if tag is not None and tag in singles:
            raise InvalidState(f"hand H{tag} is both shared and single")
    used = hands_used(units)
    if used > hands_available:
        raise InvalidState(f"state needs {used} hands but only {hands_available} are available")


def canonicalize(state: GraspState) -> GraspState:
    """Return the unique canonical representative of ``state``.

    Units are sorted (hand-held before environment-only, then by unit key)
    and hand tags are reassigned left to right, so states differing only by
    an H1/H2 relabeling compare equal.
    """
    _check(state.units, state.hands_available)
    # shared pairs must stay together; sort groups, not loose units
    groups: list[list[Placement]] = []
    shared: dict[int | None, list[Placement]] = {}
    for p in state.units:
        if p.assignment.mode is HandMode.SHARED:
            shared.setdefault(p.assignment.hand, []).append(p)
        else:
            groups.append([p])
    groups.extend(shared.values())
    groups.sort(key=lambda g: tuple(p.sort_key for p in g))

    out: list[Placement] = []
    next_hand = 1
    for group in groups:
        mode = group[0].assignment.mode
        if mode is HandMode.ENVIRONMENT:
            out.extend(Placement(p.unit, ENV) for p in group)
            continue
        assignment = HandAssignment(mode, next_hand)
        next_hand += 2 if mode is HandMode.BIMANUAL else 1
        out.extend(Placement(p.unit, assignment) for p in group)
    return GraspState(tuple(out), state.hands_available)


def make_state(placements: Iterable[tuple[GraspUnit, HandMode]], hands_available: int = DEFAULT_HANDS) -> GraspState:
    """Build and canonicalize a state from (unit, mode) pairs.

    SHARED units are paired in order of appearance.
    """
    units = []
    hand = 1
    pending_shared: int | None = None
    for unit, mode in placements:
        if mode is HandMode.ENVIRONMENT:
            units.append(Placement(unit, ENV))
        elif mode is HandMode.SHARED:
            if pending_shared is None:
                pending_shared = hand
                hand += 1
                units.append(Placement(unit, HandAssignment(mode, pending_shared)))
            else:
                units.append(Placement(unit, HandAssignment(mode, pending_shared)))
                pending_shared = None
        else:
            units.append(Placement(unit, HandAssignment(mode, hand)))
            hand += 2 if mode is HandMode.BIMANUAL else 1
    return canonicalize(GraspState(tuple(units), hands_available))


def is_prehensile(unit: GraspUnit) -> bool:
    if len(unit) < 2 or unit.environment_only:
        return False
    return len({f.geometry for f in unit.vfs}) == 1


def vf_count(state: GraspState) -> int:
    return sum(len(p.unit) for p in state.units)


def opposition_couples(state: GraspState) -> int:
    # a lone VF pairs with gravity
    return sum(math.ceil(len(p.unit) / 2) for p in state.units)
