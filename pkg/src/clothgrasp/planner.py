"""Uniform-cost search over grasp states.

The search runs over *placements*: which load each physical hand carries plus
the set of environment contacts.  A load is one unit held by one hand, a
shared ``sh 2X`` pair, or half of a bimanual unit.  Keeping hands physical
matters because H1 and H2 may carry different grippers; plans are reported on
canonical states.

Edges (all regrasp-class; sliding and in-grasp motions do not change state):

* extrinsic: add or remove one environment contact while the hands keep their
  loads (needs at least one loaded hand to move the cloth);
* engage: any set of empty hands take loads;
* release: any set of loaded hands let go;
* swap: one hand (or one bimanual pair) changes its load.

On hand edges, environment contacts may be absorbed into the extrinsic
fingers of the new loads or emitted from the extrinsic fingers of the old
ones.  A hand-free cloth may be lifted off its contacts, and a cloth released
by every hand may land on one available contact.

Every capability-respecting regrasp is treated as executable; whether a given
in-hand regrasp or handover is physically possible is not modelled.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Iterator, Sequence

from .classifier import PrimitiveType, classify_transition
from .core import (
    DEFAULT_HANDS,
    ENV,
    GraspState,
    GraspUnit,
    HandAssignment,
    HandMode,
    Placement,
    VirtualFinger,
    canonicalize,
)
from .corpus import GripperProfile, TaskScript
from .notation import print_grasp

ASSUMPTION = "assumes every capability-respecting regrasp (in-hand or handover) is executable"
DEFAULT_BUDGET = 10**5


class NoPlanFound(Exception):
    def __init__(self, explored: int, message: str = "goal unreachable"):
        self.explored = explored
        super().__init__(f"{message} (explored {explored} states)")


class BoundExceeded(Exception):
    def __init__(self, explored: int, budget: int):
        self.explored = explored
        self.budget = budget
        super().__init__(f"explored-state budget of {budget} exhausted")


class UnrealizableState(ValueError):
    pass


@dataclass(frozen=True)
class EnvContext:
    extrinsic_available: frozenset[VirtualFinger] = frozenset()
    tools: frozenset[VirtualFinger] = frozenset()
    hands: int = DEFAULT_HANDS

    def __post_init__(self):
        # zero hands is allowed: it models a cloth nobody can touch
        if self.hands < 0:
            raise ValueError("hands must be non-negative")
        if any(not f.extrinsic for f in self.extrinsic_available):
            raise ValueError("extrinsic_available may only hold extrinsic fingers")
        object.__setattr__(self, "extrinsic_available", frozenset(self.extrinsic_available))
        object.__setattr__(self, "tools", frozenset(self.tools))


@dataclass(frozen=True)
class CostWeights:
    Ex: float = 1.0
    G: float = 1.0
    R: float = 1.0
    RG: float = 1.0
    S: float = 1.0
    GM: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            w = getattr(self, f.name)
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weight {f.name}={w} must be finite and non-negative")

    def of(self, primitive: PrimitiveType) -> float:
        return getattr(self, primitive.value)

    @classmethod
    def parse(cls, text: str) -> "CostWeights":
        """Read ``"Ex=1,G=2.5"``; unspecified types keep weight 1."""
        values = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            key, sep, val = item.partition("=")
            key = key.strip()
            if not sep or key not in PrimitiveType.__members__:
                raise ValueError(f"bad weight {item!r}; expected TYPE=number with TYPE in {', '.join(PrimitiveType.__members__)}")
            values[key] = float(val)
        return cls(**values)


@dataclass(frozen=True)
class PlanStep:
    primitive: PrimitiveType
    pre: GraspState
    post: GraspState
    actor: str = "Unspecified"

    def __str__(self) -> str:
        return f"({self.primitive.value}) {self.actor}: {print_grasp(self.pre)} -> {print_grasp(self.post)}"


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    cost: float = 0.0
    explored: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def primitives(self) -> tuple[PrimitiveType, ...]:
        return tuple(s.primitive for s in self.steps)

    def render(self) -> str:
        lines = [f"{i}. {s}" for i, s in enumerate(self.steps, 1)]
        if not self.steps:
            lines.append("(start already satisfies the goal)")
        lines.append(f"cost {self.cost:g}; {ASSUMPTION}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# placements


@dataclass(frozen=True, order=True)
class Load:
    mode: HandMode  # SINGLE, SHARED (the hand holds sh 2X) or BIMANUAL (half of bm X)
    unit: GraspUnit = field(compare=False)
    key: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "key", (int(self.mode), self.unit.key))

    def __str__(self) -> str:
        return {HandMode.SHARED: "sh 2", HandMode.BIMANUAL: "bm "}.get(self.mode, "") + str(self.unit)


@dataclass(frozen=True)
class Node:
    loads: tuple[Load | None, ...]
    env: frozenset[VirtualFinger]

    @property
    def hands_free(self) -> bool:
        return all(l is None for l in self.loads)

    def state(self, hands: int) -> GraspState:
        placements: list[Placement] = []
        bm_seen: dict[tuple, int] = {}
        for i, load in enumerate(self.loads):
            if load is None:
                continue
            tag = i + 1
            if load.mode is HandMode.SINGLE:
                placements.append(Placement(load.unit, HandAssignment(HandMode.SINGLE, tag)))
            elif load.mode is HandMode.SHARED:
                placements += [Placement(load.unit, HandAssignment(HandMode.SHARED, tag))] * 2
            else:
                n = bm_seen.get(load.key, 0)
                bm_seen[load.key] = n + 1
                if n % 2 == 0:
                    placements.append(Placement(load.unit, HandAssignment(HandMode.BIMANUAL, tag)))
        placements += [Placement(GraspUnit((f,)), ENV) for f in sorted(self.env, key=lambda f: f.key)]
        return canonicalize(GraspState(tuple(placements), hands))

    def label(self) -> str:
        hands = ",".join(f"H{i + 1}:{l if l else '-'}" for i, l in enumerate(self.loads))
        env = "+".join(str(f) for f in sorted(self.env, key=lambda f: f.key))
        return f"{hands}|{env}"


def _ext_kinds(units: Iterable[GraspUnit]) -> set[VirtualFinger]:
    return {VirtualFinger(f.geometry, True) for u in units for f in u.extrinsic}


def _env_ok(unit: GraspUnit, env: EnvContext) -> bool:
    return all(f in env.extrinsic_available for f in unit.extrinsic) and all(f in env.tools for f in unit.tool_vfs)


def gripper_can_realize(profile: GripperProfile, unit: GraspUnit, env: EnvContext) -> bool:
    """True iff the gripper lists the unit and the environment supplies its contacts and tools."""
    return unit in profile.capabilities and _env_ok(unit, env)


def load_realizable(profile: GripperProfile, load: Load, env: EnvContext) -> bool:
    if not _env_ok(load.unit, env):
        return False
    return profile.can_hold(load.unit, shared=load.mode is HandMode.SHARED)


def hand_profiles(profiles: GripperProfile | Sequence[GripperProfile], hands: int) -> tuple[GripperProfile, ...]:
    """Normalize the per-hand profile argument (one profile is reused for every hand)."""
    if isinstance(profiles, GripperProfile):
        return (profiles,) * hands
    profiles = tuple(profiles)
    if len(profiles) < hands:
        raise ValueError(f"{hands} hands need {hands} gripper profiles, got {len(profiles)}")
    return profiles[:hands]


class _Graph:
    """Successor generator for one (profiles, env) pair."""

    def __init__(self, profiles, env: EnvContext):
        self.env = env
        self.hands = env.hands
        self.profiles = hand_profiles(profiles, self.hands)
        self.available = sorted(env.extrinsic_available, key=lambda f: f.key)
        self.options: list[list[Load]] = []
        for p in self.profiles:
            opts = [Load(HandMode.SINGLE, u) for u in p.capabilities]
            opts += [Load(HandMode.SHARED, u) for u in p.shared_capabilities]
            self.options.append(sorted((l for l in opts if load_realizable(p, l, env)), key=lambda l: l.key))
        self._state_cache: dict[Node, GraspState] = {}

    def state(self, node: Node) -> GraspState:
        s = self._state_cache.get(node)
        if s is None:
            s = self._state_cache[node] = node.state(self.hands)
        return s

    def bm_options(self, i: int, j: int) -> list[Load]:
        pi, pj = self.profiles[i], self.profiles[j]
        return [
            Load(HandMode.BIMANUAL, l.unit)
            for l in self.options[i]
            if l.mode is HandMode.SINGLE and pj.can_hold(l.unit) and pi.can_hold(l.unit)
        ]

    # -- placements of a canonical state -----------------------------------

    def placements(self, state: GraspState) -> list[Node]:
        state = canonicalize(state)
        env_units = state.environment_units
        env = frozenset(f for u in env_units for f in u.vfs)
        if any(len(u) != 1 for u in env_units) or len(env) != len(env_units):
            return []
        if any(f not in self.env.extrinsic_available for f in env):
            return []
        groups: list[tuple[HandMode, GraspUnit]] = []
        shared_seen = set()
        for p in state.hand_units:
            mode = p.assignment.mode
            if mode is HandMode.SHARED:
                if p.assignment.hand in shared_seen:
                    continue
                shared_seen.add(p.assignment.hand)
            groups.append((mode, p.unit))
        need = sum(2 if m is HandMode.BIMANUAL else 1 for m, _ in groups)
        if need > self.hands:
            return []
        nodes = set()
        slots = []
        for mode, unit in groups:
            slots += [(mode, unit)] * (2 if mode is HandMode.BIMANUAL else 1)
        for hands in itertools.permutations(range(self.hands), len(slots)):
            loads: list[Load | None] = [None] * self.hands
            for h, (mode, unit) in zip(hands, slots):
                loads[h] = Load(mode, unit)
            node = Node(tuple(loads), env)
            if self.realizable(node):
                nodes.add(node)
        return sorted(nodes, key=Node.label)

    def realizable(self, node: Node) -> bool:
        if node.hands_free and not node.env:
            return False
        if any(f not in self.env.extrinsic_available for f in node.env):
            return False
        bm = {}
        for i, load in enumerate(node.loads):
            if load is None:
                continue
            if not load_realizable(self.profiles[i], load, self.env):
                return False
            if load.mode is HandMode.BIMANUAL:
                bm[load.key] = bm.get(load.key, 0) + 1
        return all(n % 2 == 0 for n in bm.values())

    # -- edges --------------------------------------------------------------

    def _env_variants(self, node: Node, changed: Sequence[int], new_loads: tuple[Load | None, ...]) -> Iterator[frozenset]:
        old_ext = _ext_kinds(node.loads[i].unit for i in changed if node.loads[i] is not None)
        new_ext = _ext_kinds(new_loads[i].unit for i in changed if new_loads[i] is not None)
        env = node.env
        absorbable = sorted(env & new_ext, key=lambda f: f.key)
        if node.hands_free:
            absorbable = sorted(env, key=lambda f: f.key)
        emittable = sorted((old_ext & self.env.extrinsic_available) - env, key=lambda f: f.key)
        lands = all(l is None for l in new_loads)
        for na in range(len(absorbable) + 1):
            for absorbed in itertools.combinations(absorbable, na):
                for ne in range(len(emittable) + 1):
                    for emitted in itertools.combinations(emittable, ne):
                        base = (env - set(absorbed)) | set(emitted)
                        yield frozenset(base)
                        if lands:
                            for extra in self.available:
                                if extra not in base:
                                    yield frozenset(base | {extra})

    def _hand_changes(self, node: Node) -> Iterator[tuple[tuple[int, ...], tuple[Load | None, ...]]]:
        loads = node.loads
        n = self.hands
        empty = [i for i in range(n) if loads[i] is None]
        loaded = [i for i in range(n) if loads[i] is not None]
        # engage: choose a subset of empty hands and give each a load, pairing some into bm
        for k in range(1, len(empty) + 1):
            for subset in itertools.combinations(empty, k):
                yield from self._fill(loads, subset)
        # release
        for k in range(1, len(loaded) + 1):
            for subset in itertools.combinations(loaded, k):
                new = list(loads)
                for i in subset:
                    new[i] = None
                yield subset, tuple(new)
        # swap one hand, or one bimanual pair
        for i in loaded:
            li = loads[i]
            if li.mode is HandMode.BIMANUAL:
                for j in loaded:
                    if j > i and loads[j] == li:
                        for opt in self.bm_options(i, j):
                            if opt != li:
                                new = list(loads)
                                new[i] = new[j] = opt
                                yield (i, j), tuple(new)
                continue
            for opt in self.options[i]:
                if opt != li:
                    new = list(loads)
                    new[i] = opt
                    yield (i,), tuple(new)

    def _fill(self, loads, subset):
        """All ways to load every hand in ``subset`` (singly, or two hands as one bm unit)."""

        def rec(remaining, acc):
            if not remaining:
                yield tuple(acc)
                return
            i, rest = remaining[0], remaining[1:]
            for opt in self.options[i]:
                acc[i] = opt
                yield from rec(rest, acc)
            for j in rest:
                for opt in self.bm_options(i, j):
                    acc[i] = acc[j] = opt
                    yield from rec(tuple(h for h in rest if h != j), acc)
                    acc[j] = None
            acc[i] = None

        for new in rec(tuple(subset), list(loads)):
            yield tuple(subset), new

    def edges(self, node: Node) -> list[tuple[PrimitiveType, Node, str]]:
        pre = self.state(node)
        out: dict[tuple, tuple[PrimitiveType, Node, str]] = {}

        def add(nxt: Node, actor: str):
            if not self.realizable(nxt):
                return
            post = self.state(nxt)
            if post == pre:
                return
            prim = classify_transition(pre, post).primitive
            out.setdefault((nxt, prim), (prim, nxt, actor))

        if not node.hands_free:
            for f in self.available:
                nxt_env = node.env - {f} if f in node.env else node.env | {f}
                add(Node(node.loads, frozenset(nxt_env)), "Unspecified")
        for changed, new_loads in self._hand_changes(node):
            actor = _actor(changed, self.hands)
            for env in self._env_variants(node, changed, new_loads):
                add(Node(new_loads, env), actor)
        return sorted(out.values(), key=lambda e: (print_grasp(self.state(e[1])), e[1].label(), e[0].value))


def _actor(changed: Sequence[int], hands: int) -> str:
    if len(changed) == hands and hands > 1:
        return "Both"
    return ",".join(f"H{i + 1}" for i in changed)


def _start_nodes(graph: _Graph, state: GraspState) -> list[Node]:
    nodes = graph.placements(state)
    if not nodes:
        raise UnrealizableState(f"{print_grasp(state)} cannot be realized with the given grippers and environment")
    return nodes


def successors(state: GraspState, profiles, env: EnvContext) -> list[PlanStep]:
    """All one-primitive regrasp steps out of ``state``, deduplicated on canonical post state."""
    state = canonicalize(state)
    if env.hands == 0:
        return []
    graph = _Graph(profiles, env)
    seen: dict[tuple, PlanStep] = {}
    for node in _start_nodes(graph, state):
        for prim, nxt, actor in graph.edges(node):
            post = graph.state(nxt)
            key = (print_grasp(post), prim.value)
            seen.setdefault(key, PlanStep(prim, state, post, actor))
    return [seen[k] for k in sorted(seen)]


def find_plan(
    start: GraspState,
    goal: GraspState,
    profiles,
    env: EnvContext,
    weights: CostWeights = CostWeights(),
    budget: int = DEFAULT_BUDGET,
) -> Plan:
    """Minimum-cost primitive sequence from ``start`` to ``goal``.

    Ties between equal-cost frontier entries go to the smaller canonical
    print of the state, so results are reproducible.
    """
    start, goal = canonicalize(start), canonicalize(goal)
    if start == goal:
        return Plan((), 0.0, 0)
    if env.hands == 0:
        raise NoPlanFound(0, "no hands available")
    graph = _Graph(profiles, env)
    counter = itertools.count()
    frontier = []
    best: dict[Node, float] = {}
    parent: dict[Node, tuple[Node, PrimitiveType, str] | None] = {}
    for node in _start_nodes(graph, start):
        best[node] = 0.0
        parent[node] = None
        heapq.heappush(frontier, (0.0, print_grasp(start), node.label(), next(counter), node))
    explored = 0
    done: set[Node] = set()
    while frontier:
        cost, _, _, _, node = heapq.heappop(frontier)
        if node in done:
            continue
        done.add(node)
        explored += 1
        if graph.state(node) == goal:
            return Plan(tuple(_unwind(graph, parent, node)), cost, explored)
        if explored >= budget:
            raise BoundExceeded(explored, budget)
        for prim, nxt, actor in graph.edges(node):
            c = cost + weights.of(prim)
            if nxt not in best or c < best[nxt]:
                best[nxt] = c
                parent[nxt] = (node, prim, actor)
                heapq.heappush(frontier, (c, print_grasp(graph.state(nxt)), nxt.label(), next(counter), nxt))
    raise NoPlanFound(explored)


def _unwind(graph: _Graph, parent, node: Node) -> list[PlanStep]:
    steps = []
    while parent[node] is not None:
        prev, prim, actor = parent[node]
        steps.append(PlanStep(prim, graph.state(prev), graph.state(node), actor))
        node = prev
    return steps[::-1]


def plan_is_valid(steps: Sequence[PlanStep], profiles, env: EnvContext) -> bool:
    """True iff the steps chain and each one is an edge of the placement graph
    with the stated primitive, following some consistent assignment of hands."""
    if not steps:
        return True
    graph = _Graph(profiles, env)
    frontier = set(graph.placements(steps[0].pre))
    for prev, step in zip((None,) + tuple(steps), steps):
        if prev is not None and prev.post != step.pre:
            return False
        nxt = set()
        for node in frontier:
            for prim, n2, _ in graph.edges(node):
                if prim is step.primitive and graph.state(n2) == canonicalize(step.post):
                    nxt.add(n2)
        if not nxt:
            return False
        frontier = nxt
    return True


def state_realizable(state: GraspState, profiles, env: EnvContext) -> bool:
    if env.hands == 0:
        return not canonicalize(state).hand_units and _env_only_ok(state, env)
    return bool(_Graph(profiles, env).placements(state))


def _env_only_ok(state: GraspState, env: EnvContext) -> bool:
    units = canonicalize(state).environment_units
    kinds = [u.vfs[0] for u in units if len(u) == 1]
    return len(kinds) == len(units) and len(set(kinds)) == len(kinds) and all(k in env.extrinsic_available for k in kinds)


def task_feasible(task: TaskScript, profiles, env: EnvContext) -> tuple[bool, int | None]:
    """(True, None) if every step's pre and post state is realizable, else (False, index of the first failing step)."""
    cache: dict[GraspState, bool] = {}

    def ok(state: GraspState) -> bool:
        if state not in cache:
            cache[state] = state_realizable(state, profiles, env)
        return cache[state]

    for i, step in enumerate(task.steps):
        if not (ok(step.pre) and ok(step.post)):
            return False, i
    return True, None


def regrasp_skeleton(task: TaskScript, variant: str | None = None) -> list[PlanStep]:
    """The task's regrasp-class steps (sliding and in-grasp motions dropped) as plan steps."""
    paths = dict(task.paths())
    steps = paths[variant] if variant in paths else next(iter(paths.values()))
    return [
        PlanStep(s.label, s.pre, s.post, s.actor.value)
        for s in steps
        if s.label not in (PrimitiveType.S, PrimitiveType.GM) and s.pre != s.post
    ]


def env_from_names(names: Iterable[str], hands: int = DEFAULT_HANDS) -> EnvContext:
    """Build an environment from named fixtures: table (Pie), hook (Pe), hanger (tool L)."""
    from .core import Geometry

    ext, tools = set(), set()
    for name in names:
        name = name.strip().lower()
        if not name:
            continue
        if name == "table":
            ext.add(VirtualFinger(Geometry.Pi, True))
        elif name == "hook":
            ext.add(VirtualFinger(Geometry.P, True))
        elif name == "hanger":
            tools.add(VirtualFinger(Geometry.L, False, via_tool=True))
        else:
            raise ValueError(f"unknown environment fixture {name!r} (expected table, hook, hanger)")
    return EnvContext(frozenset(ext), frozenset(tools), hands)
