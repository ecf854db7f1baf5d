"""Compact textual notation for grasp states.

Grammar (whitespace allowed around ``+`` and after prefixes)::

    state     := unit_expr { "+" unit_expr }
    unit_expr := [ "2" ] [ "sh" | "bm" ] unit      ("sh 2" also accepted)
    unit      := vf { vf }                          (1 to 3 vfs)
    vf        := ( "P" | "L" | "Pi" ) [ "_e" ]

Input aliases ``Pie``, ``Pe`` and ``Le`` stand for the ``_e`` forms; printing
always uses the aliases.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from itertools import groupby

from .core import (
    DEFAULT_HANDS,
    MAX_VFS_PER_UNIT,
    ENV,
    Geometry,
    GraspState,
    GraspUnit,
    HandAssignment,
    HandMode,
    InvalidState,
    Placement,
    VirtualFinger,
    canonicalize,
)


class Severity(enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class NotationDiagnostic:
    position: int
    message: str
    severity: Severity = Severity.ERROR

    def __str__(self) -> str:
        return f"{self.severity.value} at offset {self.position}: {self.message}"


class ParseError(ValueError):
    def __init__(self, text: str, diagnostic: NotationDiagnostic):
        self.text = text
        self.diagnostic = diagnostic
        super().__init__(f"{diagnostic} in {text!r}")

    @property
    def position(self) -> int:
        return self.diagnostic.position


# longest first so the scan is greedy
VF_TOKENS: dict[str, VirtualFinger] = {
    "Pi_e": VirtualFinger(Geometry.Pi, True),
    "Pie": VirtualFinger(Geometry.Pi, True),
    "P_e": VirtualFinger(Geometry.P, True),
    "Pe": VirtualFinger(Geometry.P, True),
    "L_e": VirtualFinger(Geometry.L, True),
    "Le": VirtualFinger(Geometry.L, True),
    "Pi": VirtualFinger(Geometry.Pi),
    "P": VirtualFinger(Geometry.P),
    "L": VirtualFinger(Geometry.L),
}
_VF_ORDER = sorted(VF_TOKENS, key=len, reverse=True)
_WS = re.compile(r"\s*")


def tokenize_vfs(text: str, start: int = 0) -> list[tuple[int, str]]:
    """Greedy longest-match scan of VF tokens; returns (offset, token) pairs.

    Stops at the first character that starts no token.
    """
    out = []
    i = start
    while i < len(text):
        for tok in _VF_ORDER:
            if text.startswith(tok, i):
                out.append((i, tok))
                i += len(tok)
                break
        else:
            break
    return out


class _Parser:
    def __init__(self, text: str, hands_available: int):
        self.text = text
        self.hands = hands_available
        self.pos = 0

    def fail(self, message: str, position: int | None = None):
        pos = self.pos if position is None else position
        pos = max(0, min(pos, max(len(self.text) - 1, 0)))
        raise ParseError(self.text, NotationDiagnostic(pos, message))

    def skip_ws(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def eat(self, literal: str) -> bool:
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            self.skip_ws()
            return True
        return False

    def parse(self) -> list[tuple[int, int, HandMode | None, GraspUnit]]:
        self.skip_ws()
        if self.pos >= len(self.text):
            self.fail("empty grasp expression", 0)
        exprs = [self.unit_expr()]
        while self.pos < len(self.text):
            if not self.eat("+"):
                self.fail(f"unknown token {self.text[self.pos]!r}")
            exprs.append(self.unit_expr())
        return exprs

    def unit_expr(self):
        start = self.pos
        count = 2 if self.eat("2") else 1
        mode = None
        if self.eat("sh"):
            mode = HandMode.SHARED
        elif self.eat("bm"):
            mode = HandMode.BIMANUAL
        if count == 1 and mode is not None and self.eat("2"):
            count = 2
        tokens = tokenize_vfs(self.text, self.pos)
        if not tokens:
            if self.pos >= len(self.text):
                self.fail("expected a virtual finger (P, L, Pi)", len(self.text))
            self.fail(f"unknown token {self.text[self.pos]!r}")
        if len(tokens) > MAX_VFS_PER_UNIT:
            self.fail(f"a unit holds at most {MAX_VFS_PER_UNIT} virtual fingers", tokens[MAX_VFS_PER_UNIT][0])
        end_tok = tokens[-1]
        self.pos = end_tok[0] + len(end_tok[1])
        vfs = [VF_TOKENS[t] for _, t in tokens]
        if len(vfs) == 1 and not vfs[0].extrinsic:
            # a lone intrinsic finger can only be a held tool (e.g. a hanger)
            vfs = [VirtualFinger(vfs[0].geometry, False, via_tool=True)]
        try:
            unit = GraspUnit(tuple(vfs))
        except InvalidState as exc:
            self.fail(str(exc), start)
        if mode is HandMode.SHARED and count != 2:
            self.fail("'sh' marks a pair realized by one hand; write 'sh 2X'", start)
        if mode is not None and unit.environment_only:
            self.fail(f"environment-only unit {unit} cannot take a hand prefix", start)
        self.skip_ws()
        return (start, count, mode, unit)


def parse_grasp(text: str, hands_available: int = DEFAULT_HANDS) -> GraspState:
    parser = _Parser(text, hands_available)
    exprs = parser.parse()
    placements: list[Placement] = []
    hand = 1
    for start, count, mode, unit in exprs:
        if unit.environment_only:
            placements.extend(Placement(unit, ENV) for _ in range(count))
            continue
        if mode is HandMode.SHARED:
            placements.extend(Placement(unit, HandAssignment(HandMode.SHARED, hand)) for _ in range(2))
            hand += 1
        else:
            for _ in range(count):
                if mode is HandMode.BIMANUAL:
                    placements.append(Placement(unit, HandAssignment(HandMode.BIMANUAL, hand)))
                    hand += 2
                else:
                    placements.append(Placement(unit, HandAssignment(HandMode.SINGLE, hand)))
                    hand += 1
        if hand - 1 > hands_available:
            parser.fail(f"expression needs {hand - 1} hands but only {hands_available} are available", start)
    try:
        return canonicalize(GraspState(tuple(placements), hands_available))
    except InvalidState as exc:
        parser.fail(str(exc), 0)


def _unit_text(unit: GraspUnit) -> str:
    return "".join(str(f) for f in unit.vfs)


def print_grasp(state: GraspState) -> str:
    """Canonical compact form, e.g. ``2PP+Pie`` or ``sh 2PPie``."""
    return render_canonical(canonicalize(state))


def render_canonical(state: GraspState) -> str:
    """Print a state that is already canonical (no re-sorting)."""
    parts: list[str] = []
    shared_seen: set[int | None] = set()
    for (unit, mode), run in groupby(state.units, key=lambda p: (p.unit, p.assignment.mode)):
        run = list(run)
        text = _unit_text(unit)
        if mode is HandMode.SHARED:
            for p in run:
                if p.assignment.hand not in shared_seen:
                    shared_seen.add(p.assignment.hand)
                    parts.append(f"sh 2{text}")
        elif mode is HandMode.BIMANUAL:
            parts.extend(f"bm {text}" for _ in run)
        else:
            pairs, single = divmod(len(run), 2)
            parts.extend(f"2{text}" for _ in range(pairs))
            if single:
                parts.append(text)
    return "+".join(parts)


def describe(state: GraspState) -> list[str]:
    """One line per unit: canonical unit text and its hand assignment."""
    return [f"{_unit_text(p.unit)} @ {p.assignment}" for p in canonicalize(state).units]
