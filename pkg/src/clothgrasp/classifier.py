"""Six-way classification of grasp-state transitions into manipulation primitives."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

from .core import GraspState, HandMode, canonicalize


class PrimitiveType(str, enum.Enum):
    Ex = "Ex"  # add/remove extrinsic contact
    G = "G"  # grasp from a single extrinsic VF
    R = "R"  # release to a single extrinsic VF
    RG = "RG"  # any other regrasp
    S = "S"  # sliding, grasp kept
    GM = "GM"  # in-grasp motion, grasp kept

    def __str__(self) -> str:
        return self.value


REGRASP_TYPES = (PrimitiveType.Ex, PrimitiveType.G, PrimitiveType.R, PrimitiveType.RG)
FIXED_GRASP_TYPES = (PrimitiveType.S, PrimitiveType.GM)


class InvalidTransition(ValueError):
    pass


@dataclass(frozen=True)
class TransitionFlags:
    sliding: bool = False
    cloth_changed: bool = False
    grasp_point_changed: bool = False


class Rule(str, enum.Enum):
    SLIDE = "S: same grasp, cloth slides in contact"
    IN_GRASP = "GM: same grasp, no regrasp"
    GRASP = "G: origin is a single extrinsic VF"
    RELEASE = "R: destination is a single extrinsic VF"
    EXTRINSIC = "Ex: extrinsic contacts added or removed"
    REGRASP = "RG: any other regrasp"


_RULE_TYPE = {
    Rule.SLIDE: PrimitiveType.S,
    Rule.IN_GRASP: PrimitiveType.GM,
    Rule.GRASP: PrimitiveType.G,
    Rule.RELEASE: PrimitiveType.R,
    Rule.EXTRINSIC: PrimitiveType.Ex,
    Rule.REGRASP: PrimitiveType.RG,
}


@dataclass(frozen=True)
class ClassificationResult:
    primitive: PrimitiveType
    rule_fired: Rule
    regrasp: bool


def _fire(pre: GraspState, post: GraspState, flags: TransitionFlags) -> Rule:
    same = pre == post
    if flags.sliding and not same:
        raise InvalidTransition("sliding keeps the grasp, but pre and post states differ")
    if same and not flags.grasp_point_changed:
        return Rule.SLIDE if flags.sliding else Rule.IN_GRASP
    if pre.is_single_extrinsic:
        return Rule.GRASP
    if post.is_single_extrinsic:
        return Rule.RELEASE
    if pre.extrinsic_multiset() != post.extrinsic_multiset():
        return Rule.EXTRINSIC
    return Rule.REGRASP


def classify_transition(pre: GraspState, post: GraspState, flags: TransitionFlags = TransitionFlags()) -> ClassificationResult:
    """First matching rule wins: S, GM, G, R, Ex, RG."""
    pre, post = canonicalize(pre), canonicalize(post)
    rule = _fire(pre, post, flags)
    primitive = _RULE_TYPE[rule]
    return ClassificationResult(primitive, rule, primitive in REGRASP_TYPES)


def _hand_load(state: GraspState) -> Counter:
    return Counter((p.unit, p.assignment.mode) for p in state.hand_units)


def explain_transition(pre: GraspState, post: GraspState, flags: TransitionFlags = TransitionFlags()) -> str:
    from .notation import print_grasp

    pre, post = canonicalize(pre), canonicalize(post)
    result = classify_transition(pre, post, flags)
    lines = [
        f"{print_grasp(pre)} -> {print_grasp(post)}: {result.primitive}",
        f"rule {result.rule_fired.name}: {result.rule_fired.value}",
    ]
    ext_pre, ext_post = pre.extrinsic_multiset(), post.extrinsic_multiset()
    for (geom, _), n in sorted((ext_post - ext_pre).items()):
        lines.append(f"added extrinsic {geom.symbol}e" + (f" x{n}" if n > 1 else ""))
    for (geom, _), n in sorted((ext_pre - ext_post).items()):
        lines.append(f"removed extrinsic {geom.symbol}e" + (f" x{n}" if n > 1 else ""))
    load_pre, load_post = _hand_load(pre), _hand_load(post)
    for (unit, mode), n in sorted((load_post - load_pre).items(), key=lambda kv: (kv[0][0].key, kv[0][1])):
        lines.append(f"engaged {_mode_prefix(mode)}{unit}" + (f" x{n}" if n > 1 else ""))
    for (unit, mode), n in sorted((load_pre - load_post).items(), key=lambda kv: (kv[0][0].key, kv[0][1])):
        lines.append(f"released {_mode_prefix(mode)}{unit}" + (f" x{n}" if n > 1 else ""))
    if result.rule_fired is Rule.IN_GRASP and not flags.cloth_changed:
        lines.append("warning: in-grasp motion without a cloth state change")
    if pre == post and flags.grasp_point_changed:
        lines.append("grasp point changed with identical notation")
    return "\n".join(lines)


def _mode_prefix(mode: HandMode) -> str:
    return {HandMode.SHARED: "sh ", HandMode.BIMANUAL: "bm "}.get(mode, "")
