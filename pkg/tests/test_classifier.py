import pytest
from hypothesis import assume, given, strategies as st

from clothgrasp.classifier import (
    FIXED_GRASP_TYPES,
    REGRASP_TYPES,
    InvalidTransition,
    PrimitiveType,
    Rule,
    TransitionFlags,
    classify_transition,
    explain_transition,
)
from clothgrasp.notation import parse_grasp as P

from strategies import states

flag_sets = st.builds(TransitionFlags, st.booleans(), st.booleans(), st.booleans())


@pytest.mark.parametrize(
    "pre,post,expected",
    [
        ("Pie", "2PP+Pie", PrimitiveType.G),
        ("PP", "PP+Pie", PrimitiveType.Ex),
        ("PP", "2PP", PrimitiveType.RG),
        ("2PP+Pie", "Pie", PrimitiveType.R),
        ("Pie", "PPPie", PrimitiveType.G),
        ("PP+Pie", "PP", PrimitiveType.Ex),
        ("PPPie", "PP+Pie", PrimitiveType.RG),
        ("2PP", "2PP+Pe", PrimitiveType.Ex),
        ("2PP+Pe", "Pe", PrimitiveType.R),
    ],
)
def test_examples(pre, post, expected):
    result = classify_transition(P(pre), P(post))
    assert result.primitive is expected
    assert result.regrasp is (expected in REGRASP_TYPES)


def test_same_expression_with_point_change_is_regrasp():
    r = classify_transition(P("2PP+Pie"), P("2PP+Pie"), TransitionFlags(grasp_point_changed=True))
    assert r.primitive is PrimitiveType.RG and r.rule_fired is Rule.REGRASP


def test_sliding_with_different_states_is_invalid():
    with pytest.raises(InvalidTransition):
        classify_transition(P("PP"), P("2PP"), TransitionFlags(sliding=True))


@given(states())
def test_sliding_same_state_is_s(s):
    assert classify_transition(s, s, TransitionFlags(sliding=True)).primitive is PrimitiveType.S


@given(states(), flag_sets)
def test_fixed_grasp_only_s_or_gm(s, flags):
    assume(not flags.grasp_point_changed)
    assert classify_transition(s, s, flags).primitive in FIXED_GRASP_TYPES


@given(states(), states(), flag_sets)
def test_total_and_exclusive(pre, post, flags):
    if flags.sliding and pre != post:
        with pytest.raises(InvalidTransition):
            classify_transition(pre, post, flags)
        return
    result = classify_transition(pre, post, flags)
    assert result.primitive in PrimitiveType
    if pre != post:
        assert result.primitive in REGRASP_TYPES


@given(states())
def test_grasp_release_duality(s):
    assume(not s.is_single_extrinsic)
    for single in ("Pie", "Pe", "Le"):
        e = P(single)
        assert classify_transition(e, s).primitive is PrimitiveType.G
        assert classify_transition(s, e).primitive is PrimitiveType.R


def test_explain_mentions_removed_table():
    text = explain_transition(P("PP+Pie"), P("PP"))
    assert "removed extrinsic Pie" in text
    assert "rule EXTRINSIC" in text and ": Ex" in text


def test_explain_grasp_rule():
    text = explain_transition(P("Pie"), P("PPPie"))
    assert "rule GRASP" in text
    assert "engaged PPPie" in text


def test_explain_gm_warning():
    assert "rule IN_GRASP" in explain_transition(P("PP"), P("PP"), TransitionFlags(cloth_changed=True))
    assert "warning" in explain_transition(P("PP"), P("PP"))
    assert "warning" not in explain_transition(P("PP"), P("PP"), TransitionFlags(cloth_changed=True))


def test_explain_hand_changes():
    text = explain_transition(P("2PP"), P("PP"))
    assert "released PP" in text
