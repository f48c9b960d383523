import pytest
from hypothesis import given, settings

from setplay_fcm.datagen import FamilySpec, generate_corpus
from setplay_fcm.model import (IDLE, TERMINAL_STEP, TRUE_TREE, BoolTree, DuplicateStepId, InvalidSetplay,
                               MissingField, PlayerRef, TypeMismatch, extract_features, extract_setplay,
                               extract_step_features, features_from_text, normalize_number, parse_condition,
                               validate)
from setplay_fcm.sexpr import loads

MINIMAL = ("(setplay :name s :id 1 :players (list) :abortCond (playm play_on) "
           ":steps (seq (step :id 0 :participants (list) :condition (playm play_on) :transitions (list))))")


def test_sample_record(sample_text):
    sp = extract_setplay(loads(sample_text))
    assert sp.name == "newSetPlay"
    assert sp.id == 1
    assert sp.invertible
    assert [str(p) for p in sp.players] == ["Player7", "Player5", "Player6", "Player8"]
    assert sp.steps[0].wait_time == 0
    assert sp.steps[0].abort_time == 26
    assert sp.steps[0].lead_player == PlayerRef(role_name="Player7")
    assert "version" in sp.extra


def test_sample_abort_condition(sample_text):
    sp = extract_setplay(loads(sample_text))
    tree = sp.abort_cond
    assert tree.label == "or"
    assert tree.children[0].label == "bowner(" + ",".join(f"opp{k}" for k in range(1, 12)) + ")"
    assert str(tree.children[1]) == "and(not(playm(play_on)),not(playm(ko_our)))"


def test_sample_step_features(sample_text):
    sp = extract_setplay(loads(sample_text))
    row = extract_step_features(sp, sp.step(0))
    assert (row.our_players_in_step, row.their_players_in_step) == (4, 0)
    assert (row.wait_time, row.abort_time, row.next_step) == (0, 26, 1)
    assert row.our_players_list == ((0, 0), (-6, -1), (-1.5, 3), (-1.5, -4))
    assert row.their_players_list == ()
    assert row.behaviors_list == ("bto(Player5,normal)", "intercept()", "pos(4,3)", "mov(3.5,-4)")
    assert row.condition == BoolTree("playm(ko_our)")


def test_sample_features(sample_text):
    f = features_from_text(sample_text)
    # opponents named only inside conditions are not participants
    assert (f.our_players_number, f.their_players_number) == (4, 0)
    assert f.steps_count == len(f.steps_list) == 2
    assert f.steps_list[1].next_step == TERMINAL_STEP


def test_truncated_sample_has_dangling_transition(truncated_sample_text):
    sp = extract_setplay(loads(truncated_sample_text), strict=False)
    assert [(v.kind, v.detail) for v in validate(sp)] == [("DanglingTransition", {"from": 0, "to": 1})]
    assert extract_features(sp).steps_list[0].abort_time == 26


def test_minimal_setplay():
    sp = extract_setplay(loads(MINIMAL))
    assert len(sp.steps) == 1
    assert sp.steps[0].participants_ours == ()
    row = extract_step_features(sp, sp.steps[0])
    assert (row.next_step, row.condition, row.behaviors_list) == (TERMINAL_STEP, TRUE_TREE, ())


def test_empty_steps():
    f = features_from_text("(setplay :name e :id 3 :steps (seq))")
    assert f.steps_count == 0 and f.steps_list == ()


def test_undeclared_participant_is_rejected():
    text = MINIMAL.replace("(step :id 0 :participants (list)",
                           "(step :id 0 :participants (list (at (playerRole :roleName P9) (pt :x 0 :y 0)))")
    with pytest.raises(InvalidSetplay) as exc:
        extract_setplay(loads(text))
    assert exc.value.violations[0].kind == "UndeclaredPlayer"


def test_missing_field():
    with pytest.raises(MissingField) as exc:
        extract_setplay(loads("(setplay :id 1 :steps (seq))"))
    assert exc.value.name == "name"


def test_type_mismatch():
    with pytest.raises(TypeMismatch):
        extract_setplay(loads("(setplay :name a :id one :steps (seq))"))
    with pytest.raises(TypeMismatch):
        parse_condition(loads("(and (playm a))"))


def test_duplicate_step_id():
    text = ("(setplay :name d :id 1 :steps (seq (step :id 0 :transitions (list (finish))) "
            "(step :id 0 :transitions (list (finish)))))")
    with pytest.raises(DuplicateStepId):
        extract_setplay(loads(text))
    sp = extract_setplay(loads(text), strict=False)
    assert [(v.kind, v.detail) for v in validate(sp)] == [("DuplicateStepId", {"id": 0})]


def test_dangling_transition():
    text = "(setplay :name d :id 1 :steps (seq (step :id 0 :transitions (list (nextStep :id 9)))))"
    sp = extract_setplay(loads(text), strict=False)
    assert [(v.kind, v.detail) for v in validate(sp)] == [("DanglingTransition", {"from": 0, "to": 9})]


def test_validate_time_order_and_missing_initial_step():
    text = "(setplay :name d :id 1 :steps (seq (step :id 2 :waitTime 5 :abortTime 1)))"
    kinds = {v.kind for v in validate(extract_setplay(loads(text), strict=False))}
    assert kinds == {"MissingInitialStep", "TimeOrder"}


def test_player_refs():
    sp = extract_setplay(loads(
        "(setplay :name t :id 1 :players (list (player :team our :number 3) (player :team opp :number 2))"
        " :steps (seq (step :id 0 :participants (list (at (player :team our :number 3) (pt :x 1 :y 2))"
        " (at (player :team opp :number 2) (pt :x 3.0 :y 4))))))"))
    f = extract_features(sp)
    assert (f.our_players_number, f.their_players_number) == (1, 1)
    assert f.steps_list[0].their_players_list == ((3.0, 4.0),)
    with pytest.raises(ValueError):
        PlayerRef(role_name="x", team="opp", number=1)


def test_players_without_directive_are_idle():
    text = ("(setplay :name t :id 1 :players (list (playerRole :roleName A) (playerRole :roleName B))"
            " :steps (seq (step :id 0 :participants (list (at (playerRole :roleName A) (pt :x 0 :y 0))"
            " (at (playerRole :roleName B) (pt :x 1 :y 1))) :transitions (list (nextStep :id 0 :directives"
            " (list (do :players (list (playerRole :roleName B)) :actions (list (mov :region (pt :x 2.0 :y 3))))))))))")
    f = features_from_text(text)
    assert f.steps_list[0].behaviors_list == (IDLE, "mov(2,3)")


def test_transition_condition_overrides_step_condition():
    text = ("(setplay :name t :id 1 :steps (seq (step :id 0 :condition (playm a) :transitions"
            " (list (nextStep :id 0 :condition (playm b))))))")
    assert features_from_text(text).steps_list[0].condition == BoolTree("playm(b)")


def test_normalize_number():
    assert normalize_number("4.0") == "4"
    assert normalize_number("-0.0") == "0"
    assert normalize_number("3.50") == "3.5"
    assert normalize_number("normal") == "normal"


def test_step_edit_is_local():
    base = generate_corpus([FamilySpec("kick_in", 1, players_range=(3, 3), steps_range=(3, 3), seed=4)])[0]
    a = features_from_text(base)
    edited = base.replace("(intercept)", "(pos :region (pt :x 1 :y 1))", 1)
    if edited == base:
        edited = base.replace(":type normal", ":type strong", 1)
    b = features_from_text(edited)
    changed = [z for z, (s, t) in enumerate(zip(a.steps_list, b.steps_list)) if s != t]
    assert len(changed) == 1
    (z,) = changed
    diffs = [i for i, (u, v) in enumerate(zip(a.steps_list[z].behaviors_list, b.steps_list[z].behaviors_list))
             if u != v]
    assert len(diffs) == 1


def test_extraction_is_deterministic(sample_text):
    assert features_from_text(sample_text) == features_from_text(sample_text)
