import json
from dataclasses import replace

import pytest

from clothgrasp.classifier import PrimitiveType, classify_transition
from clothgrasp.core import GraspUnit
from clothgrasp.corpus import (
    FILE_KINDS,
    SchemaError,
    StepRef,
    corpus_to_json,
    has_errors,
    load_corpus,
    load_corpus_dir,
    load_corpus_texts,
    read_records,
    validate_corpus,
    validate_task,
)
from clothgrasp.notation import Severity, parse_grasp, print_grasp


def _mutate(texts, name, fn):
    records = json.loads(texts[name])
    fn(records)
    out = dict(texts)
    out[name] = json.dumps(records, indent=2)
    return out


class TestLoad:
    def test_counts(self, corpus):
        assert [g.id for g in corpus.grippers] == list("abcdefghijklmnopqrstuv")
        assert len(corpus.instances) == 63
        assert len(corpus.tasks) == 20
        assert [t.id for t in corpus.tasks] == ["1a", "1b", "1c", "2", "3a", "3b", "4", "5a", "5b", "5c", "5d", "6", "7", "8", "9", "10", "11", "12", "13", "14"]

    def test_bare_arm_point_contact(self, corpus):
        assert corpus.gripper("a").capabilities == {GraspUnit.of("P", "Pie")}

    def test_every_gripper_has_capabilities(self, corpus):
        assert all(g.capabilities or g.shared_capabilities for g in corpus.grippers)

    def test_bad_grasp_reports_record_line(self, corpus_texts):
        texts = _mutate(corpus_texts, "grasp_instances.json", lambda r: r[5].update(grasp="QQ"))
        with pytest.raises(SchemaError) as info:
            load_corpus_texts(texts)
        err = info.value
        assert err.file == "grasp_instances.json"
        lines = texts["grasp_instances.json"].splitlines()
        assert '"QQ"' in "\n".join(lines[err.line - 1 : err.line + 5])
        assert "QQ" in str(err)

    def test_missing_gripper_is_dangling(self, corpus_texts):
        texts = _mutate(corpus_texts, "grippers.json", lambda r: r.remove(next(g for g in r if g["id"] == "s")))
        with pytest.raises(SchemaError, match="dangling reference: gripper 's'"):
            load_corpus_texts(texts)

    def test_missing_field(self, corpus_texts):
        texts = _mutate(corpus_texts, "tasks.json", lambda r: r[3]["steps"][0].pop("label"))
        with pytest.raises(SchemaError, match="label"):
            load_corpus_texts(texts)

    def test_bad_json(self):
        with pytest.raises(SchemaError) as info:
            load_corpus_texts({"papers.json": '[\n  {"key": "A", "name": "x"},\n  oops\n]'})
        assert info.value.line == 3

    def test_not_an_array(self):
        with pytest.raises(SchemaError, match="array"):
            load_corpus_texts({"papers.json": '{"key": "A"}'})

    def test_unknown_file(self):
        with pytest.raises(SchemaError, match="unrecognised"):
            load_corpus_texts({"extra.json": "[]"})

    def test_dangling_ledger_step(self, corpus_texts):
        texts = _mutate(corpus_texts, "primitives_ledger.json", lambda r: r[0]["rows"][0]["realized_by"].append("12:9"))
        with pytest.raises(SchemaError, match="12:9"):
            load_corpus_texts(texts)

    def test_dangling_citation(self, corpus_texts):
        texts = _mutate(corpus_texts, "distribution.json", lambda r: r[0]["citations"].append("Nobody1999"))
        with pytest.raises(SchemaError, match="Nobody1999"):
            load_corpus_texts(texts)

    def test_capability_must_be_one_hand_load(self, corpus_texts):
        texts = _mutate(corpus_texts, "grippers.json", lambda r: r[0]["capabilities"].append("2PP"))
        with pytest.raises(SchemaError, match="one-hand load"):
            load_corpus_texts(texts)

    def test_order_independent_and_deterministic(self, corpus_texts, tmp_path):
        for name, text in corpus_texts.items():
            (tmp_path / name).write_text(text, encoding="utf-8")
        a = load_corpus(sorted(tmp_path.iterdir()))
        b = load_corpus(sorted(tmp_path.iterdir(), reverse=True))
        assert a == b == load_corpus_dir(tmp_path)

    def test_empty_corpus(self):
        c = load_corpus_texts({})
        assert c.instances == () and validate_corpus(c) == []

    def test_read_records_lines(self):
        recs = read_records('[\n {"a": 1},\n\n {"b": 2}\n]')
        assert [line for line, _ in recs] == [2, 4]

    def test_serialization_reloads_identically(self, corpus):
        dumped = {k: json.dumps(v) for k, v in corpus_to_json(corpus).items()}
        assert load_corpus_texts(dumped) == corpus


class TestStoredStates:
    def test_every_state_round_trips(self, corpus):
        states = [i.grasp for i in corpus.instances]
        for t in corpus.tasks:
            states += [t.start.grasp, t.end.grasp]
            for s in t.steps:
                states += [s.pre, s.post]
        assert states
        for s in states:
            assert parse_grasp(print_grasp(s)) == s

    def test_table_one_forms(self, corpus):
        forms = {print_grasp(i.grasp) for i in corpus.instances}
        assert {"PP", "2PP", "2PP+Pie", "sh 2PPie", "PPie+LPie", "PP+L", "LPi", "LL+Pie"} <= forms


class TestValidateTask:
    def test_fold_on_table_clean(self, corpus):
        assert validate_task(corpus.task("2")) == []

    def test_task_10_one_documented_exception(self, corpus):
        diags = validate_task(corpus.task("10"))
        assert len(diags) == 1
        d = diags[0]
        assert d.severity is Severity.WARNING and d.code == "label-mismatch"
        assert "printed R" in d.message and "Ex" in d.message and "EXTRINSIC" in d.message

    def test_chain_break(self, corpus):
        task = corpus.task("2")
        steps = list(task.steps)
        steps[1] = replace(steps[1], pre=parse_grasp("PP+Pie"), post=parse_grasp("PP+Pie"))
        diags = validate_task(replace(task, steps=tuple(steps)))
        assert any(d.code == "chain-break" and d.severity is Severity.ERROR for d in diags)

    def test_undocumented_label_mismatch_is_error(self, corpus):
        task = corpus.task("10")
        diags = validate_task(replace(task, exceptions=()))
        assert has_errors(diags)

    def test_gm_without_cloth_change_warns(self, corpus):
        task = corpus.task("2")
        steps = list(task.steps)
        steps[1] = replace(steps[1], flags=replace(steps[1].flags, cloth_changed=False))
        diags = validate_task(replace(task, steps=tuple(steps)))
        assert [d.code for d in diags] == ["gm-without-cloth-change"]
        assert not has_errors(diags)

    def test_hand_overflow(self, corpus):
        task = corpus.task("7")
        three = parse_grasp("2PP+PP", hands_available=3)
        steps = list(task.steps)
        steps[0] = replace(steps[0], post=three)
        steps[1] = replace(steps[1], pre=three)
        assert any(d.code == "hand-overflow" for d in validate_task(replace(task, steps=tuple(steps))))

    def test_variant_chains(self, corpus):
        task = corpus.task("6")
        assert task.variants == ("PP", "PiPi")
        assert validate_task(task) == []

    @pytest.mark.parametrize("tid", ["5a", "5b", "13"])
    def test_documented_chain_exceptions_are_warnings(self, corpus, tid):
        diags = validate_task(corpus.task(tid))
        assert diags and all(d.severity is Severity.WARNING and d.code == "chain-break" for d in diags)


class TestValidateCorpus:
    def test_reference_corpus_has_only_warnings(self, corpus):
        diags = validate_corpus(corpus)
        assert not has_errors(diags)
        codes = sorted(d.code for d in diags)
        assert codes.count("label-mismatch") == 2
        assert codes.count("chain-break") == 3
        assert codes.count("count-mismatch") == 3
        assert codes.count("total-mismatch") == 3
        assert codes.count("ledger-multiplicity") == 2
        assert len(diags) == 13

    def test_count_mismatch(self, corpus):
        d0 = corpus.distribution[0]
        assert d0.task_id == "1a"
        smaller = replace(d0, citations=frozenset(sorted(d0.citations)[:5]))
        bad = replace(corpus, distribution=(smaller,) + corpus.distribution[1:])
        errs = [d for d in validate_corpus(bad) if d.code == "count-mismatch" and d.is_error]
        assert len(errs) == 1 and "6" in errs[0].message and "5" in errs[0].message

    def test_capability_violation(self, corpus):
        rec = replace(corpus.instances[1], gripper_id=("b",), grasp=parse_grasp("2LL"))
        bad = replace(corpus, instances=corpus.instances + (rec,))
        errs = [d for d in validate_corpus(bad) if d.code == "capability"]
        assert len(errs) == 1 and "LL" in errs[0].message

    def test_unrealized_ledger_row(self, corpus):
        block = corpus.ledger[0]
        row = replace(block.rows[0], realized_by=())
        bad = replace(corpus, ledger=(replace(block, rows=(row,) + block.rows[1:]),) + corpus.ledger[1:])
        codes = {d.code for d in validate_corpus(bad) if d.is_error}
        assert "ledger-unrealized" in codes and "ledger-coverage" in codes

    def test_ledger_label_mismatch(self, corpus):
        block = corpus.ledger[0]
        row = replace(block.rows[0], realized_by=(StepRef("2", "1"),))
        bad = replace(corpus, ledger=(replace(block, rows=(row,) + block.rows[1:]),) + corpus.ledger[1:])
        assert "ledger-label" in {d.code for d in validate_corpus(bad)}

    def test_every_tallied_step_in_ledger_once(self, corpus):
        refs = [r for b in corpus.ledger for row in b.rows for r in row.realized_by]
        tallied = [StepRef(t.id, s.id) for t in corpus.tasks for s in t.steps if s.tallied]
        assert sorted(map(str, refs)) == sorted(map(str, tallied))


def test_classifier_agrees_with_labels_up_to_exceptions(corpus):
    disagreements = []
    for t in corpus.tasks:
        for s in t.steps:
            if classify_transition(s.pre, s.post, s.flags).primitive is not s.label:
                disagreements.append((t.id, s.id))
                assert t.exception("label", s.id) is not None
    assert disagreements == [("5d", "3"), ("10", "3b")]


def test_file_kinds_all_packaged(corpus_texts):
    assert sorted(corpus_texts) == sorted(FILE_KINDS)
    assert all(json.loads(t) for t in corpus_texts.values())


def test_ledger_types(corpus):
    assert [b.type for b in corpus.ledger] == [PrimitiveType.Ex, PrimitiveType.G, PrimitiveType.R, PrimitiveType.RG, PrimitiveType.GM, PrimitiveType.S]
