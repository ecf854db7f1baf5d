"""Structured literature corpus: papers, grippers, grasp instances, task scripts,
task distribution and the primitive ledger, with schema and cross-table checks.

Every corpus file is a UTF-8 JSON document holding a top-level array of
records.  Records are checked against a JSON schema one at a time so that a
:class:`SchemaError` can point at the file and line of the offending record.
"""

from __future__ import annotations

import enum
import json
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

from .classifier import InvalidTransition, PrimitiveType, TransitionFlags, classify_transition
from .core import (
    DEFAULT_HANDS,
    ClothStateTag,
    GraspPointClass,
    GraspState,
    GraspUnit,
    HandMode,
    hands_used,
)
from .notation import ParseError, Severity, parse_grasp, print_grasp

CORPUS_ENV_VAR = "GRASP_CORPUS_DIR"

FILE_KINDS = (
    "papers.json",
    "grippers.json",
    "grasp_instances.json",
    "tasks.json",
    "distribution.json",
    "primitives_ledger.json",
)


class SchemaError(ValueError):
    """A corpus file is malformed or references something that does not exist."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        self.detail = message
        where = ""
        if file:
            where = f"{file}:{line}: " if line else f"{file}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    where: str = ""

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def __str__(self) -> str:
        loc = f"[{self.where}] " if self.where else ""
        return f"{self.severity.value}: {loc}{self.code}: {self.message}"

    def to_json(self) -> dict:
        return {"severity": self.severity.value, "code": self.code, "message": self.message, "where": self.where}


class Actor(str, enum.Enum):
    H1 = "H1"
    H2 = "H2"
    Both = "Both"
    Unspecified = "Unspecified"


@dataclass(frozen=True)
class DocumentedException:
    """A known inconsistency in the source tables, kept as data."""

    kind: str
    note: str
    step: str | None = None


# ---------------------------------------------------------------------------
# record types


@dataclass(frozen=True)
class PaperRecord:
    key: str
    name: str
    bib_keys: tuple[str, ...] = ()
    tasks_total: int | None = None
    exceptions: tuple[DocumentedException, ...] = ()


@dataclass(frozen=True)
class GripperProfile:
    id: str
    name: str
    source_refs: tuple[str, ...]
    capabilities: frozenset[GraspUnit]
    # units X for which the gripper can hold "sh 2X" with one hand
    shared_capabilities: frozenset[GraspUnit] = frozenset()
    notes: str = ""

    def can_hold(self, unit: GraspUnit, shared: bool = False) -> bool:
        return unit in (self.shared_capabilities if shared else self.capabilities)


@dataclass(frozen=True)
class GraspInstanceRecord:
    citation: str
    gripper_id: tuple[str, ...]
    grasp: GraspState
    notes: str = ""


@dataclass(frozen=True)
class StartState:
    grasp: GraspState
    cloth: ClothStateTag = ClothStateTag.Unspecified
    grasp_point: GraspPointClass = GraspPointClass.Unspecified


@dataclass(frozen=True)
class EndState:
    grasp: GraspState
    cloth: ClothStateTag = ClothStateTag.Unspecified


@dataclass(frozen=True)
class StepRecord:
    id: str
    actor: Actor
    label: PrimitiveType
    pre: GraspState
    post: GraspState
    flags: TransitionFlags = TransitionFlags()
    grasp_point: GraspPointClass = GraspPointClass.Unspecified
    description: str = ""
    tallied: bool = True
    variant: str | None = None


@dataclass(frozen=True)
class TaskScript:
    id: str
    name: str
    start: StartState
    steps: tuple[StepRecord, ...]
    end: EndState
    exceptions: tuple[DocumentedException, ...] = ()
    annotations: tuple[str, ...] = ()

    def step(self, step_id: str) -> StepRecord:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(f"task {self.id} has no step {step_id!r}")

    @property
    def variants(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(s.variant for s in self.steps if s.variant))

    def paths(self) -> list[tuple[str | None, tuple[StepRecord, ...]]]:
        """Step sequences to chain: one per variant, or the whole script."""
        if not self.variants:
            return [(None, self.steps)]
        return [(v, tuple(s for s in self.steps if s.variant in (None, v))) for v in self.variants]

    def exception(self, kind: str, step: str) -> DocumentedException | None:
        for e in self.exceptions:
            if e.kind == kind and e.step == step:
                return e
        return None


@dataclass(frozen=True)
class TaskDistributionRecord:
    task_id: str
    citations: frozenset[str]
    count: int | None = None
    annotations: tuple[tuple[str, str], ...] = ()
    exceptions: tuple[DocumentedException, ...] = ()


@dataclass(frozen=True)
class StepRef:
    task_id: str
    step_id: str

    @classmethod
    def parse(cls, text: str) -> "StepRef":
        task_id, sep, step_id = text.partition(":")
        if not sep or not task_id or not step_id:
            raise ValueError(f"step reference {text!r} is not of the form 'task:step'")
        return cls(task_id, step_id)

    def __str__(self) -> str:
        return f"{self.task_id}:{self.step_id}"


@dataclass(frozen=True)
class LedgerRow:
    description: str
    multiplicity: int
    realized_by: tuple[StepRef, ...]
    exceptions: tuple[DocumentedException, ...] = ()


@dataclass(frozen=True)
class LedgerBlock:
    type: PrimitiveType
    title: str
    total: int
    rows: tuple[LedgerRow, ...]


@dataclass(frozen=True)
class Corpus:
    papers: tuple[PaperRecord, ...] = ()
    grippers: tuple[GripperProfile, ...] = ()
    instances: tuple[GraspInstanceRecord, ...] = ()
    tasks: tuple[TaskScript, ...] = ()
    distribution: tuple[TaskDistributionRecord, ...] = ()
    ledger: tuple[LedgerBlock, ...] = ()
    sources: tuple[str, ...] = field(default=(), compare=False)

    def gripper(self, gripper_id: str) -> GripperProfile:
        for g in self.grippers:
            if g.id == gripper_id:
                return g
        raise KeyError(f"unknown gripper {gripper_id!r}")

    def task(self, task_id: str) -> TaskScript:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(f"unknown task {task_id!r}")

    def paper(self, key: str) -> PaperRecord:
        for p in self.papers:
            if p.key == key:
                return p
        raise KeyError(f"unknown citation {key!r}")

    def without_task(self, task_id: str) -> "Corpus":
        """The corpus with one task script (and its ledger references) removed."""
        tasks = tuple(t for t in self.tasks if t.id != task_id)
        ledger = tuple(
            replace(b, rows=tuple(replace(r, realized_by=tuple(ref for ref in r.realized_by if ref.task_id != task_id)) for r in b.rows))
            for b in self.ledger
        )
        return replace(self, tasks=tasks, ledger=ledger)


# ---------------------------------------------------------------------------
# schemas

_EXCEPTION = {
    "type": "object",
    "required": ["kind", "note"],
    "properties": {"kind": {"type": "string"}, "note": {"type": "string"}, "step": {"type": "string"}},
    "additionalProperties": False,
}
_EXCEPTIONS = {"type": "array", "items": _EXCEPTION}
_STR_LIST = {"type": "array", "items": {"type": "string"}}
_GRASP = {"type": "string", "minLength": 1}

SCHEMAS: dict[str, dict] = {
    "papers.json": {
        "type": "object",
        "required": ["key", "name"],
        "properties": {
            "key": {"type": "string", "minLength": 1},
            "name": {"type": "string"},
            "bib_keys": _STR_LIST,
            "tasks_total": {"type": "integer", "minimum": 0},
            "exceptions": _EXCEPTIONS,
        },
        "additionalProperties": False,
    },
    "grippers.json": {
        "type": "object",
        "required": ["id", "name", "source_refs", "capabilities"],
        "properties": {
            "id": {"type": "string", "pattern": "^[a-z]$"},
            "name": {"type": "string"},
            "source_refs": _STR_LIST,
            "capabilities": {"type": "array", "items": _GRASP, "minItems": 1},
            "notes": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "grasp_instances.json": {
        "type": "object",
        "required": ["citation", "gripper_id", "grasp"],
        "properties": {
            "citation": {"type": "string", "minLength": 1},
            "gripper_id": {
                "oneOf": [
                    {"type": "string", "pattern": "^[a-z]$"},
                    {"type": "array", "items": {"type": "string", "pattern": "^[a-z]$"}, "minItems": 1},
                ]
            },
            "grasp": _GRASP,
            "notes": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "tasks.json": {
        "type": "object",
        "required": ["id", "name", "start", "steps", "end"],
        "properties": {
            "id": {"type": "string", "minLength": 1},
            "name": {"type": "string"},
            "start": {
                "type": "object",
                "required": ["grasp"],
                "properties": {
                    "grasp": _GRASP,
                    "cloth": {"enum": [c.value for c in ClothStateTag]},
                    "grasp_point": {"enum": [g.value for g in GraspPointClass]},
                },
                "additionalProperties": False,
            },
            "steps": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["id", "label", "pre", "post"],
                    "properties": {
                        "id": {"type": "string", "minLength": 1},
                        "actor": {"enum": [a.value for a in Actor]},
                        "label": {"enum": [p.value for p in PrimitiveType]},
                        "pre": _GRASP,
                        "post": _GRASP,
                        "flags": {
                            "type": "object",
                            "properties": {
                                "sliding": {"type": "boolean"},
                                "cloth_changed": {"type": "boolean"},
                                "grasp_point_changed": {"type": "boolean"},
                            },
                            "additionalProperties": False,
                        },
                        "grasp_point": {"enum": [g.value for g in GraspPointClass]},
                        "description": {"type": "string"},
                        "tallied": {"type": "boolean"},
                        "variant": {"type": "string"},
                    },
                    "additionalProperties": False,
                },
            },
            "end": {
                "type": "object",
                "required": ["grasp"],
                "properties": {"grasp": _GRASP, "cloth": {"enum": [c.value for c in ClothStateTag]}},
                "additionalProperties": False,
            },
            "exceptions": _EXCEPTIONS,
            "annotations": _STR_LIST,
        },
        "additionalProperties": False,
    },
    "distribution.json": {
        "type": "object",
        "required": ["task_id", "citations"],
        "properties": {
            "task_id": {"type": "string"},
            "count": {"type": "integer", "minimum": 0},
            "citations": _STR_LIST,
            "annotations": {"type": "object", "additionalProperties": {"type": "string"}},
            "exceptions": _EXCEPTIONS,
        },
        "additionalProperties": False,
    },
    "primitives_ledger.json": {
        "type": "object",
        "required": ["type", "total", "rows"],
        "properties": {
            "type": {"enum": [p.value for p in PrimitiveType]},
            "title": {"type": "string"},
            "total": {"type": "integer", "minimum": 0},
            "rows": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["description", "multiplicity", "realized_by"],
                    "properties": {
                        "description": {"type": "string"},
                        "multiplicity": {"type": "integer", "minimum": 0},
                        "realized_by": {"type": "array", "items": {"type": "string", "pattern": "^[^:]+:[^:]+$"}},
                        "exceptions": _EXCEPTIONS,
                    },
                    "additionalProperties": False,
                },
            },
        },
        "additionalProperties": False,
    },
}

_VALIDATORS = {name: jsonschema.Draft202012Validator(schema) for name, schema in SCHEMAS.items()}


# ---------------------------------------------------------------------------
# loading


def _line_of(text: str, index: int) -> int:
    return text.count("\n", 0, index) + 1


def read_records(text: str, file: str = "<memory>") -> list[tuple[int, object]]:
    """Decode a top-level JSON array, keeping the start line of each element."""
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", file, exc.lineno) from None
    decoder = json.JSONDecoder()
    i = len(text) - len(text.lstrip())
    if not text.startswith("[", i):
        raise SchemaError("top-level value must be an array of records", file, _line_of(text, i))
    i += 1
    out = []
    while True:
        while text[i].isspace():
            i += 1
        if text[i] == "]":
            return out
        value, end = decoder.raw_decode(text, i)
        out.append((_line_of(text, i), value))
        i = end
        while text[i].isspace():
            i += 1
        if text[i] == ",":
            i += 1


class _Loader:
    def __init__(self):
        self.raw: dict[str, list[tuple[int, dict]]] = {}
        self.sources: list[str] = []

    def add(self, name: str, text: str, label: str) -> None:
        if name not in SCHEMAS:
            raise SchemaError(f"unrecognised corpus file (expected one of {', '.join(FILE_KINDS)})", label)
        if name in self.raw:
            raise SchemaError("corpus file given twice", label)
        records = read_records(text, label)
        validator = _VALIDATORS[name]
        for line, rec in records:
            errors = sorted(validator.iter_errors(rec), key=lambda e: list(e.absolute_path))
            if errors:
                err = errors[0]
                path = "/".join(str(p) for p in err.absolute_path)
                raise SchemaError(f"{path + ': ' if path else ''}{err.message}", label, line)
        self.raw[name] = records
        self.sources.append(label)

    def grasp(self, text: str, file: str, line: int, what: str) -> GraspState:
        try:
            return parse_grasp(text, DEFAULT_HANDS)
        except ParseError as exc:
            raise SchemaError(f"{what}: bad grasp {text!r}: {exc.diagnostic}", file, line) from None

    def build(self) -> Corpus:
        get = lambda name: self.raw.get(name, [])  # noqa: E731

        papers = []
        for line, r in get("papers.json"):
            papers.append(
                PaperRecord(r["key"], r["name"], tuple(r.get("bib_keys", ())), r.get("tasks_total"), _exceptions(r))
            )
        _unique([p.key for p in papers], "papers.json", "citation key")

        grippers = []
        for line, r in get("grippers.json"):
            singles, shared = set(), set()
            for cap in r["capabilities"]:
                load = self.grasp(cap, "grippers.json", line, f"gripper {r['id']}")
                kind, unit = _single_hand_load(load)
                if kind is None:
                    raise SchemaError(
                        f"gripper {r['id']}: capability {cap!r} is not a one-hand load (unit or 'sh 2X')",
                        "grippers.json",
                        line,
                    )
                (shared if kind is HandMode.SHARED else singles).add(unit)
            grippers.append(
                GripperProfile(
                    r["id"], r["name"], tuple(r["source_refs"]), frozenset(singles), frozenset(shared), r.get("notes", "")
                )
            )
        _unique([g.id for g in grippers], "grippers.json", "gripper id")
        gripper_ids = {g.id for g in grippers}

        instances = []
        known = {p.key for p in papers}
        for line, r in get("grasp_instances.json"):
            gids = (r["gripper_id"],) if isinstance(r["gripper_id"], str) else tuple(r["gripper_id"])
            for gid in gids:
                if gid not in gripper_ids:
                    raise SchemaError(f"dangling reference: gripper {gid!r} is not defined", "grasp_instances.json", line)
            if papers and r["citation"] not in known:
                raise SchemaError(f"dangling reference: citation {r['citation']!r} is not registered", "grasp_instances.json", line)
            grasp = self.grasp(r["grasp"], "grasp_instances.json", line, r["citation"])
            instances.append(GraspInstanceRecord(r["citation"], gids, grasp, r.get("notes", "")))
        if not papers:
            known = {i.citation for i in instances}

        tasks = []
        for line, r in get("tasks.json"):
            tasks.append(self._task(r, line))
        _unique([t.id for t in tasks], "tasks.json", "task id")
        steps_by_ref = {StepRef(t.id, s.id): s for t in tasks for s in t.steps}
        task_ids = {t.id for t in tasks}

        distribution = []
        for line, r in get("distribution.json"):
            if tasks and r["task_id"] not in task_ids:
                raise SchemaError(f"dangling reference: task {r['task_id']!r} is not defined", "distribution.json", line)
            for c in r["citations"]:
                if c not in known:
                    raise SchemaError(f"dangling reference: citation {c!r} is not registered", "distribution.json", line)
            notes = r.get("annotations", {})
            for c in notes:
                if c not in r["citations"]:
                    raise SchemaError(f"annotation for uncited work {c!r}", "distribution.json", line)
            distribution.append(
                TaskDistributionRecord(
                    r["task_id"], frozenset(r["citations"]), r.get("count"), tuple(sorted(notes.items())), _exceptions(r)
                )
            )
        _unique([d.task_id for d in distribution], "distribution.json", "task id")

        ledger = []
        for line, r in get("primitives_ledger.json"):
            rows = []
            for row in r["rows"]:
                refs = tuple(StepRef.parse(s) for s in row["realized_by"])
                for ref in refs:
                    if tasks and ref not in steps_by_ref:
                        raise SchemaError(f"dangling reference: step {ref} is not defined", "primitives_ledger.json", line)
                rows.append(LedgerRow(row["description"], row["multiplicity"], refs, _exceptions(row)))
            ledger.append(LedgerBlock(PrimitiveType(r["type"]), r.get("title", ""), r["total"], tuple(rows)))
        _unique([b.type.value for b in ledger], "primitives_ledger.json", "primitive type")

        return Corpus(
            tuple(papers), tuple(grippers), tuple(instances), tuple(tasks), tuple(distribution), tuple(ledger),
            tuple(sorted(self.sources)),
        )

    def _task(self, r: dict, line: int) -> TaskScript:
        where = f"task {r['id']}"
        start = StartState(
            self.grasp(r["start"]["grasp"], "tasks.json", line, where + " start"),
            ClothStateTag(r["start"].get("cloth", "Unspecified")),
            GraspPointClass(r["start"].get("grasp_point", "Unspecified")),
        )
        end = EndState(
            self.grasp(r["end"]["grasp"], "tasks.json", line, where + " end"),
            ClothStateTag(r["end"].get("cloth", "Unspecified")),
        )
        steps = []
        for s in r["steps"]:
            sw = f"{where} step {s['id']}"
            steps.append(
                StepRecord(
                    id=s["id"],
                    actor=Actor(s.get("actor", "Unspecified")),
                    label=PrimitiveType(s["label"]),
                    pre=self.grasp(s["pre"], "tasks.json", line, sw),
                    post=self.grasp(s["post"], "tasks.json", line, sw),
                    flags=TransitionFlags(**s.get("flags", {})),
                    grasp_point=GraspPointClass(s.get("grasp_point", "Unspecified")),
                    description=s.get("description", ""),
                    tallied=s.get("tallied", True),
                    variant=s.get("variant"),
                )
            )
        _unique([s.id for s in steps], "tasks.json", f"step id in {where}", line)
        ids = {s.id for s in steps} | {"end"}
        excs = _exceptions(r)
        for e in excs:
            if e.step is not None and e.step not in ids:
                raise SchemaError(f"{where}: exception refers to unknown step {e.step!r}", "tasks.json", line)
        return TaskScript(r["id"], r["name"], start, tuple(steps), end, excs, tuple(r.get("annotations", ())))


def _exceptions(r: dict) -> tuple[DocumentedException, ...]:
    return tuple(DocumentedException(e["kind"], e["note"], e.get("step")) for e in r.get("exceptions", ()))


def _unique(keys: list[str], file: str, what: str, line: int | None = None) -> None:
    dup = [k for k, n in Counter(keys).items() if n > 1]
    if dup:
        raise SchemaError(f"duplicate {what} {dup[0]!r}", file, line)


def _single_hand_load(state: GraspState) -> tuple[HandMode | None, GraspUnit | None]:
    """Classify a capability string: one SINGLE unit, or one 'sh 2X' pair."""
    units = state.units
    if len(units) == 1 and units[0].assignment.mode is HandMode.SINGLE:
        return HandMode.SINGLE, units[0].unit
    if len(units) == 2 and all(p.assignment.mode is HandMode.SHARED for p in units):
        return HandMode.SHARED, units[0].unit
    return None, None


def load_corpus(documents: Iterable[str | os.PathLike]) -> Corpus:
    """Load corpus files (any subset, any order); the file name selects the record type."""
    loader = _Loader()
    for doc in documents:
        path = Path(doc)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read: {exc.strerror}", str(path)) from None
        loader.add(path.name, text, path.name)
    return loader.build()


def load_corpus_texts(texts: dict[str, str]) -> Corpus:
    """Load from in-memory documents keyed by file name."""
    loader = _Loader()
    for name in sorted(texts):
        loader.add(name, texts[name], name)
    return loader.build()


def load_corpus_dir(directory: str | os.PathLike) -> Corpus:
    d = Path(directory)
    if not d.is_dir():
        raise SchemaError("corpus directory does not exist", str(d))
    return load_corpus(sorted(p for p in d.iterdir() if p.name in FILE_KINDS))


def reference_corpus_texts() -> dict[str, str]:
    """The packaged reference corpus as {file name: JSON text}."""
    data = resources.files("clothgrasp") / "data"
    return {name: (data / name).read_text(encoding="utf-8") for name in FILE_KINDS}


def reference_corpus() -> Corpus:
    return load_corpus_texts(reference_corpus_texts())


# ---------------------------------------------------------------------------
# validation


def _severity(documented: bool) -> Severity:
    return Severity.WARNING if documented else Severity.ERROR


def validate_task(task: TaskScript, hands_available: int = DEFAULT_HANDS) -> list[Diagnostic]:
    """Chain, label and hand-usage checks for one task script.

    Breaks that appear on the task's exception list are reported as warnings.
    """
    diags: list[Diagnostic] = []
    where = f"task {task.id}"

    seen_links: set[tuple[str, str]] = set()
    for variant, steps in task.paths():
        if not steps:
            continue
        # links: start->first.pre, each post->next.pre, last.post->end
        links = [("start", task.start.grasp, steps[0].id, steps[0].pre)]
        links += [(a.id, a.post, b.id, b.pre) for a, b in zip(steps, steps[1:])]
        links.append((steps[-1].id, steps[-1].post, "end", task.end.grasp))
        for prev_id, got, next_id, want in links:
            if got == want or (prev_id, next_id) in seen_links:
                continue
            seen_links.add((prev_id, next_id))
            exc = task.exception("chain", next_id)
            suffix = f" ({exc.note})" if exc else ""
            label = f" [variant {variant}]" if variant else ""
            diags.append(
                Diagnostic(
                    _severity(exc is not None),
                    "chain-break",
                    f"{print_grasp(got)} after {prev_id} does not match {print_grasp(want)} at {next_id}{label}{suffix}",
                    where,
                )
            )

    for s in task.steps:
        sw = f"{where} step {s.id}"
        for state in (s.pre, s.post):
            used = hands_used(state.units)
            if used > hands_available:
                diags.append(Diagnostic(Severity.ERROR, "hand-overflow", f"{print_grasp(state)} uses {used} hands", sw))
        try:
            result = classify_transition(s.pre, s.post, s.flags)
        except InvalidTransition as exc:
            diags.append(Diagnostic(Severity.ERROR, "invalid-transition", str(exc), sw))
            continue
        exc = task.exception("label", s.id)
        if result.primitive is not s.label:
            note = f" ({exc.note})" if exc else ""
            diags.append(
                Diagnostic(
                    _severity(exc is not None),
                    "label-mismatch",
                    f"printed {s.label.value}, classifier gives {result.primitive.value} "
                    f"by rule {result.rule_fired.name} for {print_grasp(s.pre)} -> {print_grasp(s.post)}{note}",
                    sw,
                )
            )
        elif exc is not None:
            diags.append(Diagnostic(Severity.WARNING, "stale-exception", "documented label exception no longer applies", sw))
        if result.primitive is PrimitiveType.GM and not s.flags.cloth_changed:
            diags.append(Diagnostic(Severity.WARNING, "gm-without-cloth-change", "in-grasp motion without a cloth state change", sw))
    return diags


def _instance_realizable(rec: GraspInstanceRecord, profiles: Sequence[GripperProfile]) -> list[str]:
    """Hand-held parts of a Table I grasp that none of the cited grippers can hold."""
    missing = []
    seen_shared = set()
    for p in rec.grasp.hand_units:
        mode = p.assignment.mode
        if mode is HandMode.SHARED:
            if p.assignment.hand in seen_shared:
                continue
            seen_shared.add(p.assignment.hand)
            if not any(g.can_hold(p.unit, shared=True) for g in profiles):
                missing.append(f"sh 2{p.unit}")
        elif not any(g.can_hold(p.unit) for g in profiles):
            missing.append(("bm " if mode is HandMode.BIMANUAL else "") + str(p.unit))
    return list(dict.fromkeys(missing))


def validate_corpus(corpus: Corpus) -> list[Diagnostic]:
    """Run every task check plus cross-table consistency checks."""
    diags: list[Diagnostic] = []
    for task in corpus.tasks:
        diags.extend(validate_task(task))

    grippers = {g.id: g for g in corpus.grippers}
    for i, rec in enumerate(corpus.instances):
        profiles = [grippers[g] for g in rec.gripper_id if g in grippers]
        for unit in _instance_realizable(rec, profiles):
            diags.append(
                Diagnostic(
                    Severity.ERROR,
                    "capability",
                    f"{rec.citation} uses {unit} but gripper {'/'.join(rec.gripper_id)} cannot realize it",
                    f"grasp instance {i + 1}",
                )
            )

    for d in corpus.distribution:
        if d.count is not None and d.count != len(d.citations):
            exc = next((e for e in d.exceptions if e.kind == "count"), None)
            diags.append(
                Diagnostic(
                    _severity(exc is not None),
                    "count-mismatch",
                    f"count column says {d.count} but {len(d.citations)} works are cited" + (f" ({exc.note})" if exc else ""),
                    f"distribution task {d.task_id}",
                )
            )
    if corpus.distribution:
        marks = Counter(c for d in corpus.distribution for c in d.citations)
        for p in corpus.papers:
            if p.tasks_total is not None and p.tasks_total != marks[p.key]:
                exc = next((e for e in p.exceptions if e.kind == "total"), None)
                diags.append(
                    Diagnostic(
                        _severity(exc is not None),
                        "total-mismatch",
                        f"total row says {p.tasks_total} but {marks[p.key]} tasks cite it" + (f" ({exc.note})" if exc else ""),
                        f"paper {p.key}",
                    )
                )

    diags.extend(_validate_ledger(corpus))
    return diags


def _validate_ledger(corpus: Corpus) -> list[Diagnostic]:
    if not corpus.ledger:
        return []
    diags = []
    steps = {StepRef(t.id, s.id): s for t in corpus.tasks for s in t.steps}
    refcount: Counter = Counter()
    tallied_by_type = Counter(s.label for s in steps.values() if s.tallied)
    for block in corpus.ledger:
        bw = f"ledger {block.type.value}"
        mult_sum = sum(r.multiplicity for r in block.rows)
        if mult_sum != block.total:
            diags.append(Diagnostic(Severity.ERROR, "ledger-total", f"row multiplicities sum to {mult_sum}, total says {block.total}", bw))
        if corpus.tasks and tallied_by_type[block.type] != block.total:
            diags.append(
                Diagnostic(
                    Severity.ERROR,
                    "ledger-total",
                    f"task scripts contain {tallied_by_type[block.type]} tallied {block.type.value} steps, total says {block.total}",
                    bw,
                )
            )
        for row in block.rows:
            rw = f"{bw} row {row.description!r}"
            live = [ref for ref in row.realized_by if ref in steps]
            if not live:
                diags.append(Diagnostic(Severity.ERROR, "ledger-unrealized", "no task step realizes this primitive", rw))
            for ref in live:
                refcount[ref] += 1
                step = steps[ref]
                if step.label is not block.type:
                    diags.append(Diagnostic(Severity.ERROR, "ledger-label", f"step {ref} is labelled {step.label.value}", rw))
                if not step.tallied:
                    diags.append(Diagnostic(Severity.ERROR, "ledger-untallied", f"step {ref} is marked as not tallied", rw))
            if live and len(live) != row.multiplicity:
                exc = next((e for e in row.exceptions if e.kind == "multiplicity"), None)
                diags.append(
                    Diagnostic(
                        _severity(exc is not None),
                        "ledger-multiplicity",
                        f"printed multiplicity {row.multiplicity}, realized by {len(live)} steps" + (f" ({exc.note})" if exc else ""),
                        rw,
                    )
                )
    for ref, step in steps.items():
        if step.tallied and refcount[ref] != 1:
            diags.append(
                Diagnostic(Severity.ERROR, "ledger-coverage", f"tallied step is referenced {refcount[ref]} times by the ledger", f"task step {ref}")
            )
    return diags


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diags)


def corpus_to_json(corpus: Corpus) -> dict[str, list]:
    """Serialize a corpus back to the on-disk record layout (one list per file)."""

    def exc(es):
        return [{k: v for k, v in (("kind", e.kind), ("note", e.note), ("step", e.step)) if v is not None} for e in es]

    def caps(g: GripperProfile):
        singles = sorted(g.capabilities, key=lambda u: u.key)
        shared = sorted(g.shared_capabilities, key=lambda u: u.key)
        return [str(u) for u in singles] + [f"sh 2{u}" for u in shared]

    def step(s: StepRecord):
        rec = {"id": s.id, "actor": s.actor.value, "label": s.label.value, "pre": print_grasp(s.pre), "post": print_grasp(s.post)}
        flags = {k: True for k in ("sliding", "cloth_changed", "grasp_point_changed") if getattr(s.flags, k)}
        if flags:
            rec["flags"] = flags
        rec["grasp_point"] = s.grasp_point.value
        rec["description"] = s.description
        if not s.tallied:
            rec["tallied"] = False
        if s.variant:
            rec["variant"] = s.variant
        return rec

    out = {
        "papers.json": [
            {"key": p.key, "name": p.name, "bib_keys": list(p.bib_keys), "exceptions": exc(p.exceptions)}
            | ({"tasks_total": p.tasks_total} if p.tasks_total is not None else {})
            for p in corpus.papers
        ],
        "grippers.json": [
            {"id": g.id, "name": g.name, "source_refs": list(g.source_refs), "capabilities": caps(g)}
            | ({"notes": g.notes} if g.notes else {})
            for g in corpus.grippers
        ],
        "grasp_instances.json": [
            {"citation": i.citation, "gripper_id": i.gripper_id[0] if len(i.gripper_id) == 1 else list(i.gripper_id), "grasp": print_grasp(i.grasp)}
            | ({"notes": i.notes} if i.notes else {})
            for i in corpus.instances
        ],
        "tasks.json": [
            {
                "id": t.id,
                "name": t.name,
                "start": {"grasp": print_grasp(t.start.grasp), "cloth": t.start.cloth.value, "grasp_point": t.start.grasp_point.value},
                "steps": [step(s) for s in t.steps],
                "end": {"grasp": print_grasp(t.end.grasp), "cloth": t.end.cloth.value},
                "exceptions": exc(t.exceptions),
                "annotations": list(t.annotations),
            }
            for t in corpus.tasks
        ],
        "distribution.json": [
            {"task_id": d.task_id, "citations": sorted(d.citations), "annotations": dict(d.annotations), "exceptions": exc(d.exceptions)}
            | ({"count": d.count} if d.count is not None else {})
            for d in corpus.distribution
        ],
        "primitives_ledger.json": [
            {
                "type": b.type.value,
                "title": b.title,
                "total": b.total,
                "rows": [
                    {"description": r.description, "multiplicity": r.multiplicity, "realized_by": [str(x) for x in r.realized_by], "exceptions": exc(r.exceptions)}
                    for r in b.rows
                ],
            }
            for b in corpus.ledger
        ],
    }
    return out
