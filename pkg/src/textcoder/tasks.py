"""Coding tasks, label sets, and the hierarchical gate between tasks.

A task suite is an ordered list of coding tasks. Each task owns a label
set with optional short/long codebook descriptions and a default label
that absorbs unparseable model output. An optional gate rule marks one
label of the first task as "switches the remaining tasks off": when it
fires, every downstream task is forced to its own not-applicable label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .errors import SchemaError

DESCRIPTION_LEVELS = ("none", "short", "long")


@dataclass(frozen=True)
class LabelDef:
    """One label: canonical id plus alternate surface forms.

    The id is the token the model is asked to emit; aliases cover the
    other spellings a codebook or a model answer may use (prose names,
    different word separators).
    """

    id: str
    aliases: tuple[str, ...] = ()
    description_short: str | None = None
    description_long: str | None = None

    def __post_init__(self):
        if not self.id:
            raise SchemaError("label id must be nonempty")
        if self.id != self.id.lower():
            raise SchemaError(f"label id {self.id!r} must be lowercase")
        # commas separate joint answers, newlines would break prompt lines
        if "," in self.id or "\n" in self.id:
            raise SchemaError(f"label id {self.id!r} may not contain commas or newlines")

    def description(self, level: str) -> str | None:
        if level == "short":
            return self.description_short
        if level == "long":
            return self.description_long
        return None


@dataclass(frozen=True)
class CodingTask:
    """A single coding task: an id, a label set, and a fallback label."""

    id: str
    name: str
    labels: tuple[LabelDef, ...]
    default_label: str

    def __post_init__(self):
        if len(self.labels) < 2:
            raise SchemaError(f"task {self.id!r} needs at least 2 labels")
        seen: dict[str, str] = {}
        for label in self.labels:
            for surface in (label.id, *label.aliases):
                key = surface.strip().lower()
                if key in seen:
                    raise SchemaError(
                        f"task {self.id!r}: {surface!r} collides with {seen[key]!r}"
                    )
                seen[key] = surface
        if self.default_label not in self.label_ids():
            raise SchemaError(
                f"task {self.id!r}: default label {self.default_label!r} is not in the label set"
            )

    def label_ids(self) -> tuple[str, ...]:
        return tuple(label.id for label in self.labels)

    def get_label(self, label_id: str) -> LabelDef:
        for label in self.labels:
            if label.id == label_id:
                return label
        raise SchemaError(f"task {self.id!r} has no label {label_id!r}")

    @property
    def description_level_available(self) -> tuple[str, ...]:
        """Levels this task can render: a level is available when at least
        one label carries text for it ("none" always is)."""
        levels = ["none"]
        if any(label.description_short for label in self.labels):
            levels.append("short")
        if any(label.description_long for label in self.labels):
            levels.append("long")
        return tuple(levels)


@dataclass(frozen=True)
class GateRule:
    """First-task label that makes all downstream tasks irrelevant."""

    task_id: str
    label_id: str


@dataclass(frozen=True)
class TaskSuite:
    tasks: tuple[CodingTask, ...]
    gate: GateRule | None = None

    def __post_init__(self):
        if not self.tasks:
            raise SchemaError("a task suite needs at least one task")
        ids = [task.id for task in self.tasks]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate task ids in suite")
        if self.gate is not None:
            if self.gate.task_id != self.tasks[0].id:
                raise SchemaError(
                    f"gate task {self.gate.task_id!r} must be the first task ({self.tasks[0].id!r})"
                )
            if self.gate.label_id not in self.tasks[0].label_ids():
                raise SchemaError(
                    f"gate label {self.gate.label_id!r} is not a label of task {self.gate.task_id!r}"
                )
            for task in self.tasks[1:]:
                # downstream tasks must own a label to be forced to
                if self.gate.label_id not in task.label_ids():
                    raise SchemaError(
                        f"task {task.id!r} has no {self.gate.label_id!r} label to gate to"
                    )

    def task_ids(self) -> tuple[str, ...]:
        return tuple(task.id for task in self.tasks)

    def get_task(self, task_id: str) -> CodingTask:
        for task in self.tasks:
            if task.id == task_id:
                return task
        raise SchemaError(f"suite has no task {task_id!r}")


def _parse_label(raw, task_id) -> LabelDef:
    if not isinstance(raw, dict) or "id" not in raw:
        raise SchemaError(f"task {task_id!r}: each label needs an 'id' field")
    return LabelDef(
        id=str(raw["id"]),
        aliases=tuple(str(a) for a in raw.get("aliases", [])),
        description_short=raw.get("description_short"),
        description_long=raw.get("description_long"),
    )


def load_task_suite(config_source: str) -> TaskSuite:
    """Parse a task-suite config (YAML text) into a validated TaskSuite.

    Raises SchemaError naming the offending field on any violation:
    duplicate label ids or aliases, a default label outside the label
    set, or a gate referencing an unknown task or label.
    """
    try:
        doc = yaml.safe_load(config_source)
    except yaml.YAMLError as exc:
        raise SchemaError(f"task suite config does not parse: {exc}") from exc
    if not isinstance(doc, dict) or "tasks" not in doc:
        raise SchemaError("task suite config needs a top-level 'tasks' list")

    tasks = []
    for raw_task in doc["tasks"]:
        if "id" not in raw_task:
            raise SchemaError("each task needs an 'id' field")
        task_id = str(raw_task["id"])
        labels = tuple(_parse_label(raw, task_id) for raw in raw_task.get("labels", []))
        tasks.append(
            CodingTask(
                id=task_id,
                name=str(raw_task.get("name", task_id)),
                labels=labels,
                default_label=str(raw_task.get("default_label", "")),
            )
        )

    gate = None
    raw_gate = doc.get("gate")
    if raw_gate is not None:
        if "task" not in raw_gate or "label" not in raw_gate:
            raise SchemaError("gate needs 'task' and 'label' fields")
        known = {task.id for task in tasks}
        if raw_gate["task"] not in known:
            raise SchemaError(f"gate references unknown task {raw_gate['task']!r}")
        gate = GateRule(task_id=str(raw_gate["task"]), label_id=str(raw_gate["label"]))

    return TaskSuite(tasks=tuple(tasks), gate=gate)


def serialize_task_suite(suite: TaskSuite) -> str:
    """Inverse of load_task_suite, up to suite equivalence."""
    doc: dict = {"tasks": []}
    for task in suite.tasks:
        labels = []
        for label in task.labels:
            raw: dict = {"id": label.id}
            if label.aliases:
                raw["aliases"] = list(label.aliases)
            if label.description_short is not None:
                raw["description_short"] = label.description_short
            if label.description_long is not None:
                raw["description_long"] = label.description_long
            labels.append(raw)
        doc["tasks"].append(
            {"id": task.id, "name": task.name, "default_label": task.default_label, "labels": labels}
        )
    if suite.gate is not None:
        doc["gate"] = {"task": suite.gate.task_id, "label": suite.gate.label_id}
    return yaml.safe_dump(doc, allow_unicode=True, sort_keys=False)


def apply_gate(suite: TaskSuite, labels: list[str]) -> list[str]:
    """Force downstream labels when the gating label fired.

    Accepts either one label per task or just the gating task's label.
    When the first label equals the gate trigger, the result always has
    one entry per task with every downstream slot set to that task's
    not-applicable label; otherwise the input comes back unchanged.
    """
    if not labels:
        raise SchemaError("apply_gate needs at least the gating task's label")
    if len(labels) not in (1, len(suite.tasks)):
        raise SchemaError(
            f"expected 1 or {len(suite.tasks)} labels, got {len(labels)}"
        )
    for i, label in enumerate(labels):
        if label not in suite.tasks[i].label_ids():
            raise SchemaError(f"unknown label {label!r} for task {suite.tasks[i].id!r}")
    if suite.gate is None or labels[0] != suite.gate.label_id:
        return list(labels)
    return [labels[0]] + [suite.gate.label_id for _ in suite.tasks[1:]]


def resolve_label(task: CodingTask, surface: str) -> tuple[str, bool]:
    """Map a surface token to a canonical label id, or fall back.

    Matching is case-insensitive after trimming, first against ids and
    then against aliases. Anything that does not match resolves to the
    task's default label with the fallback flag set, so the function is
    total: garbage in, flagged default out.
    """
    needle = surface.strip().lower()
    for label in task.labels:
        if needle == label.id:
            return label.id, False
    for label in task.labels:
        for alias in label.aliases:
            if needle == alias.strip().lower():
                return label.id, False
    return task.default_label, True
