"""Turning raw completion text into validated per-task labels.

The parser is total: any string, however mangled, yields exactly one
label per selected task. Tokens that match no label id or alias resolve
to the task's default label with a fallback flag, which keeps model
hallucinations auditable instead of silently guessed at. Only exact
token matches count; no substring rescue is attempted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .tasks import TaskSuite, resolve_label

JOINT = "joint"

_QUOTE_CHARS = "\"'“”‘’`"


@dataclass(frozen=True)
class ParsedLabels:
    """Labels recovered from one completion, with per-task fallback flags."""

    labels: tuple[str, ...]
    fallback_applied: tuple[bool, ...]
    extra_ignored: bool = False


@dataclass
class AnnotationRecord:
    instance_id: str
    run_id: str
    labels: dict[str, str]
    fallback_applied: dict[str, bool]
    raw_response: str
    extra_ignored: bool = False


def _clean(raw: str) -> str:
    text = raw.strip()
    if text.lower().startswith("label:"):
        text = text[len("label:"):]
    # quotes, stray periods, and whitespace can interleave at the ends
    return text.strip(_QUOTE_CHARS + ". \t\r\n")


def parse_labels(raw: str, suite: TaskSuite, mode: str = JOINT) -> ParsedLabels:
    """Parse a completion into per-task labels. Never raises on content.

    Joint mode splits on commas and resolves one token per task in task
    order. A lone answer that names the gate trigger fills the downstream
    tasks through the gate (not flagged: that is the correct reading, not
    a fallback). Missing slots get the task default with a flag; surplus
    tokens are dropped and flagged. Single mode resolves the whole answer
    against one task.
    """
    text = _clean(raw)

    if mode != JOINT:
        task = suite.get_task(mode)
        label, flagged = resolve_label(task, text)
        return ParsedLabels(labels=(label,), fallback_applied=(flagged,))

    parts = [part.strip() for part in text.split(",")]
    parts = [part for part in parts if part]

    gate = suite.gate
    if gate is not None and len(parts) == 1:
        label, flagged = resolve_label(suite.tasks[0], parts[0])
        if not flagged and label == gate.label_id:
            labels = [label] + [gate.label_id] * (len(suite.tasks) - 1)
            return ParsedLabels(
                labels=tuple(labels),
                fallback_applied=tuple(False for _ in suite.tasks),
            )

    labels = []
    flags = []
    for i, task in enumerate(suite.tasks):
        if i < len(parts):
            label, flagged = resolve_label(task, parts[i])
        else:
            label, flagged = task.default_label, True
        labels.append(label)
        flags.append(flagged)
    extra = len(parts) > len(suite.tasks)

    # the gate wins over whatever was claimed downstream
    if gate is not None and labels[0] == gate.label_id:
        for i in range(1, len(labels)):
            if labels[i] != gate.label_id:
                labels[i] = gate.label_id
                flags[i] = True

    return ParsedLabels(tuple(labels), tuple(flags), extra_ignored=extra)


def render_labels(labels: tuple[str, ...] | list[str]) -> str:
    """Inverse of joint parsing for well-formed label tuples."""
    return ", ".join(labels)


def make_record(
    instance_id: str,
    run_id: str,
    raw_response: str,
    parsed: ParsedLabels,
    suite: TaskSuite,
    mode: str = JOINT,
) -> AnnotationRecord:
    task_ids = suite.task_ids() if mode == JOINT else (mode,)
    return AnnotationRecord(
        instance_id=instance_id,
        run_id=run_id,
        labels=dict(zip(task_ids, parsed.labels)),
        fallback_applied=dict(zip(task_ids, parsed.fallback_applied)),
        raw_response=raw_response,
        extra_ignored=parsed.extra_ignored,
    )


def write_records(records: list[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(
                {
                    "instance_id": rec.instance_id,
                    "run_id": rec.run_id,
                    "labels": rec.labels,
                    "fallback_applied": rec.fallback_applied,
                    "raw_response": rec.raw_response,
                    "extra_ignored": rec.extra_ignored,
                },
                ensure_ascii=False,
            ) + "\n")


def write_records_table(records: list[AnnotationRecord], path: str | Path) -> None:
    """Flat tabular export: one row per instance, one column per task."""
    task_ids: list[str] = []
    for rec in records:
        for task_id in rec.labels:
            if task_id not in task_ids:
                task_ids.append(task_id)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["instance_id", *task_ids]) + "\n")
        for rec in records:
            row = [rec.instance_id] + [rec.labels.get(t, "") for t in task_ids]
            fh.write("\t".join(row) + "\n")


def load_records(path: str | Path) -> list[AnnotationRecord]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"annotation file not found: {path}")
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        records.append(
            AnnotationRecord(
                instance_id=rec["instance_id"],
                run_id=rec.get("run_id", ""),
                labels=dict(rec["labels"]),
                fallback_applied={k: bool(v) for k, v in rec.get("fallback_applied", {}).items()},
                raw_response=rec.get("raw_response", ""),
                extra_ignored=bool(rec.get("extra_ignored", False)),
            )
        )
    return records
