"""Prompt assembly: instruction + codebook + few-shot examples + target.

The rendered layout is frozen and golden-tested:

    {instruction}
    - {label}[: {description}]     (one bullet per label, per selected task)
    <blank line>
    Text: {example text}
    Label: {label[, label, label]}
    <blank line>
    ...
    Text: {target text}
    Label:

Joint selection lists every task's labels and renders comma-separated
answers; an example whose first-task label triggers the gate renders only
that label. The final "Label:" carries no trailing space: the completion
starts right after it.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .corpus import Instance
from .errors import ConfigError, SchemaError
from .tasks import DESCRIPTION_LEVELS, CodingTask, TaskSuite, apply_gate

JOINT = "joint"


class LabelCoverageWarning(UserWarning):
    """The selected examples do not cover every label of a task."""


@dataclass(frozen=True)
class FewShotExample:
    instance_id: str
    text: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class PromptConfig:
    """The full prompt recipe.

    task_selection is a task id or "joint"; example_order is a
    permutation of range(n_examples), defaulting to the authored order.
    """

    instruction_text: str
    task_selection: str = JOINT
    description_level: str = "none"
    n_examples: int = 0
    example_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.description_level not in DESCRIPTION_LEVELS:
            raise ConfigError(f"unknown description level {self.description_level!r}")
        if self.n_examples < 0:
            raise ConfigError("n_examples must be >= 0")


@dataclass(frozen=True)
class PromptStats:
    word_count: int
    char_count: int
    token_estimate: int


@dataclass(frozen=True)
class Prompt:
    text: str
    segment_map: dict[str, tuple[int, int]]
    stats: PromptStats

    def segment(self, name: str) -> str:
        start, end = self.segment_map[name]
        return self.text[start:end]


def estimate_tokens(text: str, chars_per_token: int = 4) -> int:
    """Upper-bound token estimate: ceil(characters / chars_per_token)."""
    if chars_per_token <= 0:
        raise ConfigError("chars_per_token must be positive")
    return math.ceil(len(text) / chars_per_token)


def permute_examples(examples: list, order: tuple[int, ...] | list[int]) -> list:
    order = tuple(order)
    if sorted(order) != list(range(len(examples))):
        raise ConfigError(f"order {order!r} is not a permutation of 0..{len(examples) - 1}")
    return [examples[i] for i in order]


def enumerate_orders(n_items: int, k_orders: int, seed: int) -> list[tuple[int, ...]]:
    """Produce k distinct example orders, deterministically.

    The first order is always the identity, so order 0 means "as
    authored"; the rest are seeded random shuffles.
    """
    if k_orders < 1:
        raise ConfigError("need at least one order")
    if k_orders > math.factorial(n_items):
        raise ConfigError(f"cannot draw {k_orders} distinct orders of {n_items} items")
    identity = tuple(range(n_items))
    orders = [identity]
    seen = {identity}
    rng = Random(seed)
    scratch = list(range(n_items))
    while len(orders) < k_orders:
        rng.shuffle(scratch)
        candidate = tuple(scratch)
        if candidate not in seen:
            seen.add(candidate)
            orders.append(candidate)
    return orders


def _selected_tasks(cfg: PromptConfig, suite: TaskSuite) -> list[CodingTask]:
    if cfg.task_selection == JOINT:
        return list(suite.tasks)
    return [suite.get_task(cfg.task_selection)]


def _effective_level(task: CodingTask, requested: str) -> str:
    # a task without text at the requested level falls back to the
    # richest level it does have (long -> short -> none)
    available = task.description_level_available
    idx = DESCRIPTION_LEVELS.index(requested)
    for level in reversed(DESCRIPTION_LEVELS[: idx + 1]):
        if level in available:
            return level
    return "none"


def _example_answer(example: FewShotExample, cfg: PromptConfig, suite: TaskSuite) -> str:
    if cfg.task_selection != JOINT:
        idx = suite.task_ids().index(cfg.task_selection)
        return example.labels[idx]
    gate = suite.gate
    if gate is not None and example.labels[0] == gate.label_id:
        return example.labels[0]
    return ", ".join(example.labels)


def _check_coverage(tasks: list[CodingTask], suite: TaskSuite, examples: list[FewShotExample]):
    for task in tasks:
        idx = suite.task_ids().index(task.id)
        covered = {ex.labels[idx] for ex in examples}
        missing = [lid for lid in task.label_ids() if lid not in covered]
        if missing:
            warnings.warn(
                f"task {task.id!r}: examples cover no instance of {', '.join(missing)}",
                LabelCoverageWarning,
                stacklevel=3,
            )


def build_prompt(
    cfg: PromptConfig,
    suite: TaskSuite,
    examples: list[FewShotExample],
    target: Instance,
) -> Prompt:
    """Render the prompt for one target instance.

    Deterministic: identical inputs produce byte-identical text. The
    segment map records where instruction, codebook, examples, and
    target start and end; the four ranges tile the text.
    """
    tasks = _selected_tasks(cfg, suite)
    if cfg.n_examples > len(examples):
        raise ConfigError(
            f"asked for {cfg.n_examples} examples but only {len(examples)} supplied"
        )

    chosen = examples[: cfg.n_examples]
    if cfg.example_order is not None:
        chosen = permute_examples(chosen, cfg.example_order)
    if cfg.n_examples > 0:
        _check_coverage(tasks, suite, chosen)

    instruction = cfg.instruction_text + "\n"

    bullets = []
    for task in tasks:
        level = _effective_level(task, cfg.description_level)
        for label in task.labels:
            desc = label.description(level)
            bullets.append(f"- {label.id}: {desc}\n" if desc else f"- {label.id}\n")
    codebook = "".join(bullets) + "\n"

    example_blocks = [
        f"Text: {ex.text}\nLabel: {_example_answer(ex, cfg, suite)}\n\n" for ex in chosen
    ]
    examples_text = "".join(example_blocks)

    target_text = f"Text: {target.text}\nLabel:"

    text = instruction + codebook + examples_text + target_text
    a = len(instruction)
    b = a + len(codebook)
    c = b + len(examples_text)
    segment_map = {
        "instruction": (0, a),
        "codebook": (a, b),
        "examples": (b, c),
        "target": (c, len(text)),
    }
    stats = PromptStats(
        word_count=len(text.split()),
        char_count=len(text),
        token_estimate=estimate_tokens(text),
    )
    return Prompt(text=text, segment_map=segment_map, stats=stats)


def load_examples(path: str | Path, suite: TaskSuite) -> list[FewShotExample]:
    """Read a few-shot pool: one JSON record {id, text, labels} per line.

    Labels are validated against the suite and must already satisfy the
    gate (a gated example carries not-applicable all the way down).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"example file not found: {path}")
    pool = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        labels = tuple(str(l) for l in rec["labels"])
        if len(labels) != len(suite.tasks):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(suite.tasks)} labels, got {len(labels)}"
            )
        if apply_gate(suite, list(labels)) != list(labels):
            raise SchemaError(f"{path}:{lineno}: labels do not satisfy the gate")
        pool.append(FewShotExample(str(rec["id"]), str(rec["text"]), labels))
    return pool
