"""Inter-annotator agreement: Cohen's kappa, raw agreement, macro-F1.

Scores follow the reporting convention of agreement tables: kappa and F1
are scaled by 100, raw agreement is a percentage, and each annotator is
scored against a panel of the other annotators by averaging the pairwise
scores (leave-one-out). All arithmetic stays in double precision;
rounding to two decimals happens only when a report is rendered.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import AlignmentError


@dataclass(frozen=True)
class LabelVector:
    """One annotator's labels for one task, in shared instance order."""

    annotator_id: str
    task_id: str
    labels: tuple[str, ...]
    instance_ids: tuple[str, ...] | None = None


@dataclass(frozen=True)
class MetricReport:
    annotator_id: str
    kappa: float
    raw: float
    f1: float
    against: str = ""


def _check_aligned(a: LabelVector, b: LabelVector, allow_empty: bool = False):
    if len(a.labels) != len(b.labels):
        raise AlignmentError(
            f"vectors differ in length: {len(a.labels)} vs {len(b.labels)}"
        )
    if not allow_empty and not a.labels:
        raise AlignmentError("vectors must be nonempty")
    if a.instance_ids is not None and b.instance_ids is not None:
        mismatches = [
            (x, y) for x, y in zip(a.instance_ids, b.instance_ids) if x != y
        ]
        if mismatches:
            shown = ", ".join(f"{x}!={y}" for x, y in mismatches[:10])
            raise AlignmentError(
                f"{len(mismatches)} misaligned instance ids: {shown}",
                mismatches=mismatches,
            )


def cohen_kappa(a: LabelVector, b: LabelVector) -> float:
    """Chance-corrected agreement, scaled by 100.

    kappa = (p_o - p_e) / (1 - p_e), where p_o is the fraction of exact
    matches and p_e the chance agreement from the two annotators'
    marginal label frequencies. Two identical constant vectors (p_e = 1)
    count as perfect agreement.
    """
    _check_aligned(a, b)
    n = len(a.labels)
    p_o = sum(1 for x, y in zip(a.labels, b.labels) if x == y) / n
    freq_a = Counter(a.labels)
    freq_b = Counter(b.labels)
    p_e = sum(freq_a[label] * freq_b.get(label, 0) for label in freq_a) / (n * n)
    if p_e == 1.0:
        return 100.0
    return (p_o - p_e) / (1.0 - p_e) * 100.0


def raw_agreement(a: LabelVector, b: LabelVector) -> float:
    """Percentage of instances where the two vectors match exactly."""
    _check_aligned(a, b)
    n = len(a.labels)
    return 100.0 * sum(1 for x, y in zip(a.labels, b.labels) if x == y) / n


def macro_f1(pred: LabelVector, gold: LabelVector) -> float:
    """Unweighted mean of per-class F1 over the classes seen in either
    vector, scaled by 100. A class with zero precision and recall
    contributes an F1 of 0.
    """
    _check_aligned(pred, gold)
    classes = sorted(set(gold.labels) | set(pred.labels))
    scores = []
    for cls in classes:
        tp = sum(1 for p, g in zip(pred.labels, gold.labels) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(pred.labels, gold.labels) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(pred.labels, gold.labels) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return 100.0 * sum(scores) / len(scores)


def confusion_matrix(a: LabelVector, b: LabelVector) -> dict[tuple[str, str], int]:
    """Counts of (a label, b label) pairs. Empty vectors give an empty map."""
    _check_aligned(a, b, allow_empty=True)
    return dict(Counter(zip(a.labels, b.labels)))


def avg_against_panel(target: LabelVector, panel: list[LabelVector], metric) -> float:
    """Score one annotator with each panelist's labels as gold, averaged."""
    if not panel:
        raise AlignmentError("panel must be nonempty")
    if any(p.annotator_id == target.annotator_id for p in panel):
        raise AlignmentError(
            f"target {target.annotator_id!r} cannot be a member of its own panel"
        )
    return sum(metric(target, p) for p in panel) / len(panel)


def score_against_panel(
    target: LabelVector, panel: list[LabelVector], against: str = ""
) -> MetricReport:
    """kappa/raw/F1 for one annotator versus a panel, as one report row."""
    return MetricReport(
        annotator_id=target.annotator_id,
        kappa=avg_against_panel(target, panel, cohen_kappa),
        raw=avg_against_panel(target, panel, raw_agreement),
        f1=avg_against_panel(target, panel, macro_f1),
        against=against or "+".join(p.annotator_id for p in panel),
    )


def panel_average(rows: list[MetricReport], annotator_id: str = "AVG") -> MetricReport:
    """Column-wise unweighted mean of report rows."""
    if not rows:
        raise AlignmentError("cannot average zero report rows")
    n = len(rows)
    return MetricReport(
        annotator_id=annotator_id,
        kappa=sum(r.kappa for r in rows) / n,
        raw=sum(r.raw for r in rows) / n,
        f1=sum(r.f1 for r in rows) / n,
        against=rows[0].against if len({r.against for r in rows}) == 1 else "mixed",
    )


def leave_one_out_rows(panel: list[LabelVector]) -> list[MetricReport]:
    """One row per panelist, each scored against all the others."""
    rows = []
    for i, target in enumerate(panel):
        others = panel[:i] + panel[i + 1 :]
        rows.append(score_against_panel(target, others))
    return rows


def render_report(rows: list[MetricReport], title: str = "") -> str:
    """Aligned text table with two-decimal cells."""
    lines = []
    if title:
        lines.append(title)
    width = max(len("annotator"), *(len(r.annotator_id) for r in rows))
    lines.append(f"{'annotator':<{width}}  {'kappa':>7}  {'raw':>7}  {'f1':>7}")
    for r in rows:
        lines.append(
            f"{r.annotator_id:<{width}}  {r.kappa:>7.2f}  {r.raw:>7.2f}  {r.f1:>7.2f}"
        )
    return "\n".join(lines) + "\n"
