"""Aggregate graded outcomes into per-template and family summaries."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from transit_agent.evaluation.grading import CATEGORIES

EXACT_CATEGORIES = frozenset({"exact_match", "scalar_exact"})

# Template families share an accuracy denominator: entity-list templates
# are graded together, the scalar template on its own.
FAMILIES = {"entity_list": ("T1", "T2"), "scalar": ("T3",)}


@dataclass
class MetricsSummary:
    per_template: dict[str, dict[str, int]] = field(default_factory=dict)
    overall: dict[str, int] = field(default_factory=dict)
    accuracy: dict[str, float] = field(default_factory=dict)
    total: int = 0

    def to_json_dict(self) -> dict:
        payload: dict = {tid: dict(counts) for tid, counts in self.per_template.items()}
        payload["accuracy"] = dict(self.accuracy)
        return payload


def summarize(outcomes: list[dict]) -> MetricsSummary:
    """Count categories per template and compute family accuracies.

    Each outcome dict needs ``template_id`` and ``category``.  Counts
    partition the input: every outcome lands in exactly one bucket.
    """
    per_template: dict[str, Counter] = {}
    overall: Counter = Counter()
    for outcome in outcomes:
        template_id = outcome["template_id"]
        category = outcome["category"]
        if category not in CATEGORIES:
            raise ValueError(f"unknown category {category!r}")
        per_template.setdefault(template_id, Counter())[category] += 1
        overall[category] += 1

    accuracy: dict[str, float] = {}

    def _accuracy(counter: Counter) -> float:
        total = sum(counter.values())
        if total == 0:
            return 0.0
        exact = sum(counter[c] for c in EXACT_CATEGORIES)
        return exact / total

    for template_id, counter in sorted(per_template.items()):
        accuracy[template_id] = _accuracy(counter)
    for family, members in FAMILIES.items():
        family_counter: Counter = Counter()
        for member in members:
            family_counter.update(per_template.get(member, Counter()))
        if sum(family_counter.values()):
            accuracy[family] = _accuracy(family_counter)
    if sum(overall.values()):
        accuracy["overall"] = _accuracy(overall)

    return MetricsSummary(
        per_template={tid: dict(counter) for tid, counter in sorted(per_template.items())},
        overall=dict(overall),
        accuracy=accuracy,
        total=sum(overall.values()),
    )


def render_text(summary: MetricsSummary) -> str:
    lines = [f"outcomes: {summary.total}"]
    for template_id, counts in summary.per_template.items():
        parts = ", ".join(f"{cat}={n}" for cat, n in sorted(counts.items()))
        lines.append(f"  {template_id}: {parts}")
    lines.append("accuracy:")
    for key, value in summary.accuracy.items():
        lines.append(f"  {key}: {value:.3f}")
    return "\n".join(lines)
