"""Retain-all metrics, precision-thresholding, and threshold calibration.

Two evaluation regimes:

* retain-all: every prediction is kept and scored against gold, giving
  per-relation precision/recall/F1 plus a macro average.
* precision-thresholding: predictions are sorted by confidence and we
  report the largest fraction of the list that can be retained while the
  running precision stays strictly above a target ("coverage@P", the
  thresholding notion of recall).

A threshold is a cut in the sorted list. Two items with equal confidence
can never be separated by a confidence threshold, so cuts between tied
items are inadmissible and the search extends the prefix past the tie.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .ingest import GoldDataset
from .model import Fact, ScoredPrediction, normalize_label

RETAIN_NOTHING = math.inf  # threshold sentinel: no prefix met the target


@dataclass(frozen=True)
class RelationMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    """Per-relation P/R/F1, micro-aggregated over subjects, plus macro row."""

    per_relation: dict[str, RelationMetrics] = field(default_factory=dict)

    @property
    def macro_average(self) -> RelationMetrics:
        rows = list(self.per_relation.values())
        if not rows:
            return RelationMetrics(0.0, 0.0, 0.0)
        n = len(rows)
        return RelationMetrics(
            precision=sum(r.precision for r in rows) / n,
            recall=sum(r.recall for r in rows) / n,
            f1=sum(r.f1 for r in rows) / n,
        )

    def to_json(self) -> str:
        macro = self.macro_average
        payload = {
            "relations": {
                name: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for name, m in sorted(self.per_relation.items())
            },
            "macro_average": {
                "precision": macro.precision,
                "recall": macro.recall,
                "f1": macro.f1,
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def gold_object_labels(fact: Fact) -> set[str]:
    return {normalize_label(obj.label or obj.id) for obj in fact.objects}


def prediction_is_hit(prediction: ScoredPrediction, fact: Fact) -> bool:
    """Correctness bit for threshold curves: any predicted label in gold."""
    if prediction.is_abstain:
        return False
    return bool(set(prediction.answer) & gold_object_labels(fact))


def retain_all_metrics(predictions, gold: GoldDataset) -> MetricsReport:
    """Score every prediction against gold; ABSTAIN counts as no output.

    Micro aggregation per relation: P sums label intersections over
    predicted labels, R over gold labels. Raises on predictions whose
    (subject, relation) is not in gold — this regime evaluates known
    facts only.
    """
    tallies: dict[str, list[int]] = {}
    for prediction in predictions:
        by_subject = gold.by_subject(prediction.relation)
        fact = by_subject.get(prediction.subject.id)
        if fact is None:
            raise ValueError(
                f"prediction for subject {prediction.subject.id!r} has no gold fact "
                f"under relation {prediction.relation!r}"
            )
        hit_count = matched = gold_count = 0
        gold_labels = gold_object_labels(fact)
        gold_count = len(gold_labels)
        if not prediction.is_abstain:
            predicted = set(prediction.answer)
            matched = len(predicted & gold_labels)
            hit_count = len(predicted)
        bucket = tallies.setdefault(prediction.relation, [0, 0, 0])
        bucket[0] += matched
        bucket[1] += hit_count
        bucket[2] += gold_count

    report = MetricsReport()
    for relation, (matched, predicted, gold_count) in tallies.items():
        precision = matched / predicted if predicted else 0.0
        recall = matched / gold_count if gold_count else 0.0
        report.per_relation[relation] = RelationMetrics(
            precision=precision, recall=recall, f1=_f1(precision, recall)
        )
    return report


def _sorted_items(items) -> list[tuple[float, bool]]:
    rows = [(float(conf), bool(correct)) for conf, correct in items]
    rows.sort(key=lambda row: -row[0])  # stable: ties keep input order
    return rows


def _admissible(rows, m: int) -> bool:
    """A cut after the m-th item is admissible unless it splits a tie."""
    return m == len(rows) or rows[m - 1][0] > rows[m][0]


def recall_at_precision(items, p_target: float) -> tuple[float, float]:
    """Largest retainable fraction with prefix precision strictly above target.

    Returns ``(coverage, threshold)`` where coverage is m/n for the best
    admissible prefix length m and threshold is the confidence of its last
    item. When no prefix qualifies, returns ``(0.0, RETAIN_NOTHING)``.
    """
    if not 0.0 < p_target < 1.0:
        raise ValueError("p_target must lie in (0, 1)")
    rows = _sorted_items(items)
    if not rows:
        raise ValueError("cannot threshold an empty prediction list")
    best = None
    correct = 0
    for m in range(1, len(rows) + 1):
        correct += rows[m - 1][1]
        if not _admissible(rows, m):
            continue
        if correct / m > p_target:
            best = m
    if best is None:
        return 0.0, RETAIN_NOTHING
    return best / len(rows), rows[best - 1][0]


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    precision: float
    coverage: float
    low_confidence: bool = False


def calibrate_threshold(spec, items, precision_range=(0.75, 0.95)) -> CalibrationResult:
    """Pick the relation threshold from the automated precision range.

    Among admissible cuts whose prefix precision lies inside
    ``precision_range``, precision wins first and coverage breaks ties.
    When no cut lands in the range (e.g. the list is perfect or hopeless),
    fall back to recall_at_precision at the range's lower bound and flag
    the relation as low-confidence.
    """
    lo, hi = precision_range
    if not lo < hi:
        raise ValueError("precision_range must satisfy lo < hi")
    rows = _sorted_items(items)
    if not rows:
        raise ValueError(f"no scored predictions to calibrate {spec.name!r}")
    best = None  # (precision, m)
    correct = 0
    for m in range(1, len(rows) + 1):
        correct += rows[m - 1][1]
        if not _admissible(rows, m):
            continue
        precision = correct / m
        if lo <= precision <= hi:
            if best is None or (precision, m) > best:
                best = (precision, m)
    if best is not None:
        precision, m = best
        return CalibrationResult(
            threshold=rows[m - 1][0],
            precision=precision,
            coverage=m / len(rows),
            low_confidence=False,
        )
    coverage, threshold = recall_at_precision(rows, lo)
    if coverage == 0.0:
        return CalibrationResult(
            threshold=RETAIN_NOTHING, precision=0.0, coverage=0.0, low_confidence=True
        )
    m = round(coverage * len(rows))
    precision = sum(1 for row in rows[:m] if row[1]) / m
    return CalibrationResult(
        threshold=threshold, precision=precision, coverage=coverage, low_confidence=True
    )


def filter_by_threshold(predictions, threshold: float) -> list[ScoredPrediction]:
    """Keep non-abstaining predictions at or above the threshold.

    Output is sorted by confidence descending (stable), so re-applying the
    same threshold is a no-op.
    """
    kept = [
        p for p in predictions
        if not p.is_abstain and p.confidence >= threshold
    ]
    kept.sort(key=lambda p: -p.confidence)
    return kept


class ThresholdCurve:
    """Confidence-sorted correctness sequence with per-prefix precision."""

    def __init__(self, items):
        self.items = _sorted_items(items)
        correct = 0
        self.prefix_precisions = []
        for m, (_, is_correct) in enumerate(self.items, start=1):
            correct += is_correct
            self.prefix_precisions.append(correct / m)

    def __len__(self):
        return len(self.items)

    def coverage(self, m: int) -> float:
        return m / len(self.items)

    def recall_at_precision(self, p_target: float) -> tuple[float, float]:
        return recall_at_precision(self.items, p_target)

    def r_at_p(self, targets=(0.95, 0.90)) -> dict[float, float]:
        return {p: self.recall_at_precision(p)[0] for p in targets}

    @classmethod
    def from_predictions(cls, predictions, gold_by_subject) -> "ThresholdCurve":
        """Build curve items from scored predictions and gold facts.

        Abstentions carry no asserted fact, so they do not enter the
        curve; thresholding decides between asserted answers only.
        """
        items = []
        for prediction in predictions:
            if prediction.is_abstain:
                continue
            fact = gold_by_subject.get(prediction.subject.id)
            if fact is None:
                raise ValueError(
                    f"no gold fact for subject {prediction.subject.id!r}"
                )
            items.append((prediction.confidence, prediction_is_hit(prediction, fact)))
        return cls(items)


# -- plain-text report rendering -------------------------------------------


def render_metrics_table(report: MetricsReport, title: str = "retain-all") -> str:
    """Columns: relation, P, R, F1; macro row last."""
    lines = [f"# {title}", f"{'relation':<24} {'P':>6} {'R':>6} {'F1':>6}"]
    for name, m in sorted(report.per_relation.items()):
        lines.append(f"{name:<24} {m.precision:>6.2f} {m.recall:>6.2f} {m.f1:>6.2f}")
    macro = report.macro_average
    lines.append(
        f"{'Macro-Average':<24} {macro.precision:>6.2f} {macro.recall:>6.2f} {macro.f1:>6.2f}"
    )
    return "\n".join(lines) + "\n"


def render_rp_table(rows: dict[str, dict[float, float]], title: str = "coverage@P") -> str:
    """Rows: relation -> {target precision -> coverage fraction}."""
    targets = sorted({p for cols in rows.values() for p in cols}, reverse=True)
    header = f"{'relation':<24} " + " ".join(f"C@P{int(p * 100):>2}" for p in targets)
    lines = [f"# {title}", header]
    for name in sorted(rows):
        cells = " ".join(f"{rows[name].get(p, 0.0):>5.2f}" for p in targets)
        lines.append(f"{name:<24} {cells}")
    return "\n".join(lines) + "\n"
