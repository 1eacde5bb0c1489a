"""Persistence and arithmetic for the human verification loop.

Out-of-KB predictions cannot be checked against the KB, so retained
predictions are sampled into review batches, rated by annotators on the
five-point scale, and a relation's manual accuracy is the fraction of
rated items whose resolved verdict is correct or likely. Ratings live in
a single-file sqlite store plus an append-only JSONL audit log; replaying
the log into a fresh store reconstructs identical reports.
"""

from __future__ import annotations

import json
import random
import sqlite3
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import KbCompleteError
from ..model import LikertRating, LikertValue

DEFAULT_SAMPLE_TARGET = 800

TRUE_VALUES = (LikertValue.CORRECT, LikertValue.LIKELY)


class NotFoundError(KbCompleteError):
    pass


class ConflictError(KbCompleteError):
    pass


@dataclass(frozen=True)
class ReviewItem:
    prediction_id: str
    batch_id: str
    subject_label: str
    relation_phrase: str
    object_label: str
    confidence: float
    search_query: str
    position: int


@dataclass(frozen=True)
class ReviewBatch:
    id: str
    relation: str
    seed: int
    target_n: int
    status: str
    items: tuple[ReviewItem, ...] = ()


@dataclass
class ManualAccuracyReport:
    relation: str
    accuracy: float
    rated: int
    sampled: int
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def coverage(self) -> float:
        return self.rated / self.sampled if self.sampled else 0.0

    def to_payload(self) -> dict:
        return {
            "relation": self.relation,
            "accuracy": self.accuracy,
            "rated": self.rated,
            "sampled": self.sampled,
            "coverage": self.coverage,
            "counts": {v.value: self.counts.get(v.value, 0) for v in LikertValue},
        }


def resolve_item_verdict(values: list[str]) -> str:
    """Majority across annotators; ties resolve pessimistically to unknown."""
    counts = Counter(values)
    top = counts.most_common()
    if len(top) > 1 and top[0][1] == top[1][1]:
        return LikertValue.UNKNOWN.value
    return top[0][0]


def allocate_sample_sizes(retained_counts: dict[str, int],
                          total: int = DEFAULT_SAMPLE_TARGET) -> dict[str, int]:
    """Split a review budget across relations, proportional to retained
    counts (largest remainder), capped by what each relation actually has."""
    available = sum(retained_counts.values())
    if available <= total:
        return dict(retained_counts)
    shares = {
        name: total * count / available for name, count in retained_counts.items()
    }
    allocation = {name: min(int(share), retained_counts[name])
                  for name, share in shares.items()}
    leftovers = sorted(
        retained_counts,
        key=lambda name: (shares[name] - int(shares[name])),
        reverse=True,
    )
    remaining = total - sum(allocation.values())
    for name in leftovers:
        if remaining <= 0:
            break
        if allocation[name] < retained_counts[name]:
            allocation[name] += 1
            remaining -= 1
    return allocation


_SCHEMA = """
CREATE TABLE IF NOT EXISTS batches (
  id TEXT PRIMARY KEY,
  relation TEXT NOT NULL,
  seed INTEGER NOT NULL,
  target_n INTEGER NOT NULL,
  status TEXT NOT NULL DEFAULT 'open'
);
CREATE TABLE IF NOT EXISTS items (
  prediction_id TEXT PRIMARY KEY,
  batch_id TEXT NOT NULL REFERENCES batches(id),
  position INTEGER NOT NULL,
  subject_label TEXT NOT NULL,
  relation_phrase TEXT NOT NULL,
  object_label TEXT NOT NULL,
  confidence REAL NOT NULL,
  search_query TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS ratings (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  prediction_id TEXT NOT NULL REFERENCES items(prediction_id),
  annotator TEXT NOT NULL,
  value TEXT NOT NULL,
  timestamp REAL NOT NULL,
  UNIQUE(prediction_id, annotator) ON CONFLICT REPLACE
);
"""


class ReviewStore:
    """Single-file transactional store; safe under concurrent requests."""

    def __init__(self, db_path, audit_log=None):
        self.db_path = Path(db_path)
        self.audit_log = Path(audit_log) if audit_log else None
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self):
        with self._lock:
            self._conn.close()

    # -- batches ------------------------------------------------------------

    def create_batch(self, predictions, spec, n, seed, batch_id=None) -> ReviewBatch:
        """Seeded sample of retained predictions, without replacement.

        Each item carries a prefilled web-search query
        "<subject label> <relation phrase>" for one-click verification.
        """
        predictions = list(predictions)
        if n > len(predictions):
            raise ValueError(
                f"cannot sample {n} items: only {len(predictions)} retained "
                f"predictions available for {spec.name!r}"
            )
        batch_id = batch_id or f"{spec.name}-s{seed}-n{n}"
        sample = random.Random(seed).sample(predictions, n)
        items = []
        for position, prediction in enumerate(sample):
            object_label = prediction.answer[0]
            subject_label = prediction.subject.label or prediction.subject.id
            items.append(ReviewItem(
                prediction_id=f"{batch_id}:{prediction.subject.id}",
                batch_id=batch_id,
                subject_label=subject_label,
                relation_phrase=spec.prompt_label,
                object_label=object_label,
                confidence=prediction.confidence,
                search_query=f"{subject_label} {spec.prompt_label}",
                position=position,
            ))
        with self._lock:
            existing = self._conn.execute(
                "SELECT 1 FROM batches WHERE id = ?", (batch_id,)
            ).fetchone()
            if existing:
                raise ConflictError(f"batch {batch_id!r} already exists")
            with self._conn:
                self._conn.execute(
                    "INSERT INTO batches (id, relation, seed, target_n, status) "
                    "VALUES (?, ?, ?, ?, 'open')",
                    (batch_id, spec.name, seed, n),
                )
                self._conn.executemany(
                    "INSERT INTO items (prediction_id, batch_id, position, "
                    "subject_label, relation_phrase, object_label, confidence, "
                    "search_query) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                    [
                        (i.prediction_id, i.batch_id, i.position, i.subject_label,
                         i.relation_phrase, i.object_label, i.confidence,
                         i.search_query)
                        for i in items
                    ],
                )
        return self.get_batch(batch_id)

    def list_batches(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT b.id, b.relation, b.status, b.target_n, "
                "  (SELECT COUNT(DISTINCT r.prediction_id) FROM ratings r "
                "   JOIN items i ON i.prediction_id = r.prediction_id "
                "   WHERE i.batch_id = b.id) AS rated "
                "FROM batches b ORDER BY b.id"
            ).fetchall()
        return [dict(row) for row in rows]

    def get_batch(self, batch_id) -> ReviewBatch:
        with self._lock:
            batch = self._conn.execute(
                "SELECT * FROM batches WHERE id = ?", (batch_id,)
            ).fetchone()
            if batch is None:
                raise NotFoundError(f"no batch {batch_id!r}")
            rows = self._conn.execute(
                "SELECT * FROM items WHERE batch_id = ? ORDER BY position",
                (batch_id,),
            ).fetchall()
        items = tuple(
            ReviewItem(
                prediction_id=row["prediction_id"], batch_id=row["batch_id"],
                subject_label=row["subject_label"],
                relation_phrase=row["relation_phrase"],
                object_label=row["object_label"], confidence=row["confidence"],
                search_query=row["search_query"], position=row["position"],
            )
            for row in rows
        )
        return ReviewBatch(
            id=batch["id"], relation=batch["relation"], seed=batch["seed"],
            target_n=batch["target_n"], status=batch["status"], items=items,
        )

    def close_batch(self, batch_id) -> None:
        with self._lock:
            updated = self._conn.execute(
                "UPDATE batches SET status = 'closed' WHERE id = ?", (batch_id,)
            ).rowcount
            self._conn.commit()
        if not updated:
            raise NotFoundError(f"no batch {batch_id!r}")

    def next_item(self, batch_id, annotator) -> ReviewItem | None:
        """Lowest-position item in the batch this annotator has not rated."""
        batch = self.get_batch(batch_id)
        rated = self._rated_by(batch_id, annotator)
        for item in batch.items:
            if item.prediction_id not in rated:
                return item
        return None

    def _rated_by(self, batch_id, annotator) -> set[str]:
        with self._lock:
            return {
                row["prediction_id"]
                for row in self._conn.execute(
                    "SELECT r.prediction_id FROM ratings r "
                    "JOIN items i ON i.prediction_id = r.prediction_id "
                    "WHERE i.batch_id = ? AND r.annotator = ?",
                    (batch_id, annotator),
                )
            }

    def annotator_progress(self, batch_id, annotator) -> tuple[int, int]:
        """(items this annotator has rated, items in the batch)."""
        batch = self.get_batch(batch_id)
        return len(self._rated_by(batch_id, annotator)), len(batch.items)

    # -- ratings --------------------------------------------------------------

    def record_rating(self, prediction_id, annotator, value=None,
                      timestamp=None) -> int:
        """Persist one verdict; a later rating by the same annotator for the
        same item replaces the earlier one.

        Accepts either a LikertRating value object in place of
        ``annotator`` or the flat (annotator, value[, timestamp]) form.
        """
        if isinstance(annotator, LikertRating):
            rating = annotator
            annotator = rating.annotator
            value = rating.value
            timestamp = rating.timestamp or timestamp
        value = LikertValue(value).value
        timestamp = time.time() if timestamp is None else timestamp
        with self._lock:
            item = self._conn.execute(
                "SELECT i.batch_id, b.status FROM items i "
                "JOIN batches b ON b.id = i.batch_id WHERE i.prediction_id = ?",
                (prediction_id,),
            ).fetchone()
            if item is None:
                raise NotFoundError(f"no review item {prediction_id!r}")
            if item["status"] != "open":
                raise ConflictError(f"batch {item['batch_id']!r} is closed")
            with self._conn:
                cursor = self._conn.execute(
                    "INSERT INTO ratings (prediction_id, annotator, value, "
                    "timestamp) VALUES (?, ?, ?, ?)",
                    (prediction_id, annotator, value, timestamp),
                )
            rating_id = cursor.lastrowid
        if self.audit_log is not None:
            record = {
                "prediction_id": prediction_id,
                "annotator": annotator,
                "value": value,
                "timestamp": timestamp,
            }
            with self._lock:
                self.audit_log.parent.mkdir(parents=True, exist_ok=True)
                with open(self.audit_log, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record, sort_keys=True) + "\n")
        return rating_id

    def current_rating(self, prediction_id, annotator) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT value FROM ratings WHERE prediction_id = ? AND annotator = ?",
                (prediction_id, annotator),
            ).fetchone()
        return row["value"] if row else None

    def replay_audit(self, audit_path) -> int:
        """Apply every audit record in order; returns the number applied."""
        applied = 0
        with open(audit_path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self.record_rating(
                    record["prediction_id"], record["annotator"],
                    record["value"], record["timestamp"],
                )
                applied += 1
        return applied

    # -- reports --------------------------------------------------------------

    def _verdicts(self, where_sql, params) -> tuple[dict[str, str], int]:
        """Resolved verdict per rated item plus the sampled-item count."""
        with self._lock:
            items = self._conn.execute(
                f"SELECT i.prediction_id FROM items i {where_sql}", params
            ).fetchall()
            ratings = self._conn.execute(
                f"SELECT r.prediction_id, r.value FROM ratings r "
                f"JOIN items i ON i.prediction_id = r.prediction_id {where_sql} "
                f"ORDER BY r.prediction_id, r.annotator",
                params,
            ).fetchall()
        by_item: dict[str, list[str]] = {}
        for row in ratings:
            by_item.setdefault(row["prediction_id"], []).append(row["value"])
        verdicts = {
            prediction_id: resolve_item_verdict(values)
            for prediction_id, values in by_item.items()
        }
        return verdicts, len(items)

    def _report(self, relation, verdicts, sampled) -> ManualAccuracyReport:
        if not verdicts:
            raise ValueError(f"no ratings recorded for {relation!r}")
        counts = Counter(verdicts.values())
        true_count = sum(counts.get(v.value, 0) for v in TRUE_VALUES)
        return ManualAccuracyReport(
            relation=relation,
            accuracy=true_count / len(verdicts),
            rated=len(verdicts),
            sampled=sampled,
            counts=dict(counts),
        )

    def manual_accuracy(self, batch_id) -> ManualAccuracyReport:
        batch = self.get_batch(batch_id)
        verdicts, sampled = self._verdicts("WHERE i.batch_id = ?", (batch_id,))
        return self._report(batch.relation, verdicts, sampled)

    def relation_report(self, relation) -> ManualAccuracyReport:
        with self._lock:
            known = self._conn.execute(
                "SELECT 1 FROM batches WHERE relation = ? LIMIT 1", (relation,)
            ).fetchone()
        if known is None:
            raise NotFoundError(f"no batches for relation {relation!r}")
        verdicts, sampled = self._verdicts(
            "JOIN batches b ON b.id = i.batch_id WHERE b.relation = ?", (relation,)
        )
        return self._report(relation, verdicts, sampled)


def accept_relation(report: ManualAccuracyReport, spec) -> bool:
    """Manual accuracy must reach the relation's target precision."""
    return report.accuracy >= spec.target_precision


def record_acceptance(manifest_path, report: ManualAccuracyReport, spec) -> bool:
    """Write the accept/reject decision into the run manifest; the export
    is considered publishable only when this gate passed."""
    accepted = accept_relation(report, spec)
    path = Path(manifest_path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest["review"] = {
        "manual_accuracy": report.accuracy,
        "rated": report.rated,
        "sampled": report.sampled,
        "target_precision": spec.target_precision,
        "accepted": accepted,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return accepted
