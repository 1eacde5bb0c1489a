"""Shared domain types: entities, relations, facts, predictions, ratings.

All types here are immutable values and safe to share between threads.
Predicted object labels are compared to gold labels purely as strings,
via :func:`normalize_label`; there is no entity disambiguation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

__all__ = [
    "ABSTAIN",
    "EntityRef",
    "Fact",
    "FewShotExample",
    "LikertRating",
    "LikertValue",
    "PromptVariant",
    "RelationSpec",
    "ScoredPrediction",
    "normalize_label",
    "make_fact",
]


class _Abstain:
    """Sentinel answer for predictions that decline to name an object."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSTAIN"

    def __bool__(self):
        return False


ABSTAIN = _Abstain()


class PromptVariant(str, enum.Enum):
    STANDARD = "standard"
    DONT_KNOW = "dont_know"
    WITH_CONTEXT = "with_context"
    CHAT = "chat"


class LikertValue(str, enum.Enum):
    CORRECT = "correct"
    LIKELY = "likely"
    UNKNOWN = "unknown"
    IMPLAUSIBLE = "implausible"
    FALSE = "false"


def normalize_label(raw: str) -> str:
    """Canonicalize a surface label for comparison.

    Trims surrounding whitespace, collapses internal whitespace runs to
    single spaces, case-folds, and strips trailing periods. Applied to a
    fixpoint so the function is idempotent (stripping one period can expose
    another; we keep stripping until stable). Unicode is preserved verbatim
    apart from case folding; diacritics are kept.
    """
    text = raw
    prev = None
    while text != prev:
        prev = text
        text = " ".join(text.split())
        text = text.casefold()
        if text.endswith("."):
            text = text[:-1]
    return text


@dataclass(frozen=True)
class EntityRef:
    """A KB entity: opaque identifier plus human-readable label.

    ``label`` may be empty only for predicted objects that have not been
    linked to the KB yet; ``id`` must always be non-empty.
    """

    id: str
    label: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("EntityRef.id must be non-empty")


@dataclass(frozen=True)
class FewShotExample:
    """One in-context example: a subject and its gold objects.

    ``dont_know`` examples carry no objects and render as "Don't know".
    ``context`` holds the search snippet shown with this example in
    context-augmented prompts.
    """

    subject_label: str
    object_labels: tuple[str, ...] = ()
    dont_know: bool = False
    context: str | None = None

    def __post_init__(self):
        if self.dont_know and self.object_labels:
            raise ValueError("a dont_know example must have an empty object list")
        if not self.dont_know and not self.object_labels:
            raise ValueError("an answered example needs at least one object label")


@dataclass(frozen=True)
class RelationSpec:
    """Per-relation configuration driving prompting and thresholding.

    ``few_shot_count`` examples (of the configured ones) go into each
    prompt; ``target_precision`` is the precision the calibrated
    ``threshold`` must defend. ``chat_question`` is a template with a
    ``{subject}`` placeholder used by the chat prompt variant.
    """

    id: str
    name: str
    prompt_label: str
    subject_type: str = ""
    few_shot_examples: tuple[FewShotExample, ...] = ()
    few_shot_count: int = 8
    target_precision: float = 0.90
    threshold: float | None = None
    chat_question: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("RelationSpec.id must be non-empty")
        if not 1 <= self.few_shot_count <= 12:
            raise ValueError("few_shot_count must be in [1, 12]")
        if self.few_shot_count > len(self.few_shot_examples):
            raise ValueError(
                f"few_shot_count={self.few_shot_count} exceeds the "
                f"{len(self.few_shot_examples)} configured examples"
            )
        if not 0.0 < self.target_precision < 1.0:
            raise ValueError("target_precision must lie in (0, 1)")
        if self.threshold is not None and self.threshold < 0.0:
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class Fact:
    """A (subject, relation, objects) statement, gold or emitted.

    ``objects`` is a frozenset, so equality ignores object order. Use
    :func:`make_fact` to get label-level deduplication.
    """

    subject: EntityRef
    relation: str
    objects: frozenset[EntityRef]

    def __post_init__(self):
        if not self.objects:
            raise ValueError("Fact.objects must be non-empty")


def make_fact(subject: EntityRef, relation: str, objects) -> Fact:
    """Build a Fact, dropping objects whose normalized labels collide.

    The first occurrence of each normalized label wins; objects with empty
    labels are deduplicated by id instead.
    """
    seen = set()
    kept = []
    for obj in objects:
        key = normalize_label(obj.label) if obj.label else ("#id", obj.id)
        if key in seen:
            continue
        seen.add(key)
        kept.append(obj)
    return Fact(subject=subject, relation=relation, objects=frozenset(kept))


@dataclass(frozen=True)
class ScoredPrediction:
    """LM output for one subject: parsed answer plus first-token confidence.

    ``answer`` is either a tuple of normalized object labels or ABSTAIN.
    ``confidence`` is the probability of the first generated token.
    """

    subject: EntityRef
    relation: str
    answer: tuple[str, ...] | _Abstain
    confidence: float
    raw_text: str = ""
    prompt_variant: PromptVariant = PromptVariant.STANDARD

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.answer is not ABSTAIN:
            answer = tuple(self.answer)
            if not answer or any(not label for label in answer):
                raise ValueError("answer labels must be non-empty; use ABSTAIN instead")
            object.__setattr__(self, "answer", answer)

    @property
    def is_abstain(self) -> bool:
        return self.answer is ABSTAIN


@dataclass(frozen=True)
class LikertRating:
    """One annotator's verdict on one prediction."""

    prediction_id: str
    value: LikertValue
    annotator: str
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", LikertValue(self.value))
