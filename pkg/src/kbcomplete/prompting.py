"""Instruction-free few-shot prompt construction and answer parsing.

Prompts consist solely of example Q/A blocks followed by a query block
ending in "A:"; there is no instruction text. The don't-know variant
replaces half the examples with "Don't know" answers to teach abstention,
and the context variant inserts a web-search snippet line between each
question and answer.
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass

from .errors import ConfigError
from .model import (
    ABSTAIN,
    EntityRef,
    FewShotExample,
    PromptVariant,
    RelationSpec,
    normalize_label,
)

DONT_KNOW_ANSWER = "Don't know"
OBJECT_JOIN = " # "
DEFAULT_TOKEN_FACTOR = 1.33

# ',' shows up in generated list answers, ' # ' in gold-style answers.
_ANSWER_SEP = re.compile(r" # |,")
_APOSTROPHES = str.maketrans("", "", "'’‘`")


@dataclass(frozen=True)
class SearchSnippet:
    """Top search result for a (subject, relation) query.

    Absence of a snippet is always represented as None at call sites,
    never as an empty SearchSnippet.
    """

    query: str
    snippet: str
    source_url: str = ""

    def __post_init__(self):
        if not self.snippet:
            raise ValueError("SearchSnippet.snippet must be non-empty")


@dataclass(frozen=True)
class Prompt:
    text: str
    token_estimate: int
    variant: PromptVariant
    subject: EntityRef
    relation_id: str


def estimate_tokens(text: str, factor: float = DEFAULT_TOKEN_FACTOR, tokenizer=None) -> int:
    """Estimate the LM token count of ``text``.

    When a ``tokenizer`` callable is supplied it is used directly.
    The default estimator counts whitespace-delimited words plus
    punctuation characters and scales by ``factor``, rounded up.
    """
    if tokenizer is not None:
        return int(tokenizer(text))
    words = text.split()
    if not words:
        return 0
    punctuation = sum(
        1 for ch in text if unicodedata.category(ch).startswith("P")
    )
    return math.ceil((len(words) + punctuation) * factor)


def parse_answer(raw: str, variant: PromptVariant = PromptVariant.STANDARD):
    """Parse an LM completion into object labels, or ABSTAIN.

    Only the first line counts (the few-shot format makes models emit the
    next "Q:" block otherwise). The line splits on " # " and on ",";
    pieces are normalized and empties dropped. A line that normalizes to
    "don't know" (apostrophe-insensitive) is ABSTAIN.
    """
    line = raw.split("\n", 1)[0]
    whole = normalize_label(line)
    if whole.translate(_APOSTROPHES) == "dont know":
        return ABSTAIN
    labels = [normalize_label(piece) for piece in _ANSWER_SEP.split(line)]
    return [label for label in labels if label]


def _interleave(answered: list, flagged: list) -> list:
    """Merge two ordered lists as evenly as possible, answered leading ties."""
    slots = [((i + 0.5) / len(answered), 0, ex) for i, ex in enumerate(answered)]
    slots += [((i + 0.5) / len(flagged), 1, ex) for i, ex in enumerate(flagged)]
    slots.sort(key=lambda slot: (slot[0], slot[1]))
    return [ex for _, _, ex in slots]


def _select_examples(spec: RelationSpec, variant: PromptVariant) -> list[FewShotExample]:
    k = spec.few_shot_count
    answered = [ex for ex in spec.few_shot_examples if not ex.dont_know]
    flagged = [ex for ex in spec.few_shot_examples if ex.dont_know]

    if variant is PromptVariant.DONT_KNOW:
        n_flagged = math.ceil(k / 2)
        n_answered = k - n_flagged
        if len(flagged) < n_flagged:
            raise ConfigError(
                f"relation {spec.name!r}: don't-know prompting with k={k} needs "
                f"{n_flagged} don't-know examples, only {len(flagged)} configured"
            )
        if len(answered) < n_answered:
            raise ConfigError(
                f"relation {spec.name!r}: k={k} needs {n_answered} answered "
                f"examples, only {len(answered)} configured"
            )
        if n_answered == 0:
            return flagged[:n_flagged]
        return _interleave(answered[:n_answered], flagged[:n_flagged])

    if variant is PromptVariant.WITH_CONTEXT:
        answered = [ex for ex in answered if ex.context]
    if len(answered) < k:
        raise ConfigError(
            f"relation {spec.name!r}: k={k} exceeds the {len(answered)} usable "
            f"examples for variant {variant.value}"
        )
    return answered[:k]


def _answer_line(example: FewShotExample) -> str:
    if example.dont_know:
        return f"A: {DONT_KNOW_ANSWER}"
    return f"A: {OBJECT_JOIN.join(example.object_labels)}"


def build_prompt(
    spec: RelationSpec,
    subject: EntityRef,
    variant: PromptVariant = PromptVariant.STANDARD,
    context: SearchSnippet | None = None,
    tokenizer=None,
) -> Prompt:
    """Render the prompt for ``subject`` under the given variant.

    Deterministic: identical inputs produce byte-identical text.
    """
    variant = PromptVariant(variant)
    label = subject.label or subject.id

    if variant is PromptVariant.CHAT:
        if not spec.chat_question:
            raise ConfigError(f"relation {spec.name!r} has no chat_question template")
        text = spec.chat_question.format(subject=label)
    else:
        if variant is PromptVariant.WITH_CONTEXT and context is None:
            raise ValueError("with_context prompts require a search snippet")
        blocks = []
        for example in _select_examples(spec, variant):
            lines = [f"Q: {example.subject_label} # {spec.prompt_label}"]
            if variant is PromptVariant.WITH_CONTEXT:
                lines.append(f"C: {example.context}")
            lines.append(_answer_line(example))
            blocks.append("\n".join(lines) + "\n")
        query_lines = [f"Q: {label} # {spec.prompt_label}"]
        if variant is PromptVariant.WITH_CONTEXT:
            query_lines.append(f"C: {context.snippet}")
        query_lines.append("A:")
        blocks.append("\n".join(query_lines))
        text = "".join(blocks)

    return Prompt(
        text=text,
        token_estimate=estimate_tokens(text, tokenizer=tokenizer),
        variant=variant,
        subject=subject,
        relation_id=spec.id,
    )


def fetch_context(subject: EntityRef, spec: RelationSpec, provider) -> SearchSnippet | None:
    """Top-1 web snippet for "<subject label> <relation phrase>", or None.

    Transport and quota failures propagate as retryable errors from the
    provider; a None return always means the provider genuinely found
    nothing.
    """
    query = f"{subject.label or subject.id} {spec.prompt_label}"
    return provider.search(query)
