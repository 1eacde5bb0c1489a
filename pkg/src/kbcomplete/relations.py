"""Relation configuration file: one JSON record per relation.

The file holds every RelationSpec field so a calibration run can write the
chosen thresholds back in place. Subject-type choices shipped with the
default config are editable configuration, not ground truth.

Format::

    {
      "relations": [
        {
          "id": "P364",
          "name": "writtenIn",
          "prompt_label": "original language",
          "subject_type": "Q11424",
          "few_shot_count": 8,
          "target_precision": 0.9,
          "threshold": null,
          "chat_question": "In which languages is {subject} available? ...",
          "few_shot_examples": [
            {"subject": "...", "objects": ["..."], "dont_know": false,
             "context": null}
          ]
        }
      ]
    }
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError
from .model import FewShotExample, RelationSpec


def _example_from_record(record: dict) -> FewShotExample:
    return FewShotExample(
        subject_label=record["subject"],
        object_labels=tuple(record.get("objects", ())),
        dont_know=bool(record.get("dont_know", False)),
        context=record.get("context"),
    )


def _example_to_record(example: FewShotExample) -> dict:
    return {
        "subject": example.subject_label,
        "objects": list(example.object_labels),
        "dont_know": example.dont_know,
        "context": example.context,
    }


def spec_from_record(record: dict) -> RelationSpec:
    try:
        return RelationSpec(
            id=record["id"],
            name=record["name"],
            prompt_label=record["prompt_label"],
            subject_type=record.get("subject_type", ""),
            few_shot_examples=tuple(
                _example_from_record(ex) for ex in record.get("few_shot_examples", ())
            ),
            few_shot_count=int(record.get("few_shot_count", 8)),
            target_precision=float(record.get("target_precision", 0.90)),
            threshold=record.get("threshold"),
            chat_question=record.get("chat_question"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        name = record.get("name") or record.get("id") or "<unnamed>"
        raise ConfigError(f"bad relation record {name!r}: {exc}") from exc


def spec_to_record(spec: RelationSpec) -> dict:
    return {
        "id": spec.id,
        "name": spec.name,
        "prompt_label": spec.prompt_label,
        "subject_type": spec.subject_type,
        "few_shot_count": spec.few_shot_count,
        "target_precision": spec.target_precision,
        "threshold": spec.threshold,
        "chat_question": spec.chat_question,
        "few_shot_examples": [_example_to_record(ex) for ex in spec.few_shot_examples],
    }


def load_relation_specs(path) -> dict[str, RelationSpec]:
    """Load the relation config; returns a name-keyed mapping."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"relation config not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"relation config {path} is not valid JSON: {exc}") from exc
    records = payload.get("relations")
    if not isinstance(records, list):
        raise ConfigError(f"relation config {path} must have a top-level 'relations' list")
    specs = {}
    for record in records:
        spec = spec_from_record(record)
        if spec.name in specs:
            raise ConfigError(f"duplicate relation name {spec.name!r} in {path}")
        specs[spec.name] = spec
    return specs


def save_relation_specs(specs: dict[str, RelationSpec], path) -> None:
    """Write the config back (used by calibration to persist thresholds)."""
    payload = {"relations": [spec_to_record(spec) for spec in specs.values()]}
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=False) + "\n",
        encoding="utf-8",
    )
