"""Run the review service locally: `python3 -m kbcomplete.review.devserver`.

Optionally seeds a batch from a JSON file of retained predictions first,
which is how demo setups and the UI's integration tests get data:

    {
      "relation": {"name": "writtenIn", "prompt_label": "original language",
                   "target_precision": 0.9},
      "seed": 7,
      "n": 10,
      "items": [{"subject_id": "M00", "subject_label": "missing film 0",
                 "object_label": "swedish", "confidence": 0.97}, ...]
    }
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import uvicorn

from ..model import EntityRef, FewShotExample, RelationSpec, ScoredPrediction
from .service import create_app
from .store import ReviewStore


def seed_from_file(store: ReviewStore, seed_path) -> str:
    payload = json.loads(Path(seed_path).read_text(encoding="utf-8"))
    relation = payload["relation"]
    spec = RelationSpec(
        id=relation.get("id", relation["name"]),
        name=relation["name"],
        prompt_label=relation["prompt_label"],
        target_precision=relation.get("target_precision", 0.9),
        few_shot_count=1,
        few_shot_examples=(FewShotExample("seed subject", ("seed object",)),),
    )
    predictions = [
        ScoredPrediction(
            subject=EntityRef(item["subject_id"], item.get("subject_label", "")),
            relation=spec.id,
            answer=(item["object_label"],),
            confidence=item["confidence"],
        )
        for item in payload["items"]
    ]
    batch = store.create_batch(
        predictions, spec,
        n=payload.get("n", len(predictions)),
        seed=payload.get("seed", 0),
        batch_id=payload.get("batch_id"),
    )
    return batch.id


@click.command()
@click.option("--db", "db_path", type=click.Path(path_type=Path), required=True)
@click.option("--audit-log", type=click.Path(path_type=Path), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8040)
@click.option("--seed-file", type=click.Path(path_type=Path), default=None,
              help="Seed a batch from this JSON file before serving.")
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Static directory holding the review UI bundle.")
def main(db_path, audit_log, host, port, seed_file, ui_dir):
    """Serve the review API (and UI, when a bundle directory is given)."""
    store = ReviewStore(db_path, audit_log=audit_log)
    if seed_file is not None:
        batch_id = seed_from_file(store, seed_file)
        click.echo(f"seeded batch {batch_id}")
    app = create_app(store, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
