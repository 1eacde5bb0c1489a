"""HTTP+JSON API for the annotation loop, versioned under /api/v1.

Endpoints: list batches, fetch a batch, fetch an annotator's next unrated
item, submit a rating, and read a relation's manual-accuracy report.
Errors carry a machine-readable body; the review UI bundle is served from
the mount root when a directory is supplied.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..model import LikertValue
from .store import ConflictError, NotFoundError, ReviewItem, ReviewStore


class RatingIn(BaseModel):
    prediction_id: str
    annotator: str
    value: str


def _item_payload(item: ReviewItem, current_rating=None) -> dict:
    return {
        "prediction_id": item.prediction_id,
        "batch_id": item.batch_id,
        "subject_label": item.subject_label,
        "relation_phrase": item.relation_phrase,
        "object_label": item.object_label,
        "confidence": item.confidence,
        "search_query": item.search_query,
        "position": item.position,
        "current_rating": current_rating,
    }


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
    )


def create_app(store: ReviewStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="review-service", docs_url=None, redoc_url=None)

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return _error(422, "invalid", str(exc))

    @app.get("/api/v1/batches")
    def list_batches():
        return {"batches": store.list_batches()}

    @app.get("/api/v1/batches/{batch_id}")
    def get_batch(batch_id: str):
        batch = store.get_batch(batch_id)
        return {
            "id": batch.id,
            "relation": batch.relation,
            "status": batch.status,
            "target_n": batch.target_n,
            "items": [_item_payload(item) for item in batch.items],
        }

    @app.get("/api/v1/batches/{batch_id}/next")
    def next_item(batch_id: str, annotator: str):
        item = store.next_item(batch_id, annotator)
        rated, total = store.annotator_progress(batch_id, annotator)
        progress = {"rated": rated, "total": total}
        if item is None:
            return {"done": True, "item": None, "progress": progress}
        payload = _item_payload(item, store.current_rating(item.prediction_id, annotator))
        return {"done": False, "item": payload, "progress": progress}

    @app.post("/api/v1/ratings", status_code=201)
    def post_rating(rating: RatingIn):
        value = LikertValue(rating.value)  # ValueError -> 422
        rating_id = store.record_rating(rating.prediction_id, rating.annotator, value)
        return {"rating_id": rating_id, "prediction_id": rating.prediction_id,
                "value": value.value}

    @app.get("/api/v1/reports/{relation}")
    def relation_report(relation: str):
        return store.relation_report(relation).to_payload()

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
