from .store import (
    DEFAULT_SAMPLE_TARGET,
    ConflictError,
    ManualAccuracyReport,
    NotFoundError,
    ReviewBatch,
    ReviewItem,
    ReviewStore,
    accept_relation,
    allocate_sample_sizes,
    record_acceptance,
)

__all__ = [
    "DEFAULT_SAMPLE_TARGET",
    "ConflictError",
    "ManualAccuracyReport",
    "NotFoundError",
    "ReviewBatch",
    "ReviewItem",
    "ReviewStore",
    "accept_relation",
    "allocate_sample_sizes",
    "record_acceptance",
]
