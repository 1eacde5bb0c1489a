"""Knowledge-base completion with LM-generated facts at a target precision.

The toolkit prompts a language model with instruction-free few-shot
prompts, scores each answer by the probability of its first generated
token, calibrates a per-relation confidence threshold against gold data,
and turns high-confidence predictions over missing subjects into
reviewable, exportable statements.
"""

from .errors import (
    ConfigError,
    ContentRefusal,
    DatasetError,
    EndpointError,
    KbCompleteError,
    ProviderError,
    RateLimitError,
    RateLimitSaturated,
    RetryableError,
)
from .gateway import (
    Generation,
    GenerationFailure,
    GenerationRequest,
    MockProvider,
    OpenAICompatProvider,
    RateLimiter,
    TranscriptLog,
    batch_generate,
    generate,
    prompt_hash,
)
from .ingest import (
    GapReport,
    GoldDataset,
    find_missing_subjects,
    gap_report,
    load_gold_dataset,
)
from .model import (
    ABSTAIN,
    EntityRef,
    Fact,
    FewShotExample,
    LikertRating,
    LikertValue,
    PromptVariant,
    RelationSpec,
    ScoredPrediction,
    make_fact,
    normalize_label,
)
from .pipeline import (
    CompletionEstimate,
    CompletionRun,
    CostEstimate,
    CostModel,
    emit_quickstatements,
    estimate_cost,
    relative_growth,
    run_completion,
    sweep_variants,
)
from .prompting import (
    Prompt,
    SearchSnippet,
    build_prompt,
    estimate_tokens,
    fetch_context,
    parse_answer,
)
from .relations import load_relation_specs, save_relation_specs
from .scoring import (
    RETAIN_NOTHING,
    CalibrationResult,
    MetricsReport,
    RelationMetrics,
    ThresholdCurve,
    calibrate_threshold,
    filter_by_threshold,
    recall_at_precision,
    retain_all_metrics,
)
from .sparql import DiskCache, SparqlClient

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN",
    "CalibrationResult",
    "CompletionEstimate",
    "CompletionRun",
    "ConfigError",
    "ContentRefusal",
    "CostEstimate",
    "CostModel",
    "DatasetError",
    "DiskCache",
    "EndpointError",
    "EntityRef",
    "Fact",
    "FewShotExample",
    "GapReport",
    "Generation",
    "GenerationFailure",
    "GenerationRequest",
    "GoldDataset",
    "KbCompleteError",
    "LikertRating",
    "LikertValue",
    "MetricsReport",
    "MockProvider",
    "OpenAICompatProvider",
    "Prompt",
    "PromptVariant",
    "ProviderError",
    "RETAIN_NOTHING",
    "RateLimitError",
    "RateLimitSaturated",
    "RateLimiter",
    "RelationMetrics",
    "RelationSpec",
    "RetryableError",
    "ScoredPrediction",
    "SearchSnippet",
    "SparqlClient",
    "ThresholdCurve",
    "TranscriptLog",
    "batch_generate",
    "build_prompt",
    "calibrate_threshold",
    "emit_quickstatements",
    "estimate_cost",
    "estimate_tokens",
    "fetch_context",
    "filter_by_threshold",
    "find_missing_subjects",
    "gap_report",
    "generate",
    "load_gold_dataset",
    "load_relation_specs",
    "make_fact",
    "normalize_label",
    "parse_answer",
    "prompt_hash",
    "recall_at_precision",
    "relative_growth",
    "retain_all_metrics",
    "run_completion",
    "save_relation_specs",
    "sweep_variants",
]
