"""End-to-end completion per relation: calibrate, predict, filter, export.

A run is driven entirely by its transcript log: interrupting after any
record and rerunning reproduces byte-identical exports, because prompts
are rebuilt deterministically and previously transcribed calls are served
from the log instead of the provider.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .gateway import (
    Generation,
    GenerationRequest,
    TranscriptLog,
    batch_generate,
    prompt_hash,
)
from .ingest import GoldDataset, gap_report
from .ingest import find_missing_subjects as _find_missing_subjects
from .model import ABSTAIN, EntityRef, Fact, PromptVariant, ScoredPrediction
from .prompting import build_prompt, fetch_context, parse_answer
from .scoring import (
    RETAIN_NOTHING,
    ThresholdCurve,
    calibrate_threshold,
    filter_by_threshold,
)


def round_half_up(x: float) -> int:
    """Round positive values half-up (2.5 -> 3), matching ledger arithmetic."""
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class CostModel:
    """Pricing assumptions for query budgeting and reporting.

    ``retention_rate`` is the fraction of queries whose answer survives
    thresholding; it divides the per-query cost into a per-retained cost.
    """

    price_per_1k_tokens: float = 0.02
    avg_prompt_tokens: int = 174
    retention_rate: float = 0.5

    def __post_init__(self):
        if self.price_per_1k_tokens <= 0 or self.avg_prompt_tokens <= 0:
            raise ValueError("cost model fields must be positive")
        if not 0.0 < self.retention_rate <= 1.0:
            raise ValueError("retention_rate must lie in (0, 1]")


@dataclass(frozen=True)
class CostEstimate:
    total: float
    per_query: float
    per_retained: float


def estimate_cost(num_queries: int, model: CostModel) -> CostEstimate:
    if num_queries < 0:
        raise ValueError("num_queries must be >= 0")
    per_query = model.avg_prompt_tokens * model.price_per_1k_tokens / 1000.0
    return CostEstimate(
        total=num_queries * per_query,
        per_query=per_query,
        per_retained=per_query / model.retention_rate,
    )


def relative_growth(addable: int, manual_accuracy: float, current: int) -> int:
    """Growth of a relation in integer percent: 100 * A * a / N_cur."""
    if current <= 0:
        raise ValueError("relative growth is undefined for an empty relation")
    return round_half_up(100.0 * addable * manual_accuracy / current)


@dataclass
class CompletionEstimate:
    """Per-relation bookkeeping for one completion run."""

    relation_id: str
    current_statements: int
    missing_subjects: int
    queried: int
    retained: int
    high_confidence_fraction: float
    addable: int
    query_cost: float
    cost_per_retained: float
    manual_accuracy: float | None = None
    relative_growth_pct: int | None = None

    def __post_init__(self):
        if self.addable > self.missing_subjects:
            raise ValueError("addable cannot exceed missing subjects")
        if self.addable == 0:
            self.relative_growth_pct = 0

    def to_record(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class CompletionRun:
    estimate: CompletionEstimate
    retained: list[ScoredPrediction]
    statements: list[Fact]
    threshold: float
    export_path: Path | None
    sidecar_path: Path | None
    manifest_path: Path | None
    transcript_path: Path
    flagged: bool = False
    budget_stopped: bool = False
    new_calls: int = 0  # provider calls actually made (not replayed)
    errors: list[str] = dataclasses.field(default_factory=list)


def emit_quickstatements(statements, out_path) -> int:
    """Write identifier triples as TSV, one (subject, relation, object) per line.

    Ordering is by subject id then object id, so the file bytes do not
    depend on input order. Objects without a KB identifier must not reach
    this writer; route them to the needs-linking sidecar instead.
    """
    rows = []
    for fact in statements:
        for obj in fact.objects:
            if not obj.id:
                raise ValueError(
                    f"object {obj.label!r} of {fact.subject.id} has no identifier; "
                    "send it to the needs-linking sidecar"
                )
            rows.append((fact.subject.id, fact.relation, obj.id))
    rows.sort()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write("\t".join(row) + "\n")
    return len(rows)


def _emit_sidecar(rows, out_path) -> int:
    """Needs-linking rows: same TSV shape with labels in place of ids."""
    rows = sorted(rows)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        for subject_id, relation, label in rows:
            handle.write(f"{subject_id}\t{relation}\t{label}\n")
    return len(rows)


def spec_fingerprint(spec) -> str:
    from .relations import spec_to_record

    blob = json.dumps(spec_to_record(spec), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _score_generation(subject, relation_id, variant, generation: Generation) -> ScoredPrediction:
    answer = parse_answer(generation.text, variant)
    if answer is not ABSTAIN and not answer:
        answer = ABSTAIN  # empty completion asserts nothing
    confidence = generation.confidence
    if confidence is None:
        confidence = 0.0  # providers without logprobs are never thresholded in
    return ScoredPrediction(
        subject=subject,
        relation=relation_id,
        answer=tuple(answer) if answer is not ABSTAIN else ABSTAIN,
        confidence=min(confidence, 1.0),
        raw_text=generation.text,
        prompt_variant=variant,
    )


@dataclass
class PhaseResult:
    """Outcome of prompting one batch of subjects."""

    predictions: list[ScoredPrediction]
    queried: int  # subjects evaluated (answers and abstentions)
    new_calls: int  # provider calls that were not already transcribed
    budget_stopped: bool


def predictions_for_subjects(
    spec,
    subjects,
    provider,
    variant=PromptVariant.STANDARD,
    context_provider=None,
    transcript=None,
    max_in_flight=4,
    errors=None,
    budget=None,
) -> PhaseResult:
    """Prompt, generate, parse, and score one prediction per subject.

    ``budget`` caps provider calls: prompts already in the transcript are
    free, and the batch is cut off before the first call the budget cannot
    cover. Subjects whose context lookup finds nothing (context variant
    only) abstain locally without an LM call. Per-subject failures are
    recorded in ``errors`` and drop the subject; they never abort the
    batch.
    """
    variant = PromptVariant(variant)
    errors = errors if errors is not None else []
    planned = []
    local_abstains = []
    new_calls = 0
    budget_stopped = False
    for subject in subjects:
        context = None
        if variant is PromptVariant.WITH_CONTEXT:
            context = fetch_context(subject, spec, context_provider)
            if context is None:
                local_abstains.append(subject)
                continue
        prompt = build_prompt(spec, subject, variant, context=context)
        is_new = transcript is None or transcript.lookup(prompt_hash(prompt.text)) is None
        if budget is not None and is_new and new_calls >= budget:
            budget_stopped = True
            break
        new_calls += is_new
        planned.append((subject, GenerationRequest(prompt=prompt)))

    results = batch_generate(
        [request for _, request in planned],
        provider,
        max_in_flight=max_in_flight,
        transcript=transcript,
    )
    predictions = []
    for (subject, _), result in zip(planned, results):
        if isinstance(result, Generation):
            predictions.append(_score_generation(subject, spec.id, variant, result))
        else:
            errors.append(f"{subject.id}: {result.error}")
    for subject in local_abstains:
        predictions.append(
            ScoredPrediction(
                subject=subject,
                relation=spec.id,
                answer=ABSTAIN,
                confidence=0.0,
                raw_text="",
                prompt_variant=variant,
            )
        )
    return PhaseResult(
        predictions=predictions,
        queried=len(planned) + len(local_abstains),
        new_calls=new_calls,
        budget_stopped=budget_stopped,
    )


def run_completion(
    spec,
    gold: GoldDataset,
    client,
    provider,
    variant=PromptVariant.STANDARD,
    *,
    out_dir,
    context_provider=None,
    precision_range=(0.75, 0.95),
    cost_model: CostModel | None = None,
    max_queries: int | None = None,
    max_spend: float | None = None,
    max_in_flight: int = 4,
    export_all_objects: bool = False,
    manual_accuracy: float | None = None,
) -> CompletionRun:
    """Complete one relation end to end.

    Calibrates a threshold on gold when the spec does not pin one, prompts
    every affordable missing subject, filters by the threshold, and writes
    the export, needs-linking sidecar, run manifest, and transcript under
    ``out_dir``. Budgets are enforced before each provider call using the
    cost model, so a paid API can never be overrun.
    """
    variant = PromptVariant(variant)
    cost_model = cost_model or CostModel()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    transcript_path = out_dir / f"{spec.name}.transcript.jsonl"
    transcript = TranscriptLog(transcript_path)
    errors: list[str] = []

    budget = max_queries
    if max_spend is not None:
        per_query = estimate_cost(1, cost_model).per_query
        affordable = math.floor(max_spend / per_query) if per_query > 0 else 0
        budget = affordable if budget is None else min(budget, affordable)

    # 1. threshold
    flagged = False
    budget_stopped = False
    new_calls = 0
    if spec.threshold is not None:
        threshold = spec.threshold
    else:
        gold_facts = gold.facts.get(spec.id, [])
        if not gold_facts:
            return _flagged_run(
                spec, client, cost_model, transcript_path,
                errors + [f"{spec.name}: no gold data to calibrate on"],
            )
        gold_subjects = [fact.subject for fact in gold_facts]
        phase = predictions_for_subjects(
            spec, gold_subjects, provider, variant,
            context_provider=context_provider, transcript=transcript,
            max_in_flight=max_in_flight, errors=errors, budget=budget,
        )
        new_calls += phase.new_calls
        if budget is not None:
            budget -= phase.new_calls
        budget_stopped = phase.budget_stopped
        gold_predictions = phase.predictions
        curve = ThresholdCurve.from_predictions(
            gold_predictions, gold.by_subject(spec.id)
        ) if any(not p.is_abstain for p in gold_predictions) else None
        if curve is None or len(curve) == 0:
            return _flagged_run(
                spec, client, cost_model, transcript_path,
                errors + [f"{spec.name}: every calibration prediction abstained"],
                new_calls=new_calls,
            )
        calibration = calibrate_threshold(spec, curve.items, precision_range)
        threshold = calibration.threshold
        flagged = calibration.low_confidence
        if threshold == RETAIN_NOTHING:
            return _flagged_run(
                spec, client, cost_model, transcript_path,
                errors + [f"{spec.name}: no threshold reaches the precision range"],
                new_calls=new_calls,
            )

    # 2. enumerate the gap
    gap = gap_report(spec, client)
    missing = _find_missing_subjects(spec, client)

    # 3-4. prompt and score within the remaining budget
    phase = predictions_for_subjects(
        spec, missing, provider, variant,
        context_provider=context_provider, transcript=transcript,
        max_in_flight=max_in_flight, errors=errors, budget=budget,
    )
    predictions = phase.predictions
    budget_stopped = budget_stopped or phase.budget_stopped
    new_calls += phase.new_calls

    # 5. filter
    retained = filter_by_threshold(predictions, threshold)

    # 6. bookkeeping
    queried = phase.queried
    fraction = len(retained) / queried if queried else 0.0
    addable = round_half_up(fraction * gap.missing_subjects)
    costs = estimate_cost(queried, cost_model)
    estimate = CompletionEstimate(
        relation_id=spec.id,
        current_statements=gap.current_statements,
        missing_subjects=gap.missing_subjects,
        queried=queried,
        retained=len(retained),
        high_confidence_fraction=fraction,
        addable=addable,
        query_cost=costs.total,
        cost_per_retained=costs.per_retained,
        manual_accuracy=manual_accuracy,
    )
    if manual_accuracy is not None and estimate.relative_growth_pct is None:
        if gap.current_statements > 0:
            estimate.relative_growth_pct = relative_growth(
                addable, manual_accuracy, gap.current_statements
            )

    # 7. export
    label_index = gold.label_index()
    statements = []
    sidecar_rows = []
    for prediction in retained:
        labels = prediction.answer if export_all_objects else prediction.answer[:1]
        resolved = []
        for label in labels:
            object_id = label_index.get(label)
            if object_id is None:
                sidecar_rows.append((prediction.subject.id, spec.id, label))
            else:
                resolved.append(EntityRef(id=object_id, label=label))
        if resolved:
            statements.append(
                Fact(subject=prediction.subject, relation=spec.id,
                     objects=frozenset(resolved))
            )

    export_path = out_dir / f"{spec.name}.quickstatements.tsv"
    sidecar_path = out_dir / f"{spec.name}.needs-linking.tsv"
    manifest_path = out_dir / f"{spec.name}.manifest.json"
    emit_quickstatements(statements, export_path)
    _emit_sidecar(sidecar_rows, sidecar_path)

    manifest = {
        "relation": spec.name,
        "relation_id": spec.id,
        "spec_sha256": spec_fingerprint(spec),
        "provider": getattr(provider, "id", provider.__class__.__name__),
        "variant": variant.value,
        "threshold": threshold,
        "flagged_low_confidence": flagged,
        "budget_stopped": budget_stopped,
        "counts": {
            "missing_subjects": gap.missing_subjects,
            "queried": queried,
            "retained": len(retained),
            "exported": sum(len(fact.objects) for fact in statements),
            "needs_linking": len(sidecar_rows),
        },
        "estimate": estimate.to_record(),
        "errors": sorted(errors),
    }
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    return CompletionRun(
        estimate=estimate,
        retained=retained,
        statements=statements,
        threshold=threshold,
        export_path=export_path,
        sidecar_path=sidecar_path,
        manifest_path=manifest_path,
        transcript_path=transcript_path,
        flagged=flagged,
        budget_stopped=budget_stopped,
        new_calls=new_calls,
        errors=errors,
    )


def _flagged_run(spec, client, cost_model, transcript_path, errors,
                 new_calls=0) -> CompletionRun:
    """Calibration failed: flag the relation, spend nothing on generation."""
    gap = gap_report(spec, client)
    estimate = CompletionEstimate(
        relation_id=spec.id,
        current_statements=gap.current_statements,
        missing_subjects=gap.missing_subjects,
        queried=0,
        retained=0,
        high_confidence_fraction=0.0,
        addable=0,
        query_cost=0.0,
        cost_per_retained=estimate_cost(0, cost_model).per_retained,
    )
    return CompletionRun(
        estimate=estimate,
        retained=[],
        statements=[],
        threshold=RETAIN_NOTHING,
        export_path=None,
        sidecar_path=None,
        manifest_path=None,
        transcript_path=transcript_path,
        flagged=True,
        new_calls=new_calls,
        errors=errors,
    )


def sweep_variants(
    spec,
    gold: GoldDataset,
    provider,
    k_values=(8,),
    variants=(PromptVariant.STANDARD,),
    context_provider=None,
    targets=(0.95, 0.90),
    max_in_flight=4,
):
    """Calibration-set coverage@P for every (few-shot count, variant) cell.

    Returns ``{(k, variant): {"r_at_p": {target: coverage}, "threshold": t}}``
    with per-cell failures recorded under an ``"error"`` key instead of
    aborting the sweep.
    """
    if any(k < 1 or k > 12 for k in k_values):
        raise ValueError("few-shot counts must lie in [1, 12]")
    gold_facts = gold.facts.get(spec.id, [])
    if not gold_facts:
        raise ValueError(f"no gold facts for relation {spec.name!r}")
    subjects = [fact.subject for fact in gold_facts]
    by_subject = gold.by_subject(spec.id)

    report = {}
    for k in k_values:
        for variant in variants:
            variant = PromptVariant(variant)
            cell_key = (k, variant.value)
            try:
                cell_spec = dataclasses.replace(spec, few_shot_count=k)
                phase = predictions_for_subjects(
                    cell_spec, subjects, provider, variant,
                    context_provider=context_provider,
                    max_in_flight=max_in_flight,
                )
                predictions = phase.predictions
                asserting = [p for p in predictions if not p.is_abstain]
                if not asserting:
                    report[cell_key] = {
                        "r_at_p": {target: 0.0 for target in targets},
                        "threshold": RETAIN_NOTHING,
                    }
                    continue
                curve = ThresholdCurve.from_predictions(predictions, by_subject)
                coverages = {}
                thresholds = {}
                for target in targets:
                    coverage, tau = curve.recall_at_precision(target)
                    coverages[target] = coverage
                    thresholds[target] = tau
                report[cell_key] = {
                    "r_at_p": coverages,
                    "threshold": thresholds[max(targets)],
                }
            except Exception as exc:  # per-cell isolation
                report[cell_key] = {"error": f"{type(exc).__name__}: {exc}"}
    return report


def render_sweep(report, targets=(0.95, 0.90)) -> str:
    """Comparison table: one row per (k, variant), one column per target."""
    header = f"{'k':>3} {'variant':<14} " + " ".join(
        f"C@P{int(t * 100):>2}" for t in sorted(targets, reverse=True)
    )
    lines = [header]
    for (k, variant) in sorted(report):
        cell = report[(k, variant)]
        if "error" in cell:
            lines.append(f"{k:>3} {variant:<14} error: {cell['error']}")
            continue
        cells = " ".join(
            f"{cell['r_at_p'][t]:>5.2f}" for t in sorted(targets, reverse=True)
        )
        lines.append(f"{k:>3} {variant:<14} {cells}")
    return "\n".join(lines) + "\n"
