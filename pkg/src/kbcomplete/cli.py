"""Command-line entry point binding the toolkit into reproducible runs.

Exit codes are stable: 0 success, 2 configuration error, 3 stopped on a
budget limit (partial outputs were written), 4 partial failure (some
relations failed, the rest completed).
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .errors import ConfigError, KbCompleteError
from .gateway import MockProvider, OpenAICompatProvider
from .ingest import gap_report, load_gold_dataset
from .model import PromptVariant
from .pipeline import CostModel, estimate_cost, predictions_for_subjects, run_completion
from .relations import load_relation_specs, save_relation_specs
from .scoring import (
    RETAIN_NOTHING,
    calibrate_threshold,
    render_metrics_table,
    render_rp_table,
    retain_all_metrics,
    ThresholdCurve,
)
from .sparql import DiskCache, SparqlClient

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_PARTIAL = 4


@dataclass
class RunConfig:
    relations: Path
    output_dir: Path
    gold: Path | None = None
    cache_dir: Path | None = None
    endpoint: str | None = None
    gaps: Path | None = None
    provider: dict = dataclasses.field(default_factory=lambda: {"type": "mock"})
    variant: str = "standard"
    few_shot_count: int | None = None
    target_precision: float | None = None
    precision_range: tuple[float, float] = (0.75, 0.95)
    max_queries: int | None = None
    max_spend: float | None = None
    max_in_flight: int = 4
    cost_model: CostModel = dataclasses.field(default_factory=CostModel)
    only_relations: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_spend is not None and self.max_spend < 0:
            raise ConfigError("max_spend must be >= 0")


def _load_config(path: Path | None, overrides: dict) -> RunConfig:
    payload = {}
    if path is not None:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    merged = {**payload, **{k: v for k, v in overrides.items() if v not in (None, ())}}
    if "relations" not in merged:
        raise ConfigError("no relation config given (flag --relations or config key)")
    if "output_dir" not in merged:
        raise ConfigError("no output directory given (flag --output-dir or config key)")
    cost = merged.get("cost_model", {})
    if isinstance(cost, dict):
        cost = CostModel(**cost)
    try:
        return RunConfig(
            relations=Path(merged["relations"]),
            output_dir=Path(merged["output_dir"]),
            gold=Path(merged["gold"]) if merged.get("gold") else None,
            cache_dir=Path(merged["cache_dir"]) if merged.get("cache_dir") else None,
            endpoint=merged.get("endpoint"),
            gaps=Path(merged["gaps"]) if merged.get("gaps") else None,
            provider=merged.get("provider", {"type": "mock"}),
            variant=merged.get("variant", "standard"),
            few_shot_count=merged.get("few_shot_count"),
            target_precision=merged.get("target_precision"),
            precision_range=tuple(merged.get("precision_range", (0.75, 0.95))),
            max_queries=merged.get("max_queries"),
            max_spend=merged.get("max_spend"),
            max_in_flight=merged.get("max_in_flight", 4),
            cost_model=cost,
            only_relations=tuple(merged.get("only_relations", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad run configuration: {exc}") from exc


def _build_provider(config: RunConfig):
    spec = config.provider
    kind = spec.get("type", "mock")
    if kind == "mock":
        if spec.get("table"):
            return MockProvider.from_file(
                spec["table"], price_per_1k=spec.get("price_per_1k", 0.02)
            )
        return MockProvider(price_per_1k=spec.get("price_per_1k", 0.02))
    if kind == "openai":
        return OpenAICompatProvider(
            base_url=spec["base_url"],
            model=spec["model"],
            api_key_env=spec.get("api_key_env", "LM_API_KEY"),
            style=spec.get("style", "completion"),
            price_per_1k=spec.get("price_per_1k", 0.02),
        )
    raise ConfigError(f"unknown provider type {kind!r}")


def _build_client(config: RunConfig) -> SparqlClient:
    if not config.endpoint:
        raise ConfigError("no SPARQL endpoint configured")
    cache = DiskCache(config.cache_dir) if config.cache_dir else None
    return SparqlClient(config.endpoint, cache=cache)


def _specs(config: RunConfig):
    specs = load_relation_specs(config.relations)
    if config.only_relations:
        missing = set(config.only_relations) - set(specs)
        if missing:
            raise ConfigError(f"unknown relations requested: {sorted(missing)}")
        specs = {name: specs[name] for name in config.only_relations}
    if config.few_shot_count is not None:
        specs = {
            name: dataclasses.replace(spec, few_shot_count=config.few_shot_count)
            for name, spec in specs.items()
        }
    if config.target_precision is not None:
        specs = {
            name: dataclasses.replace(spec, target_precision=config.target_precision)
            for name, spec in specs.items()
        }
    return specs


def _common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
                     help="JSON run configuration; flags override its keys."),
        click.option("--relations", type=click.Path(path_type=Path), default=None,
                     help="Relation configuration file."),
        click.option("--gold", type=click.Path(path_type=Path), default=None,
                     help="Gold dataset TSV."),
        click.option("--output-dir", type=click.Path(path_type=Path), default=None),
        click.option("--cache-dir", type=click.Path(path_type=Path), default=None),
        click.option("--endpoint", default=None, help="SPARQL endpoint URL."),
        click.option("--variant", default=None,
                     type=click.Choice([v.value for v in PromptVariant])),
        click.option("--k", "few_shot_count", type=int, default=None,
                     help="Few-shot example count override."),
        click.option("--target-precision", type=float, default=None),
        click.option("--max-queries", type=int, default=None),
        click.option("--max-spend", type=float, default=None),
        click.option("--relation", "only_relations", multiple=True,
                     help="Restrict to these relation names."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _config_from(kwargs) -> RunConfig:
    config_path = kwargs.pop("config_path")
    overrides = {k: v for k, v in kwargs.items()}
    return _load_config(config_path, overrides)


def _gold_predictions(config, specs, provider):
    """Generate predictions over every gold subject, per relation."""
    gold = load_gold_dataset(config.gold)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    all_predictions = {}
    for name, spec in specs.items():
        facts = gold.facts.get(spec.id)
        if not facts:
            continue
        phase = predictions_for_subjects(
            spec, [fact.subject for fact in facts], provider,
            PromptVariant(config.variant), max_in_flight=config.max_in_flight,
        )
        all_predictions[name] = (spec, phase.predictions, gold)
    return gold, all_predictions


@click.group()
@click.version_option()
def main():
    """Complete a knowledge base with LM-generated facts at a target precision."""


@main.command()
@_common_options
def evaluate(**kwargs):
    """Retain-all evaluation against gold: per-relation P/R/F1 and macro."""
    try:
        config = _config_from(kwargs)
        if config.gold is None or not config.gold.exists():
            raise ConfigError("evaluate needs an existing --gold dataset")
        specs = _specs(config)
        provider = _build_provider(config)
        gold, per_relation = _gold_predictions(config, specs, provider)
    except (ConfigError, KbCompleteError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    predictions = [p for _, preds, _ in per_relation.values() for p in preds]
    report = retain_all_metrics(predictions, gold)
    named = type(report)(per_relation={
        name: report.per_relation[spec.id]
        for name, (spec, _, _) in per_relation.items()
        if spec.id in report.per_relation
    })
    table = render_metrics_table(named)
    (config.output_dir / "retain_all.json").write_text(named.to_json() + "\n")
    (config.output_dir / "retain_all.txt").write_text(table)
    click.echo(table, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@_common_options
def calibrate(**kwargs):
    """Calibrate per-relation thresholds and write them back to the config."""
    try:
        config = _config_from(kwargs)
        if config.gold is None or not config.gold.exists():
            raise ConfigError("calibrate needs an existing --gold dataset")
        specs = _specs(config)
        all_specs = load_relation_specs(config.relations)
        provider = _build_provider(config)
        gold, per_relation = _gold_predictions(config, specs, provider)
    except (ConfigError, KbCompleteError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    flagged = []
    results = {}
    coverage_rows = {}
    for name, (spec, predictions, _) in per_relation.items():
        asserting = [p for p in predictions if not p.is_abstain]
        if not asserting:
            flagged.append(name)
            results[name] = {"threshold": None, "flagged": True,
                             "reason": "all predictions abstained"}
            continue
        curve = ThresholdCurve.from_predictions(predictions, gold.by_subject(spec.id))
        coverage_rows[name] = curve.r_at_p((0.95, 0.90))
        calibration = calibrate_threshold(spec, curve.items, config.precision_range)
        if calibration.threshold == RETAIN_NOTHING:
            flagged.append(name)
            results[name] = {"threshold": None, "flagged": True,
                             "reason": "no cut reaches the precision range"}
            continue
        if calibration.low_confidence:
            flagged.append(name)
        all_specs[name] = dataclasses.replace(
            all_specs[name], threshold=calibration.threshold
        )
        results[name] = {
            "threshold": calibration.threshold,
            "precision": calibration.precision,
            "coverage": calibration.coverage,
            "flagged": calibration.low_confidence,
        }

    save_relation_specs(all_specs, config.relations)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    (config.output_dir / "calibration.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n"
    )
    if coverage_rows:
        (config.output_dir / "coverage_at_precision.txt").write_text(
            render_rp_table(coverage_rows, title="calibration-set coverage@P")
        )
    for name, row in sorted(results.items()):
        tau = row["threshold"]
        shown = "retain-nothing" if tau is None else f"{tau:.6f}"
        click.echo(f"{name}: threshold {shown}" + ("  [flagged]" if row.get("flagged") else ""))
    if flagged:
        click.echo(f"flagged low-confidence relations: {', '.join(sorted(flagged))}")
    sys.exit(EXIT_OK)


@main.command()
@_common_options
def complete(**kwargs):
    """Run the completion pipeline per relation and export statements."""
    try:
        config = _config_from(kwargs)
        if config.gold is None or not config.gold.exists():
            raise ConfigError("complete needs an existing --gold dataset")
        specs = _specs(config)
        provider = _build_provider(config)
        client = _build_client(config)
        gold = load_gold_dataset(config.gold)
    except (ConfigError, KbCompleteError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    remaining_queries = config.max_queries
    remaining_spend = config.max_spend
    per_query = estimate_cost(1, config.cost_model).per_query
    budget_stopped = False
    hard_failures = []
    rows = {}
    for name, spec in specs.items():
        try:
            run = run_completion(
                spec, gold, client, provider,
                variant=PromptVariant(config.variant),
                out_dir=config.output_dir,
                precision_range=config.precision_range,
                cost_model=config.cost_model,
                max_queries=remaining_queries,
                max_spend=remaining_spend,
                max_in_flight=config.max_in_flight,
            )
        except KbCompleteError as exc:
            hard_failures.append(name)
            rows[name] = {"error": str(exc)}
            continue
        if remaining_queries is not None:
            remaining_queries = max(0, remaining_queries - run.new_calls)
        if remaining_spend is not None:
            remaining_spend = max(0.0, remaining_spend - run.new_calls * per_query)
        budget_stopped = budget_stopped or run.budget_stopped
        rows[name] = {
            "threshold": None if run.threshold == RETAIN_NOTHING else run.threshold,
            "flagged": run.flagged,
            "budget_stopped": run.budget_stopped,
            "counts": {
                "queried": run.estimate.queried,
                "retained": run.estimate.retained,
                "addable": run.estimate.addable,
            },
            "cost": run.estimate.query_cost,
            "errors": run.errors,
        }
        click.echo(
            f"{name}: queried {run.estimate.queried}, retained {run.estimate.retained}"
            + ("  [flagged]" if run.flagged else "")
            + ("  [budget]" if run.budget_stopped else "")
        )

    totals = {
        "queried": sum(r["counts"]["queried"] for r in rows.values() if "counts" in r),
        "retained": sum(r["counts"]["retained"] for r in rows.values() if "counts" in r),
        "cost": sum(r["cost"] for r in rows.values() if "cost" in r),
    }
    manifest = {"relations": rows, "totals": totals, "budget_stopped": budget_stopped}
    (config.output_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    if hard_failures:
        click.echo(f"failed relations: {', '.join(hard_failures)}", err=True)
        sys.exit(EXIT_PARTIAL)
    if budget_stopped:
        click.echo("stopped on budget; outputs are partial", err=True)
        sys.exit(EXIT_BUDGET)
    sys.exit(EXIT_OK)


@main.command()
@_common_options
def estimate(**kwargs):
    """Cost projection for filling every gap, from gap counts or the endpoint."""
    try:
        config = _config_from(kwargs)
        specs = _specs(config)
        gaps = {}
        if config.gaps is not None:
            if not config.gaps.exists():
                raise ConfigError(f"gaps file not found: {config.gaps}")
            for row in json.loads(config.gaps.read_text())["rows"]:
                gaps[row["relation"]] = int(row["missing"])
        else:
            client = _build_client(config)
            for name, spec in specs.items():
                gaps[name] = gap_report(spec, client).missing_subjects
    except (ConfigError, KbCompleteError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    model = config.cost_model
    rows = {}
    for name, missing in sorted(gaps.items()):
        rows[name] = {"missing": missing, "cost": estimate_cost(missing, model).total}
    total_queries = sum(r["missing"] for r in rows.values())
    totals = estimate_cost(total_queries, model)
    payload = {
        "relations": rows,
        "total_queries": total_queries,
        "total_cost": totals.total,
        "cost_per_query": totals.per_query,
        "cost_per_retained": totals.per_retained,
    }
    config.output_dir.mkdir(parents=True, exist_ok=True)
    (config.output_dir / "cost_estimate.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    width = max([len(n) for n in rows] + [8])
    click.echo(f"{'relation':<{width}} {'#queries':>12} {'cost':>14}")
    for name, row in rows.items():
        click.echo(f"{name:<{width}} {row['missing']:>12,} {row['cost']:>14,.2f}")
    click.echo(f"{'total':<{width}} {total_queries:>12,} {totals.total:>14,.2f}")
    click.echo(
        f"per query: {totals.per_query * 100:.3f} ct; "
        f"per retained statement at {model.retention_rate:.0%} retention: "
        f"{totals.per_retained * 100:.3f} ct"
    )
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
