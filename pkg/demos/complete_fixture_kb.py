"""End-to-end walkthrough on a desk-scale fixture knowledge base.

Builds a tiny KB with 12 film subjects missing their original-language
statement, calibrates a confidence threshold on 8 gold facts, prompts a
deterministic mock LM over the gap, exports the high-confidence
statements, and runs the human-verification arithmetic.

Run from the repository root:

    python3 demos/complete_fixture_kb.py
"""

import json
import tempfile
from pathlib import Path

from kbcomplete import (
    CostModel,
    EntityRef,
    FewShotExample,
    MockProvider,
    RelationSpec,
    SparqlClient,
    build_prompt,
    estimate_cost,
    load_gold_dataset,
    run_completion,
)
from kbcomplete.mockkb import MockKnowledgeBase
from kbcomplete.review import ReviewStore, accept_relation

work = Path(tempfile.mkdtemp(prefix="kbcomplete-demo-"))
print(f"working directory: {work}\n")

# -- 1. a relation spec with instruction-free few-shot examples -------------

spec = RelationSpec(
    id="P364",
    name="writtenIn",
    prompt_label="original language",
    subject_type="Q11424",
    few_shot_count=4,
    target_precision=0.90,
    few_shot_examples=(
        FewShotExample("As It Is in Heaven", ("Swedish",)),
        FewShotExample("Amélie", ("French",)),
        FewShotExample("Rashomon", ("Japanese",)),
        FewShotExample("The Lives of Others", ("German",)),
    ),
)

sample_prompt = build_prompt(spec, EntityRef("Q0", "City of God"))
print("prompt sent for one subject:")
print("-" * 40)
print(sample_prompt.text)
print("-" * 40)
print(f"estimated tokens: {sample_prompt.token_estimate}\n")

# -- 2. gold data for calibration -------------------------------------------

languages = ["Swedish", "French", "Japanese", "German",
             "Portuguese", "Korean", "Italian", "Hindi"]
gold_path = work / "gold.tsv"
gold_path.write_text("".join(
    f"G{i}\tgold film {i}\tP364\tL{i}\t{lang}\n" for i, lang in enumerate(languages)
))
gold = load_gold_dataset(gold_path)
print(f"gold dataset: {gold.fact_count()} facts for calibration")

# -- 3. a fixture KB with a gap, served like a SPARQL endpoint ---------------

kb = MockKnowledgeBase()
for i in range(12):
    kb.add_typed_subject(f"M{i:02d}", "Q11424", label=f"missing film {i}")
for i in range(3):
    kb.add_typed_subject(f"H{i}", "Q11424", label=f"complete film {i}")
    kb.add(f"H{i}", "P364", f"L{i}")
client = SparqlClient("http://demo/sparql", fetch=kb.fetch)

# -- 4. a deterministic mock LM ----------------------------------------------
# Calibration: 6 confident correct answers, 2 wrong stragglers; the wrong
# tail pins the threshold inside the 75-95% precision range.

provider = MockProvider()
for i in range(6):
    prompt = build_prompt(spec, EntityRef(f"G{i}", f"gold film {i}"))
    provider.add(prompt.text, f" {languages[i]}", -0.05 * (i + 1))
for i in (6, 7):
    prompt = build_prompt(spec, EntityRef(f"G{i}", f"gold film {i}"))
    provider.add(prompt.text, " Wrongese", -1.5 - 0.1 * i)

# Missing subjects: 7 confident answers, 3 abstentions, 2 low-confidence.
for i in range(12):
    prompt = build_prompt(spec, EntityRef(f"M{i:02d}", f"missing film {i}"))
    if i < 7:
        provider.add(prompt.text, f" {languages[i]}", -0.01 * (i + 1))
    elif i < 10:
        provider.add(prompt.text, " Don't know", -0.3)
    else:
        provider.add(prompt.text, f" Guess {i}", -2.8)

# -- 5. the completion pipeline ----------------------------------------------

run = run_completion(spec, gold, client, provider, out_dir=work / "run")
estimate = run.estimate

print(f"calibrated threshold: {run.threshold:.4f}")
print(f"missing subjects: {estimate.missing_subjects}; queried: {estimate.queried}")
print(f"high-confidence fraction: {estimate.high_confidence_fraction:.2f}")
print(f"addable statements: {estimate.addable}\n")

print("quickstatements export:")
print(run.export_path.read_text() or "(empty)")
print("needs-linking sidecar:")
print(run.sidecar_path.read_text() or "(empty)\n")

# -- 6. what would this cost at public-KB scale? -----------------------------

costs = estimate_cost(48_000_000, CostModel())
print(f"at 48M queries: total ${costs.total:,.0f}, "
      f"{costs.per_query * 100:.2f} ct/query, "
      f"{costs.per_retained * 100:.2f} ct/retained statement\n")

# -- 7. human verification loop ----------------------------------------------

store = ReviewStore(work / "review.sqlite", audit_log=work / "audit.jsonl")
batch = store.create_batch(run.retained, spec, n=min(5, len(run.retained)), seed=7)
print(f"review batch {batch.id}: {len(batch.items)} items")
for item, value in zip(batch.items, ["correct", "correct", "likely", "correct", "false"]):
    store.record_rating(item.prediction_id, "demo-annotator", value)
report = store.manual_accuracy(batch.id)
print(f"manual accuracy: {report.accuracy:.2f} over {report.rated} rated items")
decision = "accepted" if accept_relation(report, spec) else "rejected"
print(f"acceptance at target {spec.target_precision:.0%}: {decision}")
print(f"\nmanifest: {json.loads(run.manifest_path.read_text())['counts']}")
