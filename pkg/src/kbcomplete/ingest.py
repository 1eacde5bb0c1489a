"""Gold dataset loading and missing-subject enumeration.

Gold data arrives as UTF-8 TSV with columns
``subject-id, subject-label, relation-id, object-ids, object-labels``;
multiple objects are separated by " # ". Candidate subjects that lack a
relation are enumerated from a SPARQL endpoint, paginated by subject
identifier so runs can resume deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DatasetError
from .model import EntityRef, Fact, make_fact, normalize_label
from .sparql import SparqlClient, local_id

OBJECT_SEP = " # "

MISSING_SUBJECTS_QUERY = """\
SELECT DISTINCT ?s ?sLabel WHERE {{
  ?s wdt:P31 wd:{subject_type} .
  FILTER NOT EXISTS {{ ?s wdt:{property_id} ?o . }}
  OPTIONAL {{ ?s rdfs:label ?sLabel . FILTER(LANG(?sLabel) = "en") }}
}}
ORDER BY STR(?s)
{page}"""

STATEMENT_COUNT_QUERY = """\
SELECT (COUNT(*) AS ?n) WHERE {{ ?s wdt:{property_id} ?o . }}"""


@dataclass
class GoldDataset:
    """Facts grouped by relation id, at most one Fact per (subject, relation)."""

    facts: dict[str, list[Fact]] = field(default_factory=dict)
    provenance: str = ""

    def relations(self) -> list[str]:
        return list(self.facts)

    def by_subject(self, relation_id: str) -> dict[str, Fact]:
        return {fact.subject.id: fact for fact in self.facts.get(relation_id, [])}

    def fact_count(self) -> int:
        return sum(len(rows) for rows in self.facts.values())

    def label_index(self) -> dict[str, str]:
        """Normalized object label -> entity id, across all relations.

        Labels mapping to more than one id are dropped: with exact-label
        lookup only, an ambiguous label cannot be resolved safely.
        """
        index: dict[str, str] = {}
        ambiguous = set()
        for rows in self.facts.values():
            for fact in rows:
                for obj in fact.objects:
                    if not obj.label:
                        continue
                    key = normalize_label(obj.label)
                    if key in ambiguous:
                        continue
                    if key in index and index[key] != obj.id:
                        del index[key]
                        ambiguous.add(key)
                    elif key not in index:
                        index[key] = obj.id
        return index


@dataclass(frozen=True)
class GapReport:
    """Relation-level completeness counts from the endpoint."""

    relation_id: str
    current_statements: int
    missing_subjects: int

    def __post_init__(self):
        if self.current_statements < 0 or self.missing_subjects < 0:
            raise ValueError("counts must be >= 0")


def _parse_objects(ids_field: str, labels_field: str, line_no: int) -> list[EntityRef]:
    ids = ids_field.split(OBJECT_SEP)
    labels = labels_field.split(OBJECT_SEP)
    if len(ids) != len(labels):
        raise DatasetError(
            f"line {line_no}: object-ids has {len(ids)} entries but "
            f"object-labels has {len(labels)} (columns 4 and 5)",
            line=line_no,
            column=4,
        )
    refs = []
    for position, (obj_id, obj_label) in enumerate(zip(ids, labels)):
        if not obj_id.strip():
            raise DatasetError(
                f"line {line_no}: empty object id at position {position} (column 4)",
                line=line_no,
                column=4,
            )
        refs.append(EntityRef(id=obj_id.strip(), label=obj_label.strip()))
    return refs


def load_gold_dataset(path) -> GoldDataset:
    """Parse a gold TSV file; rows sharing (subject, relation) merge objects.

    A pure function of the file bytes: byte-identical files give equal
    datasets. An empty file is an empty dataset, not an error.
    """
    merged: dict[str, dict[str, tuple[EntityRef, list[EntityRef]]]] = {}
    order: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            row = line.rstrip("\n")
            if not row:
                continue
            cells = row.split("\t")
            if len(cells) != 5:
                raise DatasetError(
                    f"line {line_no}: expected 5 tab-separated columns, got {len(cells)}",
                    line=line_no,
                    column=len(cells),
                )
            subject_id, subject_label, relation_id, object_ids, object_labels = cells
            if not subject_id.strip():
                raise DatasetError(
                    f"line {line_no}: empty subject id (column 1)", line=line_no, column=1
                )
            if not relation_id.strip():
                raise DatasetError(
                    f"line {line_no}: empty relation id (column 3)", line=line_no, column=3
                )
            subject = EntityRef(id=subject_id.strip(), label=subject_label.strip())
            objects = _parse_objects(object_ids, object_labels, line_no)
            bucket = merged.setdefault(relation_id.strip(), {})
            if subject.id in bucket:
                bucket[subject.id][1].extend(objects)
            else:
                bucket[subject.id] = (subject, list(objects))
                order.setdefault(relation_id.strip(), []).append(subject.id)

    dataset = GoldDataset(provenance=str(path))
    for relation_id, subject_ids in order.items():
        rows = []
        for subject_id in subject_ids:
            subject, objects = merged[relation_id][subject_id]
            rows.append(make_fact(subject, relation_id, objects))
        dataset.facts[relation_id] = rows
    return dataset


def find_missing_subjects(spec, client: SparqlClient, limit=None, offset=0) -> list[EntityRef]:
    """Subjects of ``spec.subject_type`` with no statement for ``spec.id``.

    Ordered by subject identifier; deduplicated; subjects without a label
    at the endpoint fall back to their raw identifier so prompts always
    have a surface form.
    """
    if not spec.subject_type:
        raise ValueError(f"relation {spec.name!r} has no subject_type configured")
    page = ""
    if limit is not None:
        page = f"LIMIT {int(limit)} OFFSET {int(offset)}"
    elif offset:
        page = f"OFFSET {int(offset)}"
    query = MISSING_SUBJECTS_QUERY.format(
        subject_type=spec.subject_type, property_id=spec.id, page=page
    )
    rows = client.select(query)
    out = []
    seen = set()
    for row in rows:
        subject_id = local_id(row["s"])
        if subject_id in seen:
            continue
        seen.add(subject_id)
        out.append(EntityRef(id=subject_id, label=row.get("sLabel") or subject_id))
    return out


def gap_report(spec, client: SparqlClient) -> GapReport:
    """Count current statements and subjects still missing the relation."""
    query = STATEMENT_COUNT_QUERY.format(property_id=spec.id)
    rows = client.select(query)
    current = int(rows[0]["n"]) if rows else 0
    missing = find_missing_subjects(spec, client)
    return GapReport(
        relation_id=spec.id,
        current_statements=current,
        missing_subjects=len(missing),
    )
