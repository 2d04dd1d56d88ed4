"""Loaders for the four input file families.

Mention corpora arrive as JSON lines (one ``{"company", "entity", "count"}``
object per line, one file per data source), entity embeddings as a TSV with
a ``dim=<D>`` header, technology labels and category assignments as two-column
CSVs. Everything is parsed into immutable in-memory catalogs with dense
integer ids assigned by sorting the raw string ids, so identical inputs
always produce identical indexes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError


class Source(str, Enum):
    WEBSITE = "website"
    PATENT = "patent"
    JOBS = "jobs"
    TWITTER = "twitter"


SOURCE_NAMES = tuple(s.value for s in Source)


@dataclass(frozen=True)
class MentionRecord:
    company: str
    entity: str
    count: int
    source: Source


@dataclass
class SourceCorpus:
    source: Source
    records: list[MentionRecord]
    company_index: dict[str, int] = field(default_factory=dict)
    entity_index: dict[str, int] = field(default_factory=dict)

    @property
    def n_companies(self) -> int:
        return len(self.company_index)

    @property
    def n_entities(self) -> int:
        return len(self.entity_index)

    def total_count(self) -> int:
        return sum(r.count for r in self.records)


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, entity: str) -> bool:
        return entity in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class TechLabelSet:
    labels: dict[str, bool]

    def is_tech(self, entity: str) -> bool:
        return self.labels.get(entity, False)


@dataclass
class CategoryMap:
    categories: dict[str, set[str]]

    def get(self, key: str) -> set[str]:
        return self.categories.get(key, set())


@dataclass
class ValidationReport:
    counts: dict[Source, dict[str, int]]
    missing_embeddings: list[str]
    missing_labels: list[str]


def _check_id(value, what: str, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise DataError(f"{where}: {what} must be a non-empty string")
    if "\t" in value or "\n" in value or "\r" in value:
        raise DataError(f"{where}: {what} {value!r} contains tab/newline, which the "
                        "tab-delimited persistence formats cannot carry")
    return value


def parse_mentions(path: str, source: Source) -> SourceCorpus:
    """Parse one JSONL mention file into an indexed corpus.

    Duplicate (company, entity) lines have their counts summed. Dense ids
    are assigned in lexicographic order of the raw string ids.
    """
    source = Source(source)
    merged: dict[tuple[str, str], int] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read mentions file {path}: {e}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{path}:{lineno}"
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{where}: malformed JSON ({e.msg})") from None
            if not isinstance(obj, dict) or set(obj) != {"company", "entity", "count"}:
                raise DataError(f"{where}: expected exactly the keys company, entity, count")
            company = _check_id(obj["company"], "company", where)
            entity = _check_id(obj["entity"], "entity", where)
            count = obj["count"]
            if isinstance(count, bool) or not isinstance(count, int):
                raise DataError(f"{where}: count must be an integer")
            if count < 1:
                raise DataError(f"{where}: count must be >= 1, got {count}")
            merged[(company, entity)] = merged.get((company, entity), 0) + count

    records = [MentionRecord(c, e, n, source)
               for (c, e), n in sorted(merged.items())]
    companies = sorted({r.company for r in records})
    entities = sorted({r.entity for r in records})
    return SourceCorpus(
        source=source,
        records=records,
        company_index={c: i for i, c in enumerate(companies)},
        entity_index={e: i for i, e in enumerate(entities)},
    )


def write_mentions(corpus: SourceCorpus, path: str) -> None:
    """Serialize a corpus back to JSONL (records in sorted order)."""
    with open(path, "w", encoding="utf-8") as f:
        for r in corpus.records:
            f.write(json.dumps({"company": r.company, "entity": r.entity, "count": r.count},
                               ensure_ascii=False) + "\n")


def load_embeddings(path: str) -> EmbeddingTable:
    """Load the entity embeddings TSV.

    First line declares ``dim=<D>``; each following line is
    ``<entity-id>\\t<v1>,<v2>,...,<vD>``.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read embeddings file {path}: {e}") from None
    vectors: dict[str, np.ndarray] = {}
    with fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise DataError(f"{path}:1: expected 'dim=<D>' header, got {header!r}")
        try:
            dim = int(header[4:])
        except ValueError:
            raise DataError(f"{path}:1: bad dimension in header {header!r}") from None
        if dim < 1:
            raise DataError(f"{path}:1: dimension must be >= 1")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected '<entity>\\t<values>'")
            entity = _check_id(parts[0], "entity", f"{path}:{lineno}")
            if entity in vectors:
                raise DataError(f"{path}:{lineno}: duplicate entity {entity!r}")
            raw = parts[1].split(",")
            if len(raw) != dim:
                raise DataError(f"{path}:{lineno}: entity {entity!r} has {len(raw)} values, "
                                f"expected {dim}")
            try:
                vec = np.array([float(v) for v in raw], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}:{lineno}: entity {entity!r} has a non-numeric value") from None
            if not np.isfinite(vec).all():
                raise DataError(f"{path}:{lineno}: entity {entity!r} has a non-finite value")
            vectors[entity] = vec
    return EmbeddingTable(dim=dim, vectors=vectors)


def write_embeddings(table: EmbeddingTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"dim={table.dim}\n")
        for entity in sorted(table.vectors):
            vals = ",".join(repr(float(v)) for v in table.vectors[entity])
            f.write(f"{entity}\t{vals}\n")


def _csv_rows(path: str, expected_header: tuple[str, str]):
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    with fh:
        reader = csv.reader(fh)
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if rowno == 1 and tuple(row) == expected_header:
                continue  # optional header row
            if len(row) != 2:
                raise DataError(f"{path}:{rowno}: expected 2 columns, got {len(row)}")
            yield rowno, row[0], row[1]


def load_labels(path: str) -> TechLabelSet:
    """Load the technology label CSV (``entity,label`` with label 0 or 1)."""
    labels: dict[str, bool] = {}
    for rowno, entity, label in _csv_rows(path, ("entity", "label")):
        entity = _check_id(entity, "entity", f"{path}:{rowno}")
        if label not in ("0", "1"):
            raise DataError(f"{path}:{rowno}: label must be 0 or 1, got {label!r}")
        if entity in labels:
            raise DataError(f"{path}:{rowno}: entity {entity!r} labeled more than once")
        labels[entity] = label == "1"
    return TechLabelSet(labels=labels)


def load_categories(path: str) -> CategoryMap:
    """Load the category CSV (``id,category``), grouping rows into sets."""
    categories: dict[str, set[str]] = {}
    for rowno, key, category in _csv_rows(path, ("id", "category")):
        key = _check_id(key, "id", f"{path}:{rowno}")
        if not category:
            raise DataError(f"{path}:{rowno}: empty category for {key!r}")
        categories.setdefault(key, set()).add(category)
    return CategoryMap(categories=categories)


def validate_corpus(corpora: dict[Source, SourceCorpus],
                    embeddings: EmbeddingTable | None = None,
                    labels: TechLabelSet | None = None) -> ValidationReport:
    """Cross-check corpora against the embedding and label catalogs.

    Reporting only: lists entities that are mentioned somewhere but have no
    embedding / no label, plus per-source size counts.
    """
    counts = {}
    mentioned: set[str] = set()
    for source, corpus in corpora.items():
        counts[source] = {
            "companies": corpus.n_companies,
            "entities": corpus.n_entities,
            "records": len(corpus.records),
            "total_count": corpus.total_count(),
        }
        mentioned.update(corpus.entity_index)
    missing_emb = sorted(e for e in mentioned if e not in embeddings.vectors) if embeddings else []
    missing_lab = sorted(e for e in mentioned if e not in labels.labels) if labels else []
    return ValidationReport(counts=counts,
                            missing_embeddings=missing_emb,
                            missing_labels=missing_lab)
