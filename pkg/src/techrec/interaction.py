"""Company x technology interaction matrix.

Each data source contributes a sparse importance matrix: the importance of
entity t for company c is the tf-idf value of t with the company's corpus
treated as one document,

    f_k(c, t) = count(c, t) * ln(N_k / df_k(t))

with N_k the number of companies in source k and df_k(t) the number of them
mentioning t. Sources are then combined as a weighted sum over the sources
where the pair is observed. An absent entry means "unobserved", which is a
different thing from an observed value of zero: a term mentioned by every
company of a source has idf ln(1) = 0, and such observations are kept with
the tiny positive value EPSILON_OBSERVED so they stay distinguishable from
unobserved pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DataError
from .ingest import Source, SourceCorpus

# Stand-in value for observed entries whose raw tf-idf is exactly 0 (df = N).
EPSILON_OBSERVED = 1e-9


@dataclass
class SourceWeights:
    w: dict[Source, float]

    def __post_init__(self):
        for s, v in self.w.items():
            if v < 0:
                raise DataError(f"weight for source {Source(s).value} is negative")
        if not any(v > 0 for v in self.w.values()):
            raise DataError("all source weights are zero")

    def get(self, source: Source) -> float:
        return self.w.get(source, 0.0)


def default_weights() -> SourceWeights:
    return SourceWeights({s: 1.0 for s in Source})


@dataclass
class SourceMatrix:
    """Per-source tf-idf entries, keyed by raw (company, entity) string ids."""
    source: Source
    entries: dict[tuple[str, str], float]


@dataclass
class InteractionMatrix:
    company_ids: list[str]   # sorted
    tech_ids: list[str]      # sorted
    entries: dict[tuple[int, int], float]
    company_index: dict[str, int] = field(init=False)
    tech_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.company_index = {c: i for i, c in enumerate(self.company_ids)}
        self.tech_index = {t: j for j, t in enumerate(self.tech_ids)}

    @property
    def n_companies(self) -> int:
        return len(self.company_ids)

    @property
    def n_techs(self) -> int:
        return len(self.tech_ids)

    def row(self, i: int) -> dict[int, float]:
        return {j: v for (ci, j), v in self.entries.items() if ci == i}

    def observed_by_company(self) -> list[set[int]]:
        obs: list[set[int]] = [set() for _ in range(self.n_companies)]
        for (i, j) in self.entries:
            obs[i].add(j)
        return obs

    def compact(self) -> "InteractionMatrix":
        """Drop companies and technologies that have no observed entry.

        The persisted format carries ids only through entry lines, so empty
        rows/columns cannot round-trip; compacting before save keeps the
        header counts consistent with the body.
        """
        live_c = sorted({i for (i, _) in self.entries})
        live_t = sorted({j for (_, j) in self.entries})
        cmap = {old: new for new, old in enumerate(live_c)}
        tmap = {old: new for new, old in enumerate(live_t)}
        return InteractionMatrix(
            company_ids=[self.company_ids[i] for i in live_c],
            tech_ids=[self.tech_ids[j] for j in live_t],
            entries={(cmap[i], tmap[j]): v for (i, j), v in self.entries.items()},
        )


def tfidf_source(corpus: SourceCorpus) -> SourceMatrix:
    """Per-source tf-idf with each company treated as one document.

    tf is the raw mention count, idf = ln(N / df) with the natural log and
    no smoothing. An entry mentioned by every company comes out exactly 0;
    it stays 0 here (key presence carries observedness) and is floored to
    EPSILON_OBSERVED only after combination, so the combined values remain
    plain weighted sums of the per-source ones.
    """
    if not corpus.records:
        raise DataError(f"source {corpus.source.value} has no mention records")
    n = corpus.n_companies
    df: dict[str, int] = {}
    for r in corpus.records:
        df[r.entity] = df.get(r.entity, 0) + 1
    entries: dict[tuple[str, str], float] = {}
    for r in corpus.records:
        entries[(r.company, r.entity)] = r.count * math.log(n / df[r.entity])
    return SourceMatrix(source=corpus.source, entries=entries)


def combine_sources(matrices: list[SourceMatrix], weights: SourceWeights) -> InteractionMatrix:
    """Weighted sum of per-source matrices over the union id space.

    A pair observed in any supplied source is observed in the result, even
    under a zero weight; its value is the weighted sum over the sources that
    carry it, with a combined value of 0 stored as EPSILON_OBSERVED to keep
    observedness. To drop a source entirely, leave its matrix out.
    """
    if not any(weights.get(m.source) > 0 for m in matrices):
        raise DataError("no source has positive weight")
    combined: dict[tuple[str, str], float] = {}
    for m in matrices:
        w = weights.get(m.source)
        for key, v in m.entries.items():
            combined[key] = combined.get(key, 0.0) + w * v
    combined = {k: (v if v > 0 else EPSILON_OBSERVED) for k, v in combined.items()}
    companies = sorted({c for (c, _) in combined})
    techs = sorted({t for (_, t) in combined})
    cidx = {c: i for i, c in enumerate(companies)}
    tidx = {t: j for j, t in enumerate(techs)}
    return InteractionMatrix(
        company_ids=companies,
        tech_ids=techs,
        entries={(cidx[c], tidx[t]): v for (c, t), v in combined.items()},
    )


def filter_technologies(matrix: InteractionMatrix, predictions: dict[str, bool]) -> InteractionMatrix:
    """Keep only columns whose entity is classified as a technology.

    Entities missing from `predictions` count as non-technology. Column ids
    are reindexed but keep their sorted order, so the result is deterministic.
    """
    kept = [t for t in matrix.tech_ids if predictions.get(t, False)]
    tmap = {matrix.tech_index[t]: new for new, t in enumerate(kept)}
    return InteractionMatrix(
        company_ids=list(matrix.company_ids),
        tech_ids=kept,
        entries={(i, tmap[j]): v for (i, j), v in matrix.entries.items() if j in tmap},
    )


def company_tfidf_vector(matrix: InteractionMatrix, company: str) -> dict[str, float]:
    """The company's row of M, keyed by raw technology id."""
    if company not in matrix.company_index:
        raise DataError(f"unknown company {company!r}")
    i = matrix.company_index[company]
    return {matrix.tech_ids[j]: v for (ci, j), v in matrix.entries.items() if ci == i}


def save_matrix(matrix: InteractionMatrix, path: str) -> None:
    """Write the text form: a counts header, then one tab-separated
    (company, tech, value) line per entry, in row-major sorted order."""
    empties = (len({i for (i, _) in matrix.entries}) < matrix.n_companies
               or len({j for (_, j) in matrix.entries}) < matrix.n_techs)
    if empties:
        raise DataError("matrix has companies or technologies without entries; "
                        "compact() before saving")
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"companies={matrix.n_companies} techs={matrix.n_techs}\n")
        for (i, j) in sorted(matrix.entries):
            f.write(f"{matrix.company_ids[i]}\t{matrix.tech_ids[j]}\t"
                    f"{repr(matrix.entries[(i, j)])}\n")


def load_matrix(path: str) -> InteractionMatrix:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read matrix file {path}: {e}") from None
    with fh:
        header = fh.readline().strip()
        parts = header.split()
        if (len(parts) != 2 or not parts[0].startswith("companies=")
                or not parts[1].startswith("techs=")):
            raise DataError(f"{path}:1: expected 'companies=<n> techs=<m>' header")
        try:
            n = int(parts[0][len("companies="):])
            m = int(parts[1][len("techs="):])
        except ValueError:
            raise DataError(f"{path}:1: bad counts in header") from None
        raw: dict[tuple[str, str], float] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 tab-separated columns")
            try:
                v = float(cols[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad value {cols[2]!r}") from None
            if not (v > 0) or not math.isfinite(v):
                raise DataError(f"{path}:{lineno}: entry value must be a finite positive real")
            if (cols[0], cols[1]) in raw:
                raise DataError(f"{path}:{lineno}: duplicate entry for "
                                f"({cols[0]!r}, {cols[1]!r})")
            raw[(cols[0], cols[1])] = v
    companies = sorted({c for (c, _) in raw})
    techs = sorted({t for (_, t) in raw})
    if len(companies) != n or len(techs) != m:
        raise DataError(f"{path}: header declares companies={n} techs={m} but the body "
                        f"contains {len(companies)} companies and {len(techs)} techs")
    cidx = {c: i for i, c in enumerate(companies)}
    tidx = {t: j for j, t in enumerate(techs)}
    return InteractionMatrix(
        company_ids=companies,
        tech_ids=techs,
        entries={(cidx[c], tidx[t]): v for (c, t), v in raw.items()},
    )
