"""Ranked retrieval over trained models and the tf-idf baselines.

Three query tasks are answered from a trained model: technologies for a
company (score row), similar companies for a company (cosine over learned
company embeddings), and companies for a technology (score column). Two
model-free baselines rank directly from the interaction matrix: a
company's observed technologies by their tf-idf values, and companies by
the weighted Jaccard similarity of their tf-idf rows.

All rankings are deterministic: scores sort descending and ties break by
ascending id. The query itself never appears in its own result list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .interaction import InteractionMatrix, company_tfidf_vector
from .recommender import RecommenderModel, predict_matrix, score_company_row, score_tech_column


@dataclass
class RankedList:
    query: str
    items: list[tuple[str, float]]   # (id, score), best first
    k: int

    def ids(self) -> list[str]:
        return [i for i, _ in self.items]


def _rank(query: str, scored: list[tuple[str, float]], k: int) -> RankedList:
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    ordered = sorted(scored, key=lambda p: (-p[1], p[0]))
    return RankedList(query=query, items=ordered[:k], k=k)


def _company_row_index(model: RecommenderModel, company: str) -> int:
    if company not in model.company_index:
        raise DataError(f"unknown company {company!r}")
    return model.company_index[company]


def retrieve_com_tech(model: RecommenderModel, company: str, k: int,
                      include_observed: bool = True,
                      matrix: InteractionMatrix | None = None) -> RankedList:
    """Technologies ranked by predicted score for the company.

    include_observed=True ranks every technology (ranking); False keeps
    only columns unobserved for the company (discovery), which requires
    the interaction matrix the model was trained on.
    """
    i = _company_row_index(model, company)
    scores = score_company_row(model, i)
    candidates = range(model.n_techs)
    if not include_observed:
        if matrix is None:
            raise DataError("excluding observed technologies requires the "
                            "interaction matrix")
        if matrix.company_ids != model.company_ids or matrix.tech_ids != model.tech_ids:
            raise DataError("interaction matrix catalogs do not match the model")
        observed = {j for (ci, j) in matrix.entries if ci == i}
        candidates = (j for j in candidates if j not in observed)
    scored = [(model.tech_ids[j], float(scores[j])) for j in candidates]
    return _rank(company, scored, k)


def retrieve_com_com(model: RecommenderModel, company: str, k: int,
                     use_score_rows: bool = False) -> RankedList:
    """Companies ranked by cosine similarity to the query company.

    The similarity space is the learned company embeddings; with
    use_score_rows it is the predicted score rows instead. A zero-norm
    query vector has no direction to compare against and is an error;
    zero-norm candidates get similarity 0.
    """
    i = _company_row_index(model, company)
    vectors = predict_matrix(model) if use_score_rows else model.C
    q = vectors[i]
    q_norm = float(np.linalg.norm(q))
    if q_norm == 0.0:
        raise NumericalError(f"company {company!r} has a zero-norm vector; "
                             "cosine similarity is undefined")
    norms = np.linalg.norm(vectors, axis=1)
    sims = vectors @ q
    scored = []
    for other in range(model.n_companies):
        if other == i:
            continue
        denom = norms[other] * q_norm
        value = float(sims[other] / denom) if denom > 0 else 0.0
        scored.append((model.company_ids[other], value))
    return _rank(company, scored, k)


def retrieve_tech_com(model: RecommenderModel, tech: str, k: int) -> RankedList:
    """Companies ranked by predicted score for the technology."""
    if tech not in model.tech_index:
        raise DataError(f"unknown technology {tech!r}")
    j = model.tech_index[tech]
    scores = score_tech_column(model, j)
    scored = [(model.company_ids[i], float(scores[i])) for i in range(model.n_companies)]
    return _rank(tech, scored, k)


def tfidf_retrieve_com_tech(matrix: InteractionMatrix, company: str, k: int) -> RankedList:
    """The company's observed technologies ranked by their matrix entries.

    Unobserved technologies have no tf-idf value and are unreachable here,
    so the list can be shorter than k.
    """
    row = company_tfidf_vector(matrix, company)
    return _rank(company, [(t, float(v)) for t, v in row.items()], k)


def weighted_jaccard(a: dict[str, float], b: dict[str, float]) -> float:
    """Sum of elementwise minima over sum of maxima; two empty vectors give 0."""
    # sorted so the float accumulation order never depends on hash seeds
    keys = sorted(set(a) | set(b))
    if not keys:
        return 0.0
    num = sum(min(a.get(t, 0.0), b.get(t, 0.0)) for t in keys)
    den = sum(max(a.get(t, 0.0), b.get(t, 0.0)) for t in keys)
    return num / den if den > 0 else 0.0


def tfidf_retrieve_com_com(matrix: InteractionMatrix, company: str, k: int) -> RankedList:
    """Companies ranked by weighted Jaccard similarity of tf-idf rows."""
    query_row = company_tfidf_vector(matrix, company)
    scored = []
    for other in matrix.company_ids:
        if other == company:
            continue
        scored.append((other, weighted_jaccard(query_row, company_tfidf_vector(matrix, other))))
    return _rank(company, scored, k)
