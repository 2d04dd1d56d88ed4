"""Category-overlap precision for the retrieval tasks.

A query and each retrieved id carry category sets (Crunchbase-style
labels). The precision of a top-k list is the mean over its k slots of
the overlap |categories(query) & categories(result)|, so its ceiling is
the size of the query's own category set rather than 1. Results without
categories contribute 0, and so do empty slots when fewer than k results
exist.

An alternative overlap that counts the union of the two category sets is
kept behind a flag for comparison with older write-ups; it rewards
heavily-tagged results regardless of any actual match and is excluded
from all quality gates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import DataError
from .ingest import CategoryMap

DEFAULT_KS = (5, 10, 15, 20)

# ranker(query id, k) -> ordered result ids, best first
Ranker = Callable[[str, int], Sequence[str]]


def overlap(query_categories: set[str], result_categories: set[str],
            union_form: bool = False) -> int:
    if union_form:
        return len(query_categories | result_categories)
    return len(query_categories & result_categories)


def p_at_k(query_categories: set[str], results: Sequence[str],
           categories: CategoryMap, k: int, union_form: bool = False) -> float:
    """Mean category overlap across the top-k result slots."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    total = 0
    for rid in results[:k]:
        total += overlap(query_categories, categories.get(rid), union_form)
    return total / k


def p_at_k_set(queries: Iterable[str], ranker: Ranker, categories: CategoryMap,
               k: int, union_form: bool = False) -> float:
    """Arithmetic mean of p_at_k over the queries."""
    values = [
        p_at_k(categories.get(q), ranker(q, k), categories, k, union_form)
        for q in queries
    ]
    if not values:
        raise DataError("no queries to evaluate")
    return sum(values) / len(values)


@dataclass
class PrecisionReport:
    task: str                               # "com-com" or "tech-com"
    model: str
    per_k: dict[int, float]                 # k -> mean over queries
    per_query: dict[int, dict[str, float]]  # k -> query -> value
    skipped: int                            # queries without categories


def evaluate_task(task: str, ranker: Ranker, queries: Sequence[str],
                  categories: CategoryMap, ks: Sequence[int] = DEFAULT_KS,
                  model_tag: str = "model", union_form: bool = False) -> PrecisionReport:
    """Per-k precision means for one ranker over a query set.

    Queries with no categories cannot be scored and are skipped (counted
    in the report); an empty query set after skipping is an error.
    """
    if task not in ("com-com", "tech-com"):
        raise DataError(f"unknown evaluation task {task!r}")
    scorable = [q for q in queries if categories.get(q)]
    skipped = len(queries) - len(scorable)
    if not scorable:
        raise DataError(f"no queries with categories for task {task}")
    per_k: dict[int, float] = {}
    per_query: dict[int, dict[str, float]] = {}
    for k in ks:
        values = {
            q: p_at_k(categories.get(q), ranker(q, k), categories, k, union_form)
            for q in scorable
        }
        per_query[k] = values
        per_k[k] = sum(values.values()) / len(values)
    return PrecisionReport(task=task, model=model_tag, per_k=per_k,
                           per_query=per_query, skipped=skipped)


def reports_to_csv(reports: Sequence[PrecisionReport]) -> str:
    """CSV table `task,model,k,mean_p_at_k,n_queries`, one row per (report, k)."""
    lines = ["task,model,k,mean_p_at_k,n_queries"]
    for rep in reports:
        for k in sorted(rep.per_k):
            n = len(rep.per_query[k])
            lines.append(f"{rep.task},{rep.model},{k},{rep.per_k[k]!r},{n}")
    return "\n".join(lines) + "\n"
