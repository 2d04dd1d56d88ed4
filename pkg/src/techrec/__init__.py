"""Technology landscape monitoring: who works on what, and what comes next.

The pipeline turns raw mention records (company, entity, count, source)
into a weighted company x technology interaction matrix, filters the
entity catalog with a small embedding classifier, factorizes the matrix
with margin-ranked embedding models (optionally grounded in semantic
vectors), and answers three retrieval questions: which technologies fit
a company, which companies resemble each other, and which companies work
on a technology.

Modules:

- ingest: file formats and cross-validation of raw inputs
- interaction: per-source tf-idf and the combined interaction matrix
- classifier: technology / non-technology head over entity embeddings
- recommender: embedding models trained with a pairwise hinge
- retrieval: ranked queries over a trained model or the raw matrix
- evaluation: category-overlap precision at k
- backend: numba / numpy kernel selection (TECHREC_BACKEND)
- cli: the ``techrec`` command
"""

__version__ = "0.1.0"

from .errors import DataError, NumericalError, TechrecError, UsageError

__all__ = ["DataError", "NumericalError", "TechrecError", "UsageError", "__version__"]
