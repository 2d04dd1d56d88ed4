import numpy as np
import pytest

from techrec.ingest import EmbeddingTable, MentionRecord, Source, SourceCorpus
from techrec import interaction


def make_corpus(source: Source, triples) -> SourceCorpus:
    """Build an indexed corpus from (company, entity, count) triples."""
    records = [MentionRecord(c, e, n, source) for c, e, n in sorted(triples)]
    companies = sorted({c for c, _, _ in triples})
    entities = sorted({e for _, e, _ in triples})
    return SourceCorpus(
        source=source,
        records=records,
        company_index={c: i for i, c in enumerate(companies)},
        entity_index={e: i for i, e in enumerate(entities)},
    )


def make_matrix(triples_by_source, weights=None) -> interaction.InteractionMatrix:
    """Combined tf-idf matrix from {source: [(company, entity, count)]}."""
    mats = [interaction.tfidf_source(make_corpus(s, t))
            for s, t in triples_by_source.items()]
    return interaction.combine_sources(mats, weights or interaction.default_weights())


def make_embeddings(ids, dim, seed=0, centers=None) -> EmbeddingTable:
    """Gaussian vectors per id; optional {id: center} shifts the mean."""
    rng = np.random.default_rng(seed)
    vectors = {}
    for i in sorted(ids):
        mu = centers.get(i, 0.0) if centers else 0.0
        vectors[i] = rng.normal(mu, 1.0, size=dim)
    return EmbeddingTable(dim=dim, vectors=vectors)


TWO_CLUSTER_TRIPLES = {
    Source.WEBSITE: [
        ("a0", "t0", 3), ("a0", "t1", 1), ("a0", "t2", 2),
        ("a1", "t0", 1), ("a1", "t2", 4), ("a1", "t3", 1),
        ("a2", "t1", 2), ("a2", "t2", 1), ("a2", "t3", 3),
        ("b0", "u0", 2), ("b0", "u1", 5), ("b1", "u0", 1),
        ("b1", "u2", 2), ("b2", "u1", 1), ("b2", "u2", 3),
    ],
    Source.PATENT: [
        ("a0", "t0", 1), ("a1", "t3", 2), ("a2", "t1", 1),
        ("b0", "u2", 1), ("b2", "u0", 2),
    ],
}


@pytest.fixture
def cluster_matrix() -> interaction.InteractionMatrix:
    """6 companies x 7 technologies, two disjoint mention clusters."""
    return make_matrix(TWO_CLUSTER_TRIPLES)
