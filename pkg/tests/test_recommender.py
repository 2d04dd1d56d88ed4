import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from techrec import recommender as rec
from techrec.errors import DataError, NumericalError
from techrec.ingest import EmbeddingTable, Source
from techrec.interaction import InteractionMatrix
from techrec.recommender import ModelVariant, TrainConfig

from conftest import TWO_CLUSTER_TRIPLES, make_matrix


def semantic_for(matrix, dim=4, seed=7):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim=dim, vectors={
        t: rng.normal(size=dim) for t in matrix.tech_ids})


@pytest.fixture
def matrix():
    return make_matrix(TWO_CLUSTER_TRIPLES)


# --------------------------------------------------------------- definitions

def test_variant_names():
    assert rec.variant_from_name("mf") is ModelVariant.MF
    assert rec.variant_from_name("semantic-mf") is ModelVariant.SEMANTIC_PLUS_MF
    assert rec.variant_from_name("SemanticOnly") is ModelVariant.SEMANTIC_ONLY
    assert rec.variant_from_name("NCF") is ModelVariant.NCF
    with pytest.raises(DataError, match="unknown model variant"):
        rec.variant_from_name("gbdt")


def test_variant_feature_flags():
    assert not rec.uses_factors(ModelVariant.SEMANTIC_ONLY)
    assert all(rec.uses_factors(v) for v in ModelVariant
               if v is not ModelVariant.SEMANTIC_ONLY)
    assert rec.uses_projection(ModelVariant.SEMANTIC_PLUS_MF)
    assert not rec.uses_projection(ModelVariant.MF)
    assert rec.uses_scorer(ModelVariant.MLP) and rec.uses_scorer(ModelVariant.NCF)
    assert not rec.uses_scorer(ModelVariant.MF)


def test_config_validation():
    with pytest.raises(DataError):
        TrainConfig(margin=-0.1)
    with pytest.raises(DataError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(DataError):
        TrainConfig(epochs=-1)
    with pytest.raises(DataError):
        TrainConfig(negatives_per_positive=0)
    with pytest.raises(DataError):
        TrainConfig(d=0)
    with pytest.raises(DataError):
        TrainConfig(mlp_layer_sizes=(8, 0))


def test_config_default_layer_dims():
    config = TrainConfig(d=64)
    assert config.scorer_dims() == (128, 64, 32, 1)
    assert config.proj_dims(190) == (190, 64)
    small = TrainConfig(d=1)
    assert small.scorer_dims() == (2, 1, 1, 1)
    deep = TrainConfig(d=8, mlp_layer_sizes=(5, 4), proj_layer_sizes=(6,))
    assert deep.scorer_dims() == (16, 5, 4, 1)
    assert deep.proj_dims(3) == (3, 6, 8)


# ------------------------------------------------------------------ sampling

def test_init_model_shapes_and_bounds(matrix):
    config = TrainConfig(d=8, seed=0)
    model = rec.init_model(matrix, semantic_for(matrix), ModelVariant.SEMANTIC_PLUS_MF,
                           config, np.random.default_rng(0))
    assert model.C.shape == (matrix.n_companies, 8)
    assert model.E.shape == (matrix.n_techs, 8)
    limit = 0.1 / np.sqrt(8)
    assert np.all(np.abs(model.C) <= limit)
    assert np.all(np.abs(model.E) <= limit)
    assert model.S0.shape == (matrix.n_techs, 4)
    assert [w.shape for w, _ in model.proj] == [(8, 4)]


def test_same_seed_shares_factor_init_across_variants(matrix):
    config = TrainConfig(d=4, seed=9, epochs=0)
    sem = semantic_for(matrix)
    mf = rec.train(matrix, None, ModelVariant.MF, config)
    sp = rec.train(matrix, sem, ModelVariant.SEMANTIC_PLUS_MF, config)
    ncf = rec.train(matrix, None, ModelVariant.NCF, config)
    assert np.array_equal(mf.C, sp.C)
    assert np.array_equal(mf.E, sp.E)
    assert np.array_equal(mf.C, ncf.C)


def test_semantic_variant_requires_semantic_vectors(matrix):
    with pytest.raises(DataError, match="semantic"):
        rec.init_model(matrix, None, ModelVariant.SEMANTIC_ONLY,
                       TrainConfig(d=4), np.random.default_rng(0))
    partial = EmbeddingTable(dim=4, vectors={matrix.tech_ids[0]: np.zeros(4)})
    with pytest.raises(DataError):
        rec.init_model(matrix, partial, ModelVariant.SEMANTIC_PLUS_MF,
                       TrainConfig(d=4), np.random.default_rng(0))


def test_sample_negative_is_never_observed(matrix):
    rng = np.random.default_rng(0)
    observed = {t for t in matrix.tech_ids
                if (matrix.company_index["a0"], matrix.tech_index[t]) in matrix.entries}
    for _ in range(200):
        tech = rec.sample_negative(matrix, "a0", rng)
        assert tech not in observed
    with pytest.raises(DataError):
        rec.sample_negative(matrix, "nobody", rng)


def test_sample_negative_all_observed_rejected():
    m = InteractionMatrix(company_ids=["solo"], tech_ids=["x", "y"],
                          entries={(0, 0): 1.0, (0, 1): 2.0})
    with pytest.raises(DataError, match="observed every technology"):
        rec.sample_negative(m, "solo", np.random.default_rng(0))


def test_sample_negative_uniform(matrix):
    # a0 observes t0, t1, t2; the candidates are t3 and the three u-techs
    rng = np.random.default_rng(5)
    draws = 30000
    counts = {}
    for _ in range(draws):
        t = rec.sample_negative(matrix, "a0", rng)
        counts[t] = counts.get(t, 0) + 1
    candidates = sorted(counts)
    assert candidates == ["t3", "u0", "u1", "u2"]
    p = 1 / 4
    sigma = np.sqrt(draws * p * (1 - p))
    for t in candidates:
        assert abs(counts[t] - draws * p) < 3 * sigma


# ------------------------------------------------------------------ training

def test_zero_epochs_returns_initialization(matrix):
    config = TrainConfig(d=4, seed=1, epochs=0)
    trained = rec.train(matrix, None, ModelVariant.MF, config)
    fresh = rec.init_model(matrix, None, ModelVariant.MF, config,
                           np.random.default_rng(1))
    assert np.array_equal(trained.C, fresh.C)
    assert np.array_equal(trained.E, fresh.E)


def test_training_is_bit_deterministic(matrix):
    config = TrainConfig(d=4, seed=6, epochs=8)
    sem = semantic_for(matrix)
    a = rec.train(matrix, sem, ModelVariant.SEMANTIC_PLUS_MF, config)
    b = rec.train(matrix, sem, ModelVariant.SEMANTIC_PLUS_MF, config)
    assert np.array_equal(a.C, b.C)
    assert np.array_equal(a.E, b.E)
    for (wa, ba), (wb, bb) in zip(a.proj, b.proj):
        assert np.array_equal(wa, wb) and np.array_equal(ba, bb)


def test_training_reduces_pairwise_loss(matrix):
    history = []
    config = TrainConfig(d=8, seed=0, epochs=40, margin=0.2)
    rec.train(matrix, None, ModelVariant.MF, config,
              on_epoch=lambda e, l: history.append(l))
    assert len(history) == 40
    assert history[-1] < history[0] * 0.5


def test_train_rejects_company_observing_everything():
    m = InteractionMatrix(company_ids=["a", "b"], tech_ids=["x", "y"],
                          entries={(0, 0): 1.0, (0, 1): 1.0, (1, 0): 2.0})
    with pytest.raises(DataError, match="every technology"):
        rec.train(m, None, ModelVariant.MF, TrainConfig(d=2, epochs=1))


def test_train_detects_divergence(matrix):
    config = TrainConfig(d=4, seed=0, epochs=60, learning_rate=1e6, margin=5.0)
    with pytest.raises(NumericalError, match="epoch"):
        rec.train(matrix, None, ModelVariant.MF, config)


# ------------------------------------------------------------------- scoring

def hand_model(variant, proj_relu=False):
    C = np.array([[1.0, 2.0], [0.5, -1.0]])
    E = np.array([[0.5, 0.25], [-1.0, 1.0], [2.0, 0.0]])
    S0 = np.array([[1.0], [2.0], [-1.0]])
    proj = [(np.array([[2.0], [-1.0]]), np.array([0.5, 0.5]))]
    scorer = [(np.ones((1, 4)), np.array([-1.0]))]
    return rec.RecommenderModel(
        variant=variant, company_ids=["p", "q"], tech_ids=["x", "y", "z"],
        C=C, E=E, proj=proj, scorer=scorer, S0=S0, proj_relu=proj_relu)


def test_score_mf_is_dot_product():
    model = hand_model(ModelVariant.MF)
    assert rec.score(model, "p", "x") == pytest.approx(1 * 0.5 + 2 * 0.25)
    assert rec.score(model, "q", "y") == pytest.approx(0.5 * -1 + -1 * 1)


def test_score_semantic_only_projects_s0():
    model = hand_model(ModelVariant.SEMANTIC_ONLY)
    # proj(s0=1) = (2*1+0.5, -1*1+0.5) = (2.5, -0.5)
    assert rec.score(model, "p", "x") == pytest.approx(1 * 2.5 + 2 * -0.5)


def test_score_semantic_plus_mf_adds_representations():
    model = hand_model(ModelVariant.SEMANTIC_PLUS_MF)
    # t_x = E_x + proj(1) = (0.5+2.5, 0.25-0.5) = (3.0, -0.25)
    assert rec.score(model, "p", "x") == pytest.approx(1 * 3.0 + 2 * -0.25)


def test_score_semantic_proj_relu_rectifies_hiddens_only():
    deep = rec.RecommenderModel(
        variant=ModelVariant.SEMANTIC_ONLY, company_ids=["p"], tech_ids=["x"],
        C=np.array([[1.0, 1.0]]), E=np.zeros((1, 2)),
        proj=[(np.array([[1.0], [-1.0]]), np.zeros(2)),
              (np.array([[1.0, 1.0], [1.0, 1.0]]), np.zeros(2))],
        scorer=[], S0=np.array([[2.0]]), proj_relu=True)
    # hidden = relu(2, -2) = (2, 0); output = (2, 2) affine, not rectified
    assert rec.score(deep, "p", "x") == pytest.approx(4.0)
    deep.proj_relu = False
    # hidden = (2, -2); output = (0, 0)
    assert rec.score(deep, "p", "x") == pytest.approx(0.0)


def test_score_mlp_uses_scorer_only():
    model = hand_model(ModelVariant.MLP)
    # scorer([c || e]) = sum(1,2,0.5,0.25) - 1
    assert rec.score(model, "p", "x") == pytest.approx(2.75)


def test_score_ncf_adds_dot_and_scorer():
    model = hand_model(ModelVariant.NCF)
    assert rec.score(model, "p", "x") == pytest.approx(2.75 + 1.0)


def test_score_rows_and_columns_match_pointwise(matrix):
    model = rec.train(matrix, semantic_for(matrix), ModelVariant.SEMANTIC_PLUS_MF,
                      TrainConfig(d=4, seed=2, epochs=4))
    P = rec.predict_matrix(model)
    for i, company in enumerate(model.company_ids):
        np.testing.assert_allclose(rec.score_company_row(model, i), P[i])
        for j, tech in enumerate(model.tech_ids):
            assert P[i, j] == pytest.approx(rec.score(model, company, tech))
    for j in range(model.n_techs):
        np.testing.assert_allclose(rec.score_tech_column(model, j), P[:, j])


def test_ncf_with_zero_scorer_reduces_to_mf(matrix):
    config = TrainConfig(d=4, seed=3, epochs=0)
    ncf = rec.train(matrix, None, ModelVariant.NCF, config)
    mf = rec.train(matrix, None, ModelVariant.MF, config)
    for w, b in ncf.scorer:
        w[:] = 0.0
        b[:] = 0.0
    np.testing.assert_allclose(rec.predict_matrix(ncf), rec.predict_matrix(mf),
                               atol=1e-15)


def test_semantic_plus_mf_with_zero_semantics_reduces_to_mf(matrix):
    config = TrainConfig(d=4, seed=3, epochs=0)
    zero_sem = EmbeddingTable(dim=4, vectors={
        t: np.zeros(4) for t in matrix.tech_ids})
    sp = rec.train(matrix, zero_sem, ModelVariant.SEMANTIC_PLUS_MF, config)
    mf = rec.train(matrix, None, ModelVariant.MF, config)
    # projection biases start at 0, so proj(0) = 0 and the scores coincide
    np.testing.assert_allclose(rec.predict_matrix(sp), rec.predict_matrix(mf),
                               atol=1e-15)


# -------------------------------------------------------------------- losses

def test_hinge_loss_hand_example():
    model = hand_model(ModelVariant.MF)
    # s(p,x) = 1.0, s(p,z) = 2.0
    assert rec.hinge_loss(model, "p", "x", "z", margin=0.5) == pytest.approx(1.5)
    assert rec.hinge_loss(model, "p", "z", "x", margin=0.5) == pytest.approx(0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_hinge_loss_monotone_in_margin(m1, m2):
    model = hand_model(ModelVariant.MF)
    lo, hi = sorted([m1, m2])
    assert (rec.hinge_loss(model, "p", "x", "z", margin=lo)
            <= rec.hinge_loss(model, "p", "x", "z", margin=hi))


def test_hinge_loss_printed_form(matrix):
    model = rec.train(matrix, None, ModelVariant.MF,
                      TrainConfig(d=4, seed=0, epochs=2))
    pos = next(t for t in matrix.tech_ids
               if (matrix.company_index["a0"], matrix.tech_index[t]) in matrix.entries)
    i = matrix.company_index["a0"]
    m_ij = matrix.entries[(i, matrix.tech_index[pos])]
    value = rec.hinge_loss(model, "a0", pos, "u0", margin=0.3, matrix=matrix,
                           printed_form=True)
    expected = max(0.0, 0.3 + m_ij - rec.score(model, "a0", "u0"))
    assert value == pytest.approx(expected)
    with pytest.raises(DataError):
        rec.hinge_loss(model, "a0", pos, "u0", margin=0.3, printed_form=True)


def test_hinge_loss_matrix_validates_observedness(matrix):
    model = rec.train(matrix, None, ModelVariant.MF,
                      TrainConfig(d=4, seed=0, epochs=0))
    with pytest.raises(DataError):  # positive must be observed
        rec.hinge_loss(model, "a0", "u0", "u1", margin=0.1, matrix=matrix)
    with pytest.raises(DataError):  # negative must be unobserved
        rec.hinge_loss(model, "a0", "t0", "t1", margin=0.1, matrix=matrix)


def test_squared_loss_brute_force(matrix):
    model = rec.train(matrix, None, ModelVariant.MF,
                      TrainConfig(d=4, seed=4, epochs=3))
    expected = sum(
        (value - rec.score(model, matrix.company_ids[i], matrix.tech_ids[j])) ** 2
        for (i, j), value in matrix.entries.items())
    assert rec.squared_loss(model, matrix) == pytest.approx(expected, rel=1e-12)


def test_predict_matrix_catalog_check(matrix):
    model = rec.train(matrix, None, ModelVariant.MF,
                      TrainConfig(d=4, seed=0, epochs=0))
    other = InteractionMatrix(company_ids=["zz"], tech_ids=["t0"],
                              entries={(0, 0): 1.0})
    with pytest.raises(DataError):
        rec.predict_matrix(model, other)


# -------------------------------------------------------------- persistence

@pytest.mark.parametrize("variant,needs_sem", [
    (ModelVariant.MF, False),
    (ModelVariant.MLP, False),
    (ModelVariant.NCF, False),
    (ModelVariant.SEMANTIC_ONLY, True),
    (ModelVariant.SEMANTIC_PLUS_MF, True),
])
def test_model_round_trip(tmp_path, matrix, variant, needs_sem):
    sem = semantic_for(matrix) if needs_sem else None
    config = TrainConfig(d=3, seed=8, epochs=3, proj_layer_sizes=(5,),
                         mlp_layer_sizes=(4,), proj_relu=True)
    model = rec.train(matrix, sem, variant, config)
    path = tmp_path / "model.tsv"
    rec.save_model(model, str(path))
    again = rec.load_model(str(path))
    assert again.variant is variant
    assert again.company_ids == model.company_ids
    assert again.tech_ids == model.tech_ids
    assert np.array_equal(again.C, model.C)
    assert np.array_equal(again.E, model.E)
    assert again.proj_relu == model.proj_relu
    np.testing.assert_array_equal(rec.predict_matrix(again),
                                  rec.predict_matrix(model))
    rec.save_model(again, str(tmp_path / "model2.tsv"))
    assert (tmp_path / "model.tsv").read_bytes() == (tmp_path / "model2.tsv").read_bytes()


def test_load_model_rejects_corruption(tmp_path, matrix):
    model = rec.train(matrix, None, ModelVariant.MF,
                      TrainConfig(d=3, seed=0, epochs=1))
    path = tmp_path / "model.tsv"
    rec.save_model(model, str(path))
    text = path.read_text()

    truncated = tmp_path / "trunc.tsv"
    truncated.write_text(text[: int(len(text) * 0.7)])
    with pytest.raises(DataError):
        rec.load_model(str(truncated))

    wrong_version = tmp_path / "ver.tsv"
    wrong_version.write_text(text.replace("version=1", "version=9", 1))
    with pytest.raises(DataError, match="version"):
        rec.load_model(str(wrong_version))

    poisoned = tmp_path / "nan.tsv"
    cell = repr(float(model.C[0, 0]))
    assert cell in text
    poisoned.write_text(text.replace(cell, "nan", 1))
    with pytest.raises(DataError):
        rec.load_model(str(poisoned))
