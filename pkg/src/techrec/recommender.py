"""Semantic-aware matrix factorization over the interaction matrix.

Five model variants share one training scheme (pairwise margin hinge loss
with uniform negative sampling, per-triple SGD):

    MF             score = c_i . e_j
    MLP            score = scorer([c_i || e_j]), rectified hidden layers
    NCF            score = c_i . e_j + scorer([c_i || e_j])
    SemanticOnly   score = c_i . proj(s0_j)
    SemanticPlusMF score = c_i . (e_j + proj(s0_j))

where s0_j is the frozen semantic vector of technology j and proj is a
trainable chain of affine layers mapping it into the factor space. The
chain is purely affine by default; a flag inserts rectifiers between the
layers. Scores of observed pairs are pushed above scores of sampled
unobserved pairs by at least the margin.

Training is seeded and deterministic: the epoch shuffle and the negative
draws come from one generator, and the per-triple arithmetic runs in a
fixed order inside the selected backend kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import modelio
from .backend import load_kernels
from .classifier import xavier_uniform
from .errors import DataError, NumericalError
from .ingest import EmbeddingTable
from .interaction import InteractionMatrix


class ModelVariant(str, Enum):
    MF = "MF"
    MLP = "MLP"
    NCF = "NCF"
    SEMANTIC_ONLY = "SemanticOnly"
    SEMANTIC_PLUS_MF = "SemanticPlusMF"


_VARIANT_NAMES = {
    "mf": ModelVariant.MF,
    "mlp": ModelVariant.MLP,
    "ncf": ModelVariant.NCF,
    "semantic": ModelVariant.SEMANTIC_ONLY,
    "semantic-mf": ModelVariant.SEMANTIC_PLUS_MF,
}


def variant_from_name(name: str) -> ModelVariant:
    key = name.strip().lower()
    if key in _VARIANT_NAMES:
        return _VARIANT_NAMES[key]
    for v in ModelVariant:
        if key == v.value.lower():
            return v
    raise DataError(f"unknown model variant {name!r}; choose from "
                    f"{', '.join(sorted(_VARIANT_NAMES))}")


def uses_factors(variant: ModelVariant) -> bool:
    """True when e_j enters the technology representation."""
    return variant is not ModelVariant.SEMANTIC_ONLY


def uses_projection(variant: ModelVariant) -> bool:
    return variant in (ModelVariant.SEMANTIC_ONLY, ModelVariant.SEMANTIC_PLUS_MF)


def uses_scorer(variant: ModelVariant) -> bool:
    return variant in (ModelVariant.MLP, ModelVariant.NCF)


@dataclass
class TrainConfig:
    margin: float = 0.01
    learning_rate: float = 0.05
    epochs: int = 100
    negatives_per_positive: int = 1
    d: int = 64
    seed: int = 0
    mlp_layer_sizes: tuple[int, ...] | None = None    # scorer hidden widths
    proj_layer_sizes: tuple[int, ...] | None = None   # projection hidden widths
    proj_relu: bool = False

    def __post_init__(self):
        if self.margin <= 0:
            raise DataError("margin must be > 0")
        if self.d < 1:
            raise DataError("embedding size d must be >= 1")
        if self.learning_rate <= 0:
            raise DataError("learning rate must be > 0")
        if self.epochs < 0 or self.negatives_per_positive < 1:
            raise DataError("epochs must be >= 0 and negatives_per_positive >= 1")
        for name, sizes in (("mlp_layer_sizes", self.mlp_layer_sizes),
                            ("proj_layer_sizes", self.proj_layer_sizes)):
            if sizes is not None and any(s < 1 for s in sizes):
                raise DataError(f"{name} must all be >= 1, got {tuple(sizes)}")

    def scorer_dims(self) -> tuple[int, ...]:
        hidden = self.mlp_layer_sizes
        if hidden is None:
            hidden = (self.d, max(self.d // 2, 1))
        return (2 * self.d, *hidden, 1)

    def proj_dims(self, semantic_dim: int) -> tuple[int, ...]:
        hidden = self.proj_layer_sizes or ()
        return (semantic_dim, *hidden, self.d)


Layers = list[tuple[np.ndarray, np.ndarray]]


@dataclass
class RecommenderModel:
    variant: ModelVariant
    company_ids: list[str]
    tech_ids: list[str]
    C: np.ndarray                 # (n, d) company embeddings
    E: np.ndarray                 # (m, d) raw technology embeddings
    proj: Layers                  # affine chain semantic dim -> d
    scorer: Layers                # MLP scorer chain 2d -> 1
    S0: np.ndarray | None         # (m, semantic dim), rows follow tech_ids
    proj_relu: bool = False
    company_index: dict[str, int] = field(init=False)
    tech_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.company_index = {c: i for i, c in enumerate(self.company_ids)}
        self.tech_index = {t: j for j, t in enumerate(self.tech_ids)}

    @property
    def d(self) -> int:
        return self.C.shape[1]

    @property
    def n_companies(self) -> int:
        return len(self.company_ids)

    @property
    def n_techs(self) -> int:
        return len(self.tech_ids)


def pack_layers(layers: Layers) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a layer list into stacked arrays the kernels can index at runtime.

    Returns (weights (L, wmax, wmax), biases (L, wmax), dims (L+1,)); layer l
    occupies weights[l, :dims[l+1], :dims[l]].
    """
    if not layers:
        return np.zeros((0, 1, 1)), np.zeros((0, 1)), np.zeros(1, dtype=np.int64)
    dims = [layers[0][0].shape[1]] + [w.shape[0] for w, _ in layers]
    wmax = max(dims)
    weights = np.zeros((len(layers), wmax, wmax))
    biases = np.zeros((len(layers), wmax))
    for l, (w, b) in enumerate(layers):
        weights[l, :dims[l + 1], :dims[l]] = w
        biases[l, :dims[l + 1]] = b
    return weights, biases, np.asarray(dims, dtype=np.int64)


def unpack_layers(weights: np.ndarray, biases: np.ndarray, dims: np.ndarray) -> Layers:
    return [
        (weights[l, :dims[l + 1], :dims[l]].copy(), biases[l, :dims[l + 1]].copy())
        for l in range(len(dims) - 1)
    ]


def _init_layers(dims: tuple[int, ...], rng: np.random.Generator) -> Layers:
    return [
        (xavier_uniform(rng, dims[l + 1], dims[l]), np.zeros(dims[l + 1]))
        for l in range(len(dims) - 1)
    ]


def _semantic_matrix(matrix: InteractionMatrix, semantic: EmbeddingTable | None,
                     variant: ModelVariant) -> np.ndarray | None:
    if not uses_projection(variant):
        return None
    if semantic is None:
        raise DataError(f"variant {variant.value} needs semantic technology vectors")
    missing = [t for t in matrix.tech_ids if t not in semantic.vectors]
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"technologies lack semantic vectors: {shown}{more}")
    return np.stack([semantic.vectors[t] for t in matrix.tech_ids])


def init_model(matrix: InteractionMatrix, semantic: EmbeddingTable | None,
               variant: ModelVariant, config: TrainConfig,
               rng: np.random.Generator | None = None) -> RecommenderModel:
    """Seeded initialization; C and E are drawn first so every variant with
    the same seed starts from the same factor matrices."""
    if not matrix.entries:
        raise DataError("interaction matrix has no observed entries")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n, m, d = matrix.n_companies, matrix.n_techs, config.d
    scale = 0.1 / np.sqrt(d)
    C = rng.uniform(-scale, scale, size=(n, d))
    E = rng.uniform(-scale, scale, size=(m, d))
    S0 = _semantic_matrix(matrix, semantic, variant)
    proj: Layers = []
    scorer: Layers = []
    if uses_projection(variant):
        proj = _init_layers(config.proj_dims(S0.shape[1]), rng)
    if uses_scorer(variant):
        scorer = _init_layers(config.scorer_dims(), rng)
    return RecommenderModel(
        variant=variant, company_ids=list(matrix.company_ids),
        tech_ids=list(matrix.tech_ids), C=C, E=E, proj=proj, scorer=scorer,
        S0=S0, proj_relu=config.proj_relu,
    )


def sample_negative(matrix: InteractionMatrix, company: str, rng: np.random.Generator) -> str:
    """Uniform draw over the company's unobserved technology columns."""
    if company not in matrix.company_index:
        raise DataError(f"unknown company {company!r}")
    i = matrix.company_index[company]
    observed = {j for (ci, j) in matrix.entries if ci == i}
    if len(observed) >= matrix.n_techs:
        raise DataError(f"company {company!r} has observed every technology; "
                        "no negative sample exists")
    while True:
        j = int(rng.integers(0, matrix.n_techs))
        if j not in observed:
            return matrix.tech_ids[j]


def _draw_negative_array(rng: np.random.Generator, rep_i: np.ndarray,
                         observed: np.ndarray, m: int) -> np.ndarray:
    """Vectorized rejection sampling: one unobserved tech per triple slot."""
    neg = rng.integers(0, m, size=len(rep_i))
    bad = np.flatnonzero(observed[rep_i, neg])
    while len(bad):
        neg[bad] = rng.integers(0, m, size=len(bad))
        bad = bad[observed[rep_i[bad], neg[bad]]]
    return neg


def _check_finite(arrays: tuple[np.ndarray, ...], epoch: int) -> None:
    if not all(np.isfinite(a).all() for a in arrays):
        raise NumericalError(f"non-finite parameters after epoch {epoch}; "
                             "reduce the learning rate")


def train(matrix: InteractionMatrix, semantic: EmbeddingTable | None,
          variant: ModelVariant, config: TrainConfig,
          on_epoch: Callable[[int, float], None] | None = None) -> RecommenderModel:
    """Pairwise hinge training over all observed entries.

    Each epoch shuffles the observed (company, tech) pairs, draws
    `negatives_per_positive` unobserved techs per pair, and applies one SGD
    step per triple inside the selected backend kernel. `on_epoch` receives
    (epoch number, mean hinge loss).
    """
    rng = np.random.default_rng(config.seed)
    model = init_model(matrix, semantic, variant, config, rng)
    if config.epochs == 0:
        return model
    pairs = sorted(matrix.entries)
    pos_i = np.array([i for (i, _) in pairs], dtype=np.int64)
    pos_j = np.array([j for (_, j) in pairs], dtype=np.int64)
    n, m = matrix.n_companies, matrix.n_techs
    observed = np.zeros((n, m), dtype=bool)
    observed[pos_i, pos_j] = True
    full_rows = np.flatnonzero(observed.sum(axis=1) == m)
    if len(full_rows):
        names = ", ".join(matrix.company_ids[i] for i in full_rows[:10])
        raise DataError(f"companies with every technology observed cannot be "
                        f"trained against negatives: {names}")

    _, kernels = load_kernels()
    proj_w, proj_b, proj_dims = pack_layers(model.proj)
    scorer_w, scorer_b, scorer_dims = pack_layers(model.scorer)
    S0 = model.S0 if model.S0 is not None else np.zeros((1, 1))
    npp = config.negatives_per_positive
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(pairs))
        rep_i = np.repeat(pos_i[order], npp)
        rep_j = np.repeat(pos_j[order], npp)
        neg_j = _draw_negative_array(rng, rep_i, observed, m)
        if uses_scorer(model.variant):
            total = kernels.hinge_epoch_mlp(
                model.C, model.E, scorer_w, scorer_b, scorer_dims,
                model.variant is ModelVariant.NCF,
                rep_i, rep_j, neg_j, config.learning_rate, config.margin)
        else:
            total = kernels.hinge_epoch_dot(
                model.C, model.E, S0, proj_w, proj_b, proj_dims,
                uses_factors(model.variant), uses_projection(model.variant),
                model.proj_relu,
                rep_i, rep_j, neg_j, config.learning_rate, config.margin)
        _check_finite((model.C, model.E, proj_w, proj_b, scorer_w, scorer_b), epoch)
        if on_epoch is not None:
            on_epoch(epoch, total / len(rep_i))
    if model.proj:
        model.proj = unpack_layers(proj_w, proj_b, proj_dims)
    if model.scorer:
        model.scorer = unpack_layers(scorer_w, scorer_b, scorer_dims)
    return model


def _chain_apply(X: np.ndarray, layers: Layers, relu_hidden: bool) -> np.ndarray:
    H = X
    for l, (w, b) in enumerate(layers):
        H = H @ w.T + b
        if relu_hidden and l < len(layers) - 1:
            H = np.maximum(H, 0.0)
    return H


def projected_semantic_matrix(model: RecommenderModel) -> np.ndarray:
    if model.S0 is None or not model.proj:
        raise DataError(f"variant {model.variant.value} carries no semantic projection")
    return _chain_apply(model.S0, model.proj, model.proj_relu)


def semantic_projection(model: RecommenderModel, tech: str) -> np.ndarray:
    """The projection chain applied to the technology's semantic vector."""
    if tech not in model.tech_index:
        raise DataError(f"unknown technology {tech!r}")
    if model.S0 is None or not model.proj:
        raise DataError(f"variant {model.variant.value} has no semantic vector "
                        f"for {tech!r}")
    j = model.tech_index[tech]
    return _chain_apply(model.S0[j][None, :], model.proj, model.proj_relu)[0]


def tech_representations(model: RecommenderModel) -> np.ndarray:
    """Final technology vectors t_j for the dot-product variants (and the
    raw factors for the scorer variants, which consume e_j directly)."""
    if model.variant is ModelVariant.SEMANTIC_ONLY:
        return projected_semantic_matrix(model)
    if model.variant is ModelVariant.SEMANTIC_PLUS_MF:
        return model.E + projected_semantic_matrix(model)
    return model.E


def final_tech_embedding(model: RecommenderModel, tech: str) -> np.ndarray:
    if tech not in model.tech_index:
        raise DataError(f"unknown technology {tech!r}")
    return tech_representations(model)[model.tech_index[tech]].copy()


def score_company_row(model: RecommenderModel, i: int) -> np.ndarray:
    """Scores of every technology for company row i."""
    c = model.C[i]
    if uses_scorer(model.variant):
        X = np.hstack([np.broadcast_to(c, (model.n_techs, model.d)), model.E])
        s = _chain_apply(X, model.scorer, True)[:, 0]
        if model.variant is ModelVariant.NCF:
            s = s + model.E @ c
        return s
    return tech_representations(model) @ c


def score_tech_column(model: RecommenderModel, j: int) -> np.ndarray:
    """Scores of every company for technology column j."""
    if uses_scorer(model.variant):
        e = model.E[j]
        X = np.hstack([model.C, np.broadcast_to(e, (model.n_companies, model.d))])
        s = _chain_apply(X, model.scorer, True)[:, 0]
        if model.variant is ModelVariant.NCF:
            s = s + model.C @ e
        return s
    return model.C @ tech_representations(model)[j]


def score(model: RecommenderModel, company: str, tech: str) -> float:
    if company not in model.company_index:
        raise DataError(f"unknown company {company!r}")
    if tech not in model.tech_index:
        raise DataError(f"unknown technology {tech!r}")
    i = model.company_index[company]
    j = model.tech_index[tech]
    return float(score_company_row(model, i)[j])


def predict_matrix(model: RecommenderModel,
                   matrix: InteractionMatrix | None = None) -> np.ndarray:
    """Dense score matrix over all (company, technology) pairs.

    When an interaction matrix is supplied, its catalogs must match the
    model's (the scores then align with its rows and columns).
    """
    if matrix is not None and (matrix.company_ids != model.company_ids
                               or matrix.tech_ids != model.tech_ids):
        raise DataError("interaction matrix catalogs do not match the model")
    return np.vstack([score_company_row(model, i) for i in range(model.n_companies)])


def hinge_loss(model: RecommenderModel, company: str, pos_tech: str, neg_tech: str,
               margin: float, matrix: InteractionMatrix | None = None,
               printed_form: bool = False) -> float:
    """Pairwise margin loss max(0, margin - s_pos + s_neg).

    With a matrix supplied, the positive pair must be observed and the
    negative unobserved. `printed_form` evaluates the historical variant
    max(0, margin + M_ij - s_neg), which mixes the observed interaction
    value with the predicted negative score; it needs the matrix and is
    kept for comparison only.
    """
    if matrix is not None:
        ci = matrix.company_index.get(company)
        tj = matrix.tech_index.get(pos_tech)
        tk = matrix.tech_index.get(neg_tech)
        if ci is None or tj is None:
            raise DataError(f"pair ({company!r}, {pos_tech!r}) not in the matrix")
        if (ci, tj) not in matrix.entries:
            raise DataError(f"pair ({company!r}, {pos_tech!r}) is not observed")
        if tk is not None and (ci, tk) in matrix.entries:
            raise DataError(f"pair ({company!r}, {neg_tech!r}) is observed; "
                            "negatives must be unobserved")
    if printed_form:
        if matrix is None:
            raise DataError("the printed loss form needs the interaction matrix")
        m_ij = matrix.entries[(matrix.company_index[company],
                               matrix.tech_index[pos_tech])]
        return max(0.0, margin + m_ij - score(model, company, neg_tech))
    return max(0.0, margin - score(model, company, pos_tech) + score(model, company, neg_tech))


def squared_loss(model: RecommenderModel, matrix: InteractionMatrix) -> float:
    """Sum of squared residuals over the observed entries only."""
    if not matrix.entries:
        raise DataError("interaction matrix has no observed entries")
    if matrix.company_ids != model.company_ids or matrix.tech_ids != model.tech_ids:
        raise DataError("interaction matrix catalogs do not match the model")
    scores = predict_matrix(model)
    return float(sum((v - scores[i, j]) ** 2 for (i, j), v in matrix.entries.items()))


def save_model(model: RecommenderModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        modelio.write_header(f, {
            "variant": model.variant.value, "d": model.d,
            "n": model.n_companies, "m": model.n_techs, "version": 1,
            "proj_layers": len(model.proj), "scorer_layers": len(model.scorer),
            "proj_relu": int(model.proj_relu),
            "semantic_dim": model.S0.shape[1] if model.S0 is not None else 0,
        })
        modelio.write_ids(f, "companies", model.company_ids)
        modelio.write_ids(f, "techs", model.tech_ids)
        modelio.write_tensor(f, "C", model.C)
        modelio.write_tensor(f, "E", model.E)
        for l, (w, b) in enumerate(model.proj):
            modelio.write_tensor(f, f"proj.W{l}", w)
            modelio.write_tensor(f, f"proj.b{l}", b)
        for l, (w, b) in enumerate(model.scorer):
            modelio.write_tensor(f, f"scorer.W{l}", w)
            modelio.write_tensor(f, f"scorer.b{l}", b)
        if model.S0 is not None:
            modelio.write_tensor(f, "S0", model.S0)


def _read_chain(tensors: dict, prefix: str, count: int, in_dim: int, out_dim: int,
                path: str) -> Layers:
    layers: Layers = []
    width = in_dim
    for l in range(count):
        w = tensors.get(f"{prefix}.W{l}")
        b = tensors.get(f"{prefix}.b{l}")
        if w is None or b is None:
            raise DataError(f"model file {path}: missing layer tensors {prefix}.*{l}")
        if w.ndim != 2 or w.shape[1] != width or b.shape != (w.shape[0],):
            raise DataError(f"model file {path}: layer {prefix}.{l} shapes inconsistent "
                            f"(got W {w.shape}, b {b.shape}, expected input {width})")
        layers.append((w, b))
        width = w.shape[0]
    if count and width != out_dim:
        raise DataError(f"model file {path}: {prefix} chain ends at width {width}, "
                        f"expected {out_dim}")
    return layers


def load_model(path: str) -> RecommenderModel:
    header, tensors, idlists = modelio.read_model_file(path)
    modelio.require_version(header, "1", path)
    try:
        variant = ModelVariant(modelio.require(header, "variant", path))
    except ValueError:
        raise DataError(f"model file {path}: unknown variant "
                        f"{header.get('variant')!r}") from None
    try:
        d = int(modelio.require(header, "d", path))
        n = int(modelio.require(header, "n", path))
        m = int(modelio.require(header, "m", path))
        proj_layers = int(header.get("proj_layers", "0"))
        scorer_layers = int(header.get("scorer_layers", "0"))
        proj_relu = bool(int(header.get("proj_relu", "0")))
        semantic_dim = int(header.get("semantic_dim", "0"))
    except ValueError:
        raise DataError(f"model file {path}: malformed header field") from None
    for name, expected in (("companies", n), ("techs", m)):
        if name not in idlists:
            raise DataError(f"model file {path}: missing ids section '{name}'")
        if len(idlists[name]) != expected:
            raise DataError(f"model file {path}: ids '{name}' count "
                            f"{len(idlists[name])} != header {expected}")
    C = modelio.require_tensor(tensors, "C", (n, d), path)
    E = modelio.require_tensor(tensors, "E", (m, d), path)
    proj = _read_chain(tensors, "proj", proj_layers, semantic_dim, d, path)
    scorer = _read_chain(tensors, "scorer", scorer_layers, 2 * d, 1, path)
    S0 = None
    if uses_projection(variant):
        S0 = modelio.require_tensor(tensors, "S0", (m, semantic_dim), path)
        if not proj:
            raise DataError(f"model file {path}: variant {variant.value} requires "
                            "projection layers")
    if uses_scorer(variant) and not scorer:
        raise DataError(f"model file {path}: variant {variant.value} requires "
                        "scorer layers")
    return RecommenderModel(
        variant=variant, company_ids=idlists["companies"], tech_ids=idlists["techs"],
        C=C, E=E, proj=proj, scorer=scorer, S0=S0, proj_relu=proj_relu,
    )
