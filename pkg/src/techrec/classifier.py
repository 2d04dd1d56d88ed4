"""Technology classifier head over precomputed entity embeddings.

Architecture: two blocks of (linear -> batch normalization -> logistic
sigmoid) with a dropout layer between them, then a single linear output
unit squashed to a probability. Trained with minibatch SGD on binary
cross entropy; gradients are computed analytically, including the path
through the batch statistics of both batch-norm layers.

Everything is seeded: initialization, epoch shuffling, and dropout masks
all draw from one generator, so a fixed seed reproduces parameters
bit-for-bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import modelio
from .errors import DataError
from .ingest import EmbeddingTable, TechLabelSet

PROB_CLAMP = 1e-7


@dataclass
class ClassifierConfig:
    h1: int = 256
    h2: int = 64
    dropout_rate: float = 0.2
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.h1 < 1 or self.h2 < 1:
            raise DataError("hidden sizes must be positive")
        if not (0 <= self.dropout_rate < 1):
            raise DataError("dropout rate must be in [0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise DataError("learning rate, batch size must be positive; epochs >= 0")
        if self.bn_epsilon <= 0 or not (0 < self.bn_momentum <= 1):
            raise DataError("bn_epsilon must be > 0 and bn_momentum in (0, 1]")


@dataclass
class Block:
    W: np.ndarray             # (out, in)
    b: np.ndarray             # (out,)
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class ClassifierHead:
    block1: Block
    block2: Block
    out_w: np.ndarray         # (h2,)
    out_b: float
    dropout_rate: float
    bn_epsilon: float
    bn_momentum: float
    mode: str = "eval"        # "train" or "eval"

    @property
    def dim(self) -> int:
        return self.block1.W.shape[1]


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def xavier_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _init_block(rng: np.random.Generator, fan_out: int, fan_in: int) -> Block:
    return Block(
        W=xavier_uniform(rng, fan_out, fan_in),
        b=np.zeros(fan_out),
        gamma=np.ones(fan_out),
        beta=np.zeros(fan_out),
        running_mean=np.zeros(fan_out),
        running_var=np.ones(fan_out),
    )


def init_head(dim: int, config: ClassifierConfig, rng: np.random.Generator) -> ClassifierHead:
    block1 = _init_block(rng, config.h1, dim)
    block2 = _init_block(rng, config.h2, config.h1)
    out_w = xavier_uniform(rng, 1, config.h2)[0]
    return ClassifierHead(
        block1=block1, block2=block2, out_w=out_w, out_b=0.0,
        dropout_rate=config.dropout_rate,
        bn_epsilon=config.bn_epsilon, bn_momentum=config.bn_momentum,
    )


def _block_forward_cached(block: Block, batch: np.ndarray, mode: str, eps: float) -> tuple[np.ndarray, dict]:
    z = batch @ block.W.T + block.b
    if mode == "train":
        if batch.shape[0] < 2:
            raise DataError("batch-norm train mode needs batch size >= 2 "
                            "(batch variance is undefined for a single sample)")
        mu = z.mean(axis=0)
        var = z.var(axis=0)          # biased: normalization uses 1/B
        ivar = 1.0 / np.sqrt(var + eps)
        xhat = (z - mu) * ivar
    elif mode == "eval":
        mu, var = block.running_mean, block.running_var
        ivar = 1.0 / np.sqrt(var + eps)
        xhat = (z - mu) * ivar
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = sigmoid(block.gamma * xhat + block.beta)
    cache = {"x": batch, "z": z, "mu": mu, "var": var, "ivar": ivar, "xhat": xhat, "out": out}
    return out, cache


def block_forward(block: Block, batch: np.ndarray, mode: str,
                  eps: float = 1e-5, momentum: float = 0.1,
                  update_running: bool = True) -> np.ndarray:
    """Affine map, batch normalization, then elementwise sigmoid.

    Train mode normalizes with batch statistics and (unless disabled)
    folds them into the running estimates; eval mode normalizes with the
    running statistics.
    """
    out, cache = _block_forward_cached(block, batch, mode, eps)
    if mode == "train" and update_running:
        _update_running(block, cache, momentum)
    return out


def _update_running(block: Block, cache: dict, momentum: float) -> None:
    B = cache["x"].shape[0]
    unbiased = cache["var"] * B / (B - 1)
    block.running_mean = (1 - momentum) * block.running_mean + momentum * cache["mu"]
    block.running_var = (1 - momentum) * block.running_var + momentum * unbiased


def _block_backward(block: Block, cache: dict, d_out: np.ndarray, mode: str) -> tuple[np.ndarray, dict]:
    """Backward through sigmoid, batch norm, and the affine map.

    Train mode differentiates through the batch statistics themselves;
    eval mode treats the running statistics as constants.
    """
    out, xhat, ivar = cache["out"], cache["xhat"], cache["ivar"]
    dy = d_out * out * (1.0 - out)
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * block.gamma
    if mode == "train":
        B = dy.shape[0]
        dz = (ivar / B) * (B * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    else:
        dz = dxhat * ivar
    dW = dz.T @ cache["x"]
    db = dz.sum(axis=0)
    dx = dz @ block.W
    grads = {"W": dW, "b": db, "gamma": dgamma, "beta": dbeta}
    return dx, grads


def dropout(x: np.ndarray, rate: float, mode: str,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: zero units with probability `rate` in train mode and
    scale survivors by 1/(1-rate); identity in eval mode.

    Returns (output, mask); the mask is None when nothing was dropped.
    """
    if mode != "train" or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate), mask


def _head_forward_cached(head: ClassifierHead, batch: np.ndarray, mode: str,
                         rng: np.random.Generator | None) -> tuple[np.ndarray, dict]:
    a1, c1 = _block_forward_cached(head.block1, batch, mode, head.bn_epsilon)
    a1d, mask = dropout(a1, head.dropout_rate, mode, rng)
    a2, c2 = _block_forward_cached(head.block2, a1d, mode, head.bn_epsilon)
    logit = a2 @ head.out_w + head.out_b
    probs = sigmoid(logit)
    return probs, {"c1": c1, "mask": mask, "c2": c2, "a2": a2, "probs": probs}


def head_forward(head: ClassifierHead, batch: np.ndarray, mode: str | None = None,
                 rng: np.random.Generator | None = None,
                 update_running: bool = True) -> np.ndarray:
    """Full forward pass to probabilities: block1 -> dropout -> block2 -> linear -> sigmoid."""
    mode = mode or head.mode
    probs, cache = _head_forward_cached(head, batch, mode, rng)
    if mode == "train" and update_running:
        _update_running(head.block1, cache["c1"], head.bn_momentum)
        _update_running(head.block2, cache["c2"], head.bn_momentum)
    return probs


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross entropy, probabilities clamped away from 0 and 1."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValueError(f"probs shape {probs.shape} != labels shape {labels.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


def head_loss_and_grads(head: ClassifierHead, batch: np.ndarray, labels: np.ndarray,
                        mode: str = "train",
                        rng: np.random.Generator | None = None,
                        dropout_mask: np.ndarray | None = None) -> tuple[float, dict]:
    """One forward/backward pass; never mutates the head.

    A fixed `dropout_mask` may be supplied to replay a specific mask. The
    returned grads dict maps parameter names ("block1.W", ..., "out.w",
    "out.b") to arrays shaped like the parameters.
    """
    loss, grads, _ = _loss_grads_caches(head, batch, labels, mode, rng, dropout_mask)
    return loss, grads


def _loss_grads_caches(head: ClassifierHead, batch: np.ndarray, labels: np.ndarray,
                       mode: str, rng: np.random.Generator | None,
                       dropout_mask: np.ndarray | None) -> tuple[float, dict, tuple[dict, dict]]:
    a1, c1 = _block_forward_cached(head.block1, batch, mode, head.bn_epsilon)
    if dropout_mask is not None:
        a1d = a1 * dropout_mask / (1.0 - head.dropout_rate)
        mask = dropout_mask
    else:
        a1d, mask = dropout(a1, head.dropout_rate, mode, rng)
    a2, c2 = _block_forward_cached(head.block2, a1d, mode, head.bn_epsilon)
    logit = a2 @ head.out_w + head.out_b
    probs = sigmoid(logit)
    loss = bce_loss(probs, labels)

    # d(BCE mean)/d(logit) for sigmoid output
    B = batch.shape[0]
    dlogit = (np.clip(probs, PROB_CLAMP, 1 - PROB_CLAMP) - labels) / B
    d_out_w = a2.T @ dlogit
    d_out_b = float(dlogit.sum())
    da2 = np.outer(dlogit, head.out_w)
    da1d, g2 = _block_backward(head.block2, c2, da2, mode)
    if mask is not None:
        da1 = da1d * mask / (1.0 - head.dropout_rate)
    else:
        da1 = da1d
    _, g1 = _block_backward(head.block1, c1, da1, mode)
    grads = {
        "block1.W": g1["W"], "block1.b": g1["b"],
        "block1.gamma": g1["gamma"], "block1.beta": g1["beta"],
        "block2.W": g2["W"], "block2.b": g2["b"],
        "block2.gamma": g2["gamma"], "block2.beta": g2["beta"],
        "out.w": d_out_w, "out.b": d_out_b,
    }
    return loss, grads, (c1, c2)


def _apply_sgd(head: ClassifierHead, grads: dict, lr: float) -> None:
    head.block1.W -= lr * grads["block1.W"]
    head.block1.b -= lr * grads["block1.b"]
    head.block1.gamma -= lr * grads["block1.gamma"]
    head.block1.beta -= lr * grads["block1.beta"]
    head.block2.W -= lr * grads["block2.W"]
    head.block2.b -= lr * grads["block2.b"]
    head.block2.gamma -= lr * grads["block2.gamma"]
    head.block2.beta -= lr * grads["block2.beta"]
    head.out_w -= lr * grads["out.w"]
    head.out_b -= lr * grads["out.b"]


def build_training_set(embeddings: EmbeddingTable, labels: TechLabelSet) -> tuple[np.ndarray, np.ndarray, list[str]]:
    entities = sorted(labels.labels)
    missing = [e for e in entities if e not in embeddings.vectors]
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DataError(f"labeled entities lack embeddings: {shown}{more}")
    X = np.stack([embeddings.vectors[e] for e in entities])
    y = np.array([1.0 if labels.labels[e] else 0.0 for e in entities])
    return X, y, entities


def train_classifier(embeddings: EmbeddingTable, labels: TechLabelSet,
                     config: ClassifierConfig) -> ClassifierHead:
    """Minibatch SGD on binary cross entropy over the labeled entities."""
    X, y, _ = build_training_set(embeddings, labels)
    return train_on_arrays(X, y, config)


def train_on_arrays(X: np.ndarray, y: np.ndarray, config: ClassifierConfig) -> ClassifierHead:
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    if n_pos < 2 or n_neg < 2:
        raise DataError(f"need at least 2 examples of each class, got {n_pos} positive "
                        f"and {n_neg} negative")
    rng = np.random.default_rng(config.seed)
    head = init_head(X.shape[1], config, rng)
    head.mode = "train"
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue  # batch variance undefined; drop the size-1 remainder
            xb, yb = X[idx], y[idx]
            if head.dropout_rate > 0:
                mask = rng.random((len(idx), head.block1.W.shape[0])) >= head.dropout_rate
            else:
                mask = None
            _, grads, (c1, c2) = _loss_grads_caches(head, xb, yb, "train", None, mask)
            # running stats use the same batch statistics the step normalized with
            _update_running(head.block1, c1, head.bn_momentum)
            _update_running(head.block2, c2, head.bn_momentum)
            _apply_sgd(head, grads, lr)
    head.mode = "eval"
    return head


def predict_probs(head: ClassifierHead, X: np.ndarray) -> np.ndarray:
    return head_forward(head, X, mode="eval")


def kfold_split(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition of range(n); test folds differ in size by at most 1."""
    if k < 2:
        raise DataError(f"k-fold needs k >= 2, got {k}")
    if n < k:
        raise DataError(f"k-fold needs n >= k, got n={n}, k={k}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = perm[start:start + size]
        train = np.concatenate([perm[:start], perm[start + size:]])
        folds.append((np.sort(train), np.sort(test)))
        start += size
    return folds


@dataclass
class EvalReport:
    accuracy: float
    f1: float
    auc: float | None
    fold_accuracy: list[float] = field(default_factory=list)
    fold_f1: list[float] = field(default_factory=list)
    fold_auc: list[float | None] = field(default_factory=list)


def _auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability that a random positive outranks a random negative, ties 1/2.

    Computed from the rank-sum with average ranks for tied scores.
    """
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    ranks = np.empty(len(s))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def metrics(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> EvalReport:
    """Accuracy at the threshold, F1 of the positive class, and rank AUC.

    AUC is None when only one class is present.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValueError("probs and labels must have the same length")
    if len(probs) == 0:
        raise ValueError("metrics need at least one example")
    pred = (probs >= threshold).astype(np.float64)
    accuracy = float((pred == labels).mean())
    tp = float(((pred == 1) & (labels == 1)).sum())
    fp = float(((pred == 1) & (labels == 0)).sum())
    fn = float(((pred == 0) & (labels == 1)).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    both_classes = 0 < labels.sum() < len(labels)
    auc = _auc_score(probs, labels) if both_classes else None
    return EvalReport(accuracy=accuracy, f1=f1, auc=auc)


def evaluate_kfold(embeddings: EmbeddingTable, labels: TechLabelSet,
                   config: ClassifierConfig, k: int = 5) -> EvalReport:
    """k-fold cross validation; per-fold metrics plus their means."""
    X, y, _ = build_training_set(embeddings, labels)
    folds = kfold_split(len(y), k, config.seed)
    accs, f1s, aucs = [], [], []
    for fold_no, (train_idx, test_idx) in enumerate(folds):
        fold_config = dataclasses.replace(config, seed=config.seed + fold_no)
        head = train_on_arrays(X[train_idx], y[train_idx], fold_config)
        rep = metrics(predict_probs(head, X[test_idx]), y[test_idx])
        accs.append(rep.accuracy)
        f1s.append(rep.f1)
        aucs.append(rep.auc)
    defined = [a for a in aucs if a is not None]
    return EvalReport(
        accuracy=float(np.mean(accs)),
        f1=float(np.mean(f1s)),
        auc=float(np.mean(defined)) if defined else None,
        fold_accuracy=accs, fold_f1=f1s, fold_auc=aucs,
    )


def save_classifier(head: ClassifierHead, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        modelio.write_header(f, {
            "kind": "classifier", "version": 1,
            "dim": head.dim,
            "h1": head.block1.W.shape[0], "h2": head.block2.W.shape[0],
            "dropout": modelio.fmt(head.dropout_rate),
            "bn_eps": modelio.fmt(head.bn_epsilon),
            "bn_momentum": modelio.fmt(head.bn_momentum),
        })
        for name, block in (("block1", head.block1), ("block2", head.block2)):
            modelio.write_tensor(f, f"{name}.W", block.W)
            modelio.write_tensor(f, f"{name}.b", block.b)
            modelio.write_tensor(f, f"{name}.gamma", block.gamma)
            modelio.write_tensor(f, f"{name}.beta", block.beta)
            modelio.write_tensor(f, f"{name}.running_mean", block.running_mean)
            modelio.write_tensor(f, f"{name}.running_var", block.running_var)
        modelio.write_tensor(f, "out.w", head.out_w)
        modelio.write_tensor(f, "out.b", np.array([head.out_b]))


def load_classifier(path: str) -> ClassifierHead:
    header, tensors, _ = modelio.read_model_file(path)
    if header.get("kind") != "classifier":
        raise DataError(f"{path}: not a classifier model file")
    modelio.require_version(header, "1", path)
    try:
        dim = int(modelio.require(header, "dim", path))
        h1 = int(modelio.require(header, "h1", path))
        h2 = int(modelio.require(header, "h2", path))
        dropout_rate = float(modelio.require(header, "dropout", path))
        bn_eps = float(modelio.require(header, "bn_eps", path))
        bn_momentum = float(modelio.require(header, "bn_momentum", path))
    except ValueError:
        raise DataError(f"{path}: malformed header field") from None

    def block(name: str, fan_out: int, fan_in: int) -> Block:
        b = Block(
            W=modelio.require_tensor(tensors, f"{name}.W", (fan_out, fan_in), path),
            b=modelio.require_tensor(tensors, f"{name}.b", (fan_out,), path),
            gamma=modelio.require_tensor(tensors, f"{name}.gamma", (fan_out,), path),
            beta=modelio.require_tensor(tensors, f"{name}.beta", (fan_out,), path),
            running_mean=modelio.require_tensor(tensors, f"{name}.running_mean", (fan_out,), path),
            running_var=modelio.require_tensor(tensors, f"{name}.running_var", (fan_out,), path),
        )
        if not (b.running_var > 0).all():
            raise DataError(f"{path}: {name}.running_var has non-positive entries")
        return b

    return ClassifierHead(
        block1=block("block1", h1, dim),
        block2=block("block2", h2, h1),
        out_w=modelio.require_tensor(tensors, "out.w", (h2,), path),
        out_b=float(modelio.require_tensor(tensors, "out.b", (1,), path)[0]),
        dropout_rate=dropout_rate, bn_epsilon=bn_eps, bn_momentum=bn_momentum,
    )
