"""Command line driver for the retrieval pipeline.

Subcommands cover the pipeline stages in order: ingest (validate raw
mention data), build-matrix (tf-idf interaction matrix), train-classifier
/ predict-tech (technology filter), train-recommender, query, evaluate.

Every subcommand accepts ``--config FILE`` with line-oriented
``key = value`` pairs (``#`` starts a comment); explicit flags override
config values. All tabular output is CSV with a header row. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from . import classifier as clf
from . import evaluation, ingest, interaction, recommender, retrieval
from .errors import DataError, NumericalError, TechrecError, UsageError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip() != "")
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise ValueError("expected at least one integer")
    return values


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_config(path: str) -> dict[str, str]:
    """Line-oriented `key = value` file; `#` starts a comment."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read config file {path}: {e}") from None
    cfg: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise DataError(f"{path}:{lineno}: empty key")
        cfg[key] = value.strip()
    return cfg


def _load_cfg(args) -> dict[str, str]:
    return parse_config(args.config) if getattr(args, "config", None) else {}


def _get(args, cfg: dict[str, str], key: str, default, cast=str):
    """Flag value if given, else config value, else the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError as e:
            raise DataError(f"config key '{key}': {e}") from None
    return default


def _require(args, cfg: dict[str, str], key: str, flag: str):
    value = _get(args, cfg, key, None)
    if value is None:
        raise UsageError(f"missing required {flag} (or config key '{key}')")
    return value


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)


def _csv_table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(value: float) -> str:
    return repr(float(value))


def _load_corpora(args, cfg) -> dict[ingest.Source, ingest.SourceCorpus]:
    corpora = {}
    for source in ingest.Source:
        path = _get(args, cfg, source.value, None)
        if path is not None:
            corpora[source] = ingest.parse_mentions(path, source)
    if not corpora:
        raise UsageError("no mention files given; pass at least one of "
                         "--website/--patent/--jobs/--twitter")
    return corpora


# ---------------------------------------------------------------- subcommands

def cmd_ingest(args) -> int:
    cfg = _load_cfg(args)
    corpora = _load_corpora(args, cfg)
    emb_path = _get(args, cfg, "embeddings", None)
    lab_path = _get(args, cfg, "labels", None)
    embeddings = ingest.load_embeddings(emb_path) if emb_path else None
    labels = ingest.load_labels(lab_path) if lab_path else None
    report = ingest.validate_corpus(corpora, embeddings, labels)
    rows = [
        [source.value, c["companies"], c["entities"], c["records"], c["total_count"]]
        for source, c in sorted(report.counts.items(), key=lambda kv: kv[0].value)
    ]
    _write_text(args.out, _csv_table(
        ["source", "companies", "entities", "records", "total_count"], rows))
    for what, missing in (("embeddings", report.missing_embeddings),
                          ("labels", report.missing_labels)):
        if missing:
            shown = ", ".join(missing[:5])
            more = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            print(f"warning: {len(missing)} mentioned entities lack {what}: "
                  f"{shown}{more}", file=sys.stderr)
    return 0


def _load_predictions(path: str) -> dict[str, bool]:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            rows = list(reader)
    except OSError as e:
        raise DataError(f"cannot read predictions file {path}: {e}") from None
    if not rows or rows[0] != ["entity", "probability", "label"]:
        raise DataError(f"{path}: expected CSV header 'entity,probability,label'")
    out: dict[str, bool] = {}
    for rowno, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[2] not in ("0", "1"):
            raise DataError(f"{path}:{rowno}: expected entity,probability,label "
                            "with label 0 or 1")
        if row[0] in out:
            raise DataError(f"{path}:{rowno}: duplicate entity {row[0]!r}")
        out[row[0]] = row[2] == "1"
    return out


def cmd_build_matrix(args) -> int:
    cfg = _load_cfg(args)
    corpora = _load_corpora(args, cfg)
    weights = interaction.SourceWeights({
        s: _get(args, cfg, f"weight_{s.value}", 1.0, float) for s in ingest.Source
    })
    matrices = [interaction.tfidf_source(c) for c in corpora.values()]
    matrix = interaction.combine_sources(matrices, weights)
    filter_path = _get(args, cfg, "filter", None)
    if filter_path is not None:
        matrix = interaction.filter_technologies(matrix, _load_predictions(filter_path))
    matrix = matrix.compact()
    out = _require(args, cfg, "out", "--out")
    interaction.save_matrix(matrix, out)
    print(f"wrote {matrix.n_companies} companies x {matrix.n_techs} technologies "
          f"({len(matrix.entries)} observed entries) to {out}", file=sys.stderr)
    return 0


def _classifier_config(args, cfg) -> clf.ClassifierConfig:
    return clf.ClassifierConfig(
        h1=_get(args, cfg, "h1", 256, int),
        h2=_get(args, cfg, "h2", 64, int),
        dropout_rate=_get(args, cfg, "dropout", 0.2, float),
        learning_rate=_get(args, cfg, "classifier_lr", 0.01, float),
        epochs=_get(args, cfg, "classifier_epochs", 200, int),
        batch_size=_get(args, cfg, "batch_size", 32, int),
        seed=_get(args, cfg, "seed", 0, int),
        bn_epsilon=_get(args, cfg, "bn_epsilon", 1e-5, float),
        bn_momentum=_get(args, cfg, "bn_momentum", 0.1, float),
    )


def cmd_train_classifier(args) -> int:
    cfg = _load_cfg(args)
    embeddings = ingest.load_embeddings(_require(args, cfg, "embeddings", "--embeddings"))
    labels = ingest.load_labels(_require(args, cfg, "labels", "--labels"))
    config = _classifier_config(args, cfg)
    kfold = _get(args, cfg, "kfold", None, int)
    if kfold is not None:
        report = clf.evaluate_kfold(embeddings, labels, config, k=kfold)
        rows = [
            [fold + 1, _fmt(acc), _fmt(f1), "" if auc is None else _fmt(auc)]
            for fold, (acc, f1, auc) in enumerate(
                zip(report.fold_accuracy, report.fold_f1, report.fold_auc))
        ]
        rows.append(["mean", _fmt(report.accuracy), _fmt(report.f1),
                     "" if report.auc is None else _fmt(report.auc)])
        _write_text(args.report, _csv_table(["fold", "accuracy", "f1", "auc"], rows))
    head = clf.train_classifier(embeddings, labels, config)
    out = _require(args, cfg, "out", "--out")
    clf.save_classifier(head, out)
    print(f"wrote classifier ({head.dim} -> {config.h1} -> {config.h2} -> 1) to {out}",
          file=sys.stderr)
    return 0


def cmd_predict_tech(args) -> int:
    cfg = _load_cfg(args)
    head = clf.load_classifier(_require(args, cfg, "model", "--model"))
    embeddings = ingest.load_embeddings(_require(args, cfg, "embeddings", "--embeddings"))
    if embeddings.dim != head.dim:
        raise DataError(f"embedding dim {embeddings.dim} does not match the "
                        f"classifier input dim {head.dim}")
    threshold = _get(args, cfg, "threshold", 0.5, float)
    entities = sorted(embeddings.vectors)
    probs = clf.predict_probs(head, np.stack([embeddings.vectors[e] for e in entities]))
    rows = [[e, _fmt(p), int(p >= threshold)] for e, p in zip(entities, probs)]
    _write_text(args.out, _csv_table(["entity", "probability", "label"], rows))
    return 0


def _train_config(args, cfg) -> recommender.TrainConfig:
    return recommender.TrainConfig(
        margin=_get(args, cfg, "margin", 0.01, float),
        learning_rate=_get(args, cfg, "learning_rate", 0.05, float),
        epochs=_get(args, cfg, "epochs", 100, int),
        negatives_per_positive=_get(args, cfg, "negatives_per_positive", 1, int),
        d=_get(args, cfg, "d", 64, int),
        seed=_get(args, cfg, "seed", 0, int),
        mlp_layer_sizes=_get(args, cfg, "mlp_layers", None, _int_list),
        proj_layer_sizes=_get(args, cfg, "proj_layers", None, _int_list),
        proj_relu=_get(args, cfg, "proj_relu", False, _bool),
    )


def cmd_train_recommender(args) -> int:
    cfg = _load_cfg(args)
    matrix = interaction.load_matrix(_require(args, cfg, "matrix", "--matrix"))
    variant = recommender.variant_from_name(_require(args, cfg, "variant", "--variant"))
    semantic_path = _get(args, cfg, "semantic_embeddings", None)
    semantic = ingest.load_embeddings(semantic_path) if semantic_path else None
    config = _train_config(args, cfg)
    history: list[tuple[int, float]] = []
    model = recommender.train(matrix, semantic, variant, config,
                              on_epoch=lambda e, l: history.append((e, l)))
    out = _require(args, cfg, "out", "--out")
    recommender.save_model(model, out)
    if args.progress is not None:
        _write_text(args.progress, _csv_table(
            ["epoch", "mean_loss"], [[e, _fmt(l)] for e, l in history]))
    print(f"wrote {variant.value} model (d={config.d}, {config.epochs} epochs) to {out}",
          file=sys.stderr)
    return 0


def _ranked_csv(ranked: retrieval.RankedList) -> str:
    rows = [[rank, rid, _fmt(score)]
            for rank, (rid, score) in enumerate(ranked.items, start=1)]
    return _csv_table(["rank", "id", "score"], rows)


def cmd_query(args) -> int:
    cfg = _load_cfg(args)
    k = _get(args, cfg, "top", 10, int)
    task = args.task
    if task in ("com-tech", "com-com", "tech-com"):
        model = recommender.load_model(_require(args, cfg, "model", "--model"))
    if task in ("tfidf-com-tech", "tfidf-com-com") or (
            task == "com-tech" and not args.include_observed):
        matrix = interaction.load_matrix(_require(args, cfg, "matrix", "--matrix"))
    if task == "com-tech":
        company = _require(args, cfg, "company", "--company")
        ranked = retrieval.retrieve_com_tech(
            model, company, k, include_observed=args.include_observed,
            matrix=None if args.include_observed else matrix)
    elif task == "com-com":
        company = _require(args, cfg, "company", "--company")
        ranked = retrieval.retrieve_com_com(
            model, company, k, use_score_rows=(args.similarity == "scores"))
    elif task == "tech-com":
        tech = _require(args, cfg, "tech", "--tech")
        ranked = retrieval.retrieve_tech_com(model, tech, k)
    elif task == "tfidf-com-tech":
        company = _require(args, cfg, "company", "--company")
        ranked = retrieval.tfidf_retrieve_com_tech(matrix, company, k)
    else:
        company = _require(args, cfg, "company", "--company")
        ranked = retrieval.tfidf_retrieve_com_com(matrix, company, k)
    _write_text(args.out, _ranked_csv(ranked))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    task = _require(args, cfg, "task", "--task")
    if task not in ("com-com", "tech-com"):
        raise UsageError("--task must be com-com or tech-com")
    categories = ingest.load_categories(_require(args, cfg, "categories", "--categories"))
    ks = _get(args, cfg, "k", evaluation.DEFAULT_KS, _int_list)
    union_form = bool(args.union_overlap)
    reports = []
    for path in args.model or []:
        model = recommender.load_model(path)
        tag = os.path.splitext(os.path.basename(path))[0]
        if task == "com-com":
            queries = model.company_ids
            ranker = lambda q, kk, m=model: retrieval.retrieve_com_com(
                m, q, kk, use_score_rows=(args.similarity == "scores")).ids()
        else:
            queries = model.tech_ids
            ranker = lambda q, kk, m=model: retrieval.retrieve_tech_com(m, q, kk).ids()
        reports.append(evaluation.evaluate_task(
            task, ranker, queries, categories, ks, model_tag=tag,
            union_form=union_form))
    if args.tfidf_baseline:
        if task != "com-com":
            raise UsageError("--tfidf-baseline applies to the com-com task only")
        matrix = interaction.load_matrix(_require(args, cfg, "matrix", "--matrix"))
        ranker = lambda q, kk: retrieval.tfidf_retrieve_com_com(matrix, q, kk).ids()
        reports.append(evaluation.evaluate_task(
            task, ranker, matrix.company_ids, categories, ks,
            model_tag="tfidf", union_form=union_form))
    if not reports:
        raise UsageError("nothing to evaluate; pass --model and/or --tfidf-baseline")
    _write_text(args.out, evaluation.reports_to_csv(reports))
    return 0


# -------------------------------------------------------------------- parser

def build_parser() -> _Parser:
    parser = _Parser(prog="techrec", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value config file; flags override it")
    common.add_argument("--out", help="output file (default: stdout for tables)")

    mentions = _Parser(add_help=False)
    for source in ingest.SOURCE_NAMES:
        mentions.add_argument(f"--{source}", metavar="JSONL",
                              help=f"mention records from the {source} source")

    p = sub.add_parser("ingest", parents=[common, mentions],
                       help="parse and cross-validate raw inputs")
    p.add_argument("--embeddings", help="entity embeddings TSV")
    p.add_argument("--labels", help="entity,label CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-matrix", parents=[common, mentions],
                       help="build the tf-idf interaction matrix")
    for source in ingest.SOURCE_NAMES:
        p.add_argument(f"--weight-{source}", type=float, dest=f"weight_{source}",
                       help=f"combination weight for {source} (default 1.0)")
    p.add_argument("--filter", help="predict-tech CSV; keeps entities labeled 1")
    p.set_defaults(func=cmd_build_matrix)

    p = sub.add_parser("train-classifier", parents=[common],
                       help="train the technology classifier head")
    p.add_argument("--embeddings")
    p.add_argument("--labels")
    p.add_argument("--h1", type=int)
    p.add_argument("--h2", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--classifier-lr", type=float, dest="classifier_lr")
    p.add_argument("--epochs", type=int, dest="classifier_epochs")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--bn-epsilon", type=float, dest="bn_epsilon")
    p.add_argument("--bn-momentum", type=float, dest="bn_momentum")
    p.add_argument("--seed", type=int)
    p.add_argument("--kfold", type=int, help="also report k-fold cross validation")
    p.add_argument("--report", help="write the k-fold CSV here (default stdout)")
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("predict-tech", parents=[common],
                       help="classify entities as technologies")
    p.add_argument("--model")
    p.add_argument("--embeddings")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_predict_tech)

    p = sub.add_parser("train-recommender", parents=[common],
                       help="train a retrieval model on the interaction matrix")
    p.add_argument("--matrix")
    p.add_argument("--variant", help="mf | mlp | ncf | semantic | semantic-mf")
    p.add_argument("--semantic-embeddings", dest="semantic_embeddings",
                   help="technology semantic vectors TSV (semantic variants)")
    p.add_argument("--d", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--negatives-per-positive", type=int, dest="negatives_per_positive")
    p.add_argument("--mlp-layers", type=_int_list, dest="mlp_layers",
                   help="scorer hidden sizes, e.g. 64,32")
    p.add_argument("--proj-layers", type=_int_list, dest="proj_layers",
                   help="projection hidden sizes")
    p.add_argument("--proj-relu", action="store_const", const=True, dest="proj_relu",
                   help="rectify between projection layers")
    p.add_argument("--seed", type=int)
    p.add_argument("--progress", help="write per-epoch mean loss CSV here")
    p.set_defaults(func=cmd_train_recommender)

    p = sub.add_parser("query", parents=[common], help="run one retrieval query")
    p.add_argument("task", choices=["com-tech", "com-com", "tech-com",
                                    "tfidf-com-tech", "tfidf-com-com"])
    p.add_argument("--model")
    p.add_argument("--matrix")
    p.add_argument("--company")
    p.add_argument("--tech")
    p.add_argument("--top", type=int, help="result count (default 10)")
    p.add_argument("--include-observed", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="com-tech: rank observed technologies too (default); "
                        "--no-include-observed restricts to unobserved "
                        "(discovery, needs --matrix)")
    p.add_argument("--similarity", choices=["embedding", "scores"],
                   default="embedding",
                   help="com-com similarity space (default embedding)")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", parents=[common],
                       help="category-overlap precision across models")
    p.add_argument("--task", help="com-com | tech-com")
    p.add_argument("--categories", help="id,category CSV")
    p.add_argument("--k", type=_int_list, help="comma-separated cutoffs (default 5,10,15,20)")
    p.add_argument("--model", action="append", help="trained model file (repeatable)")
    p.add_argument("--matrix", help="interaction matrix (for --tfidf-baseline)")
    p.add_argument("--tfidf-baseline", action="store_true",
                   help="also score the weighted-Jaccard tf-idf baseline (com-com)")
    p.add_argument("--similarity", choices=["embedding", "scores"],
                   default="embedding")
    p.add_argument("--union-overlap", action="store_true",
                   help="count the union instead of the intersection of "
                        "category sets (comparison only)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except TechrecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
