import subprocess
import sys
import time
from pathlib import Path

import pytest

from techrec import cli
from techrec.ingest import EmbeddingTable, load_embeddings, write_embeddings

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic20"


def run_pipeline(out: Path, capsys) -> dict[str, Path]:
    """Full stage sequence on the bundled fixture; asserts exit 0 per stage."""
    out.mkdir(parents=True, exist_ok=True)
    cfg = str(FIXTURE / "pipeline.cfg")
    paths = {
        "counts": out / "counts.csv",
        "classifier": out / "classifier.model",
        "kfold": out / "kfold.csv",
        "predictions": out / "predictions.csv",
        "matrix": out / "matrix.tsv",
        "model": out / "rec.model",
        "progress": out / "progress.csv",
        "query": out / "query.csv",
        "discovery": out / "discovery.csv",
        "eval": out / "eval.csv",
    }
    stages = [
        ["ingest", "--website", str(FIXTURE / "website.jsonl"),
         "--patent", str(FIXTURE / "patent.jsonl"),
         "--jobs", str(FIXTURE / "jobs.jsonl"),
         "--embeddings", str(FIXTURE / "embeddings.tsv"),
         "--labels", str(FIXTURE / "labels.csv"),
         "--out", str(paths["counts"])],
        ["train-classifier", "--config", cfg,
         "--embeddings", str(FIXTURE / "embeddings.tsv"),
         "--labels", str(FIXTURE / "labels.csv"),
         "--kfold", "5", "--report", str(paths["kfold"]),
         "--out", str(paths["classifier"])],
        ["predict-tech", "--model", str(paths["classifier"]),
         "--embeddings", str(FIXTURE / "embeddings.tsv"),
         "--out", str(paths["predictions"])],
        ["build-matrix", "--website", str(FIXTURE / "website.jsonl"),
         "--patent", str(FIXTURE / "patent.jsonl"),
         "--jobs", str(FIXTURE / "jobs.jsonl"),
         "--weight-website", "0.75", "--weight-patent", "0.35",
         "--weight-jobs", "0.5",
         "--filter", str(paths["predictions"]),
         "--out", str(paths["matrix"])],
        ["train-recommender", "--config", cfg,
         "--matrix", str(paths["matrix"]), "--variant", "semantic-mf",
         "--semantic-embeddings", str(FIXTURE / "semantic.tsv"),
         "--progress", str(paths["progress"]),
         "--out", str(paths["model"])],
        ["query", "com-tech", "--model", str(paths["model"]),
         "--company", "m00", "--top", "5", "--out", str(paths["query"])],
        ["query", "com-tech", "--model", str(paths["model"]),
         "--matrix", str(paths["matrix"]), "--no-include-observed",
         "--company", "m00", "--top", "5", "--out", str(paths["discovery"])],
        ["evaluate", "--task", "com-com",
         "--categories", str(FIXTURE / "categories.csv"),
         "--model", str(paths["model"]),
         "--matrix", str(paths["matrix"]), "--tfidf-baseline",
         "--k", "5", "--out", str(paths["eval"])],
    ]
    for argv in stages:
        code = cli.main(argv)
        captured = capsys.readouterr()
        assert code == 0, f"{argv[0]} failed: {captured.err}"
    return paths


def test_pipeline_on_bundled_fixture(tmp_path, capsys):
    start = time.monotonic()
    paths = run_pipeline(tmp_path, capsys)
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    for p in paths.values():
        assert p.exists() and p.stat().st_size > 0
    counts = paths["counts"].read_text().splitlines()
    assert counts[0] == "source,companies,entities,records,total_count"
    assert [line.split(",")[0] for line in counts[1:]] == ["jobs", "patent", "website"]
    header = paths["query"].read_text().splitlines()[0]
    assert header == "rank,id,score"
    assert len(paths["query"].read_text().splitlines()) == 6
    kfold = paths["kfold"].read_text().splitlines()
    assert kfold[0] == "fold,accuracy,f1,auc"
    assert kfold[-1].startswith("mean,")
    ev = paths["eval"].read_text().splitlines()
    assert ev[0] == "task,model,k,mean_p_at_k,n_queries"
    tags = {line.split(",")[1] for line in ev[1:]}
    assert tags == {"rec", "tfidf"}


def test_pipeline_is_deterministic(tmp_path, capsys):
    first = run_pipeline(tmp_path / "one", capsys)
    second = run_pipeline(tmp_path / "two", capsys)
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes(), key


def test_filter_drops_non_technology_entities(tmp_path, capsys):
    paths = run_pipeline(tmp_path, capsys)
    kept = {line.split("\t")[1] for line in
            paths["matrix"].read_text().splitlines()
            if line.count("\t") == 2}
    noise = {"annual-picnic", "cafeteria", "gift-shop", "parking-lot",
             "reception-desk", "shuttle-bus"}
    assert not (kept & noise)
    assert len(kept) == 24


def test_usage_errors_exit_1(capsys):
    assert cli.main(["query", "com-tech", "--company", "m00"]) == 1
    assert "error:" in capsys.readouterr().err
    assert cli.main(["ingest"]) == 1  # no mention files
    assert "no mention files" in capsys.readouterr().err
    assert cli.main(["nonsense-command"]) == 1
    assert cli.main([]) == 1
    assert cli.main(["evaluate", "--task", "tech-tech", "--categories", "x"]) == 1


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    code = cli.main(["ingest", "--website", str(bad)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
    code = cli.main(["train-recommender", "--matrix", str(tmp_path / "missing.tsv"),
                     "--variant", "mf", "--out", str(tmp_path / "m")])
    assert code == 2


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("top = 3\ncompany = m00\n")
    out = tmp_path / "pipe"
    paths = run_pipeline(out, capsys)
    # config supplies top=3
    assert cli.main(["query", "com-tech", "--model", str(paths["model"]),
                     "--config", str(cfg), "--out", str(tmp_path / "a.csv")]) == 0
    capsys.readouterr()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 4
    # explicit flag wins over the config value
    assert cli.main(["query", "com-tech", "--model", str(paths["model"]),
                     "--config", str(cfg), "--top", "7",
                     "--out", str(tmp_path / "b.csv")]) == 0
    capsys.readouterr()
    assert len((tmp_path / "b.csv").read_text().splitlines()) == 8


def test_parse_config_syntax(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\n key = some value # trailing\n\nflag=on\n")
    assert cli.parse_config(str(cfg)) == {"key": "some value", "flag": "on"}
    cfg.write_text("just words\n")
    with pytest.raises(Exception, match="expected 'key = value'"):
        cli.parse_config(str(cfg))


def test_ingest_warns_on_missing_coverage(tmp_path, capsys):
    emb = tmp_path / "few.tsv"
    # covers only one mentioned entity
    src = load_embeddings(str(FIXTURE / "embeddings.tsv"))
    name = sorted(src.vectors)[0]
    write_embeddings(EmbeddingTable(dim=src.dim, vectors={name: src.vectors[name]}),
                     str(emb))
    code = cli.main(["ingest", "--website", str(FIXTURE / "website.jsonl"),
                     "--embeddings", str(emb),
                     "--out", str(tmp_path / "counts.csv")])
    captured = capsys.readouterr()
    assert code == 0
    assert "lack embeddings" in captured.err


def test_stdout_default_for_tables(capsys):
    code = cli.main(["ingest", "--website", str(FIXTURE / "website.jsonl")])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.startswith("source,companies,entities,records,total_count")


def test_console_entry_point(tmp_path):
    # one subprocess check that the installed command wires up to main()
    proc = subprocess.run(
        [sys.executable, "-m", "techrec", "ingest",
         "--website", str(FIXTURE / "website.jsonl")],
        capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert proc.stdout.startswith("source,companies")
    proc = subprocess.run([sys.executable, "-m", "techrec", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert "ingest" in proc.stdout and "train-recommender" in proc.stdout
