import json
from pathlib import Path

import jsonschema
import pytest

from ompadvisor.cli import execute_command
from ompadvisor.metrics import report_from_rows, rows_from_csv
from ompadvisor.synthetic import generate_synthetic_corpus

SCHEMA_PATH = Path(__file__).parent.parent / "src" / "ompadvisor" / "schemas" / "predict_schema.json"
GOLDEN_STATS = Path(__file__).parent / "fixtures" / "golden_stats.txt"


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    code = execute_command([
        "build-corpus", str(Path(__file__).parent / "fixtures" / "corpus_c"),
        "--seed", "3", "-o", str(out),
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    """A tiny model trained over a small synthetic corpus via the CLI."""
    from ompadvisor.corpus import write_jsonl

    corpus = tmp_path_factory.mktemp("cli_syn_corpus")
    samples = generate_synthetic_corpus(n=80, seed=5)
    write_jsonl(corpus / "corpus.jsonl", [s.to_json_dict() for s in samples])

    out = tmp_path_factory.mktemp("cli_model")
    code = execute_command([
        "train", str(corpus), "--epochs", "2", "--seed", "1",
        "--d-model", "16", "--n-heads", "2", "--n-layers", "1", "--d-ff", "32",
        "--min-freq", "1", "-o", str(out),
    ])
    assert code == 0
    return corpus, out


def test_build_corpus_outputs_and_run_config(corpus_dir):
    for name in ("corpus.jsonl", "rejects.jsonl", "stats.json", "run_config.json"):
        assert (corpus_dir / name).exists()
    run_config = json.loads((corpus_dir / "run_config.json").read_text())
    assert run_config["command"] == "build-corpus"
    assert run_config["seed"] == 3


def test_build_corpus_deterministic(tmp_path):
    src = str(Path(__file__).parent / "fixtures" / "corpus_c")
    assert execute_command(["build-corpus", src, "--seed", "9", "-o", str(tmp_path / "a")]) == 0
    assert execute_command(["build-corpus", src, "--seed", "9", "-o", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "corpus.jsonl").read_bytes() == \
        (tmp_path / "b" / "corpus.jsonl").read_bytes()


def test_stats_matches_golden(corpus_dir, capsys):
    code = execute_command(["stats", str(corpus_dir / "corpus.jsonl")])
    assert code == 0
    assert capsys.readouterr().out == GOLDEN_STATS.read_text()


def test_train_writes_artifacts(model_dir):
    _, out = model_dir
    for name in ("model.bin", "vocab.json", "history.json", "encode_stats.json",
                 "run_config.json"):
        assert (out / name).exists()
    history = json.loads((out / "history.json").read_text())
    assert len(history) == 2


def test_predict_json_validates_against_schema(model_dir, tmp_path, capsys):
    _, out = model_dir
    source = tmp_path / "kernel.c"
    source.write_text("""
void f(int n, double *a, double *b) {
  int i;
  for (i = 0; i < n; i++) {
    a[i] = b[i] * 2.0;
  }
}
""")
    code = execute_command(["predict", str(out), str(source), "--gate", "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    schema = json.loads(SCHEMA_PATH.read_text())
    jsonschema.validate(payload, schema)
    assert len(payload) == 1
    assert payload[0]["gated"] is True


def test_predict_plain_output(model_dir, tmp_path, capsys):
    _, out = model_dir
    source = tmp_path / "empty.c"
    source.write_text("int f(void) { return 0; }")
    assert execute_command(["predict", str(out), str(source)]) == 0
    assert "no loops found" in capsys.readouterr().out


def test_evaluate_writes_reports_and_csv_recomputes(model_dir, tmp_path, capsys):
    corpus, out = model_dir
    eval_dir = tmp_path / "eval"
    code = execute_command([
        "evaluate", str(out), str(corpus / "corpus.jsonl"), "-o", str(eval_dir),
    ])
    assert code == 0
    report = json.loads((eval_dir / "report.json").read_text())
    rows = rows_from_csv((eval_dir / "per_sample.csv").read_text())
    recomputed = report_from_rows(rows)
    for key in ("n", "raw", "gated"):
        assert recomputed[key] == report[key]
    assert (eval_dir / "report.txt").read_text().startswith("samples:")
    assert (eval_dir / "run_config.json").exists()


def test_augment_command_round_trip(corpus_dir, tmp_path, capsys):
    out_file = tmp_path / "augmented.jsonl"
    code = execute_command([
        "augment", str(corpus_dir / "corpus.jsonl"), "--mode", "replaced",
        "--epoch", "1", "--seed", "4", "-o", str(out_file),
    ])
    assert code == 0
    assert out_file.exists()
    assert (tmp_path / "augmented.jsonl.run_config.json").exists()
    lines = [json.loads(line) for line in out_file.read_text().splitlines() if line]
    original = [json.loads(line) for line in (corpus_dir / "corpus.jsonl").read_text().splitlines() if line]
    assert len(lines) == len(original)
    assert all(a["id"] == b["id"] for a, b in zip(lines, original))
    assert any(a["loop_code"] != b["loop_code"] for a, b in zip(lines, original))


def test_check_gradients_command(capsys):
    code = execute_command(["check-gradients", "--config", "small"])
    assert code == 0
    out = capsys.readouterr().out
    assert "OK" in out


def test_usage_errors_exit_one(capsys):
    assert execute_command([]) == 1
    assert execute_command(["train"]) == 1
    assert execute_command(["predict", "--bogus-flag"]) == 1
    assert execute_command(["no-such-command"]) == 1


def test_data_errors_exit_two(tmp_path, capsys):
    assert execute_command(["build-corpus", str(tmp_path / "missing"), "-o", str(tmp_path / "o")]) == 2
    assert execute_command(["stats", str(tmp_path / "missing.jsonl")]) == 2
    assert execute_command(["train", str(tmp_path), "-o", str(tmp_path / "m")]) == 2


def test_predict_missing_model_exits_two(tmp_path, capsys):
    source = tmp_path / "k.c"
    source.write_text("int f(void) { return 0; }")
    assert execute_command(["predict", str(tmp_path / "nomodel"), str(source)]) == 2
