import json
import os
from collections import Counter

import pytest

from ompadvisor.augment import rename_variables
from ompadvisor.corpus import (
    SAMPLE_KEYS, Sample, build_corpus, compute_stats, content_hash,
    deduplicate, extract_from_source, extract_samples, split_corpus,
)


def make_sample(i, **overrides):
    fields = dict(
        id=f"{i:016x}", path=f"p{i:02d}.c", loop_code=f"for (i = 0; i < {i}; i++) {{\nx = {i};\n}}",
        context_code="", pragma_raw=None, label_pragma=0, label_private=0,
        label_reduction=0, dfg={"nodes": [], "edges": []}, split="none", offset=i,
    )
    fields.update(overrides)
    return Sample(**fields)


# ---------------------------------------------------------------------------
# extraction and labels

def test_label_rules_on_fixture_files(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f01.c", rel_path="f01.c")
    assert [s.label_pragma for s in samples] == [1]
    assert samples[0].pragma_raw == "#pragma omp parallel for"

    samples, _ = extract_samples(fixture_corpus_dir / "f02.c", rel_path="f02.c")
    assert (samples[0].label_pragma, samples[0].label_private, samples[0].label_reduction) == (1, 0, 1)

    # outer annotated with private(j); inner nested loop is its own sample
    samples, _ = extract_samples(fixture_corpus_dir / "f03.c", rel_path="f03.c")
    assert len(samples) == 2
    assert (samples[0].label_pragma, samples[0].label_private) == (1, 1)
    assert (samples[1].label_pragma, samples[1].label_private) == (0, 0)


def test_firstprivate_does_not_set_private_label(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f12.c", rel_path="f12.c")
    assert (samples[0].label_pragma, samples[0].label_private) == (1, 0)


def test_orphaned_for_pragma_counts_positive(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f05.c", rel_path="f05.c")
    assert [s.label_pragma for s in samples] == [1, 0]
    samples, _ = extract_samples(fixture_corpus_dir / "f18.c", rel_path="f18.c")
    assert [s.label_pragma for s in samples] == [1]


def test_empty_loop_rejected():
    samples, rejects = extract_from_source(
        "void f(int n) { int i; for (i = 0; i < n; i++); }", "t.c")
    assert samples == []
    assert [(r.reason, r.line) for r in rejects] == [("empty_loop", 1)]


def test_blocking_pragma_inside_loop_rejected(fixture_corpus_dir):
    samples, rejects = extract_samples(fixture_corpus_dir / "f07.c", rel_path="f07.c")
    assert len(samples) == 1  # the clean loop survives
    assert [r.reason for r in rejects] == ["barrier_critical_atomic"]


def test_parse_error_rejects_whole_file(fixture_corpus_dir):
    samples, rejects = extract_samples(fixture_corpus_dir / "f10.c", rel_path="f10.c")
    assert samples == []
    assert [r.reason for r in rejects] == ["parse_error"]


def test_within_file_duplicate_rejected(fixture_corpus_dir):
    samples, rejects = extract_samples(fixture_corpus_dir / "f09.c", rel_path="f09.c")
    assert len(samples) == 1
    assert [r.reason for r in rejects] == ["nested_duplicate"]


def test_inner_pragmas_are_stripped_from_loop_code(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f19.c", rel_path="f19.c")
    outer = samples[0]
    assert "#pragma" not in outer.loop_code
    assert outer.label_pragma == 0  # the outer loop itself is unannotated


def test_context_extraction_with_scope(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f16.c", rel_path="f16.c",
                                 with_scope=True)
    context = samples[0].context_code.splitlines()
    assert context == [
        "int n;",
        "double *grid;",
        "double *next;",
        "int i;",
        "double scale;",
        "scale = w * 2.0;",
    ]
    assert samples[0].source_text().endswith(samples[0].loop_code)


def test_context_empty_without_scope(fixture_corpus_dir):
    samples, _ = extract_samples(fixture_corpus_dir / "f16.c", rel_path="f16.c")
    assert samples[0].context_code == ""
    assert samples[0].source_text() == samples[0].loop_code


def test_dfg_alignment_matches_sample_text(built_corpus):
    from ompadvisor.syntax import tokenize

    samples = built_corpus[0]
    for sample in samples:
        tokens = tokenize(sample.source_text())
        for name, tok_idx in sample.dfg["nodes"]:
            assert tokens[tok_idx].lexeme == name


# ---------------------------------------------------------------------------
# dedup

def test_dedup_identical_loops_across_files():
    a = make_sample(1, id="aaaa", path="a.c")
    b = make_sample(2, id="aaaa", path="b.c")
    kept = deduplicate([b, a])
    assert len(kept) == 1
    assert kept[0].path == "a.c"  # stable (path, offset) order


def test_dedup_is_rename_invariant(built_corpus):
    samples = built_corpus[0]
    sample = next(s for s in samples if s.label_pragma == 1)
    renamed = rename_variables(sample, 1.0, seed=9)
    assert renamed.id == sample.id
    assert len(deduplicate([sample, renamed])) == 1


def test_dedup_distinguishes_constants():
    h1 = content_hash("for (i = 0; i < 10; i++) {\na[i] = 0;\n}")
    h2 = content_hash("for (i = 0; i < 20; i++) {\na[i] = 0;\n}")
    assert h1 != h2


def test_dedup_idempotent(built_corpus):
    samples = built_corpus[0]
    once = deduplicate(samples)
    assert deduplicate(once) == once


# ---------------------------------------------------------------------------
# split

def test_split_ten_samples_exact():
    samples = [make_sample(i) for i in range(10)]
    split_corpus(samples, seed=7)
    counts = Counter(s.split for s in samples)
    assert counts == {"train": 8, "valid": 1, "test": 1}


def test_split_sizes_within_one_of_ratio():
    for n in (31, 100, 54663 // 50):
        samples = [make_sample(i) for i in range(n)]
        split_corpus(samples, seed=3)
        counts = Counter(s.split for s in samples)
        assert counts["valid"] == n // 10
        assert counts["test"] == n // 10
        assert counts["train"] == n - 2 * (n // 10)


def test_split_large_corpus_matches_floor_rule():
    n = 54663
    n_valid = n // 10
    assert (n - 2 * n_valid, n_valid, n_valid) == (43731, 5466, 5466)


def test_holdout_never_lands_in_train():
    for seed in range(12):
        samples = [make_sample(i) for i in range(30)]
        held = {samples[4].id, samples[17].id}
        split_corpus(samples, seed=seed, holdout_hashes=held)
        for s in samples:
            if s.id in held:
                assert s.split != "train"


def test_split_deterministic():
    a = [make_sample(i) for i in range(25)]
    b = [make_sample(i) for i in range(25)]
    split_corpus(a, seed=11)
    split_corpus(b, seed=11)
    assert [s.split for s in a] == [s.split for s in b]


# ---------------------------------------------------------------------------
# stats

def test_stats_consistency(built_corpus):
    samples, _, stats, _ = built_corpus
    lang = stats["languages"]["c"]
    assert lang["with_pragma"] + lang["without_pragma"] == stats["total"] == len(samples)
    assert sum(stats["length_buckets"].values()) == stats["total"]
    assert stats["clauses"]["private"] <= lang["with_pragma"]
    assert stats["clauses"]["reduction"] <= lang["with_pragma"]


def test_stats_length_buckets():
    short = make_sample(1, loop_code="\n".join(["x;"] * 10))
    mid = make_sample(2, loop_code="\n".join(["x;"] * 30))
    long_ = make_sample(3, loop_code="\n".join(["x;"] * 60))
    stats = compute_stats([short, mid, long_])
    assert stats["length_buckets"] == {"<=15": 1, "16-50": 1, ">50": 1}


# ---------------------------------------------------------------------------
# full build

def test_fixture_corpus_counts(built_corpus):
    samples, rejects, _, _ = built_corpus
    assert len(samples) == 31
    expected = {
        ("f06.c", "empty_loop"),
        ("f07.c", "barrier_critical_atomic"),
        ("f08.c", "barrier_critical_atomic"),
        ("f09.c", "nested_duplicate"),
        ("f10.c", "parse_error"),
    }
    assert {(r.path, r.reason) for r in rejects} == expected


def test_label_implication_on_every_sample(built_corpus):
    for s in built_corpus[0]:
        if s.label_private or s.label_reduction:
            assert s.label_pragma == 1
        assert (s.pragma_raw is None) == (s.label_pragma == 0)


def test_corpus_jsonl_schema(built_corpus):
    out_dir = built_corpus[3]
    with open(out_dir / "corpus.jsonl", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    assert len(lines) == 31
    for record in lines:
        assert tuple(record.keys()) == SAMPLE_KEYS
        assert set(record["dfg"].keys()) == {"nodes", "edges"}
        assert record["split"] in ("train", "valid", "test", "none")


def test_rejects_jsonl_schema(built_corpus):
    out_dir = built_corpus[3]
    with open(out_dir / "rejects.jsonl", encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    assert len(lines) == 5
    for record in lines:
        assert set(record.keys()) == {"path", "line", "reason"}


def test_build_is_deterministic(tmp_path, fixture_corpus_dir):
    build_corpus(fixture_corpus_dir, tmp_path / "one", seed=5)
    build_corpus(fixture_corpus_dir, tmp_path / "two", seed=5)
    for name in ("corpus.jsonl", "rejects.jsonl", "stats.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_build_independent_of_thread_count(tmp_path, fixture_corpus_dir, monkeypatch):
    monkeypatch.setenv("OMPADVISOR_THREADS", "1")
    build_corpus(fixture_corpus_dir, tmp_path / "one", seed=5)
    monkeypatch.setenv("OMPADVISOR_THREADS", "4")
    build_corpus(fixture_corpus_dir, tmp_path / "four", seed=5)
    assert (tmp_path / "one" / "corpus.jsonl").read_bytes() == \
        (tmp_path / "four" / "corpus.jsonl").read_bytes()


def test_benchmark_holdout(tmp_path, fixture_corpus_dir, fixture_benchmarks_dir):
    samples, rejects, _ = build_corpus(
        fixture_corpus_dir, tmp_path, seed=0, benchmarks_dir=fixture_benchmarks_dir)
    bench_path = tmp_path / "benchmarks.jsonl"
    assert bench_path.exists()
    with open(bench_path, encoding="utf-8") as fh:
        bench = [json.loads(line) for line in fh if line.strip()]
    bench_ids = {b["id"] for b in bench}
    overlapping = [s for s in samples if s.id in bench_ids]
    assert overlapping, "fixture should overlap the benchmarks"
    for s in overlapping:
        assert s.split != "train"
