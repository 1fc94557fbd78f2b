"""Corpus construction: loop extraction, labeling, dedup, split, stats.

A corpus is a JSONL file of labeled loop samples extracted from a tree of
`.c` files. Loops keep their annotation labels (pragma / private /
reduction), are deduplicated by a rename-invariant content hash, and are
split 80/10/10 with optional benchmark holdout.
"""

import json
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dfg import build_dfg, dfg_to_json
from .pragmas import PragmaError, parse_omp_pragma
from .syntax import (
    AstNode, ParseError, iter_nodes, parse_snippet, parse_source, render, tokenize,
)

SAMPLE_KEYS = (
    "id", "path", "loop_code", "context_code", "pragma_raw",
    "label_pragma", "label_private", "label_reduction", "dfg", "split",
)

BLOCKING_DIRECTIVES = frozenset({"barrier", "critical", "atomic"})
POSITIVE_DIRECTIVES = frozenset({"parallel_for", "for"})


@dataclass
class Sample:
    id: str
    path: str
    loop_code: str
    context_code: str
    pragma_raw: str
    label_pragma: int
    label_private: int
    label_reduction: int
    dfg: dict
    split: str = "none"
    offset: int = field(default=0, repr=False, compare=False)  # not serialized

    def source_text(self):
        """The model-facing snippet: context (when present) then the loop."""
        if self.context_code:
            return self.context_code + "\n" + self.loop_code
        return self.loop_code

    def to_json_dict(self):
        return {key: getattr(self, key) for key in SAMPLE_KEYS}

    @classmethod
    def from_json_dict(cls, data):
        return cls(**{key: data[key] for key in SAMPLE_KEYS})


@dataclass
class Reject:
    path: str
    line: int
    reason: str  # parse_error | empty_loop | barrier_critical_atomic | nested_duplicate


# ---------------------------------------------------------------------------
# rename-invariant content hash

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def normalized_tokens(code_text):
    """Token sequence with identifiers rewritten to v0, v1, ... by first use."""
    out = []
    mapping = {}
    for tok in tokenize(code_text):
        if tok.kind == "identifier":
            if tok.lexeme not in mapping:
                mapping[tok.lexeme] = f"v{len(mapping)}"
            out.append(mapping[tok.lexeme])
        else:
            out.append(tok.lexeme)
    return out


def content_hash(code_text) -> str:
    normalized = " ".join(normalized_tokens(code_text))
    return format(fnv1a64(normalized.encode("utf-8")), "016x")


# ---------------------------------------------------------------------------
# extraction

def _strip_pragmas(node):
    """Copy of the subtree with all pragma directives removed (serial form)."""
    children = [_strip_pragmas(c) for c in node.children if c.kind != "PragmaDirective"]
    return AstNode(node.kind, children, node.token_span, dict(node.attrs))


def _parent_map(root):
    parents = {}
    for node in iter_nodes(root):
        for child in node.children:
            parents[id(child)] = node
    return parents


def _attached_pragma(loop, parents):
    parent = parents.get(id(loop))
    if parent is None:
        return None
    siblings = parent.children
    idx = next(i for i, c in enumerate(siblings) if c is loop)
    if idx > 0 and siblings[idx - 1].kind == "PragmaDirective":
        return siblings[idx - 1].attrs["raw"]
    return None


def _loop_is_empty(loop):
    body = loop.children[3]
    return all(c.kind == "Empty" for c in body.children)


def _has_blocking_pragma(loop, attached_raw):
    raws = [attached_raw] if attached_raw else []
    raws += [n.attrs["raw"] for n in iter_nodes(loop) if n.kind == "PragmaDirective"]
    for raw in raws:
        try:
            if parse_omp_pragma(raw).directive in BLOCKING_DIRECTIVES:
                return True
        except PragmaError:
            continue
    return False


def _used_variables(loop):
    return {n.attrs["name"] for n in iter_nodes(loop) if n.kind == "Identifier"}


def _assign_target_name(stmt):
    if stmt.kind != "ExprStmt" or not stmt.children:
        return None
    expr = stmt.children[0]
    if expr.kind != "Assign":
        return None
    base = expr.children[0]
    while base.kind == "ArrayIndex":
        base = base.children[0]
    return base.attrs["name"] if base.kind == "Identifier" else None


def _declared_name(decl):
    declarator = decl.children[0]
    if declarator.kind == "Assign":
        declarator = declarator.children[0]
    if declarator.kind == "ArrayIndex":
        declarator = declarator.children[0]
    return declarator.attrs["name"]


def _span_contains(outer, inner):
    return outer.token_span[0] <= inner.token_span[0] and inner.token_span[1] <= outer.token_span[1]


def _collect_candidates(stmt, used, out):
    """Collect declarations/assignments of loop-used variables, recursively."""
    if stmt.kind == "Declaration":
        if _declared_name(stmt) in used:
            out.append(stmt)
        return
    target = _assign_target_name(stmt)
    if target is not None:
        if target in used:
            out.append(stmt)
        return
    if stmt.kind == "CompoundStmt":
        for child in stmt.children:
            _collect_candidates(child, used, out)
    elif stmt.kind == "IfStmt":
        for child in stmt.children[1:]:
            _collect_candidates(child, used, out)
    elif stmt.kind in ("ForStmt", "WhileStmt"):
        if stmt.kind == "ForStmt":
            _collect_candidates(stmt.children[0], used, out)
        _collect_candidates(stmt.children[-1], used, out)


def _context_statements(container, loop, used, out):
    """Walk statements before `loop` inside `container`, collecting context."""
    for stmt in container.children:
        if stmt is loop:
            return True
        if _span_contains(stmt, loop):
            if stmt.kind == "ForStmt":
                init = stmt.children[0]
                if init.kind == "Declaration" and _declared_name(init) in used:
                    out.append(init)
                elif _assign_target_name_expr(init) in used:
                    out.append(init)
                return _context_statements(stmt.children[3], loop, used, out)
            if stmt.kind == "WhileStmt":
                return _context_statements(stmt.children[1], loop, used, out)
            if stmt.kind == "IfStmt":
                for branch in stmt.children[1:]:
                    if _span_contains(branch, loop):
                        return _context_statements(branch, loop, used, out)
                return True
            if stmt.kind == "CompoundStmt":
                return _context_statements(stmt, loop, used, out)
            return True
        _collect_candidates(stmt, used, out)
    return False


def _assign_target_name_expr(init):
    if init.kind != "ExprStmt":
        return None
    return _assign_target_name(init)


def _render_context(statements):
    return "\n".join(render(_strip_pragmas(stmt)) for stmt in statements)


def extract_from_source(source_text, path, with_scope=False):
    """Extract labeled loop samples from one file's text.

    Returns (samples, rejects). A file that fails to parse yields a single
    parse_error reject; loops are otherwise judged independently, at every
    nesting depth.
    """
    rejects = []
    try:
        unit, tokens = parse_source(source_text)
    except ParseError as err:
        rejects.append(Reject(path, err.line, "parse_error"))
        return [], rejects

    parents = _parent_map(unit)
    samples = []
    seen_hashes = set()
    for func in unit.children:
        if func.kind != "FunctionDef":
            continue
        body = func.children[-1]
        loops = [n for n in iter_nodes(body) if n.kind == "ForStmt"]
        for loop in loops:
            line = tokens[loop.token_span[0]].line
            attached = _attached_pragma(loop, parents)
            if _loop_is_empty(loop):
                rejects.append(Reject(path, line, "empty_loop"))
                continue
            if _has_blocking_pragma(loop, attached):
                rejects.append(Reject(path, line, "barrier_critical_atomic"))
                continue

            loop_code = render(_strip_pragmas(loop))
            sample_id = content_hash(loop_code)
            if sample_id in seen_hashes:
                rejects.append(Reject(path, line, "nested_duplicate"))
                continue
            seen_hashes.add(sample_id)

            label_pragma = label_private = label_reduction = 0
            pragma_raw = None
            if attached:
                try:
                    pragma = parse_omp_pragma(attached)
                except PragmaError:
                    pragma = None
                if pragma is not None and pragma.directive in POSITIVE_DIRECTIVES:
                    label_pragma = 1
                    pragma_raw = attached
                    label_private = int(pragma.has_clause("private"))
                    label_reduction = int(pragma.has_clause("reduction"))

            context_code = ""
            if with_scope:
                used = _used_variables(loop)
                collected = [p for p in func.children[:-1] if _declared_name(p) in used]
                _context_statements(body, loop, used, collected)
                context_code = _render_context(collected)

            sample = Sample(
                id=sample_id,
                path=path,
                loop_code=loop_code,
                context_code=context_code,
                pragma_raw=pragma_raw,
                label_pragma=label_pragma,
                label_private=label_private,
                label_reduction=label_reduction,
                dfg={},
                split="none",
                offset=loop.token_span[0],
            )
            text = sample.source_text()
            snippet, snippet_tokens = parse_snippet(text)
            sample.dfg = dfg_to_json(build_dfg(snippet, snippet_tokens))
            samples.append(sample)
    return samples, rejects


def extract_samples(file_path, with_scope=False, rel_path=None):
    """File wrapper around extract_from_source."""
    text = Path(file_path).read_text(encoding="utf-8")
    return extract_from_source(text, rel_path or str(file_path), with_scope)


def extract_for_prediction(source_text, with_scope=False):
    """Every loop in the file as an unlabeled sample, no exclusion rules.

    Returns a list of {"sample": Sample, "line": int}; raises ParseError if
    the file does not parse.
    """
    unit, tokens = parse_source(source_text)
    out = []
    for func in unit.children:
        if func.kind != "FunctionDef":
            continue
        body = func.children[-1]
        for loop in (n for n in iter_nodes(body) if n.kind == "ForStmt"):
            loop_code = render(_strip_pragmas(loop))
            context_code = ""
            if with_scope:
                used = _used_variables(loop)
                collected = [p for p in func.children[:-1] if _declared_name(p) in used]
                _context_statements(body, loop, used, collected)
                context_code = _render_context(collected)
            sample = Sample(
                id=content_hash(loop_code),
                path="<input>",
                loop_code=loop_code,
                context_code=context_code,
                pragma_raw=None,
                label_pragma=0,
                label_private=0,
                label_reduction=0,
                dfg={},
                split="none",
                offset=loop.token_span[0],
            )
            snippet, snippet_tokens = parse_snippet(sample.source_text())
            sample.dfg = dfg_to_json(build_dfg(snippet, snippet_tokens))
            out.append({"sample": sample, "line": tokens[loop.token_span[0]].line})
    return out


# ---------------------------------------------------------------------------
# dedup / split / stats

def deduplicate(samples):
    """Keep the first sample per content hash, in (path, offset) order."""
    ordered = sorted(samples, key=lambda s: (s.path, s.offset))
    seen = set()
    kept = []
    for sample in ordered:
        if sample.id in seen:
            continue
        seen.add(sample.id)
        kept.append(sample)
    return kept


def split_corpus(samples, seed, holdout_hashes=frozenset()):
    """Assign train/valid/test splits: seeded shuffle, 80/10/10 by position.

    Samples whose hash appears in holdout_hashes never land in train; they
    get split="none" instead.
    """
    n = len(samples)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_valid = n // 10
    n_test = n // 10
    n_train = n - n_valid - n_test
    for rank, idx in enumerate(order):
        if rank < n_train:
            split = "train"
        elif rank < n_train + n_valid:
            split = "valid"
        else:
            split = "test"
        if split == "train" and samples[idx].id in holdout_hashes:
            split = "none"
        samples[idx].split = split
    return samples


def compute_stats(samples):
    with_pragma = sum(s.label_pragma for s in samples)
    short = mid = long_ = 0
    for s in samples:
        lines = len(s.loop_code.splitlines())
        if lines <= 15:
            short += 1
        elif lines <= 50:
            mid += 1
        else:
            long_ += 1
    return {
        "total": len(samples),
        "languages": {
            "c": {
                "with_pragma": with_pragma,
                "without_pragma": len(samples) - with_pragma,
            }
        },
        "clauses": {
            "private": sum(s.label_private for s in samples),
            "reduction": sum(s.label_reduction for s in samples),
        },
        "length_buckets": {
            "<=15": short,
            "16-50": mid,
            ">50": long_,
        },
    }


# ---------------------------------------------------------------------------
# corpus build orchestration

def _list_c_files(root):
    root = Path(root)
    return sorted(p for p in root.rglob("*.c") if p.is_file())


def _extract_tree(root, with_scope, threads):
    files = _list_c_files(root)
    rels = [str(p.relative_to(root)) for p in files]

    def work(pair):
        path, rel = pair
        return extract_samples(path, with_scope, rel_path=rel)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, zip(files, rels)))
    else:
        results = [work(pair) for pair in zip(files, rels)]

    samples, rejects = [], []
    for s, r in results:
        samples.extend(s)
        rejects.extend(r)
    samples.sort(key=lambda s: (s.path, s.offset))
    rejects.sort(key=lambda r: (r.path, r.line, r.reason))
    return samples, rejects


def thread_count():
    try:
        return max(1, int(os.environ.get("OMPADVISOR_THREADS", "1")))
    except ValueError:
        return 1


def write_jsonl(path, dicts):
    with open(path, "w", encoding="utf-8") as fh:
        for d in dicts:
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")


def read_samples(path):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(Sample.from_json_dict(json.loads(line)))
    return samples


def build_corpus(src_dir, out_dir, with_scope=False, benchmarks_dir=None, seed=0):
    """Build corpus.jsonl, rejects.jsonl and stats.json under out_dir.

    When benchmarks_dir is given, its files are extracted with the same
    rules into benchmarks.jsonl and their hashes are held out of train.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = thread_count()

    samples, rejects = _extract_tree(src_dir, with_scope, threads)
    samples = deduplicate(samples)

    holdout = frozenset()
    if benchmarks_dir is not None:
        bench_samples, bench_rejects = _extract_tree(benchmarks_dir, with_scope, threads)
        bench_samples = deduplicate(bench_samples)
        holdout = frozenset(s.id for s in bench_samples)
        rejects.extend(bench_rejects)
        write_jsonl(out / "benchmarks.jsonl", [s.to_json_dict() for s in bench_samples])

    split_corpus(samples, seed, holdout)
    write_jsonl(out / "corpus.jsonl", [s.to_json_dict() for s in samples])
    write_jsonl(out / "rejects.jsonl",
                [{"path": r.path, "line": r.line, "reason": r.reason} for r in rejects])
    stats = compute_stats(samples)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2)
        fh.write("\n")
    return samples, rejects, stats
