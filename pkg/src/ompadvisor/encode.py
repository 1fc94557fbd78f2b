"""Vocabulary and model-input encoding.

An encoded sample is [CLS] + code token ids + [SEP] + one id per data-flow
node, with an additive attention mask: code positions (and CLS/SEP) attend
freely, data-flow nodes attend their graph neighbours, themselves and their
aligned code token. Masked pairs carry a large negative value that underflows
to an exact zero attention weight after softmax.
"""

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .syntax import tokenize

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
UNK_ID = 3
RESERVED = (("[PAD]", PAD_ID), ("[CLS]", CLS_ID), ("[SEP]", SEP_ID), ("[UNK]", UNK_ID))

MASK_NEG = -1e9  # stands in for -inf; underflows to weight 0 in float32 softmax

DEFAULT_MAX_CODE = 256
DEFAULT_MAX_DFG = 32
DEFAULT_MIN_FREQ = 2


@dataclass
class Vocabulary:
    token_to_id: dict
    min_freq: int

    @property
    def size(self):
        return len(self.token_to_id)

    def lookup(self, token):
        return self.token_to_id.get(token, UNK_ID)

    def to_json(self):
        return {"min_freq": self.min_freq, "tokens": self.token_to_id}

    @classmethod
    def from_json(cls, data):
        return cls(dict(data["tokens"]), data["min_freq"])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class EncodedInput:
    ids: list
    positions: list
    mask: np.ndarray  # (L, L) float32, entries in {0, MASK_NEG}
    dfg_alignment: list  # per node: code slot index, or None if truncated away
    labels: tuple
    edges: list = field(default_factory=list)  # kept (to, from) node pairs
    code_truncated: bool = False
    dfg_truncated: bool = False

    @property
    def length(self):
        return len(self.ids)


def sample_lexemes(sample):
    return [t.lexeme for t in tokenize(sample.source_text())]


def build_vocabulary(train_samples, min_freq=DEFAULT_MIN_FREQ):
    """Vocabulary over code-token lexemes and data-flow node names of the
    train split, ids dense from 4 in (frequency desc, lexeme asc) order."""
    if not train_samples:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for sample in train_samples:
        counts.update(sample_lexemes(sample))
        counts.update(name for name, _ in sample.dfg.get("nodes", []))
    token_to_id = {tok: i for tok, i in RESERVED}
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    for tok in kept:
        token_to_id[tok] = len(token_to_id)
    return Vocabulary(token_to_id, min_freq)


def build_attention_mask(n_code, dfg_alignment, edges, dtype=np.float32):
    """The additive (L, L) mask: 0 where attention is allowed, MASK_NEG
    elsewhere. Symmetric; every row keeps its diagonal open."""
    n_dfg = len(dfg_alignment)
    length = 1 + n_code + 1 + n_dfg
    sep = n_code + 1
    base = n_code + 2
    mask = np.full((length, length), MASK_NEG, dtype=dtype)
    mask[: sep + 1, : sep + 1] = 0.0  # code block including CLS and SEP
    mask[0, :] = 0.0
    mask[:, 0] = 0.0
    mask[sep, :] = 0.0
    mask[:, sep] = 0.0
    np.fill_diagonal(mask, 0.0)
    for i, slot in enumerate(dfg_alignment):
        if slot is None:
            continue
        if not 1 <= slot <= n_code:
            raise IndexError(f"alignment slot {slot} outside code block 1..{n_code}")
        mask[base + i, slot] = 0.0
        mask[slot, base + i] = 0.0
    for to, frm in edges:
        if not (0 <= to < n_dfg and 0 <= frm < n_dfg):
            raise IndexError(f"edge ({to}, {frm}) outside node range 0..{n_dfg - 1}")
        mask[base + to, base + frm] = 0.0
        mask[base + frm, base + to] = 0.0
    return mask


def encode_sample(sample, vocab, max_code=DEFAULT_MAX_CODE, max_dfg=DEFAULT_MAX_DFG):
    """Encode one sample: head-keep truncation for code, program-order
    truncation for data-flow nodes, edges to dropped nodes removed."""
    lexemes = sample_lexemes(sample)
    code_truncated = len(lexemes) > max_code
    lexemes = lexemes[:max_code]
    n_code = len(lexemes)

    nodes = sample.dfg.get("nodes", [])
    edges = sample.dfg.get("edges", [])
    dfg_truncated = len(nodes) > max_dfg
    nodes = nodes[:max_dfg]
    edges = [(t, f) for t, f in edges if t < len(nodes) and f < len(nodes)]

    alignment = []
    for _, tok_idx in nodes:
        alignment.append(1 + tok_idx if tok_idx < n_code else None)

    ids = [CLS_ID] + [vocab.lookup(t) for t in lexemes] + [SEP_ID]
    ids += [vocab.lookup(name) for name, _ in nodes]
    positions = [0] + list(range(1, n_code + 1)) + [0] + [0] * len(nodes)
    mask = build_attention_mask(n_code, alignment, edges)
    return EncodedInput(
        ids=ids,
        positions=positions,
        mask=mask,
        dfg_alignment=alignment,
        labels=(sample.label_pragma, sample.label_private, sample.label_reduction),
        edges=edges,
        code_truncated=code_truncated,
        dfg_truncated=dfg_truncated,
    )


def encode_corpus(samples, vocab, max_code=DEFAULT_MAX_CODE, max_dfg=DEFAULT_MAX_DFG):
    """Encode a sample list; returns (encodings, truncation stats)."""
    encoded = [encode_sample(s, vocab, max_code, max_dfg) for s in samples]
    stats = {
        "samples": len(encoded),
        "code_truncated": sum(e.code_truncated for e in encoded),
        "dfg_truncated": sum(e.dfg_truncated for e in encoded),
        "max_code": max_code,
        "max_dfg": max_dfg,
    }
    return encoded, stats
