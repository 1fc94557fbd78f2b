"""Per-label precision/recall/accuracy, evaluation reports and CSV export."""

import csv
import io
from dataclasses import dataclass

from .encode import encode_corpus
from .model import forward_batch, pad_batch

LABELS = ("pragma", "private", "reduction")

# Full-scale reference point shown in report footers for context; never
# asserted by any test.
REFERENCE_POINT = {"pragma": {"precision": 0.849, "recall": 0.848, "accuracy": 0.872}}

CSV_COLUMNS = (
    "id", "p_pragma", "p_private", "p_reduction",
    "label_pragma", "label_private", "label_reduction",
    "pred_pragma", "pred_private", "pred_reduction",
)


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def add(self, pred, truth):
        if pred and truth:
            self.tp += 1
        elif pred and not truth:
            self.fp += 1
        elif not pred and truth:
            self.fn += 1
        else:
            self.tn += 1

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def compute_metrics(confusion):
    """(precision, recall, accuracy); zero denominators yield 0.0."""
    total = confusion.total
    if total == 0:
        raise ValueError("cannot compute metrics over zero samples")
    tp, fp, fn = confusion.tp, confusion.fp, confusion.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    accuracy = (tp + confusion.tn) / total
    return precision, recall, accuracy


def _gated_preds(preds):
    return preds if preds[0] else (0, 0, 0)


def confusions_from_rows(rows, gated):
    """Per-label confusion matrices from per-sample rows."""
    out = {label: Confusion() for label in LABELS}
    for row in rows:
        preds = (row["pred_pragma"], row["pred_private"], row["pred_reduction"])
        if gated:
            preds = _gated_preds(preds)
        truths = (row["label_pragma"], row["label_private"], row["label_reduction"])
        for label, pred, truth in zip(LABELS, preds, truths):
            out[label].add(pred, truth)
    return out


def _metric_block(confusions):
    block = {}
    macro = {"precision": 0.0, "recall": 0.0, "accuracy": 0.0}
    for label in LABELS:
        c = confusions[label]
        precision, recall, accuracy = compute_metrics(c)
        block[label] = {
            "precision": precision, "recall": recall, "accuracy": accuracy,
            "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
        }
        macro["precision"] += precision / len(LABELS)
        macro["recall"] += recall / len(LABELS)
        macro["accuracy"] += accuracy / len(LABELS)
    block["macro"] = macro
    return block


def report_from_rows(rows):
    """The metrics report (raw and gated) recomputable from CSV rows alone."""
    if not rows:
        raise ValueError("cannot evaluate an empty sample list")
    return {
        "n": len(rows),
        "raw": _metric_block(confusions_from_rows(rows, gated=False)),
        "gated": _metric_block(confusions_from_rows(rows, gated=True)),
        "reference": REFERENCE_POINT,
    }


def predict_rows(params, config, vocab, samples, max_code=256, max_dfg=32,
                 batch_size=64):
    """Per-sample probabilities and 0.5-threshold predictions."""
    encodings, _ = encode_corpus(samples, vocab, max_code, max_dfg)
    rows = []
    for start in range(0, len(encodings), batch_size):
        chunk = encodings[start : start + batch_size]
        ids, positions, mask, _ = pad_batch(chunk)
        probs, _ = forward_batch(params, config, ids, positions, mask)
        for sample, p in zip(samples[start : start + batch_size], probs):
            rows.append({
                "id": sample.id,
                "p_pragma": float(p[0]),
                "p_private": float(p[1]),
                "p_reduction": float(p[2]),
                "label_pragma": sample.label_pragma,
                "label_private": sample.label_private,
                "label_reduction": sample.label_reduction,
                "pred_pragma": int(p[0] >= 0.5),
                "pred_private": int(p[1] >= 0.5),
                "pred_reduction": int(p[2] >= 0.5),
            })
    return rows


def evaluate(params, config, vocab, samples, max_code=256, max_dfg=32):
    """Evaluate samples: (report dict, per-sample rows). The report carries
    both raw and gated metrics; per-benchmark blocks are added when the
    samples span several top-level directories."""
    if not samples:
        raise ValueError("cannot evaluate an empty sample list")
    rows = predict_rows(params, config, vocab, samples, max_code, max_dfg)
    report = report_from_rows(rows)

    groups = sorted({s.path.split("/", 1)[0] for s in samples})
    if len(groups) > 1:
        by_group = {}
        row_by_index = dict(enumerate(rows))
        for name in groups:
            group_rows = [
                row_by_index[i] for i, s in enumerate(samples)
                if s.path.split("/", 1)[0] == name
            ]
            by_group[name] = report_from_rows(group_rows)
        report["groups"] = by_group
    return report, rows


# ---------------------------------------------------------------------------
# rendering

def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k]
                         for k in CSV_COLUMNS})
    return buf.getvalue()


def rows_from_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for record in reader:
        rows.append({
            "id": record["id"],
            "p_pragma": float(record["p_pragma"]),
            "p_private": float(record["p_private"]),
            "p_reduction": float(record["p_reduction"]),
            "label_pragma": int(record["label_pragma"]),
            "label_private": int(record["label_private"]),
            "label_reduction": int(record["label_reduction"]),
            "pred_pragma": int(record["pred_pragma"]),
            "pred_private": int(record["pred_private"]),
            "pred_reduction": int(record["pred_reduction"]),
        })
    return rows


def _format_block(name, block, out):
    for label in LABELS + ("macro",):
        entry = block[label]
        line = (f"{name:<6} {label:<10} "
                f"P={entry['precision']:.3f} R={entry['recall']:.3f} "
                f"Acc={entry['accuracy']:.3f}")
        if label != "macro":
            line += (f"  tp={entry['tp']} fp={entry['fp']} "
                     f"fn={entry['fn']} tn={entry['tn']}")
        out.append(line)


def format_report(report):
    out = [f"samples: {report['n']}"]
    _format_block("raw", report["raw"], out)
    _format_block("gated", report["gated"], out)
    for name, block in report.get("groups", {}).items():
        out.append(f"-- {name} ({block['n']} samples)")
        _format_block("raw", block["raw"], out)
    ref = report["reference"]["pragma"]
    out.append(
        "reference full-scale run (context only, not asserted): pragma "
        f"P={ref['precision']:.3f} R={ref['recall']:.3f} Acc={ref['accuracy']:.3f}"
    )
    return "\n".join(out) + "\n"
