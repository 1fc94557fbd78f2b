"""Command-line interface: build-corpus, augment, train, predict, evaluate,
stats and check-gradients subcommands.

Every artifact-producing run writes a run_config.json echoing its effective
options; identical inputs and seed give byte-identical outputs. Exit codes:
0 success, 1 usage error, 2 data error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .augment import fraction_for_mode, rename_variables
from .corpus import build_corpus, compute_stats, read_samples, write_jsonl
from .encode import (
    DEFAULT_MAX_CODE, DEFAULT_MAX_DFG, DEFAULT_MIN_FREQ, Vocabulary,
    build_vocabulary,
)
from .metrics import evaluate, format_report, rows_to_csv
from .model import (
    ModelConfig, TrainingDiverged, check_gradients, load_model, predict_source,
    save_model, small_config, train,
)
from .syntax import ParseError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_run_config(out_dir, command, options):
    payload = {"command": command, **options}
    with open(Path(out_dir) / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser():
    parser = _Parser(prog="ompadvisor",
                     description="Loop parallelization advisor pipeline")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="extract a labeled loop corpus from .c files")
    p.add_argument("src_dir")
    p.add_argument("--with-scope", action="store_true")
    p.add_argument("--benchmarks", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("augment", help="apply renaming augmentation to a corpus file")
    p.add_argument("corpus")
    p.add_argument("--mode", choices=("none", "curriculum", "replaced"), required=True)
    p.add_argument("--epoch", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("train", help="train the advisor on a built corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--aug", choices=("none", "curriculum", "replaced"), default="none")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--min-freq", type=int, default=DEFAULT_MIN_FREQ)
    p.add_argument("--max-code", type=int, default=DEFAULT_MAX_CODE)
    p.add_argument("--max-dfg", type=int, default=DEFAULT_MAX_DFG)
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--scale-d", dest="scale_mode", action="store_const", const="d")
    scale.add_argument("--scale-sqrt-d", dest="scale_mode", action="store_const",
                       const="sqrt_d")
    p.set_defaults(scale_mode="sqrt_d")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("predict", help="predict pragma needs for each loop in a file")
    p.add_argument("model_dir")
    p.add_argument("file")
    p.add_argument("--gate", action="store_true")
    p.add_argument("--json", dest="as_json", action="store_true")
    p.add_argument("--with-scope", action="store_true")

    p = sub.add_parser("evaluate", help="evaluate a model over a corpus or benchmark file")
    p.add_argument("model_dir")
    p.add_argument("corpus")
    p.add_argument("--gate", action="store_true")
    p.add_argument("--split", default="test",
                   help="which split to evaluate (test, valid, train, all)")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("stats", help="print corpus distribution tables")
    p.add_argument("corpus")

    p = sub.add_parser("check-gradients", help="verify gradients against finite differences")
    p.add_argument("--config", choices=("small",), default="small")
    p.add_argument("--seed", type=int, default=0)

    return parser


# ---------------------------------------------------------------------------
# subcommand implementations

def _cmd_build_corpus(args):
    if not Path(args.src_dir).is_dir():
        raise FileNotFoundError(f"source directory not found: {args.src_dir}")
    samples, rejects, stats = build_corpus(
        args.src_dir, args.out, with_scope=args.with_scope,
        benchmarks_dir=args.benchmarks, seed=args.seed,
    )
    _write_run_config(args.out, "build-corpus", {
        "src_dir": args.src_dir, "with_scope": args.with_scope,
        "benchmarks": args.benchmarks, "seed": args.seed, "out": args.out,
    })
    print(f"corpus: {len(samples)} samples, {len(rejects)} rejects -> {args.out}")
    return 0


def _cmd_augment(args):
    samples = read_samples(args.corpus)
    fraction = fraction_for_mode(args.mode, args.epoch)
    out = [rename_variables(s, fraction, args.seed + args.epoch) for s in samples]
    write_jsonl(args.out, [s.to_json_dict() for s in out])
    sidecar = Path(args.out).with_name(Path(args.out).name + ".run_config.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"command": "augment", "corpus": args.corpus, "mode": args.mode,
                   "epoch": args.epoch, "seed": args.seed, "fraction": fraction,
                   "out": args.out}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"augmented {len(out)} samples at fraction {fraction} -> {args.out}")
    return 0


def _cmd_train(args):
    corpus_path = Path(args.corpus_dir) / "corpus.jsonl"
    if not corpus_path.exists():
        raise FileNotFoundError(f"no corpus.jsonl under {args.corpus_dir}")
    samples = read_samples(corpus_path)

    def log(record):
        print(f"epoch {record['epoch']:>2}  fraction {record['fraction']:.1f}  "
              f"train_loss {record['train_loss']:.4f}  "
              f"valid_loss {record['valid_loss']:.4f}  "
              f"valid_acc {record['valid_accuracy']:.3f}")

    train_samples = [s for s in samples if s.split == "train"]
    if not train_samples:
        raise ValueError("corpus has no train split")
    vocab = build_vocabulary(train_samples, args.min_freq)
    config = ModelConfig(
        vocab_size=vocab.size, d_model=args.d_model, n_heads=args.n_heads,
        n_layers=args.n_layers, d_ff=args.d_ff, dropout_rate=args.dropout,
        seed=args.seed, scale_mode=args.scale_mode,
    )
    result = train(
        samples, config=config, epochs=args.epochs, aug_mode=args.aug,
        seed=args.seed, min_freq=args.min_freq, max_code=args.max_code,
        max_dfg=args.max_dfg, batch_size=args.batch_size, lr=args.lr, log=log,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.bin", result.params, result.config)
    result.vocab.save(out / "vocab.json")
    with open(out / "history.json", "w", encoding="utf-8") as fh:
        json.dump(result.history, fh, indent=2)
        fh.write("\n")
    with open(out / "encode_stats.json", "w", encoding="utf-8") as fh:
        json.dump(result.encode_stats, fh, indent=2)
        fh.write("\n")
    _write_run_config(out, "train", {
        "corpus_dir": args.corpus_dir, "aug": args.aug, "epochs": args.epochs,
        "seed": args.seed, "batch_size": args.batch_size, "lr": args.lr,
        "d_model": args.d_model, "n_heads": args.n_heads,
        "n_layers": args.n_layers, "d_ff": args.d_ff, "dropout": args.dropout,
        "min_freq": args.min_freq, "max_code": args.max_code,
        "max_dfg": args.max_dfg, "scale_mode": args.scale_mode, "out": args.out,
    })
    print(f"model -> {out}")
    return 0


def _load_model_dir(model_dir):
    model_path = Path(model_dir) / "model.bin"
    vocab_path = Path(model_dir) / "vocab.json"
    if not model_path.exists() or not vocab_path.exists():
        raise FileNotFoundError(f"{model_dir} does not hold model.bin + vocab.json")
    params, config = load_model(model_path)
    vocab = Vocabulary.load(vocab_path)
    options = {}
    run_config = Path(model_dir) / "run_config.json"
    if run_config.exists():
        with open(run_config, encoding="utf-8") as fh:
            options = json.load(fh)
    return params, config, vocab, options


def _cmd_predict(args):
    params, config, vocab, options = _load_model_dir(args.model_dir)
    source = Path(args.file).read_text(encoding="utf-8")
    results = predict_source(
        params, config, vocab, source, gate=args.gate,
        with_scope=args.with_scope,
        max_code=options.get("max_code", DEFAULT_MAX_CODE),
        max_dfg=options.get("max_dfg", DEFAULT_MAX_DFG),
    )
    if args.as_json:
        printable = [{k: v for k, v in r.items() if k != "loop_code"} for r in results]
        print(json.dumps(printable, indent=2))
    else:
        for r in results:
            probs = r["probs"]
            labels = r["labels"]
            print(f"line {r['line']:>4}  "
                  f"pragma={labels['pragma']} ({probs['pragma']:.3f})  "
                  f"private={labels['private']} ({probs['private']:.3f})  "
                  f"reduction={labels['reduction']} ({probs['reduction']:.3f})")
        if not results:
            print("no loops found")
    return 0


def _cmd_evaluate(args):
    params, config, vocab, options = _load_model_dir(args.model_dir)
    samples = read_samples(args.corpus)
    if args.split != "all":
        filtered = [s for s in samples if s.split == args.split]
        samples = filtered if filtered else samples
    report, rows = evaluate(
        params, config, vocab, samples,
        max_code=options.get("max_code", DEFAULT_MAX_CODE),
        max_dfg=options.get("max_dfg", DEFAULT_MAX_DFG),
    )
    report["gate"] = args.gate
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(format_report(report))
    with open(out / "per_sample.csv", "w", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))
    _write_run_config(out, "evaluate", {
        "model_dir": args.model_dir, "corpus": args.corpus, "gate": args.gate,
        "split": args.split, "out": args.out,
    })
    mode = "gated" if args.gate else "raw"
    block = report[mode]
    print(format_report(report), end="")
    print(f"-> {out} ({mode} macro acc {block['macro']['accuracy']:.3f})")
    return 0


def _cmd_stats(args):
    samples = read_samples(args.corpus)
    stats = compute_stats(samples)
    lang = stats["languages"]["c"]
    print(f"total samples: {stats['total']}")
    print("language  with_pragma  without_pragma")
    print(f"c         {lang['with_pragma']:>11}  {lang['without_pragma']:>14}")
    print("clause     amount")
    print(f"private    {stats['clauses']['private']:>6}")
    print(f"reduction  {stats['clauses']['reduction']:>6}")
    print("lines    amount")
    for bucket in ("<=15", "16-50", ">50"):
        print(f"{bucket:<8} {stats['length_buckets'][bucket]:>6}")
    return 0


def _cmd_check_gradients(args):
    worst = 0.0
    for scale_mode in ("sqrt_d", "d"):
        for mask_mode in ("open", "random"):
            err, _ = check_gradients(
                config=small_config(scale_mode=scale_mode),
                mask_mode=mask_mode, seed=args.seed,
            )
            worst = max(worst, err)
            print(f"scale={scale_mode:<7} mask={mask_mode:<7} max_rel_err={err:.3e}")
    print(f"overall max relative error: {worst:.3e} "
          f"({'OK' if worst < 1e-3 else 'FAIL'})")
    return 0 if worst < 1e-3 else 2


_COMMANDS = {
    "build-corpus": _cmd_build_corpus,
    "augment": _cmd_augment,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "stats": _cmd_stats,
    "check-gradients": _cmd_check_gradients,
}


def execute_command(argv):
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, ParseError, TrainingDiverged, ValueError,
            json.JSONDecodeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(execute_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
