"""Command line interface: one subcommand per pipeline stage.

    osamtl gen     --out-dir DIR [--config FILE] [--seed N]
    osamtl prove   [--corpus-dir DIR]
    osamtl abduce  --corpus PATH --out-dir DIR [--config FILE]
    osamtl train   --solution NAME --out-dir DIR [--config FILE] [--corpus PATH] [--seed N]
    osamtl eval    --model FILE --corpus PATH [--config FILE] [--out-dir DIR]
    osamtl run     --out-dir DIR [--config FILE] [--seed N]
    osamtl report  --result-dir DIR

`prove` exits 0 when every shipped reasoning validates, 1 with a
step-localized message when one fails, and 2 when the corpus directory
is missing.  `run` executes the whole experiment and aborts with the
failing stage's name on any error.  The environment variable
OSAMTL_THREADS caps how many solutions train in parallel.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    ExperimentError,
    default_config,
    load_config,
    override_seed,
    parse_solution,
    prepare_data,
    regenerate_charts,
    resolve_transition,
    run_experiment,
    write_overlays,
    _train_solution,
)
from .imaging import abduce_targets, save_mask
from .laf import (
    aggregate_laf,
    binarize,
    laf_counts,
    pooled_oracle_metrics,
    report_csv_row,
)
from .logic.suite import CORPUS_DIR, run_reasoning_suite
from .mtl.models import load_model, predict, save_model
from .mtl.train import write_trace
from .synthgen import gen_corpus, load_corpus


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        config = override_seed(config, args.seed)
    return config


def cmd_gen(args: argparse.Namespace) -> int:
    config = _config_from(args)
    out_dir = Path(args.out_dir)
    manifest = gen_corpus(config.gen, config.n_train, config.n_val,
                          config.n_test, out_dir)
    total = sum(len(v) for v in manifest.values())
    print(f"wrote {total} patches to {out_dir} (manifest.json inside)")
    return 0


def cmd_prove(corpus_dir: Path | str | None = None) -> int:
    """Check every shipped reasoning; exit status encodes the outcome."""
    directory = Path(corpus_dir) if corpus_dir is not None else CORPUS_DIR
    if not directory.is_dir():
        print(f"error: proof corpus directory not found: {directory}",
              file=sys.stderr)
        return 2
    outcomes = run_reasoning_suite(directory)
    status = 0
    for name, report in outcomes:
        if report.valid:
            print(f"{name}: valid")
        else:
            step, reason = report.first_failure
            print(f"{name}: INVALID at step {step}: {reason}")
            status = 1
    return status


def cmd_abduce(args: argparse.Namespace) -> int:
    config = _config_from(args)
    corpus = Path(args.corpus)
    manifest_path = corpus / "manifest.json" if corpus.is_dir() else corpus
    splits = load_corpus(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for split in ("train", "val", "test"):
        for patch, rel in zip(splits[split], manifest[split]):
            stem = Path(rel).name.removesuffix(".png")
            targets = abduce_targets(patch.image, list(patch.polygons),
                                     config.abduction)
            save_mask(targets.target1, out_dir / f"{stem}_t1.png")
            save_mask(targets.target2, out_dir / f"{stem}_t2.png")
            written += 1
    print(f"abduced targets for {written} patches into {out_dir}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _config_from(args)
    parse_solution(args.solution)
    if args.corpus:
        config = replace(config, corpus_path=Path(args.corpus))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = prepare_data(config, out_dir)
    if not data.examples["train"]:
        print("error: train split is empty", file=sys.stderr)
        return 1
    transition = resolve_transition(config, data)
    result, elapsed = _train_solution(args.solution, config, data, transition)
    model_path = out_dir / f"{args.solution}.json"
    save_model(result.model, model_path)
    write_trace(result.trace, out_dir / f"{args.solution}_trace.csv")
    print(f"trained {args.solution} in {elapsed:.1f}s "
          f"(best epoch {result.best_epoch}); model at {model_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from(args)
    model = load_model(args.model)
    corpus = Path(args.corpus)
    manifest_path = corpus / "manifest.json" if corpus.is_dir() else corpus
    splits = load_corpus(manifest_path)
    patches = splits["test"] or splits["val"] or splits["train"]
    if not patches:
        print("error: corpus has no patches to evaluate", file=sys.stderr)
        return 1
    counts = []
    oracle_pairs = []
    for patch in patches:
        targets = abduce_targets(patch.image, list(patch.polygons),
                                 config.abduction)
        t_f, t_b = binarize(predict(model, patch.image).probs)
        counts.append(laf_counts(t_f, t_b, targets.target1, targets.target2))
        oracle_pairs.append((t_f, patch.true_mask))
    report = aggregate_laf(counts)
    oracle = pooled_oracle_metrics(oracle_pairs)
    name = Path(args.model).stem
    laf_row = report_csv_row(name, report)
    oracle_row = (f"{name},{oracle.precision:.4f},{oracle.recall:.4f},"
                  f"{oracle.f1:.4f},{oracle.iou:.4f}")
    print("solution,ltp,lfp,lfn,lprecision,lrecall,lf1,lfiou")
    print(laf_row)
    print("solution,precision,recall,f1,iou")
    print(oracle_row)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "eval.csv").write_text(
            "solution,ltp,lfp,lfn,lprecision,lrecall,lf1,lfiou\n" + laf_row + "\n",
            encoding="utf-8",
        )
        (out_dir / "eval_oracle.csv").write_text(
            "solution,precision,recall,f1,iou\n" + oracle_row + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from(args)
    out_dir = Path(args.out_dir)
    try:
        table = run_experiment(config, out_dir)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print("solution,ltp,lfp,lfn,lprecision,lrecall,lf1,lfiou")
    for row in table.rows:
        print(report_csv_row(row.name, row.laf))
    print(f"artifacts written to {out_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    result_dir = Path(args.result_dir)
    try:
        charts = regenerate_charts(result_dir)
        overlays = write_overlays(result_dir)
    except (FileNotFoundError, ValueError) as exc:
        message = str(exc)
        if "nothing to report" not in message:
            message = f"nothing to report: {message}"
        print(f"error: {message}", file=sys.stderr)
        return 1
    print(f"wrote {charts} charts and {overlays} overlays under {result_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osamtl",
        description="abductive multi-target learning lab: generate, prove, "
                    "abduce, train, evaluate, and report",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic corpus")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--config")
    gen.add_argument("--seed", type=int)

    prove = sub.add_parser("prove", help="validate the reasoning corpus")
    prove.add_argument("--corpus-dir")

    abduce = sub.add_parser("abduce", help="write abduced target masks")
    abduce.add_argument("--corpus", required=True,
                        help="corpus directory or manifest.json")
    abduce.add_argument("--out-dir", required=True)
    abduce.add_argument("--config")

    train_cmd = sub.add_parser("train", help="train one solution")
    train_cmd.add_argument("--solution", required=True)
    train_cmd.add_argument("--out-dir", required=True)
    train_cmd.add_argument("--config")
    train_cmd.add_argument("--corpus", help="reuse an existing corpus")
    train_cmd.add_argument("--seed", type=int)

    eval_cmd = sub.add_parser("eval", help="evaluate a saved model")
    eval_cmd.add_argument("--model", required=True)
    eval_cmd.add_argument("--corpus", required=True)
    eval_cmd.add_argument("--config")
    eval_cmd.add_argument("--out-dir")

    run = sub.add_parser("run", help="run the full experiment")
    run.add_argument("--out-dir", required=True)
    run.add_argument("--config")
    run.add_argument("--seed", type=int)

    report = sub.add_parser("report", help="charts and overlays for a run")
    report.add_argument("--result-dir", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "prove":
            return cmd_prove(args.corpus_dir)
        if args.command == "abduce":
            return cmd_abduce(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_report(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
