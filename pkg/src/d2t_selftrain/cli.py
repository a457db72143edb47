"""Command-line surface.

Subcommands:
  run          full self-training pipeline on dart/e2e files or the bundled
               synthetic corpus, writing a JSON run report
  eval         score a hypothesis file against references (tab-separated
               multi-reference), optionally with sources/reconstructions for
               the slot-based scores
  optimize     greedy target optimization for one source/target pair
  linearize    JSON record arrays on stdin -> linear strings on stdout
  delinearize  linear strings on stdin -> JSON record sets on stdout
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .datasets import SplitName, load_dart, load_e2e, synthetic_dataset
from .errors import DelinearizeError, PipelineError
from .gateway import Direction, RuleBasedT2D, external_handle, rule_based_handle
from .linearize import delinearize, linearize
from .metrics import evaluate_corpus
from .optimize import optimize_target
from .pipeline import DataMode, Method, Orchestrator, RunConfig
from .records import RecordKind, RecordSet


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2t-selftrain",
        description="Self-training pipeline for data-to-text generation with "
        "text-to-data validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full pipeline and write a report")
    run.add_argument("--dataset", choices=("dart", "e2e", "synthetic"), required=True)
    run.add_argument("--train", type=Path, help="training split file (dart/e2e only)")
    run.add_argument("--val", type=Path, help="validation split file (dart/e2e only)")
    run.add_argument("--test", type=Path, help="test split file (dart/e2e only)")
    run.add_argument("--method", choices=[m.value for m in Method], required=True)
    run.add_argument("--ratio", type=float, default=0.3, help="epoch subset fraction")
    run.add_argument("--epochs", type=int, default=3)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument(
        "--data-mode",
        choices=[d.value for d in DataMode],
        default=DataMode.FIXED.value,
        help="epoch data regime for self-memory methods (baselines pin their own)",
    )
    run.add_argument("--d2t-endpoint", help="host:port of an external D2T server")
    run.add_argument("--t2d-endpoint", help="host:port of an external T2D server")
    run.add_argument("--report", type=Path, default=Path("report.json"))
    run.add_argument("--resume", type=Path, help="snapshot file written on abort")

    ev = sub.add_parser("eval", help="score hypotheses against references")
    ev.add_argument("--hyp", type=Path, required=True, help="one hypothesis per line")
    ev.add_argument(
        "--refs", type=Path, required=True, help="references per line, tab-separated"
    )
    ev.add_argument(
        "--sources", type=Path, help="linearized sources, enables the slot scores"
    )
    ev.add_argument(
        "--reconstructions",
        type=Path,
        help="linearized reconstructions (requires --sources)",
    )
    ev.add_argument("--kind", choices=[k.value for k in RecordKind], default="tripleset")
    ev.add_argument("--smoothing", action="store_true", help="BLEU add-one smoothing")
    ev.add_argument(
        "--scale-100", action="store_true", help="display 0-1 scores multiplied by 100"
    )

    opt = sub.add_parser("optimize", help="greedy target optimization for one pair")
    opt.add_argument("--source", required=True, help="linearized source record set")
    opt.add_argument("--target", required=True, help="generated target text")
    opt.add_argument("--kind", choices=[k.value for k in RecordKind], default="tripleset")

    sub.add_parser("linearize", help="stdin: JSON records per line; stdout: strings")

    delin = sub.add_parser(
        "delinearize", help="stdin: linear strings; stdout: JSON record sets"
    )
    delin.add_argument("--kind", choices=[k.value for k in RecordKind], default="tripleset")

    return parser


def _report_warnings(split) -> None:
    if split.load_warnings:
        head = "; ".join(split.load_warnings[:5])
        print(
            f"note: {len(split.load_warnings)} load warnings in {split.name.value} "
            f"split ({head}{'; ...' if len(split.load_warnings) > 5 else ''})",
            file=sys.stderr,
        )


def _cmd_run(args) -> int:
    if args.dataset == "synthetic":
        if args.train or args.val or args.test:
            print("error: --train/--val/--test do not apply to synthetic", file=sys.stderr)
            return 2
        train, val, test = synthetic_dataset(seed=args.seed)
    else:
        if not (args.train and args.val and args.test):
            print("error: --train, --val and --test are required for file datasets", file=sys.stderr)
            return 2
        load = load_dart if args.dataset == "dart" else load_e2e
        train = load(args.train, SplitName.TRAIN)
        val = load(args.val, SplitName.VALIDATION)
        test = load(args.test, SplitName.TEST)
        for split in (train, val, test):
            _report_warnings(split)

    if args.d2t_endpoint:
        d2t = external_handle(Direction.D2T, args.d2t_endpoint)
    else:
        d2t = rule_based_handle(Direction.D2T)
    if args.t2d_endpoint:
        t2d = external_handle(Direction.T2D, args.t2d_endpoint)
    else:
        catalog = RuleBasedT2D.from_examples(
            list(train.examples) + list(val.examples) + list(test.examples)
        )
        t2d = rule_based_handle(Direction.T2D, catalog)

    cfg = RunConfig(
        method=Method(args.method),
        d2t=d2t,
        t2d=t2d,
        train=train,
        val=val,
        test=test,
        epochs=args.epochs,
        ratio=args.ratio,
        seed=args.seed,
        data_mode=DataMode(args.data_mode),
        resume_path=args.resume,
    )
    report = Orchestrator(cfg).run()
    report.write(args.report)
    m = report.final_metrics
    print(
        f"{args.method}: BLEU {m.bleu:.4f} METEOR {m.meteor:.4f} TER {m.ter:.4f}"
        + (f" EPM {m.epm:.4f}" if m.epm is not None else "")
        + (f" OSF-F1 {m.osf.f1:.4f}" if m.osf is not None else "")
        + f" | audit {'ok' if report.audit['valid'] else 'FAILED'}"
        + f" | report {args.report}"
    )
    return 0


def _read_lines(path: Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _cmd_eval(args) -> int:
    candidates = _read_lines(args.hyp)
    references = [
        [ref for ref in line.split("\t") if ref.strip()]
        for line in _read_lines(args.refs)
    ]
    kind = RecordKind(args.kind)
    sources = None
    reconstructions = None
    if args.sources:
        sources = [
            delinearize(line, kind).record_set for line in _read_lines(args.sources)
        ]
    if args.reconstructions:
        if sources is None:
            print("error: --reconstructions requires --sources", file=sys.stderr)
            return 2
        reconstructions = []
        for line in _read_lines(args.reconstructions):
            try:
                reconstructions.append(delinearize(line, kind).record_set)
            except DelinearizeError:
                reconstructions.append(None)
    report = evaluate_corpus(
        candidates,
        references,
        sources=sources,
        reconstructions=reconstructions,
        smoothing=args.smoothing,
    )
    scale = 100.0 if args.scale_100 else 1.0
    print(json.dumps(report.to_dict(scale), indent=2, sort_keys=True))
    return 0


def _cmd_optimize(args) -> int:
    rs = delinearize(args.source, RecordKind(args.kind)).record_set
    outcome = optimize_target(rs, args.target)
    print(json.dumps(outcome.to_dict(), indent=2, ensure_ascii=False))
    return 0


def _record_set_from_json(line: str) -> RecordSet:
    data = json.loads(line)
    if isinstance(data, dict):
        return RecordSet.from_dict(data)
    if isinstance(data, list) and data and all(isinstance(r, list) for r in data):
        widths = {len(r) for r in data}
        if widths == {3}:
            return RecordSet.from_dict({"kind": "tripleset", "records": data})
        if widths == {2}:
            return RecordSet.from_dict({"kind": "mrset", "records": data})
    raise ValueError(
        "each line must be a JSON record-set object or a uniform array of "
        "[s, p, o] or [key, value] records"
    )


def _cmd_linearize() -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        print(linearize(_record_set_from_json(line)))
    return 0


def _cmd_delinearize(args) -> int:
    kind = RecordKind(args.kind)
    for line in sys.stdin:
        if not line.strip():
            continue
        res = delinearize(line, kind)
        out = res.record_set.to_dict()
        out["dropped"] = res.dropped
        print(json.dumps(out, ensure_ascii=False))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "optimize":
            return _cmd_optimize(args)
        if args.command == "linearize":
            return _cmd_linearize()
        return _cmd_delinearize(args)
    except (PipelineError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
