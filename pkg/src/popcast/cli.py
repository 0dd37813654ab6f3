"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import correlation_matrices, distribution_summary, group_stats
from .errors import ConfigError, DataError, NumericalError
from .harness import RunConfig, cross_validate, evaluate, predict, train
from .packs import write_pack
from .records import clean_outliers, ingest, write_records
from .synth import SynthConfig, generate_synthetic


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="popcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a JSONL dataset and report rejections")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="directory for the rejection report and cleaned copy")

    p = sub.add_parser("stats", help="exploratory statistics over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset with feature packs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--visual-dim", type=int, default=SynthConfig.visual_dim)
    p.add_argument("--text-dim", type=int, default=SynthConfig.text_dim)

    for name, extra in (("train", ()), ("cv", ()), ("eval", ("checkpoint", "data", "oracle")),
                        ("predict", ("checkpoint", "data"))):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--no-ep", action="store_true")
        p.add_argument("--out")
        if "checkpoint" in extra:
            p.add_argument("--checkpoint", help="defaults to <out_dir>/model.ckpt")
        if "data" in extra:
            p.add_argument("--data", help="defaults to the config's data_path")
        if "oracle" in extra:
            p.add_argument("--oracle", action="store_true",
                           help="score the ground truth against itself")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    return cfg.with_overrides(seed=args.seed, no_ep=args.no_ep, out_dir=args.out)


def _cmd_ingest(args) -> int:
    records, report = ingest(args.data)
    print(f"{len(records)} valid records, {report.total} rejected")
    for reason, count in sorted(report.counts.items()):
        print(f"  {reason}: {count}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "rejection_report.json").write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )
        write_records(records, out / "records.jsonl")
        print(f"wrote {out / 'records.jsonl'}")
    return 0


def _csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_stats(args) -> int:
    records, report = ingest(args.data)
    if len(records) < 2:
        raise DataError(f"need at least 2 valid records for statistics, got {len(records)}")
    records, dropped = clean_outliers(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    series = [r.popularity() for r in records]
    summary = distribution_summary(series)
    _csv(out / "distribution.csv", "day,min,q1,median,q3,max,mean,std", summary.rows())

    mats = correlation_matrices(series)
    for name, matrix in (("pc_matrix.csv", mats.pc), ("src_matrix.csv", mats.src)):
        _csv(out / name, ",".join(f"day{d}" for d in range(1, matrix.shape[1] + 1)),
             ([("" if np.isnan(v) else repr(float(v))) for v in row] for row in matrix))

    for key in ("category", "language"):
        stats = group_stats(records, key=key)
        _csv(out / f"{key}_stats.csv", f"{key},count,mean_final_popularity",
             ((s.group, s.count, repr(s.mean_popularity)) for s in stats))

    bundle = {
        "n_records": len(records),
        "dropped_outliers": dropped,
        "rejections": report.to_json_dict(),
        "degenerate_days": list(mats.degenerate_days),
    }
    (out / "stats.json").write_text(json.dumps(bundle, indent=2) + "\n", encoding="utf-8")
    print(f"stats for {len(records)} records written to {out}")
    return 0


def _cmd_gen(args) -> int:
    config = SynthConfig(visual_dim=args.visual_dim, text_dim=args.text_dim)
    records, packs = generate_synthetic(args.n, seed=args.seed, config=config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "dataset.jsonl")
    for name, pack in packs.items():
        write_pack(pack, out / name)
    print(f"wrote {len(records)} records and {len(packs)} packs to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    result = train(cfg)
    print(f"best validation AMAE {result.best_val_amae:.6f} at epoch {result.best_epoch}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return 0


def _cmd_cv(args) -> int:
    cfg = _load_config(args)
    result = cross_validate(cfg)
    for i, report in enumerate(result.fold_reports):
        print(f"fold {i}: AMAE {report.amae:.6f}  ASRC {report.asrc:.6f}")
    print(f"mean AMAE {result.summary['mean_amae']:.6f} "
          f"(std {result.summary['std_amae']:.6f})")
    return 0


def _eval_paths(args, cfg):
    checkpoint = args.checkpoint or str(Path(cfg.out_dir) / "model.ckpt")
    data = args.data or cfg.data_path
    return checkpoint, data


def _cmd_eval(args) -> int:
    # --out names the report directory only; the checkpoint stays under the
    # config's out_dir unless --checkpoint overrides it
    cfg = RunConfig.from_file(args.config)
    checkpoint, data = _eval_paths(args, cfg)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "eval"
    report = evaluate(checkpoint, data, cfg.pack_dir, out, oracle=args.oracle)
    print(f"AMAE {report.amae:.6f}  ASRC {report.asrc:.6f}  "
          f"day-30 MAE {report.mae_day30:.6f}  day-30 SRC {report.src_day30:.6f}")
    return 0


def _cmd_predict(args) -> int:
    cfg = RunConfig.from_file(args.config)
    checkpoint, data = _eval_paths(args, cfg)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "predict"
    ids, matrix, rejected = predict(checkpoint, data, cfg.pack_dir, out)
    print(f"predicted {len(ids)} samples ({len(rejected)} rejected); "
          f"curves in {out / 'predictions.csv'}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "gen": _cmd_gen,
    "train": _cmd_train,
    "cv": _cmd_cv,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
