"""Command-line entry point.

Examples:
  trihet prepare cora --data-dir data --out prepared
  trihet run cora --method trihet --repeats 10
  trihet baseline cora --method katz --beta 0.005 --repeats 100
  trihet ablate citeseer --repeats 10
  trihet report runs/cora/*/report.csv --out reports
  trihet gradcheck --instances 20
  trihet stats power cora --data-dir data

Exit codes: 0 success, 1 configuration/input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import rng
from .config import HEURISTICS, ConfigError, RunConfig
from .datasets import data_root, edge_file, get_entry
from .evaluation import markdown_table, read_report_csv, write_report_csv
from .experiments import (DatasetMismatch, ablate, load_prepared, prepare, run,
                          structural_stats, write_stats_csv)
from .graph import GraphFormatError, load_edge_list
from .model import MODES
from .trainer import TrainConfig, gradcheck

log = logging.getLogger("trihetgcn")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_prepared(p):
    p.add_argument("--prepared", default="prepared", help="prepared-artifact directory (default: prepared)")
    p.add_argument("--out", default="runs", help="run output directory (default: runs)")
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", help="flat key = value config file; flags override it")


def _add_training(p):
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float, help="main learning rate (default: per-dataset table value)")
    p.add_argument("--hidden", type=int, help="hidden channels (default: per-dataset table value)")
    p.add_argument("--scalar-lr", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--act", choices=("relu", "mish"))
    p.add_argument("--allow-large", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="trihet", description="TriHetGCN link prediction experiments",
                 formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="canonical graph, features and split on disk")
    p.add_argument("dataset")
    p.add_argument("--data-dir", help="raw data root (default: $TRIHET_DATA_DIR or ./data)")
    p.add_argument("--out", default="prepared")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.85, 0.05, 0.10))
    p.add_argument("--features", choices=("auto", "intrinsic", "anchor"), default="auto")
    p.add_argument("--feature-graph", choices=("full", "train"), default="full",
                   help="graph the anchor distances are measured on")
    p.add_argument("--anchor-rate", type=float, default=0.15)
    p.add_argument("--anchor-cap", type=int, default=150)
    p.add_argument("--coverage", type=float, default=0.80)
    p.add_argument("--s-min", type=int, default=2)
    p.add_argument("--anchor-rule", choices=("coverage", "percentile"), default="coverage")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--no-verify", action="store_true", help="skip the node/edge count check")

    p = sub.add_parser("run", help="train a model variant with repeats")
    p.add_argument("dataset")
    p.add_argument("--method", choices=MODES, default="trihet")
    _add_prepared(p)
    _add_training(p)

    p = sub.add_parser("baseline", help="score a heuristic with repeats")
    p.add_argument("dataset")
    p.add_argument("--method", choices=HEURISTICS, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=int)
    _add_prepared(p)

    p = sub.add_parser("ablate", help="gcn, gcn_cn, gcn_hi and trihet on one split")
    p.add_argument("dataset")
    _add_prepared(p)
    _add_training(p)

    p = sub.add_parser("report", help="merge report CSVs into AUC/AP tables")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default="reports")
    p.add_argument("--prepared", help="also emit structural statistics for these datasets")

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--size", type=int, default=6)
    p.add_argument("--hidden", type=int, default=4)
    p.add_argument("--mode", choices=MODES, default="trihet")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("stats", help="clustering coefficient and degree CV per dataset")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--data-dir")
    p.add_argument("--prepared", help="read prepared graphs instead of raw edge files")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return ap


def _run_config(args, method: str) -> RunConfig:
    entry = get_entry(args.dataset)
    base = RunConfig.load(args.config) if args.config else RunConfig(
        args.dataset, method=method, lr=entry.lr, hidden=entry.hidden,
        repeats=100 if method in HEURISTICS else 10)
    kw = {"dataset": args.dataset.lower(), "method": method, "seed": args.seed}
    if args.repeats is not None:
        kw["repeats"] = args.repeats
    for flag in ("epochs", "patience", "dropout", "lr", "hidden", "scalar_lr", "layers", "act",
                 "beta", "c", "alpha", "t"):
        val = getattr(args, flag, None)
        if val is not None:
            kw[flag] = val
    if getattr(args, "allow_large", False):
        kw["allow_large"] = True
    return dataclasses.replace(base, **kw)


def _emit(reports, out_dir: Path, name: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out_dir / f"{name}.csv")
    for r in reports:
        flag = " (single repeat: std 0 by convention)" if r.std_flagged else ""
        fail = f" [{r.failures} failed]" if r.failures else ""
        print(f"{r.dataset} {r.method}: AUC {r.auc_mean:.2f} +/- {r.auc_std:.2f}  "
              f"AP {r.ap_mean:.2f} +/- {r.ap_std:.2f}  eval={r.eval_hash} cfg={r.config_hash}"
              f"{flag}{fail}")
    print(f"# rng: {rng.RNG_ID}")


def cmd_prepare(args):
    prep = prepare(args.dataset, data_root(args.data_dir), args.out, args.seed, tuple(args.ratios),
                   None if args.features == "auto" else args.features, args.feature_graph,
                   not args.no_verify, rate=args.anchor_rate, cap=args.anchor_cap,
                   coverage=args.coverage, s_min=args.s_min, rule=args.anchor_rule, eps=args.eps)
    print(f"{prep.name}: N={prep.graph.num_nodes} |E|={prep.graph.num_edges} "
          f"features={prep.features.shape[1]} ({prep.features.kind}) -> {prep.path}")


def cmd_run(args, method=None):
    cfg = _run_config(args, method or args.method)
    prep = load_prepared(args.prepared, args.dataset)
    rep = run(cfg, prep, args.out, args.workers)
    _emit([rep], Path(args.out) / prep.name / cfg.method, "report")


def cmd_ablate(args):
    cfg = _run_config(args, "trihet")
    prep = load_prepared(args.prepared, args.dataset)
    reps = ablate(cfg, prep, args.out, args.workers)
    _emit(reps, Path(args.out) / prep.name, "ablation")


def cmd_report(args):
    reports = [r for path in args.reports for r in read_report_csv(path)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(reports, out / "report.csv")
    md = f"# rng: {rng.RNG_ID}\n\n## AUC\n\n" + markdown_table(reports, "auc") \
        + "\n## AP\n\n" + markdown_table(reports, "ap")
    (out / "report.md").write_text(md)
    print(md)
    if args.prepared:
        names = dict.fromkeys(r.dataset for r in reports)
        graphs = {n: load_prepared(args.prepared, n).graph for n in names}
        write_stats_csv(structural_stats(graphs), out / "structure.csv")


def cmd_gradcheck(args):
    worst = 0.0
    for i in range(args.instances):
        rep = gradcheck(TrainConfig(hidden=args.hidden, dropout=0.0, mode=args.mode),
                        args.size, seed=args.seed + i)
        worst = max(worst, rep.max_rel_error)
        print(f"instance {i}: N={rep.num_nodes} entries={rep.checked} "
              f"max rel error {rep.max_rel_error:.3e}")
    status = "PASS" if worst < 1e-4 else "FAIL"
    print(f"{status}: worst relative error {worst:.3e} (threshold 1e-4)")
    return 0 if worst < 1e-4 else 2


def cmd_stats(args):
    graphs = {}
    for name in args.datasets:
        if args.prepared:
            graphs[name] = load_prepared(args.prepared, name).graph
        else:
            graphs[name] = load_edge_list(edge_file(data_root(args.data_dir), get_entry(name).name))
    rows = structural_stats(graphs)
    if args.out:
        write_stats_csv(rows, args.out)
    else:
        write_stats_csv(rows, "/dev/stdout")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"prepare": cmd_prepare, "run": cmd_run, "ablate": cmd_ablate,
                "baseline": lambda a: cmd_run(a, a.method), "report": cmd_report,
                "gradcheck": cmd_gradcheck, "stats": cmd_stats}
    try:
        return handlers[args.cmd](args) or 0
    except (ConfigError, DatasetMismatch, FileNotFoundError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
