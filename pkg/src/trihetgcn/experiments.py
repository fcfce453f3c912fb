"""End-to-end experiment pipeline: prepare -> split -> features ->
train/score -> evaluate -> report."""

from __future__ import annotations

import csv
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import rng
from .anchors import (FeatureMatrix, anchor_features, features_from_csv, load_features,
                      save_features)
from .config import ConfigError, RunConfig
from .datasets import DatasetEntry, edge_file, feature_file, get_entry
from .evaluation import EvalReport, aggregate, ap, auc
from .graph import (Graph, degree_cv, global_clustering_coefficient, khop_ego_subgraph,
                    load_edge_list, save_edge_list)
from .heuristics import score
from .model import build_phi_static
from .splitting import LinkSplit, load_split, random_link_split, save_split
from .trainer import TrainConfig, evaluate, save_checkpoint, train, write_history

log = logging.getLogger(__name__)

EGO_SEED = 42


class DatasetMismatch(ValueError):
    pass


@dataclass
class Prepared:
    name: str
    graph: Graph
    features: FeatureMatrix
    split: LinkSplit
    path: Path | None = None


def verify_counts(entry: DatasetEntry, g: Graph) -> None:
    if entry.nodes is None:
        return
    if (g.num_nodes, g.num_edges) != (entry.nodes, entry.edges):
        raise DatasetMismatch(
            f"{entry.name}: expected {entry.nodes} nodes / {entry.edges} edges, "
            f"found {g.num_nodes} / {g.num_edges}")


def build_features(entry: DatasetEntry, g: Graph, split: LinkSplit, source: str,
                   data_dir=None, feature_graph: str = "full", **anchor_kw) -> FeatureMatrix:
    if source == "anchor":
        base = g if feature_graph == "full" else split.train_graph
        return anchor_features(base, **anchor_kw)
    path = feature_file(data_dir, entry.name) if data_dir is not None else None
    if path is None:
        raise FileNotFoundError(f"{entry.name}: intrinsic features requested but no feature file found")
    fm = load_features(path) if path.suffix == ".bin" else features_from_csv(path, g)
    if fm.shape[0] != g.num_nodes:
        raise DatasetMismatch(f"{path}: {fm.shape[0]} feature rows for {g.num_nodes} nodes")
    if entry.features is not None and fm.shape[1] != entry.features:
        raise DatasetMismatch(f"{entry.name}: expected {entry.features} attributes, found {fm.shape[1]}")
    return fm


def prepare(name: str, data_dir, out_dir=None, seed: int = 42, ratios=(0.85, 0.05, 0.10),
            feature_source: str | None = None, feature_graph: str = "full",
            verify: bool = True, **anchor_kw) -> Prepared:
    """Load, check against the registry, split and build features; write
    everything under ``out_dir/name`` when ``out_dir`` is given."""
    entry = get_entry(name)
    g = load_edge_list(edge_file(data_dir, entry.name))
    if verify:
        verify_counts(entry, g)
    split = random_link_split(g, ratios, seed)
    source = feature_source or ("anchor" if entry.featureless else "intrinsic")
    fm = build_features(entry, g, split, source, data_dir, feature_graph, **anchor_kw)
    path = None
    if out_dir is not None:
        path = Path(out_dir) / entry.name
        path.mkdir(parents=True, exist_ok=True)
        save_edge_list(g, path / "graph.edges")
        save_features(fm, path / "features.bin")
        save_split(split, path / "split.txt")
        meta = {
            "dataset": entry.name, "nodes": g.num_nodes, "edges": g.num_edges,
            "graph_hash": g.fingerprint(), "seed": seed,
            "ratios": ",".join(repr(r) for r in ratios), "feature_source": source,
            "feature_graph": feature_graph if source == "anchor" else "",
            "feature_columns": fm.shape[1], "eval_hash": split.eval_hash(), "rng": rng.RNG_ID,
        }
        (path / "prepare.cfg").write_text("".join(f"{k} = {v}\n" for k, v in meta.items()))
        log.info("prepared %s: N=%d |E|=%d features=%s", entry.name, g.num_nodes,
                 g.num_edges, fm.shape)
    return Prepared(entry.name, g, fm, split, path)


def load_prepared(out_dir, name: str) -> Prepared:
    path = Path(out_dir) / name.lower()
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist; run `trihet prepare {name}` first")
    g = load_edge_list(path / "graph.edges")
    split = load_split(path / "split.txt", g)
    return Prepared(name.lower(), g, load_features(path / "features.bin"), split, path)


def train_config(cfg: RunConfig, stream: int = 0, mode: str | None = None) -> TrainConfig:
    return TrainConfig(epochs=cfg.epochs, patience=cfg.patience, dropout=cfg.dropout,
                       lr=cfg.lr, hidden=cfg.hidden, scalar_lr=cfg.scalar_lr, seed=cfg.seed,
                       mode=mode or cfg.method, layers=cfg.layers, act=cfg.act, stream=stream)


def _model_repeat(prep: Prepared, tcfg: TrainConfig, run_dir):
    try:
        res = train(prep.graph, prep.features, prep.split, tcfg)
        op = build_phi_static(prep.split.train_graph)
        test_auc, test_ap = evaluate(op, prep.features, res.params, prep.split, "test",
                                     tcfg.act, tcfg.clamp)
        if run_dir is not None:
            run_dir.mkdir(parents=True, exist_ok=True)
            write_history(res.history, run_dir / "history.csv")
            save_checkpoint(res.params, run_dir / "params.ckpt", seed=tcfg.seed)
        return {"auc": test_auc, "ap": test_ap, "best_epoch": res.best_epoch,
                "val_auc": res.best_val_auc, "s_cn": res.params.s_cn, "s_hi": res.params.s_hi}
    except Exception:
        log.error("repeat %d failed:\n%s", tcfg.stream, traceback.format_exc())
        return None


def heuristic_graph(prep: Prepared) -> tuple[Graph, LinkSplit]:
    """Graph and base split the heuristics evaluate on (ego subgraph for
    networks registered with ``ego_hops``)."""
    entry = get_entry(prep.name)
    if entry.ego_hops is None:
        return prep.graph, prep.split
    sub = khop_ego_subgraph(prep.graph, EGO_SEED, entry.ego_hops)
    return sub, random_link_split(sub, prep.split.ratios, prep.split.seed)


def _heuristic_repeat(g: Graph, base: LinkSplit, cfg: RunConfig, r: int):
    split = base if r == 0 else random_link_split(
        g, base.ratios, rng.derive_seed(base.seed, rng.REPEAT, r))
    pairs, labels = split.pairs_and_labels("test")
    s = score(cfg.method, split.train_graph, pairs, **cfg.heuristic_params()).scores
    return {"auc": auc(s, labels), "ap": ap(s, labels), "split_seed": split.seed}


def run(cfg: RunConfig, prep: Prepared, out_dir=None, workers: int = 1) -> EvalReport:
    """``cfg.repeats`` independent runs of one method; failed repeats are
    counted and left out of the aggregate."""
    entry = get_entry(prep.name)
    run_root = Path(out_dir) / prep.name / cfg.method if out_dir is not None else None
    if cfg.is_heuristic:
        g, base = heuristic_graph(prep)
        jobs = [(g, base, cfg, r) for r in range(cfg.repeats)]
        fn = _heuristic_repeat
        eval_hash = base.eval_hash()
    else:
        if entry.large and not cfg.allow_large:
            raise ConfigError(f"{entry.name} is too large for desk-scale training; pass --allow-large")
        jobs = [(prep, train_config(cfg, r), run_root / f"rep{r}" if run_root else None)
                for r in range(cfg.repeats)]
        fn = _model_repeat
        eval_hash = prep.split.eval_hash()

    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(fn, *zip(*jobs)))
    else:
        results = [fn(*job) for job in jobs]

    ok = [r for r in results if r is not None]
    if not ok:
        raise RuntimeError(f"all {len(results)} repeats of {cfg.method} on {prep.name} failed")
    rep = aggregate([r["auc"] for r in ok], [r["ap"] for r in ok], cfg.method, prep.name,
                    cfg.hash(), list(range(cfg.repeats)))
    rep.failures = len(results) - len(ok)
    rep.eval_hash = eval_hash
    if run_root is not None:
        run_root.mkdir(parents=True, exist_ok=True)
        cfg.save(run_root / "run.cfg")
        with (run_root / "repeats.csv").open("w", newline="") as fh:
            keys = sorted({k for r in ok for k in r})
            w = csv.DictWriter(fh, fieldnames=["repeat", *keys])
            w.writeheader()
            for i, r in enumerate(results):
                if r is not None:
                    w.writerow({"repeat": i, **r})
    return rep


def ablate(cfg: RunConfig, prep: Prepared, out_dir=None, workers: int = 1) -> list[EvalReport]:
    return [run(replace(cfg, method=m), prep, out_dir, workers)
            for m in ("gcn", "gcn_cn", "gcn_hi", "trihet")]


def structural_stats(graphs: dict) -> list[dict]:
    """Transitivity and degree coefficient of variation per network."""
    rows = []
    for name, g in graphs.items():
        rows.append({"dataset": name, "nodes": g.num_nodes, "edges": g.num_edges,
                     "clustering": global_clustering_coefficient(g), "degree_cv": degree_cv(g)})
    return rows


def write_stats_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["dataset", "nodes", "edges", "clustering", "degree_cv"])
        w.writeheader()
        for r in rows:
            w.writerow({**r, "clustering": f"{r['clustering']:.6f}", "degree_cv": f"{r['degree_cv']:.6f}"})


def paired_wins(a_dir, b_dir) -> tuple[int, int]:
    """How many repeats method ``a`` beat method ``b`` on test AUC, from
    their ``repeats.csv`` files."""
    def load(d):
        with (Path(d) / "repeats.csv").open() as fh:
            return {int(r["repeat"]): float(r["auc"]) for r in csv.DictReader(fh)}
    a, b = load(a_dir), load(b_dir)
    common = sorted(set(a) & set(b))
    return sum(a[i] > b[i] for i in common), len(common)

