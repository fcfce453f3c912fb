"""AUC / AP and the repeat-level report they roll up into."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

REPORT_COLUMNS = ("dataset", "method", "repeats", "auc_mean", "auc_std",
                  "ap_mean", "ap_std", "config_hash", "eval_hash", "failures")


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0/1")
    return scores, labels.astype(bool)


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties
    counted as one half (Mann-Whitney U / (P * N))."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    ranks = rankdata(scores, method="average")
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ap(scores, labels) -> float:
    """Sum of (R_n - R_{n-1}) * P_n over descending score thresholds; equal
    scores form one threshold."""
    scores, labels = _check(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("AP needs at least one positive example")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each block of tied scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class EvalReport:
    method: str
    dataset: str
    repeats: int
    auc_mean: float
    auc_std: float
    ap_mean: float
    ap_std: float
    config_hash: str = ""
    seeds: list = field(default_factory=list)
    failures: int = 0
    eval_hash: str = ""

    @property
    def std_flagged(self) -> bool:
        """True when std is 0 by convention (single repeat)."""
        return self.repeats < 2

    def row(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "repeats": self.repeats,
            "auc_mean": f"{self.auc_mean:.2f}",
            "auc_std": f"{self.auc_std:.2f}",
            "ap_mean": f"{self.ap_mean:.2f}",
            "ap_std": f"{self.ap_std:.2f}",
            "config_hash": self.config_hash,
            "eval_hash": self.eval_hash,
            "failures": self.failures,
        }


def aggregate(aucs, aps, method: str = "", dataset: str = "", config_hash: str = "",
              seeds=None) -> EvalReport:
    """Mean and sample std of per-repeat metrics (fractions in, percent out)."""
    aucs = np.asarray(aucs, dtype=np.float64) * 100
    aps = np.asarray(aps, dtype=np.float64) * 100
    if aucs.size < 1 or aucs.size != aps.size:
        raise ValueError("need at least one repeat with both metrics")

    def stats(x):
        return float(x.mean()), (float(x.std(ddof=1)) if x.size > 1 else 0.0)

    am, asd = stats(aucs)
    pm, psd = stats(aps)
    return EvalReport(method, dataset, int(aucs.size), am, asd, pm, psd,
                      config_hash, list(seeds or []))


def write_report_csv(reports, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def read_report_csv(path) -> list[EvalReport]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EvalReport(row["method"], row["dataset"], int(row["repeats"]),
                                  float(row["auc_mean"]), float(row["auc_std"]),
                                  float(row["ap_mean"]), float(row["ap_std"]),
                                  row.get("config_hash", ""), failures=int(row.get("failures") or 0),
                                  eval_hash=row.get("eval_hash", "")))
    return out


def markdown_table(reports, metric: str = "auc") -> str:
    """Methods as rows, datasets as columns, cells `mean ± std`."""
    datasets = list(dict.fromkeys(r.dataset for r in reports))
    methods = list(dict.fromkeys(r.method for r in reports))
    cell = {(r.method, r.dataset): f"{getattr(r, metric + '_mean'):.2f} ± {getattr(r, metric + '_std'):.2f}"
            for r in reports}
    lines = ["| | " + " | ".join(datasets) + " |",
             "|---" * (len(datasets) + 1) + "|"]
    for m in methods:
        lines.append(f"| {m} | " + " | ".join(cell.get((m, d), "") for d in datasets) + " |")
    return "\n".join(lines) + "\n"
