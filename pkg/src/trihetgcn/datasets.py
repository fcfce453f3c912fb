"""Registry of the benchmark networks and where their files live.

Raw files are supplied locally; nothing is downloaded. A dataset directory
holds ``edges.txt`` (or ``.tsv``/``.csv``) and, for attributed networks,
``features.csv`` (``node_id,v1,...,vk``) or a binary ``features.bin``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

DATA_ENV = "TRIHET_DATA_DIR"


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    nodes: int | None
    edges: int | None
    features: int | None
    featureless: bool
    lr: float = 0.01
    hidden: int = 128
    # heuristics on this network run on a k-hop ego subgraph
    ego_hops: int | None = None
    large: bool = False


REGISTRY = {e.name: e for e in [
    DatasetEntry("cora", 2708, 5278, 1433, False, 0.01, 128),
    DatasetEntry("citeseer", 3312, 4660, 3703, False, 0.01, 384),
    DatasetEntry("pubmed", 19717, 44327, 500, False, 0.005, 128),
    DatasetEntry("dblp", 17716, 52867, 1639, False, 0.01, 128),
    DatasetEntry("cs", 18333, 81894, 6805, False, 0.001, 384),
    DatasetEntry("facebook", 4039, 88234, 1283, False, 0.003, 384),
    DatasetEntry("power", 4941, 6594, 150, True, 0.001, 256),
    DatasetEntry("twitter", 256491, 327374, 150, True, 0.005, 256, ego_hops=4, large=True),
    DatasetEntry("int", 26848, 41262, 600, True, 0.005, 256),
]}


def get_entry(name: str) -> DatasetEntry:
    """Registry entry, or an unchecked featureless entry for unknown names."""
    return REGISTRY.get(name.lower(), DatasetEntry(name.lower(), None, None, None, True))


def data_root(override=None) -> Path:
    return Path(override or os.environ.get(DATA_ENV, "data"))


def edge_file(root: Path, name: str) -> Path:
    for fname in ("edges.txt", "edges.tsv", "edges.csv"):
        p = Path(root) / name / fname
        if p.exists():
            return p
    raise FileNotFoundError(f"no edges.txt/.tsv/.csv under {Path(root) / name}")


def feature_file(root: Path, name: str) -> Path | None:
    for fname in ("features.bin", "features.csv"):
        p = Path(root) / name / fname
        if p.exists():
            return p
    return None
