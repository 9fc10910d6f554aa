"""Projection of a document sample onto a base map."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basemap import BaseMap, _num, write_map_file
from .errors import ConfigError
from .matrix import CategorySet, build_matrix
from .medline import Corpus
from .tree import MeshTree, TreeNumber

COUNTING_MODES = ("attributions", "documents")


@dataclass
class Overlay:
    categories: CategorySet
    counts: np.ndarray
    counting: str = "attributions"

    @property
    def mode(self) -> str:
        return self.categories.depth_mode

    @property
    def sizes(self) -> np.ndarray:
        return np.log2(self.counts.astype(np.float64) + 1.0)

    @property
    def active(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.counts > 0)]

    @property
    def n_occurrences(self) -> int:
        return int(self.counts.sum())

    def count_of(self, number) -> int:
        if isinstance(number, str):
            number = TreeNumber.parse(number)
        j = self.categories.index.get(number)
        return 0 if j is None else int(self.counts[j])

    def on_basemap(self, bm: BaseMap) -> np.ndarray:
        """Counts aligned to the base-map nodes (zero where not covered)."""
        check_compatible(self, bm)
        out = np.zeros(len(bm), dtype=np.int64)
        for v, j in enumerate(bm.nodes):
            k = self.categories.index.get(bm.categories[j].number)
            if k is not None:
                out[v] = self.counts[k]
        return out

    def active_on_basemap(self, bm: BaseMap) -> int:
        return int((self.on_basemap(bm) > 0).sum())


def check_compatible(o: Overlay, bm: BaseMap) -> None:
    """The overlay universe must be a sub-universe of the base map's."""
    mine, theirs = o.categories, bm.categories
    if mine.branch_filter != theirs.branch_filter or any(
            c.number not in theirs.index for c in mine.categories):
        raise ConfigError(f"overlay categories {mine.fingerprint} do not fit base map "
                          f"{bm.fingerprint} (categories {theirs.fingerprint})")


def build_overlay(sample: Corpus, tree: MeshTree, cats: CategorySet,
                  counting: str = "attributions") -> Overlay:
    """Per-category occurrences of a sample.

    ``attributions`` sums heading multiplicities (two headings folding onto
    one category count twice); ``documents`` counts records per category.
    """
    if counting not in COUNTING_MODES:
        raise ConfigError(f"unknown counting mode {counting!r}")
    m = build_matrix(sample, tree, cats)
    counts = m.col_occurrences if counting == "attributions" else m.doc_frequency
    return Overlay(cats, counts.astype(np.int64), counting)


def emit_vector(o: Overlay, bm: BaseMap, path) -> Path:
    """Pajek vector of log2(count + 1) per base-map node, base-map order."""
    path = Path(path)
    sizes = np.log2(o.on_basemap(bm).astype(np.float64) + 1.0)
    lines = [f"*Vertices {len(bm)}"] + [_num(s) for s in sizes]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def overlay_weights(o: Overlay, bm: BaseMap) -> np.ndarray:
    sizes = np.log2(o.on_basemap(bm).astype(np.float64) + 1.0)
    top = sizes.max() if len(sizes) else 0.0
    return sizes / top if top > 0 else np.zeros_like(sizes)


def emit_overlay_map(o: Overlay, bm: BaseMap, path) -> Path:
    return write_map_file(path, bm.labels, bm.coords, bm.partition, overlay_weights(o, bm))
