"""Document x category incidence matrices and their normalizations.

Two category universes are supported:

* ``strict``: every level-1 and level-2 tree number in the selected branches.
  A heading hits a category only through a tree number at exactly that
  position.
* ``collapsed``: level-2 tree numbers only. Any tree number at level 2 or
  deeper is folded onto its level-2 ancestor; level-1 numbers are ignored.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DomainError
from .medline import Corpus, MedlineRecord, mesh_eligible
from .tree import MeshTree, TreeNumber, label_key

DEPTH_MODES = ("strict", "collapsed")
DEFAULT_BRANCHES = ("C", "D", "E")
EIGEN_TOL = 1e-9


@dataclass(frozen=True)
class Category:
    label: str
    number: TreeNumber

    @property
    def branch(self) -> str:
        return self.number.branch


@dataclass(frozen=True)
class CategorySet:
    categories: tuple[Category, ...]
    depth_mode: str = "strict"
    branch_filter: frozenset = frozenset(DEFAULT_BRANCHES)
    index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.depth_mode not in DEPTH_MODES:
            raise ConfigError(f"unknown depth mode {self.depth_mode!r}")
        if not self.index:
            self.index.update({c.number: j for j, c in enumerate(self.categories)})

    @classmethod
    def from_tree(cls, tree: MeshTree, branches=DEFAULT_BRANCHES, mode="strict") -> "CategorySet":
        branches = frozenset(branches)
        if mode == "strict":
            numbers = tree.numbers(branches, max_level=2)
        elif mode == "collapsed":
            numbers = tree.numbers(branches, exact_level=2)
        else:
            raise ConfigError(f"unknown depth mode {mode!r}")
        cats = tuple(Category(tree.label_of(n), n) for n in numbers)
        return cls(cats, mode, branches)

    def __len__(self):
        return len(self.categories)

    def __getitem__(self, j) -> Category:
        return self.categories[j]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.categories]

    @property
    def numbers(self) -> list[TreeNumber]:
        return [c.number for c in self.categories]

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.depth_mode}|{','.join(sorted(self.branch_filter))}\n".encode())
        for c in self.categories:
            h.update(f"{c.number}\t{c.label}\n".encode())
        return h.hexdigest()[:16]

    def with_mode(self, mode: str) -> "CategorySet":
        """Same universe re-cut for another depth mode (collapsed keeps level 2 only)."""
        if mode == self.depth_mode:
            return self
        if mode == "collapsed":
            cats = tuple(c for c in self.categories if c.number.level == 2)
            return CategorySet(cats, mode, self.branch_filter)
        raise ConfigError("a strict category set cannot be derived from a collapsed one")

    def targets(self, number: TreeNumber) -> int | None:
        """Column hit by one tree number, or None."""
        if number.branch not in self.branch_filter:
            return None
        if self.depth_mode == "strict":
            return self.index.get(number) if number.level <= 2 else None
        if number.level < 2:
            return None
        return self.index.get(number.ancestor(2))


def _unique_headings(record: MedlineRecord):
    seen = set()
    for h in record.headings:
        key = label_key(h.label)
        if key not in seen:
            seen.add(key)
            yield h


def map_headings(r: MedlineRecord, tree: MeshTree, cats: CategorySet) -> list[tuple[int, int]]:
    """Category hits of one record as sorted (column, multiplicity) pairs.

    Each distinct heading contributes at most once per column, so the
    multiplicity of a column is the number of headings landing on it.
    Headings missing from the tree contribute nothing.
    """
    counts: dict[int, int] = {}
    for h in _unique_headings(r):
        d = tree.lookup(h.label)
        if d is None:
            continue
        hit = {cats.targets(n) for n in d.tree_numbers}
        hit.discard(None)
        for j in hit:
            counts[j] = counts.get(j, 0) + 1
    return sorted(counts.items())


def count_unmapped(r: MedlineRecord, tree: MeshTree) -> int:
    return sum(1 for h in _unique_headings(r) if tree.lookup(h.label) is None)


@dataclass
class IncidenceMatrix:
    rows: list[int]
    categories: CategorySet
    attributions: sp.csr_matrix
    n_unmapped: int = 0

    @property
    def shape(self):
        return self.attributions.shape

    @property
    def cells(self) -> sp.csr_matrix:
        out = self.attributions.copy()
        out.data = (out.data > 0).astype(np.int64)
        out.eliminate_zeros()
        return out

    @property
    def col_occurrences(self) -> np.ndarray:
        return np.asarray(self.attributions.sum(axis=0)).ravel().astype(np.int64)

    @property
    def doc_frequency(self) -> np.ndarray:
        return np.asarray(self.cells.sum(axis=0)).ravel().astype(np.int64)

    @property
    def used(self) -> np.ndarray:
        return self.col_occurrences > 0

    @property
    def n_used(self) -> int:
        return int(self.used.sum())

    @property
    def n_records_with_hits(self) -> int:
        return int((np.diff(self.attributions.indptr) > 0).sum())

    def values(self, kind: str = "binary") -> sp.csr_matrix:
        if kind == "binary":
            return self.cells
        if kind == "attributions":
            return self.attributions
        raise ConfigError(f"unknown cell values {kind!r}")


def build_matrix(c: Corpus, tree: MeshTree, cats: CategorySet,
                 eligible_only: bool = True, drop_ineligible: bool = False) -> IncidenceMatrix:
    """Grand matrix of records (rows, input order) by categories (columns)."""
    if len(cats) == 0:
        raise ConfigError("category set is empty")
    rows, indptr, indices, data = [], [0], [], []
    unmapped = 0
    for r in c.records:
        ok = mesh_eligible(r) or not eligible_only
        if not ok and drop_ineligible:
            continue
        rows.append(r.pmid)
        if ok:
            for j, k in map_headings(r, tree, cats):
                indices.append(j)
                data.append(k)
            unmapped += count_unmapped(r, tree)
        indptr.append(len(indices))
    a = sp.csr_matrix(
        (np.asarray(data, dtype=np.int64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(rows), len(cats)),
    )
    return IncidenceMatrix(rows, cats, a, unmapped)


@dataclass
class Similarity:
    values: np.ndarray
    used: np.ndarray

    def __len__(self):
        return len(self.used)


def cosine_matrix(m: IncidenceMatrix, kind: str = "binary") -> Similarity:
    """Cosine between category columns; unused columns get zero rows."""
    x = m.values(kind).astype(np.int64)
    gram = (x.T @ x).toarray()
    sq = np.diag(gram)
    used = sq > 0
    out = np.zeros(gram.shape, dtype=np.float64)
    idx = np.flatnonzero(used)
    # single rounding: sqrt of the exact integer product
    sub = gram[np.ix_(idx, idx)] / np.sqrt(np.outer(sq[idx], sq[idx]).astype(np.float64))
    np.clip(sub, 0.0, 1.0, out=sub)
    np.fill_diagonal(sub, 1.0)
    out[np.ix_(idx, idx)] = sub
    return Similarity(out, used)


@dataclass
class EigenSummary:
    n_vars: int
    eigenvalues: np.ndarray
    n_eigen_gt_1: int
    pct_variance_eigen_gt_1: float
    pct_variance_top_10: float
    dropped_constant: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "n_eigen_gt_1": self.n_eigen_gt_1,
            "pct_variance_eigen_gt_1": self.pct_variance_eigen_gt_1,
            "pct_variance_top_10": self.pct_variance_top_10,
            "factors_over_variables_pct": 100.0 * self.n_eigen_gt_1 / self.n_vars if self.n_vars else 0.0,
            "eigenvalue_sum": float(self.eigenvalues.sum()),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "dropped_constant": list(self.dropped_constant),
        }


def correlation_eigenvalues(x: sp.spmatrix) -> np.ndarray:
    """Descending eigenvalues of the Pearson correlation of the columns of x.

    Works from integer cross-products, so the centred scatter matrix is
    exact for integer data before the final division.
    """
    x = sp.csr_matrix(x, dtype=np.int64)
    n = x.shape[0]
    s = np.asarray(x.sum(axis=0)).ravel()
    gram = (x.T @ x).toarray()
    scatter = n * gram - np.outer(s, s)
    sd = np.sqrt(np.diag(scatter).astype(np.float64))
    corr = scatter / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2
    return np.linalg.eigvalsh(corr)[::-1]


def eigen_summary(m: IncidenceMatrix, kind: str = "binary") -> EigenSummary:
    x = m.values(kind)[:, np.flatnonzero(m.used)]
    labels = [m.categories[j].label for j in np.flatnonzero(m.used)]
    n = x.shape[0]
    if n < 2:
        raise DomainError("eigen summary needs at least two rows")
    s = np.asarray(x.sum(axis=0)).ravel()
    sq = np.asarray(x.multiply(x).sum(axis=0)).ravel()
    constant = n * sq - s * s == 0
    dropped = [lab for lab, c in zip(labels, constant) if c]
    keep = np.flatnonzero(~constant)
    if len(keep) < 2:
        raise DomainError(f"eigen summary needs at least two non-constant columns, got {len(keep)}")
    ev = correlation_eigenvalues(x[:, keep])
    k = len(keep)
    big = ev[ev > 1.0 + EIGEN_TOL]
    return EigenSummary(
        n_vars=k,
        eigenvalues=ev,
        n_eigen_gt_1=len(big),
        pct_variance_eigen_gt_1=100.0 * float(big.sum()) / k,
        pct_variance_top_10=100.0 * float(ev[:10].sum()) / k,
        dropped_constant=dropped,
    )


def _sps_quote(label: str) -> str:
    return '"' + label.replace('"', '""') + '"'


def export_matrix(m: IncidenceMatrix, directory, kind: str = "binary",
                  matrix_name: str = "matrix.txt", labels_name: str = "labels.sps"):
    """Write the matrix as TSV plus a variable-label syntax sidecar.

    Data columns are read as v1..vN; the sidecar attaches the category
    labels to those variable names.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mpath, lpath = directory / matrix_name, directory / labels_name
    dense = m.values(kind).toarray()
    header = ["PMID"] + [lab.replace("\t", " ") for lab in m.categories.labels]
    try:
        with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(header) + "\n")
            for pmid, row in zip(m.rows, dense):
                fh.write(f"{pmid}\t" + "\t".join(map(str, row.tolist())) + "\n")
        with open(lpath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("VARIABLE LABELS\n")
            for j, c in enumerate(m.categories.categories, 1):
                fh.write(f"  v{j} {_sps_quote(c.label)}\n")
            fh.write(".\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write matrix export: {exc.strerror}",
                      os.fspath(exc.filename or directory)) from exc
    return mpath, lpath


def import_matrix(path):
    """Read an exported matrix back as (pmids, labels, dense int array)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        pmids, rows = [], []
        for line in fh:
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            pmids.append(int(cells[0]))
            rows.append([int(v) for v in cells[1:]])
    arr = np.asarray(rows, dtype=np.int64).reshape(len(rows), len(header) - 1)
    return pmids, header[1:], arr


def read_sps_labels(path) -> list[str]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("v") and " " in line:
                _, quoted = line.split(" ", 1)
                out.append(quoted[1:-1].replace('""', '"'))
    return out
