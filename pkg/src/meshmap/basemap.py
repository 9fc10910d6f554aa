"""Thresholded cosine networks of categories and their file emissions."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, FormatError
from .matrix import CategorySet, IncidenceMatrix, Similarity, cosine_matrix
from .tree import BRANCHES

DEFAULT_TAU = 0.01
DEFAULT_SEED = 42

# fixed so partitions do not depend on which branches happen to be present
BRANCH_CLASS = {b: k for k, b in enumerate("CDE" + "".join(x for x in BRANCHES if x not in "CDE"), 1)}
BRANCH_FILL = {"C": "#d7301f", "D": "#6baed6", "E": "#f2c80f"}
OTHER_FILL = "#9e9e9e"


@dataclass
class Graph:
    n: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def to_sparse(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n, self.n))
        i, j, w = zip(*self.edges)
        a = sp.coo_matrix((w, (i, j)), shape=(self.n, self.n))
        return (a + a.T).tocsr()


def threshold_graph(sim, tau: float = DEFAULT_TAU) -> Graph:
    """Undirected graph keeping only similarities strictly above tau."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    values = sim.values if isinstance(sim, Similarity) else np.asarray(sim, dtype=np.float64)
    n = values.shape[0]
    iu, ju = np.triu_indices(n, 1)
    w = values[iu, ju]
    keep = w > tau
    edges = [(int(a), int(b), float(c)) for a, b, c in zip(iu[keep], ju[keep], w[keep])]
    return Graph(n, edges)


def components(g: Graph) -> np.ndarray:
    """Component id per node; 0 is the largest, ties to the smallest node index."""
    if g.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, raw = connected_components(g.to_sparse(), directed=False)
    groups: dict[int, list[int]] = {}
    for v, c in enumerate(raw):
        groups.setdefault(int(c), []).append(v)
    ranked = sorted(groups.values(), key=lambda nodes: (-len(nodes), nodes[0]))
    out = np.empty(g.n, dtype=np.int64)
    for cid, nodes in enumerate(ranked):
        out[nodes] = cid
    return out


def largest_component(g: Graph) -> list[int]:
    comp = components(g)
    return [int(v) for v in np.flatnonzero(comp == 0)] if g.n else []


def subgraph(g: Graph, nodes) -> Graph:
    pos = {v: k for k, v in enumerate(nodes)}
    edges = [(pos[a], pos[b], w) for a, b, w in g.edges if a in pos and b in pos]
    return Graph(len(nodes), edges)


def layout(g: Graph, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Seeded Fruchterman-Reingold coordinates scaled into the unit square."""
    if g.n == 0:
        return np.zeros((0, 2))
    if g.n == 1:
        return np.array([[0.5, 0.5]])
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_weighted_edges_from(g.edges)
    pos = nx.spring_layout(G, seed=seed, weight="weight")
    xy = np.array([pos[v] for v in range(g.n)], dtype=np.float64)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = float((hi - lo).max())
    if span == 0:
        return np.full((g.n, 2), 0.5)
    xy = (xy - (lo + hi) / 2) / span + 0.5
    return np.round(xy, 6)


@dataclass
class BaseMap:
    categories: CategorySet
    nodes: list[int]
    occurrences: np.ndarray
    edges: list[tuple[int, int, float]]
    coords: np.ndarray
    component_id: np.ndarray
    tau: float = DEFAULT_TAU
    seed: int = DEFAULT_SEED

    def __len__(self):
        return len(self.nodes)

    @property
    def labels(self) -> list[str]:
        return [self.categories[j].label for j in self.nodes]

    @property
    def numbers(self) -> list[str]:
        return [str(self.categories[j].number) for j in self.nodes]

    @property
    def branches(self) -> list[str]:
        return [self.categories[j].branch for j in self.nodes]

    @property
    def partition(self) -> list[int]:
        return [BRANCH_CLASS[b] for b in self.branches]

    @property
    def largest_component(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.component_id == 0)]

    @property
    def graph(self) -> Graph:
        return Graph(len(self.nodes), list(self.edges))

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.categories.fingerprint}|tau={self.tau!r}|seed={self.seed}\n".encode())
        for j in self.nodes:
            h.update(f"{j}\n".encode())
        return h.hexdigest()[:16]

    def normalized_occurrences(self) -> np.ndarray:
        occ = np.asarray(self.occurrences, dtype=np.float64)
        top = occ.max() if len(occ) else 0.0
        return occ / top if top > 0 else np.zeros_like(occ)


def build_basemap(m: IncidenceMatrix, tau: float = DEFAULT_TAU, seed: int = DEFAULT_SEED,
                  largest_only: bool = True, kind: str = "binary") -> BaseMap:
    """Cosine -> threshold -> components -> layout over the used categories."""
    sim = cosine_matrix(m, kind)
    used = np.flatnonzero(sim.used)
    g = threshold_graph(sim.values[np.ix_(used, used)], tau)
    comp = components(g)
    keep = list(range(len(used)))
    if largest_only:
        keep = [int(v) for v in np.flatnonzero(comp == 0)]
        g = subgraph(g, keep)
        comp = np.zeros(len(keep), dtype=np.int64)
    nodes = [int(used[v]) for v in keep]
    occ = m.col_occurrences[nodes] if nodes else np.zeros(0, dtype=np.int64)
    return BaseMap(m.categories, nodes, occ, g.edges, layout(g, seed), comp, tau, seed)


def _num(v) -> str:
    return repr(float(v))


def _pajek_label(label: str) -> str:
    return '"' + label.replace('"', "'") + '"'


def emit_pajek(bm: BaseMap, path, vector=None, vector_name: str = "occurrences") -> Path:
    """Pajek project: network with coordinates, branch partition, size vector."""
    path = Path(path)
    n = len(bm)
    vector = bm.occurrences if vector is None else vector
    lines = [f"% meshmap basemap {bm.fingerprint} categories {bm.categories.fingerprint}",
             "*Network basemap", f"*Vertices {n}"]
    for k, (label, (x, y)) in enumerate(zip(bm.labels, bm.coords), 1):
        lines.append(f"{k} {_pajek_label(label)} {_num(x)} {_num(y)} 0.5")
    lines.append("*Edges")
    lines.extend(f"{a + 1} {b + 1} {_num(w)}" for a, b, w in bm.edges)
    lines.append("")
    lines += ["*Partition branches", f"*Vertices {n}"]
    lines.extend(str(c) for c in bm.partition)
    lines.append("")
    lines += [f"*Vector {vector_name}", f"*Vertices {n}"]
    lines.extend(_num(v) for v in vector)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@dataclass
class PajekProject:
    labels: list[str] = field(default_factory=list)
    coords: list[tuple[float, float]] = field(default_factory=list)
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    partitions: dict[str, list[int]] = field(default_factory=dict)
    vectors: dict[str, list[float]] = field(default_factory=dict)
    comments: list[str] = field(default_factory=list)


def _split_vertex(line: str):
    head, _, rest = line.partition(" ")
    if rest.startswith('"'):
        label, _, tail = rest[1:].partition('"')
    else:
        label, _, tail = rest.partition(" ")
    return int(head), label, tail.split()


def read_pajek(path) -> PajekProject:
    """Parse the subset of the Pajek project format that emit_pajek writes.

    Standalone ``.vec`` and ``.clu`` files parse too; their values land
    under the name ``""``.
    """
    proj = PajekProject()
    section = None
    name = ""
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("%"):
            proj.comments.append(line[1:].strip())
            continue
        if line.startswith("*"):
            word, _, arg = line[1:].partition(" ")
            word = word.lower()
            if word == "vertices":
                if section in ("partition", "vector"):
                    continue
                section = section if section == "network" else "vector"
                if section == "vector":
                    proj.vectors.setdefault(name, [])
            elif word == "network":
                section = "network"
            elif word in ("edges", "arcs"):
                section = "edges"
            elif word == "partition":
                section, name = "partition", arg.strip()
                proj.partitions[name] = []
            elif word == "vector":
                section, name = "vector", arg.strip()
                proj.vectors[name] = []
            else:
                raise FormatError(f"unsupported Pajek section {line!r}")
            continue
        if section == "network":
            _, label, rest = _split_vertex(line)
            proj.labels.append(label)
            if len(rest) >= 2:
                proj.coords.append((float(rest[0]), float(rest[1])))
        elif section == "edges":
            a, b, *w = line.split()
            proj.edges.append((int(a) - 1, int(b) - 1, float(w[0]) if w else 1.0))
        elif section == "partition":
            proj.partitions[name].append(int(line))
        elif section == "vector":
            proj.vectors[name].append(float(line))
        else:
            raise FormatError(f"data line outside any section: {line!r}")
    return proj


MAP_COLUMNS = ("label", "x", "y", "cluster", "weight")


def write_map_file(path, labels, coords, clusters, weights) -> Path:
    path = Path(path)
    rows = ["\t".join(MAP_COLUMNS)]
    for label, (x, y), c, w in zip(labels, coords, clusters, weights):
        rows.append("\t".join([label.replace("\t", " "), _num(x), _num(y), str(int(c)), _num(w)]))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def read_map_file(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != MAP_COLUMNS:
        raise FormatError(f"{path}: not a map file (header {lines[:1]!r})")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        label, x, y, c, w = line.split("\t")
        out.append({"label": label, "x": float(x), "y": float(y), "cluster": int(c), "weight": float(w)})
    return out


def emit_vos_map(bm: BaseMap, path, weights=None) -> Path:
    weights = bm.normalized_occurrences() if weights is None else weights
    return write_map_file(path, bm.labels, bm.coords, bm.partition, weights)


SVG_SIZE = 1000
SVG_MARGIN = 40
R_MIN, R_MAX = 3.0, 18.0


def render_svg(bm: BaseMap, sizes=None, caption: str | None = None) -> str:
    """SVG markup for the base map, optionally sized by a per-node vector.

    Without sizes every node is drawn with a uniform radius and a label.
    With sizes, nodes at zero (or NaN) are drawn at minimum radius and
    dimmed, and only sized nodes are labelled.
    """
    n = len(bm)
    if sizes is None:
        sz = np.ones(n)
        active = np.ones(n, dtype=bool)
        radius = np.full(n, 6.0)
    else:
        sz = np.nan_to_num(np.asarray(sizes, dtype=np.float64), nan=0.0)
        active = sz > 0
        top = sz.max() if n and active.any() else 1.0
        radius = np.where(active, R_MIN + (R_MAX - R_MIN) * sz / top, R_MIN)
    span = SVG_SIZE - 2 * SVG_MARGIN
    px = SVG_MARGIN + bm.coords[:, 0] * span if n else np.zeros(0)
    py = SVG_MARGIN + (1.0 - bm.coords[:, 1]) * span if n else np.zeros(0)

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_SIZE}" '
           f'height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
           f'<rect width="{SVG_SIZE}" height="{SVG_SIZE}" fill="#ffffff"/>',
           '<g id="edges" stroke="#777777">']
    wmax = max((w for _, _, w in bm.edges), default=1.0)
    for a, b, w in bm.edges:
        out.append(f'<line x1="{px[a]:.2f}" y1="{py[a]:.2f}" x2="{px[b]:.2f}" y2="{py[b]:.2f}" '
                   f'stroke-opacity="{0.6 * w / wmax:.3f}" stroke-width="0.6"/>')
    out.append("</g>")
    out.append('<g id="nodes" stroke="#333333" stroke-width="0.5">')
    for v in range(n):
        fill = BRANCH_FILL.get(bm.branches[v], OTHER_FILL)
        dim = "" if active[v] else ' fill-opacity="0.25" stroke-opacity="0.25"'
        out.append(f'<circle cx="{px[v]:.2f}" cy="{py[v]:.2f}" r="{radius[v]:.2f}" fill="{fill}"{dim}>'
                   f'<title>{escape(bm.labels[v])}</title></circle>')
    out.append("</g>")
    out.append('<g id="labels" font-family="Helvetica, Arial, sans-serif" font-size="10" fill="#111111">')
    for v in np.flatnonzero(active):
        out.append(f'<text x="{px[v] + radius[v] + 2:.2f}" y="{py[v] + 3:.2f}">{escape(bm.labels[v])}</text>')
    out.append("</g>")
    if caption:
        out.append(f'<text id="caption" x="{SVG_MARGIN}" y="{SVG_MARGIN - 12}" font-family="Helvetica, Arial, '
                   f'sans-serif" font-size="20" fill="#111111">{escape(caption)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(bm: BaseMap, path, sizes=None, caption: str | None = None) -> Path:
    path = Path(path)
    path.write_text(render_svg(bm, sizes, caption), encoding="utf-8")
    return path


def basemap_to_dict(bm: BaseMap) -> dict:
    cats = bm.categories
    return {
        "fingerprint": bm.fingerprint,
        "category_fingerprint": cats.fingerprint,
        "depth_mode": cats.depth_mode,
        "branches": sorted(cats.branch_filter),
        "tau": bm.tau,
        "seed": bm.seed,
        "nodes": [
            {"index": j, "tree_number": str(cats[j].number), "label": cats[j].label,
             "x": float(x), "y": float(y), "occurrences": int(o), "component": int(c)}
            for j, (x, y), o, c in zip(bm.nodes, bm.coords, bm.occurrences, bm.component_id)
        ],
        "edges": [[a, b, w] for a, b, w in bm.edges],
    }


def basemap_from_dict(data: dict, cats: CategorySet) -> BaseMap:
    if data["category_fingerprint"] != cats.fingerprint:
        raise ConfigError(f"category set {cats.fingerprint} does not match base map "
                          f"{data['fingerprint']} (categories {data['category_fingerprint']})")
    nodes = data["nodes"]
    return BaseMap(
        categories=cats,
        nodes=[d["index"] for d in nodes],
        occurrences=np.array([d["occurrences"] for d in nodes], dtype=np.int64),
        edges=[(int(a), int(b), float(w)) for a, b, w in data["edges"]],
        coords=np.array([[d["x"], d["y"]] for d in nodes], dtype=np.float64).reshape(len(nodes), 2),
        component_id=np.array([d["component"] for d in nodes], dtype=np.int64),
        tau=data["tau"],
        seed=data["seed"],
    )
