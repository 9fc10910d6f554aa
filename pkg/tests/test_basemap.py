import re
from collections import Counter, deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from meshmap.basemap import (BRANCH_CLASS, Graph, basemap_from_dict, basemap_to_dict, build_basemap,
                             components, emit_pajek, emit_svg, emit_vos_map, largest_component,
                             layout, read_map_file, read_pajek, render_svg, threshold_graph)
from meshmap.errors import ConfigError
from meshmap.matrix import build_matrix


def bfs_largest(n, edges):
    """Reference: plain BFS labelling, ties to the component with the smallest node."""
    adj = {v: set() for v in range(n)}
    for a, b, _ in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, best = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, q = [], deque([s])
        seen.add(s)
        while q:
            v = q.popleft()
            comp.append(v)
            for w in adj[v] - seen:
                seen.add(w)
                q.append(w)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def test_threshold_boundary():
    sim = np.array([[1.0, 0.01, 0.0100001], [0.01, 1.0, 0.0], [0.0100001, 0.0, 1.0]])
    g = threshold_graph(sim, 0.01)
    assert g.edges == [(0, 2, 0.0100001)]


def test_threshold_all_zero():
    assert threshold_graph(np.zeros((4, 4))).edges == []


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_threshold_idempotent(seed, tau):
    rng = np.random.default_rng(seed)
    a = rng.random((8, 8))
    sim = (a + a.T) / 2
    g = threshold_graph(sim, tau)
    assert all(w > tau for _, _, w in g.edges)
    dense = g.to_sparse().toarray()
    assert threshold_graph(dense, tau).edges == g.edges


def test_largest_component_examples():
    g = Graph(5, [(0, 1, 1.0), (1, 2, 1.0)])
    assert largest_component(g) == [0, 1, 2]
    complete = Graph(4, [(a, b, 0.5) for a in range(4) for b in range(a + 1, 4)])
    assert largest_component(complete) == [0, 1, 2, 3]
    tie = Graph(4, [(2, 3, 1.0), (0, 1, 1.0)])
    assert largest_component(tie) == [0, 1]
    assert largest_component(Graph(0)) == []


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**32 - 1), st.floats(0.0, 0.15))
def test_largest_component_oracle(n, seed, density):
    rng = np.random.default_rng(seed)
    edges = [(a, b, 1.0) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    assert largest_component(Graph(n, edges)) == bfs_largest(n, edges)


def test_components_ranked():
    comp = components(Graph(6, [(4, 5, 1.0), (1, 2, 1.0), (2, 3, 1.0)]))
    assert comp.tolist() == [2, 0, 0, 0, 1, 1]


def test_layout_degenerate():
    assert layout(Graph(1)).tolist() == [[0.5, 0.5]]
    xy = layout(Graph(2, [(0, 1, 1.0)]), seed=3)
    np.testing.assert_allclose(xy.mean(axis=0), [0.5, 0.5], atol=1e-6)
    assert np.linalg.norm(xy[0] - xy[1]) > 0
    assert ((xy >= 0) & (xy <= 1)).all()


def test_layout_path_middle_between_ends():
    g = Graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    for seed in range(100):
        xy = layout(g, seed)
        centred = xy - xy.mean(axis=0)
        axis = np.linalg.svd(centred)[2][0]
        t = centred @ axis
        assert min(t[0], t[2]) < t[1] < max(t[0], t[2]), seed


def test_layout_reproducible():
    g = Graph(6, [(0, 1, 0.3), (1, 2, 0.9), (2, 3, 0.5), (3, 4, 0.2), (4, 5, 0.7), (5, 0, 0.1)])
    assert layout(g, 11).tobytes() == layout(g, 11).tobytes()
    assert ((layout(g, 11) >= 0) & (layout(g, 11) <= 1)).all()


@pytest.fixture(scope="module")
def bm(corpus, tree, strict_cats):
    return build_basemap(build_matrix(corpus, tree, strict_cats), seed=5)


def test_basemap_invariants(bm):
    assert all(w > bm.tau for _, _, w in bm.edges)
    assert bfs_largest(len(bm), bm.edges) == list(range(len(bm)))
    assert set(bm.partition) == {BRANCH_CLASS[b] for b in set(bm.branches)}
    assert BRANCH_CLASS["C"] == 1 and BRANCH_CLASS["D"] == 2 and BRANCH_CLASS["E"] == 3


def test_pajek_structure_and_roundtrip(bm, tmp_path):
    path = emit_pajek(bm, tmp_path / "map.paj")
    text = path.read_text()
    assert f"*Vertices {len(bm)}" in text.splitlines()
    proj = read_pajek(path)
    assert proj.labels == bm.labels
    assert Counter(proj.edges) == Counter(bm.edges)
    assert proj.coords == [tuple(c) for c in bm.coords.tolist()]
    assert proj.partitions["branches"] == bm.partition
    assert proj.vectors["occurrences"] == [float(v) for v in bm.occurrences]
    assert bm.fingerprint in proj.comments[0]


def test_pajek_partition_three_colours(bm):
    assert sorted(set(bm.partition)) == [1, 2, 3]


def test_map_file_roundtrip(bm, tmp_path):
    path = emit_vos_map(bm, tmp_path / "vos.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == "label\tx\ty\tcluster\tweight" and len(lines) == len(bm) + 1
    rows = read_map_file(path)
    assert [r["label"] for r in rows] == bm.labels
    assert [(r["x"], r["y"]) for r in rows] == [tuple(c) for c in bm.coords.tolist()]
    assert [r["weight"] for r in rows] == (bm.occurrences / bm.occurrences.max()).tolist()
    assert max(r["weight"] for r in rows) == 1.0


def test_svg_single_node(tree, strict_cats):
    from meshmap.basemap import BaseMap

    one = BaseMap(strict_cats, [2], np.array([4]), [], np.array([[0.5, 0.5]]), np.array([0]))
    svg = render_svg(one, sizes=[1.0])
    assert svg.count("<circle") == 1 and svg.count("<text") == 1


def test_svg_absent_node_dimmed(bm):
    sizes = np.zeros(len(bm))
    sizes[0] = 2.0
    svg = render_svg(bm, sizes)
    circles = re.findall(r'<circle [^>]*>', svg)
    assert len(circles) == len(bm)
    assert 'r="18.00"' in circles[0] and "fill-opacity" not in circles[0]
    assert all('r="3.00"' in c and 'fill-opacity="0.25"' in c for c in circles[1:])
    assert svg.count("<text") == 1


def test_svg_three_fills(bm, tmp_path):
    svg = emit_svg(bm, tmp_path / "m.svg").read_text()
    fills = set(re.findall(r'<circle [^>]*fill="(#[0-9a-f]{6})"', svg))
    assert len(fills) == 3
    assert svg.count("<line") == len(bm.edges)


def test_json_roundtrip(bm, strict_cats, collapsed_cats):
    data = basemap_to_dict(bm)
    again = basemap_from_dict(data, strict_cats)
    assert again.fingerprint == bm.fingerprint
    assert again.edges == bm.edges and (again.coords == bm.coords).all()
    with pytest.raises(ConfigError):
        basemap_from_dict(data, collapsed_cats)
