from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairfilter.graph import (
    COLUMN,
    SYMMETRIC,
    EdgeListError,
    Graph,
    connected_components,
    load_edge_list,
    normalize,
    smallest_component_size,
    spmv,
    spmv_transpose,
)

from conftest import dense_adjacency, dense_normalized, graphs, random_graph


def test_duplicates_collapse():
    g = load_edge_list("a b\nb c\na b\n")
    assert g.node_count == 3
    assert g.edge_count == 2
    assert g.stats["duplicates"] == 1


def test_self_loop_only_is_error():
    with pytest.raises(EdgeListError):
        load_edge_list("a a\n")


def test_error_reports_line_number():
    with pytest.raises(EdgeListError) as info:
        load_edge_list("# header\na b\na b c\n")
    assert info.value.lineno == 3


def test_comments_and_blank_lines_skipped():
    g = load_edge_list("# comment\n\nx y\n  \ny z\n")
    assert g.labels == {"x": 0, "y": 1, "z": 2}
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_reverse_edge_is_duplicate_when_undirected():
    g = load_edge_list("a b\nb a\n")
    assert g.edge_count == 1


def test_directed_reciprocal_arcs_merge():
    g = load_edge_list("a b\nb a\nb c\n", directed=True)
    assert g.edge_count == 2
    assert g.stats["reciprocal_merged"] == 1


def test_load_from_stream(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("1 2\n2 3\n3 1\n", encoding="utf-8")
    with open(path, encoding="utf-8") as fh:
        g = load_edge_list(fh)
    assert g.edge_count == 3


def test_graph_rejects_noncanonical_edges():
    with pytest.raises(ValueError):
        Graph(3, np.array([[1, 0]]))


def test_two_node_path_symmetric():
    a = normalize(Graph.from_edges(2, [(0, 1)]), SYMMETRIC).dense()
    assert a[0, 1] == 1.0 and a[1, 0] == 1.0


def test_triangle_column_stochastic():
    a = normalize(Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)]), COLUMN).dense()
    np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=1e-15)


def test_star_symmetric_weight():
    a = normalize(Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)]), "sym").dense()
    assert a[0, 1] == pytest.approx(1 / np.sqrt(3), abs=1e-15)


def test_symmetric_matrix_exactly_symmetric(rng):
    a = normalize(random_graph(rng, 30), SYMMETRIC).matrix
    assert (a != a.T).nnz == 0


def test_unknown_mode():
    with pytest.raises(ValueError):
        normalize(Graph.from_edges(2, [(0, 1)]), "row")


def test_spmv_identity_cases():
    g = normalize(Graph.from_edges(2, [(0, 1)]), SYMMETRIC)
    np.testing.assert_array_equal(spmv(g, np.zeros(2)), np.zeros(2))
    np.testing.assert_array_equal(spmv(g, [1.0, 0.0]), [0.0, 1.0])


def test_spmv_length_check():
    g = normalize(Graph.from_edges(2, [(0, 1)]), SYMMETRIC)
    with pytest.raises(ValueError):
        spmv(g, np.ones(3))


@settings(max_examples=60, deadline=None)
@given(graphs(), st.sampled_from([SYMMETRIC, COLUMN]), st.integers(0, 2**32 - 1))
def test_spmv_matches_dense_oracle(graph, mode, seed):
    x = np.random.default_rng(seed).normal(size=graph.node_count)
    ng = normalize(graph, mode)
    dense = dense_normalized(graph, mode)
    np.testing.assert_allclose(spmv(ng, x), dense @ x, atol=1e-12)
    np.testing.assert_allclose(spmv_transpose(ng, x), dense.T @ x, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(graphs(), st.integers(0, 2**32 - 1))
def test_symmetric_self_adjoint(graph, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, graph.node_count))
    ng = normalize(graph, SYMMETRIC)
    assert spmv(ng, x) @ y == pytest.approx(x @ spmv(ng, y), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(graphs(), st.integers(0, 2**32 - 1))
def test_column_mode_preserves_mass(graph, seed):
    q = np.random.default_rng(seed).random(graph.node_count)
    ng = normalize(graph, COLUMN)
    assert spmv(ng, q).sum() == pytest.approx(q[graph.degrees() > 0].sum(), abs=1e-10)


def test_isolated_node_keeps_zero_row():
    g = Graph.from_edges(3, [(0, 1)])
    a = normalize(g, SYMMETRIC).dense()
    assert not a[2].any() and not a[:, 2].any()


def _bfs_labels(graph):
    adj = dense_adjacency(graph)
    labels = -np.ones(graph.node_count, dtype=int)
    comp = 0
    for start in range(graph.node_count):
        if labels[start] >= 0:
            continue
        labels[start] = comp
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if labels[v] < 0:
                    labels[v] = comp
                    queue.append(v)
        comp += 1
    return labels


def test_components_simple():
    assert connected_components(Graph.from_edges(2, [(0, 1)])).max() == 0
    assert connected_components(Graph.from_edges(4, [(0, 1), (2, 3)])).max() == 1


@settings(max_examples=60, deadline=None)
@given(graphs(max_nodes=15))
def test_components_match_bfs(graph):
    ours = connected_components(graph)
    ref = _bfs_labels(graph)
    # same partition: label pairs are in bijection
    assert len(set(zip(ours, ref))) == len(set(ours)) == len(set(ref))
    assert smallest_component_size(graph) == np.bincount(ref).min()
