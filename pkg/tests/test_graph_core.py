import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elflab.fixtures import FIX_B, fix_a, fix_b, fix_e
from elflab.graph_core import (GraphValidationError, attach_source_stub, cycle_graph, detach_source_stub,
                               load_graph, make_graph, path_graph, random_regular_graph,
                               random_weighted_graph, read_graph)


def test_fix_b_structure():
    G = load_graph(FIX_B)
    assert G.n == 3 and G.source == 0 and G.sinks == (2,)
    assert G.n_edges == 2 and G.n_arcs == 4
    assert np.allclose(G.degrees, [1, 2, 1])
    assert G.total_weight == 4  # sum of degrees


def test_arcs_pair_up(fixture_graph):
    G = fixture_graph
    k = np.arange(G.n_arcs)
    assert np.all(G.swap[G.swap] == k)
    assert np.all(G.arc_tail[G.swap] == G.arc_head)
    assert np.all(G.arc_weight[G.swap] == G.arc_weight)
    for a, (x, y) in enumerate(zip(G.arc_tail, G.arc_head)):
        assert G.arc_index[(int(x), int(y))] == a


def test_transition_rows_stochastic(fixture_graph):
    P = fixture_graph.transition
    assert np.allclose(P.sum(axis=1), 1)


def test_comments_and_blank_lines():
    G = load_graph("# header\n3 0 2\n\n0 1 1 # first\n1 2 1\n")
    assert G.n_edges == 2


@pytest.mark.parametrize("text", [
    "",
    "3 0\n0 1 1\n",
    "3 0 0\n0 1 1\n1 2 1\n",      # source in sink
    "3 0 2\n0 1 -1\n1 2 1\n",     # negative weight
    "3 0 2\n0 1 1\n0 1 1\n1 2 1\n",  # repeated edge
    "3 0 2\n0 0 1\n1 2 1\n",      # loop
    "4 0 3\n0 1 1\n2 3 1\n",      # 0 cannot reach the sink
    "3 0 5\n0 1 1\n1 2 1\n",      # sink out of range
])
def test_invalid_documents_rejected(text):
    with pytest.raises(GraphValidationError):
        load_graph(text)


def test_text_round_trip(tmp_path, fixture_graph):
    p = tmp_path / "g.txt"
    p.write_text(fixture_graph.to_text())
    H = read_graph(p)
    assert H.edges == fixture_graph.edges and H.source == fixture_graph.source and H.sinks == fixture_graph.sinks


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 25), st.integers(0, 10 ** 6))
def test_random_graph_round_trip(n, seed):
    G = random_weighted_graph(n, seed)
    H = load_graph(G.to_text())
    assert H.edges == G.edges
    assert np.allclose(H.weights, G.weights)


def test_stub_attach_detach():
    G = fix_b()
    Gh = attach_source_stub(G, 2.0)
    H = Gh.graph
    assert H.n == 4 and H.source == 3 and Gh.sigma == 3
    # stub weight eta * d_s
    assert H.weights[3, 0] == pytest.approx(2.0 * G.degrees[0])
    assert H.degrees[0] == pytest.approx(G.degrees[0] * 3)
    assert np.all(H.arc_tail[Gh.arc_map] == G.arc_tail)
    assert np.all(H.arc_head[Gh.arc_map] == G.arc_head)
    a, b = Gh.stub_arcs
    assert (H.arc_tail[a], H.arc_head[a]) == (3, 0)
    assert detach_source_stub(Gh).edges == G.edges


def test_stub_rejects_small_eta():
    with pytest.raises(GraphValidationError):
        attach_source_stub(fix_a(), 0.5)


def test_with_source():
    G = fix_e().with_source(3)
    assert G.source == 3 and G.sinks == (2, 4)
    with pytest.raises(GraphValidationError):
        fix_e().with_source(2)


@pytest.mark.parametrize("n,d,m", [(16, 3, 2), (64, 3, 8), (30, 4, 5)])
def test_random_regular(n, d, m):
    G = random_regular_graph(n, d, m, seed=7)
    assert np.allclose(G.degrees, d) and G.is_regular()
    assert len(G.sinks) == m and G.source not in G.sinks
    H = random_regular_graph(n, d, m, seed=7)  # seeded
    assert (H.edges, H.source, H.sinks) == (G.edges, G.source, G.sinks)


def test_random_regular_invalid():
    with pytest.raises(GraphValidationError):
        random_regular_graph(5, 3, 1, 0)
    with pytest.raises(GraphValidationError):
        random_regular_graph(8, 3, 8, 0)


def test_generators():
    P = path_graph(5)
    assert P.sinks == (4,) and P.n_edges == 4
    C = cycle_graph(6, 0, (3,))
    assert np.allclose(C.degrees, 2)
    with pytest.raises(GraphValidationError):
        make_graph(3, [(0, 1, 1.0)], 0, [1])  # isolated vertex 2
