import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elflab.electric import (dirichlet_laplacian, energy, flow_energy, green_matrix, harmonic_measure,
                             harmonic_measure_matrix, modified_escape_identity, solve_electric, voltages)
from elflab.fixtures import fix_a, fix_b, fix_c, fix_d, fix_e
from elflab.graph_core import attach_source_stub, path_graph, random_weighted_graph
from elflab.walks import walk_quantities

from conftest import random_graphs


def merged_resistance(G):
    """Oracle: contract M to one vertex, then R = b^T L^+ b."""
    n = G.n
    idx = np.arange(n)
    M = list(G.sinks)
    rest = [x for x in range(n) if x not in M]
    lab = {x: i for i, x in enumerate(rest)}
    k = len(rest)
    for m in M:
        lab[m] = k
    L = np.zeros((k + 1, k + 1))
    for u, v, w in G.edges:
        a, b = lab[u], lab[v]
        if a == b:
            continue
        L[a, a] += w
        L[b, b] += w
        L[a, b] -= w
        L[b, a] -= w
    bvec = np.zeros(k + 1)
    bvec[lab[G.source]] = 1
    bvec[k] = -1
    return float(bvec @ np.linalg.pinv(L) @ bvec)


def test_series_resistances():
    assert solve_electric(fix_a()).resistance == pytest.approx(1.0)
    assert solve_electric(fix_b()).resistance == pytest.approx(2.0)
    assert solve_electric(fix_c()).resistance == pytest.approx(1 / 0.6 + 1 / 0.4)
    # FIX-D: two paths in parallel from vertex 1, lengths 1 and 2
    assert solve_electric(fix_d()).resistance == pytest.approx(1 / (1 + 1 / 2))
    # FIX-E: from 0, paths of length 2 each way to {2, 4}
    assert solve_electric(fix_e()).resistance == pytest.approx(1.0)


def test_fix_c_rd():
    G = fix_c()
    assert solve_electric(G).resistance * G.degrees[0] == pytest.approx(2.5)


@pytest.mark.parametrize("G", random_graphs(20), ids=lambda g: f"n{g.n}")
def test_resistance_matches_pseudoinverse_oracle(G):
    sol = solve_electric(G)
    assert sol.resistance == pytest.approx(merged_resistance(G), rel=1e-9)
    assert energy(sol) == pytest.approx(sol.resistance, rel=1e-10)
    assert sol.demand_residual() < 1e-10


def test_flow_is_antisymmetric_potential_flow(fixture_graph):
    G = fixture_graph
    sol = solve_electric(G)
    assert np.allclose(sol.flow[G.swap], -sol.flow)
    v = sol.voltages
    assert np.allclose(sol.flow, G.arc_weight * (v[G.arc_tail] - v[G.arc_head]))
    assert np.allclose(v[list(G.sinks)], 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 15), st.integers(0, 10 ** 5), st.floats(-1, 1))
def test_thomson_principle(n, seed, scale):
    # adding a circulation never lowers the energy
    G = random_weighted_graph(n, seed, extra=1.5)
    sol = solve_electric(G)
    rng = np.random.default_rng(seed)
    # a circulation: potential-free flow around a random cycle basis element, via projection
    c = rng.standard_normal(G.n_edges)
    arcs_fwd = np.arange(0, G.n_arcs, 2)
    B = np.zeros((G.n, G.n_edges))
    B[G.arc_tail[arcs_fwd], np.arange(G.n_edges)] = 1
    B[G.arc_head[arcs_fwd], np.arange(G.n_edges)] = -1
    c -= np.linalg.pinv(B) @ (B @ c)  # divergence-free everywhere
    circ = np.zeros(G.n_arcs)
    circ[arcs_fwd] = c
    circ[arcs_fwd + 1] = -c
    assert flow_energy(G, sol.flow + scale * circ) >= sol.resistance - 1e-10


def test_green_matrix_columns_are_voltages(fixture_graph):
    G = fixture_graph
    V = green_matrix(G)
    for j, x in enumerate(G.transient):
        assert np.allclose(V[:, j], voltages(G, int(x)))
    L = dirichlet_laplacian(G)
    assert np.allclose(L @ V[G.transient], np.eye(len(G.transient)))


def test_harmonic_measure_fix_d():
    hm = harmonic_measure(fix_d())
    assert hm[0] == pytest.approx(2 / 3, abs=1e-12)
    assert hm[3] == pytest.approx(1 / 3, abs=1e-12)


@pytest.mark.parametrize("G", random_graphs(10, seed0=77), ids=lambda g: f"n{g.n}")
def test_harmonic_measure_from_current(G):
    # oracle: the current into sink m of the unit flow equals the arrival probability at m
    sol = solve_electric(G)
    hm = harmonic_measure(G)
    for m in G.sinks:
        inflow = sum(sol.flow[a] for a in range(G.n_arcs) if G.arc_head[a] == m)
        assert hm[m] == pytest.approx(inflow, abs=1e-10)
    H = harmonic_measure_matrix(G)
    assert np.allclose(H.sum(axis=1), 1)


@pytest.mark.parametrize("make", [fix_a, fix_b, fix_c])
def test_stub_identity(make):
    G = make()
    ws = walk_quantities(G)
    for eta in (1.0, 2.0, max(1.0, ws.ET / ws.Rd)):
        idn = modified_escape_identity(attach_source_stub(G, eta))
        assert idn.Rd_hat == pytest.approx(1 + eta * ws.Rd, abs=1e-10)
        assert idn.ET_hat == pytest.approx(idn.decomposition, abs=1e-8)
        assert idn.holds


def test_stub_fix_b_eta2():
    idn = modified_escape_identity(attach_source_stub(fix_b(), 2.0))
    # hand derivation: R_hat = 2 + 1/2, d_hat = 2, ET_hat = 5 + 2*4*1/2.5 + (2/2.5)*3
    assert idn.R_hat == pytest.approx(2.5)
    assert idn.ET_hat == pytest.approx(5 + 3.2 + 2.4)
    assert idn.ET_hat == pytest.approx(10.6)


def test_path_voltages_linear():
    G = path_graph(10)
    v = voltages(G)
    assert np.allclose(v, 9 - np.arange(10))
