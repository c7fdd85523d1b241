import math

import numpy as np
import pytest

from elflab.fixtures import fix_a, fix_b, fix_c, fix_d, fix_e
from elflab.graph_core import cycle_graph, path_graph, random_regular_graph
from elflab.walks import (StepBudgetExceeded, fundamental_matrix_stats, q_matrix_bounds, simulate_walk,
                          simulate_walks, spectral_gap, vertex_quantities, walk_quantities)

from conftest import random_graphs


def test_fix_b_values():
    ws = walk_quantities(fix_b())
    assert (ws.R, ws.HT, ws.ET, ws.CT, ws.p) == pytest.approx((2, 4, 3, 8, 0.5))


def test_fix_a_values():
    ws = walk_quantities(fix_a())
    assert (ws.HT, ws.ET, ws.CT, ws.p) == pytest.approx((1, 1, 2, 1))


def test_path_hitting_time():
    # gambler's ruin with a reflecting end: HT = (n-1)^2
    assert walk_quantities(path_graph(64)).HT == pytest.approx(63 ** 2)


@pytest.mark.parametrize("G", random_graphs(25, n_max=20, seed0=5), ids=lambda g: f"n{g.n}")
def test_time_chain(G):
    ws = walk_quantities(G)
    assert ws.chain_holds()


@pytest.mark.parametrize("G", [fix_b(), fix_d(), fix_e()] + random_graphs(5, 12, seed0=50),
                         ids=lambda g: f"n{g.n}")
def test_fundamental_matrix_agrees(G):
    ws = walk_quantities(G)
    ex = fundamental_matrix_stats(G, "exact")
    assert ex.HT == pytest.approx(ws.HT, rel=1e-10)
    assert ex.Rd == pytest.approx(ws.Rd, rel=1e-10)
    assert ex.ET == pytest.approx(ws.ET, rel=1e-10)
    assert ex.visits_vs_voltage < 1e-10
    se = fundamental_matrix_stats(G, "series", t_max=4000)
    assert se.HT == pytest.approx(ws.HT, rel=1e-6)


def test_regular_series_escape_time():
    G = cycle_graph(8, 0, (4,))
    ex = fundamental_matrix_stats(G, "exact")
    assert ex.ET_series == pytest.approx(walk_quantities(G).ET, rel=1e-10)


def test_series_needs_length():
    with pytest.raises(ValueError):
        fundamental_matrix_stats(fix_b(), "series")


@pytest.mark.parametrize("make", [fix_b, fix_d, fix_e])
def test_monte_carlo_times(make):
    G = make()
    ws = walk_quantities(G)
    b = simulate_walks(G, 20000, seed=3, return_to_source=True)
    for name, exact in (("tau", ws.HT), ("sigma", ws.ET), ("kappa", ws.CT)):
        m, se = b.mean_se(name)
        assert abs(m - exact) < 4 * se, name


def test_single_trace_fields():
    tr = simulate_walk(fix_b(), seed=11, return_to_source=True)
    assert tr.path[0] == 0 and tr.path[tr.tau] == 2
    assert tr.sigma - 1 <= tr.tau and tr.path[tr.sigma - 1] == 0
    assert tr.path[tr.kappa] == 0
    for x, y in zip(tr.path, tr.path[1:]):
        assert abs(x - y) == 1


def test_budget():
    with pytest.raises(StepBudgetExceeded):
        simulate_walk(path_graph(50), seed=0, budget=10)


def test_spectral_gap_cycle():
    # odd cycle eigenvalues cos(2 pi k / n); the most negative one sets the absolute gap
    G = cycle_graph(5, 0, (1,))
    assert spectral_gap(G, absolute=False) == pytest.approx(1 - math.cos(2 * math.pi / 5))
    assert spectral_gap(G) == pytest.approx(1 - abs(math.cos(4 * math.pi / 5)))
    assert spectral_gap(cycle_graph(6, 0, (1,))) == pytest.approx(0, abs=1e-12)  # bipartite


@pytest.mark.parametrize("seed", range(5))
def test_q_bounds_regular(seed):
    G = random_regular_graph(64, 3, 8, seed)
    r = q_matrix_bounds(G)
    assert r["spectral_ok"] and r["mix_ok"]


def test_vertex_quantities_match_per_source(fixture_graph):
    G = fixture_graph
    vq = vertex_quantities(G)
    for i, x in enumerate(vq.vertices):
        ws = walk_quantities(G.with_source(int(x)))
        assert (vq.R[i], vq.ET[i], vq.HT[i]) == pytest.approx((ws.R, ws.ET, ws.HT), rel=1e-10)
