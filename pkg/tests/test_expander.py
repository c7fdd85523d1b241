import math

import numpy as np
import pytest

from elflab.expander import (LabeledGraph, bound_scales, expander_stats, perturbed_arrival_tv, sink_sizes,
                             ssl_label)
from elflab.fixtures import fix_b, fix_d
from elflab.graph_core import random_regular_graph


def test_bound_scales():
    s = bound_scales(64, 4)
    assert s["ET"] == pytest.approx(1 + 64 / 16)
    assert s["EHT"] == 4
    assert bound_scales(64, 1)["EHT"] == 1


def test_small_report():
    r = expander_stats(64, 3, 4, range(3))
    assert all(np.isfinite(v) and v > 0 for v in r.constants.values())
    assert r.constants["R"] <= 10
    assert r.Q_norm_ok
    assert r.absorption_constant > 0
    assert r.arrival_defect < 1e-8


def test_single_sink_absorbs_quickly():
    r = expander_stats(64, 3, 1, range(3))
    assert r.max_values["EHT"] <= 10  # O(1) elfs steps even with one sink


def test_sink_sizes():
    assert sink_sizes(256) == {"sqrt": 16, "sixteenth": 16}


@pytest.mark.parametrize("seed", range(3))
def test_perturbed_tv(seed):
    G = random_regular_graph(64, 3, 8, seed)
    assert perturbed_arrival_tv(G, seed=seed) < 0.05


def test_ssl_fix_d():
    LG = LabeledGraph(fix_d(), {0: 1, 3: 0})
    r = ssl_label(LG, "exact")
    assert r.value == pytest.approx(2 / 3) and r.label == 1
    for m in ("walk-mc", "elfs-mc", "quantum-sim"):
        e = ssl_label(LG, m, 4000, seed=1)
        assert abs(e.value - 2 / 3) < 4 * e.se, m


@pytest.mark.parametrize("method", ["exact", "walk-mc", "elfs-mc", "quantum-sim"])
@pytest.mark.parametrize("b", [0, 1])
def test_ssl_constant_labels(method, b):
    LG = LabeledGraph(fix_d(), {0: b, 3: b})
    assert ssl_label(LG, method, 200).value == pytest.approx(b)


def test_ssl_expander_estimators_agree():
    G = random_regular_graph(256, 3, 16, 0)
    rng = np.random.default_rng(0)
    LG = LabeledGraph(G, dict(zip(G.sinks, rng.permutation([0, 1] * 8))))
    a = ssl_label(LG, "walk-mc", 10 ** 4, seed=2)
    b = ssl_label(LG, "elfs-mc", 10 ** 4, seed=3)
    assert abs(a.value - b.value) < 4 * math.hypot(a.se, b.se)
    ex = ssl_label(LG, "exact")
    assert abs(b.value - ex.value) < 4 * b.se
    assert b.cost > 0 and a.cost > 0


def test_labels_must_cover_sink():
    with pytest.raises(ValueError):
        LabeledGraph(fix_d(), {0: 1})
    with pytest.raises(ValueError):
        LabeledGraph(fix_b(), {2: 3})
    with pytest.raises(ValueError):
        ssl_label(LabeledGraph(fix_b(), {2: 1}), "nope")
