import math

import numpy as np
import pytest

from elflab.fixtures import fix_a, fix_b, fix_c, fix_d
from elflab.resistance import (BinarySearch, KnownEstimator, RotationModel, binary_search_plan,
                               controlled_power_state, estimate_known, known_estimate_plan,
                               lower_bound_fixture, phase_to_sin, qpe_distribution, qpe_estimate,
                               resistance_summary, sin_to_Rd)
from elflab.walks import walk_quantities


def test_rotation_angle(fixture_graph):
    m = RotationModel.from_graph(fixture_graph)
    ws = walk_quantities(fixture_graph)
    assert m.sin_theta == pytest.approx(1 / math.sqrt(2 * ws.Rd))
    assert m.action_defect() < 1e-9
    ph = m.eigenphases()
    assert np.allclose(np.abs(ph), 2 * m.theta)
    assert m.W == pytest.approx(ws.ET / ws.Rd - 1, abs=1e-9)


def test_fix_b_t6_reads_pi_over_6():
    state = controlled_power_state(fix_b(), 6, "exact")
    p = qpe_distribution(state)
    assert p[1] + p[5] == pytest.approx(1.0, abs=1e-12)
    assert phase_to_sin(1, 6) == pytest.approx(math.sin(math.pi / 6))
    rec = qpe_estimate(fix_b(), tau=1.5, T=6, seed=0, tol=1e-12)
    assert rec.estimate == pytest.approx(2.0) and rec.success_probability == pytest.approx(1.0)


@pytest.mark.parametrize("make,T", [(fix_a, 4), (fix_b, 3)])
def test_composed_counter_matches_exact(make, T):
    exact = controlled_power_state(make(), T, "exact")
    comp, res = controlled_power_state(make(), T, "composed")
    assert np.allclose(comp, exact, atol=1e-9)
    deg, res2 = controlled_power_state(make(), T, "degraded")
    assert np.linalg.norm(deg - exact) <= 0.1 + 1e-9


def test_composed_mode_dimension_cap():
    with pytest.raises(ValueError):
        controlled_power_state(fix_b(), 40, "composed")


def test_sin_to_rd():
    assert sin_to_Rd(0.5) == pytest.approx(2.0)


def test_known_plan_scaling():
    # the counter length scales as 1/eps
    Ts = [known_estimate_plan(3.0, 2.0, e)[1] for e in (0.1, 0.01)]
    assert Ts[1] / Ts[0] == pytest.approx(10, rel=0.01)


@pytest.mark.parametrize("make", [fix_b, fix_c, fix_d])
def test_known_estimator_success(make):
    G = make()
    ws = walk_quantities(G)
    k = KnownEstimator(G, ws.ET, ws.Rd, 0.1)
    assert k.success_probability >= 2 / 3
    assert abs(k.dist.sum() - 1) < 1e-12


def test_known_estimate_record():
    ws = walk_quantities(fix_c())
    rec = estimate_known(fix_c(), ws.ET, 2.0, 0.05, seed=4)
    assert rec.exact == pytest.approx(2.5)
    assert rec.walk_steps == math.ceil(3 * rec.T)


def test_binary_search_plan():
    T, tau = binary_search_plan(4.0)
    assert T == math.ceil(4 * math.sqrt(2) * math.pi * 2)


@pytest.mark.parametrize("make", [fix_b, fix_c, fix_d])
def test_binary_search_guarantee(make):
    G = make()
    bs = BinarySearch(G, walk_quantities(G).ET)
    dist = bs.output_distribution()
    assert sum(dist.values()) == pytest.approx(1.0)
    assert bs.guarantee_probability() >= 2 / 3
    rec = bs.run(seed=2)
    assert rec.iterations <= bs.max_iter


def test_lower_bound_fixture():
    d = 0.1
    r = lower_bound_fixture(d)
    # R_s d_s = 1/(1/2 - delta) for the weights 1/2 +- delta
    assert r["Rd_plus"] == pytest.approx(1 / (0.5 - d))
    assert r["Rd_minus"] == pytest.approx(1 / (0.5 + d))
    assert r["star_overlap"] == pytest.approx(math.sqrt(1 - 4 * d * d))
    with pytest.raises(ValueError):
        lower_bound_fixture(0.7)


def test_summary(fixture_graph):
    s = resistance_summary(fixture_graph)
    assert s["W"] == pytest.approx(s["ET_over_Rd"] - 1, abs=1e-9)
