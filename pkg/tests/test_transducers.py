import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from elflab.edge_space import EdgeSpace, ToleranceError
from elflab.fixtures import fix_a, fix_b, fix_e
from elflab.transducers import (Transducer, certify, compose_transducers, degraded_scale,
                                effective_gap_transducer, elfs_catalyst, elfs_reflection_certificate,
                                generic_catalyst, hadamard_test_certificate, oracle_execute,
                                schedule_length, walk_transducer, zero_error_aa)
from elflab.walks import walk_quantities

from conftest import random_graphs

THETAS = [0.0, np.pi / 4, np.pi / 2, np.pi]


def random_transducer(seed, n=6, k=3):
    U = unitary_group.rvs(n, random_state=seed)
    P = np.diag([1.0] * k + [0.0] * (n - k))
    return Transducer(U, P)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_generic_catalyst_certifies(seed, k):
    T = random_transducer(seed, 6, k)
    rng = np.random.default_rng(seed)
    xi = np.zeros(6, complex)
    xi[:k] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    cert = generic_catalyst(T, xi)
    assert cert.residual < 1e-9
    assert np.allclose(T.public_action @ xi, cert.tau)
    assert cert.norm_defect < 1e-9


def test_public_action_is_unitary_on_public_space():
    T = random_transducer(3, 7, 4)
    A = T.public_action[:4, :4]
    assert np.allclose(A.conj().T @ A, np.eye(4), atol=1e-9)


def test_certify_rejects_private_input():
    T = random_transducer(1)
    with pytest.raises(ValueError):
        certify(T, np.eye(6)[5], np.zeros(6))


def test_non_unitary_rejected():
    with pytest.raises(ToleranceError):
        Transducer(np.ones((2, 2)), np.eye(2))


@pytest.mark.parametrize("G", [fix_a(), fix_b(), fix_e()] + random_graphs(15, n_max=20, seed0=500),
                         ids=lambda g: f"n{g.n}")
def test_elfs_reflection(G):
    cert = elfs_reflection_certificate(G)
    ws = walk_quantities(G)
    assert cert.residual < 1e-9
    assert cert.W == pytest.approx(ws.ET / ws.Rd - 1, abs=1e-9)
    E = EdgeSpace(G)
    assert np.allclose(cert.tau, 2 * np.vdot(E.f, E.phi_s) * E.f - E.phi_s)


def test_fix_b_catalyst_closed_form():
    # only vertex a (voltage 1, degree 2) contributes: w = (1/(2*1)) * sqrt 2 * phi_a
    E = EdgeSpace(fix_b())
    w = elfs_catalyst(fix_b(), E)
    assert np.allclose(w, (np.sqrt(2) / 2) * E.phi(1))
    assert np.linalg.norm(w) ** 2 == pytest.approx(0.5)  # ET/Rd - 1 = 3/2 - 1


@pytest.mark.parametrize("theta", THETAS)
def test_partial_rotation(fixture_graph, theta):
    E = EdgeSpace(fixture_graph)
    r = effective_gap_transducer(E.Pi_star, E.Pi_plus, E.phi_s, theta)
    assert r.certificate.residual < 1e-9
    assert r.lemma_residual < 1e-9
    if theta == np.pi:
        assert r.reflection.residual < 1e-9


def test_effective_gap_rejects_non_kernel_input():
    E = EdgeSpace(fix_b())
    with pytest.raises(ValueError):
        effective_gap_transducer(E.Pi_star, E.Pi_plus, E.phi(1), np.pi)


def test_composition_chain_of_actions():
    # H_1 = 0 and keep_tail: the output is the product of the public actions on |m>
    Ts = [random_transducer(s, 6, 3) for s in range(4)]
    P0 = Ts[0].public
    psi = np.zeros(6, complex)
    psi[:3] = [1, 1j, -1]
    psi /= np.linalg.norm(psi)
    comp = compose_transducers(Ts, P0, psi, keep_tail=True)
    v = psi
    for T in Ts:
        v = T.public_action @ v
    N = 6
    assert np.allclose(comp.certificate.tau[4 * N:], v)
    assert comp.certificate.residual < 1e-9
    assert comp.W_formula == pytest.approx(comp.certificate.W, rel=1e-10)
    assert comp.transducer is not None


def test_composition_with_output_space():
    # each step sends part of the state into H_1; W matches the formula
    rng = np.random.default_rng(5)
    N = 4
    P0 = np.diag([1, 1, 0, 0]).astype(complex)
    pub = np.diag([1, 1, 1, 0]).astype(complex)
    Ts = [Transducer(unitary_group.rvs(N, random_state=s), pub) for s in range(5)]
    psi = np.array([1, 0, 0, 0], complex)
    comp = compose_transducers(Ts, P0, psi, keep_tail=True)
    assert comp.certificate.residual < 1e-9
    assert comp.W_formula == pytest.approx(comp.certificate.W, rel=1e-10)
    total = sum(np.linalg.norm(v) ** 2 for v in comp.psi1) + comp.tail
    assert total == pytest.approx(1.0)


def test_composition_truncation_error():
    pub = np.eye(2, dtype=complex)
    P0 = np.diag([1, 0]).astype(complex)
    S = np.array([[np.cos(0.1), -np.sin(0.1)], [np.sin(0.1), np.cos(0.1)]], complex)
    with pytest.raises(ToleranceError):
        compose_transducers([Transducer(S, pub)] * 2, P0, np.array([1, 0], complex))


def test_composition_factory_grows_counter():
    pub = np.eye(2, dtype=complex)
    P0 = np.diag([1, 0]).astype(complex)
    S = np.array([[np.cos(0.6), -np.sin(0.6)], [np.sin(0.6), np.cos(0.6)]], complex)
    comp = compose_transducers(lambda t: Transducer(S, pub), P0, np.array([1, 0], complex), tail_bound=1e-9)
    assert comp.tail < 1e-9
    assert comp.m == int(np.ceil(np.log(1e-9) / np.log(np.cos(0.6) ** 2)))


def test_hadamard_test_halves_complexity(fixture_graph):
    G = fixture_graph
    V = walk_transducer(G)
    E = EdgeSpace(G)
    cert = hadamard_test_certificate(V, E.phi_s)
    assert cert.residual < 1e-9
    assert cert.W == pytest.approx(V.complexity(E.phi_s) / 2)
    # ancilla 0 carries the projection of phi_s onto the flow state
    out0 = cert.tau[0::2]
    assert np.allclose(out0, np.vdot(E.f, E.phi_s) * E.f, atol=1e-9)


def test_degraded_catalyst_error_bound():
    T = random_transducer(9)
    xi = np.eye(6)[0].astype(complex)
    w = T.catalyst_map @ xi
    c = degraded_scale(w, 0.1)
    _, err = oracle_execute(T, xi, w, c)
    assert err <= 0.1 + 1e-12


def test_schedule_lengths():
    assert [schedule_length(t) for t in range(1, 8)] == [1, 1, 1, 2, 2, 2, 3]


@pytest.mark.parametrize("alpha", [0.5, 0.25, 0.125])
def test_zero_error_aa_two_dim(alpha):
    # reflections given as plain unitaries (no private space)
    phi1 = np.array([1, 0], complex)
    phi = np.array([alpha, np.sqrt(1 - alpha ** 2)], complex)
    I = np.eye(2)
    U = Transducer(2 * np.outer(phi, phi.conj()) - I, I)
    V = Transducer(2 * np.outer(phi1, phi1.conj()) - I, I)
    r = zero_error_aa(U, V, phi, phi1, runs=2000, seed=1)
    assert r.successes == r.runs
    assert r.min_fidelity > 1 - 1e-12
    assert r.output_fidelity > 1 - 1e-9
    assert r.expected_calls <= 1.42 / alpha
    assert r.expected_beta_T <= 2.41 / alpha
    assert abs(r.mean_calls - r.expected_calls) < 4 * r.se_calls + 1e-12
