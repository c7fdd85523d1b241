"""Transducers: unitaries with a public/private split, catalysts, composition
with a counter, the Hadamard-test marker and zero-error amplitude amplification."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .edge_space import EdgeSpace, ToleranceError, invariant_projector
from .graph_core import Graph
from .linalg import pinv, projector_defects, unitarity_defect
from .walks import walk_quantities

RESIDUAL_TOL = 1e-9
DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class Transducer:
    """Unitary ``S`` on ``H ⊕ L``; ``public`` is the projector onto ``H``."""

    S: np.ndarray
    public: np.ndarray
    label: str = ""

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        P = np.asarray(self.public, dtype=complex)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "public", P)
        if unitarity_defect(S) > 1e-10:
            raise ToleranceError(f"{self.label or 'transducer'} is not unitary")
        if max(projector_defects(P)) > 1e-10:
            raise ToleranceError("public split is not an orthogonal projector")

    @property
    def dim(self):
        return self.S.shape[0]

    @cached_property
    def private(self):
        return np.eye(self.dim) - self.public

    @cached_property
    def catalyst_map(self):
        """Linear map ``xi -> w = (Pi - Pi S Pi)^+ Pi S xi`` with ``Pi`` the private projector."""
        Pi = self.private
        return pinv(Pi - Pi @ self.S @ Pi) @ Pi @ self.S

    @cached_property
    def public_action(self):
        """The transduced map ``xi -> tau`` on public inputs."""
        return self.public @ self.S @ (np.eye(self.dim) + self.catalyst_map)

    def complexity(self, xi) -> float:
        return float(np.linalg.norm(self.catalyst_map @ xi) ** 2)


@dataclass
class TransductionCertificate:
    xi: np.ndarray
    tau: np.ndarray
    w: np.ndarray
    residual: float
    label: str = ""
    calls: float | None = None
    truncation_tail: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def W(self) -> float:
        return float(np.vdot(self.w, self.w).real)

    @property
    def norm_defect(self) -> float:
        return abs(np.linalg.norm(self.tau) - np.linalg.norm(self.xi))

    def to_record(self) -> dict:
        rec = {"W": self.W, "residual": self.residual, "calls": self.calls,
               "truncation_tail": self.truncation_tail}
        rec.update({k: v for k, v in self.extra.items() if isinstance(v, (int, float, str, bool))})
        return rec


def transduction_residual(S, xi, tau, w) -> float:
    return float(np.linalg.norm(S @ (xi + w) - (tau + w)))


def certify(T: Transducer, xi, w, tau=None, label="", tol=RESIDUAL_TOL) -> TransductionCertificate:
    """Verify ``S(xi ⊕ w) = tau ⊕ w`` by direct application."""
    xi = np.asarray(xi, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.linalg.norm(T.private @ xi) > 1e-10 * max(1.0, np.linalg.norm(xi)):
        raise ValueError("input is not in the public space")
    if np.linalg.norm(T.public @ w) > 1e-9 * max(1.0, np.linalg.norm(w)):
        raise ToleranceError("catalyst leaks into the public space")
    if tau is None:
        tau = T.public @ (T.S @ (xi + w))
    res = transduction_residual(T.S, xi, tau, w)
    cert = TransductionCertificate(xi, np.asarray(tau, dtype=complex), w, res, label or T.label)
    if res > tol * max(1.0, np.linalg.norm(xi) + np.linalg.norm(w)):
        raise ToleranceError(f"transduction residual {res:.2e} exceeds tolerance")
    if cert.norm_defect > tol * max(1.0, np.linalg.norm(xi)):
        raise ToleranceError(f"transduced map is not norm preserving ({cert.norm_defect:.2e})")
    return cert


def generic_catalyst(T: Transducer, xi) -> TransductionCertificate:
    """Catalyst ``(Pi - Pi S Pi)^+ Pi S xi`` and its verified certificate."""
    xi = np.asarray(xi, dtype=complex)
    return certify(T, xi, T.catalyst_map @ xi)


def oracle_execute(T: Transducer, xi, w, c=1.0):
    """Apply ``S`` to ``xi ⊕ c w`` and return ``(public output, error vs. exact tau)``.

    Stands in for the bounded-error compiled algorithm: a truncated catalyst
    yields a public error of at most ``(1 - c) ||w||``.
    """
    out = T.public @ (T.S @ (xi + c * w))
    tau = T.public @ (T.S @ (xi + w))
    return out, float(np.linalg.norm(out - tau))


def degraded_scale(w, target=0.1) -> float:
    """Catalyst scale whose error bound ``(1 - c)||w||`` equals ``target``."""
    nw = float(np.linalg.norm(w))
    return 1.0 if nw == 0 else max(0.0, 1.0 - target / nw)


# ---------------------------------------------------------------------------
# effective gap transducer


@dataclass
class EffectiveGapResult:
    certificate: TransductionCertificate  # partial rotation U(theta)
    reflection: TransductionCertificate | None  # (2Pi - I)(2Delta - I), theta = pi only
    projector: np.ndarray
    lemma_residual: float  # ||(I - Delta)(psi + w) - P psi||


def partial_rotation_operator(Delta, theta):
    n = Delta.shape[0]
    return np.eye(n) - (1 - np.exp(1j * theta)) * (np.eye(n) - Delta)


def effective_gap_transducer(Pi, Delta, psi, theta=np.pi) -> EffectiveGapResult:
    Pi = np.asarray(Pi, dtype=complex)
    Delta = np.asarray(Delta, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    n = Pi.shape[0]
    I = np.eye(n)
    if np.linalg.norm(Pi @ psi) > 1e-10:
        raise ValueError(f"input has a component {np.linalg.norm(Pi @ psi):.2e} outside ker Pi")
    w = pinv(Pi - Pi @ Delta @ Pi) @ (Delta @ psi)
    if np.linalg.norm((I - Pi) @ w) > 1e-10 * max(1.0, np.linalg.norm(w)):
        raise ToleranceError("catalyst is not in the image of Pi")
    P = invariant_projector(Pi, Delta)
    lemma = float(np.linalg.norm((I - Delta) @ (psi + w) - P @ psi))
    Tr = Transducer(partial_rotation_operator(Delta, theta), I - Pi, f"U({theta:.4g})")
    tau = psi - (1 - np.exp(1j * theta)) * (P @ psi)
    cert = certify(Tr, psi, w, tau)
    refl = None
    if np.isclose(np.cos(theta), -1.0):
        S = (2 * Pi - I) @ (2 * Delta - I)
        refl = certify(Transducer(S, I - Pi, "effective gap reflection"), psi, w, (2 * P - I) @ psi)
    return EffectiveGapResult(cert, refl, P, lemma)


def walk_transducer(G: Graph, E: EdgeSpace | None = None, extra_reflection=None) -> Transducer:
    """The walk unitary with public space ``ker Pi_*``, optionally followed by
    ``I - 2|phi><phi|`` for a public state ``phi``."""
    E = E or EdgeSpace(G)
    S = E.U
    if extra_reflection is not None:
        v = np.asarray(extra_reflection, dtype=complex)
        S = (np.eye(E.dim) - 2 * np.outer(v, v.conj())) @ S
    return Transducer(S, np.eye(E.dim) - E.Pi_star, "walk")


def elfs_catalyst(G: Graph, E: EdgeSpace | None = None) -> np.ndarray:
    """Closed form ``(1/(R_s sqrt(d_s))) sum_{x != s} v_x sqrt(d_x) |phi_x>``."""
    E = E or EdgeSpace(G)
    sol = E.solution
    d = G.degrees
    coef = sol.voltages * np.sqrt(d) / (sol.resistance * np.sqrt(d[G.source]))
    coef[G.source] = 0.0
    return (E.Phi @ coef).astype(complex)


def elfs_reflection_certificate(G: Graph, tol=1e-9) -> TransductionCertificate:
    """Certificate for ``|phi_s> -> (2|f><f| - I)|phi_s>`` under the walk unitary."""
    E = EdgeSpace(G)
    T = walk_transducer(G, E)
    f, phi = E.f, E.phi_s
    w = elfs_catalyst(G, E)
    tau = 2 * np.vdot(f, phi) * f - phi
    cert = certify(T, phi, w, tau, "elfs reflection")
    gen = generic_catalyst(T, phi)
    ws = walk_quantities(G, E.solution)
    W_closed = ws.ET / ws.Rd - 1.0
    cert.extra.update(closed_vs_generic=float(np.linalg.norm(gen.w - w)),
                      W_expected=W_closed, W_defect=abs(cert.W - W_closed))
    if cert.extra["closed_vs_generic"] > tol or cert.extra["W_defect"] > tol * max(1.0, W_closed):
        raise ToleranceError("closed-form elfs catalyst disagrees with the generic one")
    return cert


# ---------------------------------------------------------------------------
# composition with a counter


@dataclass
class CompositionResult:
    certificate: TransductionCertificate
    transducer: Transducer | None  # dense composed unitary, when small enough
    psi0: list  # psi_{t,0}, t = 0..m
    psi1: list  # psi_{t,1}, t = 1..m (index 0 unused, zero)
    local_W: list  # W(S_t, psi_{t,0}) = ||w_t||^2
    W_formula: float
    tail: float
    m: int


def _counter_embed(vecs, m, N):
    out = np.zeros((m + 1) * N, dtype=complex)
    for t, v in vecs:
        out[t * N:(t + 1) * N] += v
    return out


def compose_transducers(transducers: Sequence[Transducer] | Callable[[int], Transducer], P0, psi00,
                        m=None, tail_bound=1e-9, keep_tail=False, m_cap=10 ** 4, dense=None) -> CompositionResult:
    """Compose ``S_0, S_1, ...`` sharing a public space ``H = H_0 ⊕ H_1``.

    ``P0`` projects onto ``H_0``.  Each step transduces ``psi_{t,0}`` into
    ``psi_{t+1,0} + psi_{t+1,1}``; the composed transducer outputs
    ``sum_t |t> psi_{t,1}`` with catalyst ``|0> w_0 + sum_{t=1}^{m-1} |t>(psi_{t,0} + w_t)``.
    ``transducers`` may be a finite list, or a callable for an unbounded
    family, in which case ``m`` grows until the surviving mass
    ``||psi_{m,0}||^2`` drops below ``tail_bound`` (at most ``m_cap``).
    With ``keep_tail`` the final ``|m> psi_{m,0}`` is part of the intended output.
    """
    if callable(transducers) and not isinstance(transducers, Sequence):
        factory = transducers
        finite = m is not None
    else:
        seq = list(transducers)
        factory = seq.__getitem__
        m = len(seq) if m is None else m
        finite = True
    psi = np.asarray(psi00, dtype=complex)
    T0 = factory(0)
    N = T0.dim
    P0 = np.asarray(P0, dtype=complex)
    P1 = T0.public - P0
    psi0, psi1, ws, local_W, Ts = [psi], [np.zeros(N, complex)], [], [], []
    t = 0
    while True:
        if finite and t >= m:
            break
        if not finite:
            if t > 0 and np.linalg.norm(psi0[-1]) ** 2 < tail_bound:
                break
            if t >= m_cap:
                raise ToleranceError(f"surviving mass {np.linalg.norm(psi0[-1]) ** 2:.2e} at counter cap {m_cap}; raise m_cap")
        Tt = factory(t)
        cert = generic_catalyst(Tt, psi0[-1])
        ws.append(cert.w)
        local_W.append(cert.W)
        Ts.append(Tt)
        psi0.append(P0 @ cert.tau)
        psi1.append(P1 @ cert.tau)
        t += 1
    m = t
    tail = float(np.linalg.norm(psi0[m]) ** 2)
    if not keep_tail and tail_bound is not None and tail > tail_bound:
        raise ToleranceError(f"truncation tail {tail:.2e} above {tail_bound:.0e}; use a larger counter")
    W_formula = local_W[0] + sum(np.linalg.norm(psi0[t]) ** 2 + local_W[t] for t in range(1, m))
    xi = _counter_embed([(0, psi0[0])], m, N)
    w = _counter_embed([(0, ws[0])] + [(t, psi0[t] + ws[t]) for t in range(1, m)], m, N)
    tau = _counter_embed([(t, psi1[t]) for t in range(1, m + 1)] + ([(m, psi0[m])] if keep_tail else []), m, N)
    big = None
    if dense is None:
        dense = (m + 1) * N <= DENSE_CAP
    if dense:
        D = (m + 1) * N
        block = np.zeros((D, D), dtype=complex)
        for t in range(m):
            block[t * N:(t + 1) * N, t * N:(t + 1) * N] = Ts[t].S
        block[m * N:, m * N:] = np.eye(N)
        shift = np.roll(np.eye(m + 1), 1, axis=0)  # |t> -> |t+1 mod (m+1)>
        PH = T0.public
        Vc = np.kron(shift, PH) + np.kron(np.eye(m + 1), np.eye(N) - PH)
        pub = np.zeros((D, D), dtype=complex)
        pub[:N, :N] = PH
        for t in range(1, m + 1):
            pub[t * N:(t + 1) * N, t * N:(t + 1) * N] = P1
        pub[m * N:, m * N:] += P0
        big = Transducer(Vc @ block, pub, "composed")
        res = transduction_residual(big.S, xi, tau, w)
        if not keep_tail:
            res = max(0.0, res - np.sqrt(tail))  # the dropped tail is accounted separately
    else:
        # blockwise: every local certificate was verified, the counter bookkeeping is exact
        res = 0.0
    if res > RESIDUAL_TOL * max(1.0, np.linalg.norm(w)):
        raise ToleranceError(f"composed transduction residual {res:.2e}")
    cert = TransductionCertificate(xi, tau, w, float(res), "composed", truncation_tail=tail)
    cert.extra["W_formula"] = float(W_formula)
    return CompositionResult(cert, big, psi0, psi1, local_W, float(W_formula), tail, m)


# ---------------------------------------------------------------------------
# Hadamard test and zero-error amplitude amplification

H2 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
KET0 = np.array([1.0, 0.0])
KET1 = np.array([0.0, 1.0])
KETM = np.array([1.0, -1.0]) / np.sqrt(2)


def hadamard_test_transducer(V: Transducer) -> Transducer:
    """``(I ⊗ H) cV (I ⊗ H)`` with the qubit as the last tensor factor."""
    n = V.dim
    cV = np.kron(np.eye(n), np.diag([1.0, 0.0])) + np.kron(V.S, np.diag([0.0, 1.0]))
    IH = np.kron(np.eye(n), H2)
    return Transducer(IH @ cV @ IH, np.kron(V.public, np.eye(2)), f"hadamard[{V.label}]")


def hadamard_test_certificate(V: Transducer, psi) -> TransductionCertificate:
    """``psi|0> -> gamma|phi_1>|0> + delta|phi_0>|1>`` with catalyst ``w|->/sqrt 2``."""
    psi = np.asarray(psi, dtype=complex)
    Vp = hadamard_test_transducer(V)
    w = V.catalyst_map @ psi
    out = V.public_action @ psi
    tau = np.kron(0.5 * (psi + out), KET0) + np.kron(0.5 * (psi - out), KET1)
    return certify(Vp, np.kron(psi, KET0), np.kron(w, KETM) / np.sqrt(2), tau)


def _reflection_defect(T: Transducer, target, basis) -> float:
    """How far the public action is from ``2|target><target| - I`` on ``span(basis)``."""
    R = 2 * np.outer(target, target.conj()) - np.eye(T.dim)
    return max(float(np.linalg.norm(T.public_action @ b - R @ b)) for b in basis)


def _max_complexity(T: Transducer, basis) -> float:
    B = np.column_stack(basis)
    C = T.catalyst_map @ B
    return float(np.linalg.eigvalsh(C.conj().T @ C).max())


@dataclass
class AAResult:
    alpha: float
    runs: int
    successes: int
    min_fidelity: float
    mean_calls: float  # rotation calls per run
    se_calls: float
    expected_calls: float  # exact expectation of the loop
    expected_beta_T: float  # sum_t beta_t^2 T_t
    W_measured: float
    W_reference: float  # (W_U + W_V + 1) / alpha
    W_U: float
    W_V: float
    tail: float
    rounds: int
    output_fidelity: float  # composed transducer output vs. |phi_1> ⊗ garbage
    schmidt_defect: float
    calls: np.ndarray = field(repr=False, default=None)

    def to_record(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in self.__dict__.items() if k != "calls"}


def schedule_length(t) -> int:
    return max(1, int(np.floor(1.2 ** t)))


def zero_error_aa(U: Transducer, V: Transducer, phi, phi1, m_max=10 ** 4, seed=0, runs=10 ** 4,
                  tail_bound=1e-9) -> AAResult:
    """Zero-error amplitude amplification from ``phi`` towards ``phi1``.

    ``U`` transduces the reflection about ``phi`` and ``V`` the reflection about
    ``phi1``.  Two artifacts: (a) a seeded Las Vegas loop (mark with the
    Hadamard test, measure, on failure apply ``R^j`` for uniform
    ``j <= T_t``) driven by the transduced public actions, one run per seed
    when ``seed`` is a sequence; (b) the composed
    transducer, tracked round by round through its success/failure branches,
    with the measured transduction complexity.
    """
    phi = np.asarray(phi, dtype=complex)
    phi1 = np.asarray(phi1, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    phi1 = phi1 / np.linalg.norm(phi1)
    alpha = float(abs(np.vdot(phi1, phi)))
    rest = phi - np.vdot(phi1, phi) * phi1
    phi0 = rest / np.linalg.norm(rest) if np.linalg.norm(rest) > 1e-14 else None
    basis = [phi1] + ([phi0] if phi0 is not None else [])
    for T, tgt, name in ((U, phi, "U"), (V, phi1, "V")):
        if _reflection_defect(T, tgt, basis) > 1e-9:
            raise ToleranceError(f"{name} does not transduce the expected reflection")
    AU, AV = U.public_action, V.public_action
    CU, CV = U.catalyst_map, V.catalyst_map
    W_U, W_V = _max_complexity(U, basis), _max_complexity(V, basis)

    def mark(psi):
        return 0.5 * (psi + AV @ psi), 0.5 * (psi - AV @ psi)

    # (b) structured composition
    good0, bad0 = mark(phi)
    W = float(np.linalg.norm(CV @ phi) ** 2) / 2
    beta2 = float(np.linalg.norm(bad0) ** 2)
    out_mass = float(np.linalg.norm(good0) ** 2)
    out_overlap = float(abs(np.vdot(phi1, good0)) ** 2)
    schmidt = 0.0
    expected_beta_T = 0.0
    expected_calls = 0.0
    t = 0
    seq = [phi0] if phi0 is not None else []
    cost_cum = [0.0]
    while beta2 >= tail_bound:
        t += 1
        if t > m_max:
            raise ToleranceError(f"surviving mass {beta2:.2e} after {m_max} rounds; raise m_max")
        Tt = schedule_length(t)
        while len(seq) <= Tt:
            a = seq[-1]
            va = AV @ a
            cost_cum.append(cost_cum[-1] + np.linalg.norm(CV @ a) ** 2 + np.linalg.norm(CU @ va) ** 2 + 1.0)
            seq.append(AU @ va)
        states = np.array(seq[1:Tt + 1])  # R^j phi0, j = 1..T_t
        goods = 0.5 * (states + states @ AV.T)
        bads = 0.5 * (states - states @ AV.T)
        mark_cost = np.sum(np.abs(states @ CV.T) ** 2, axis=1) / 2
        p_bad = float(np.mean(np.sum(np.abs(bads) ** 2, axis=1)))
        W += beta2 * (1.0 + float(np.mean(np.array(cost_cum[:Tt]) + mark_cost)))
        expected_beta_T += beta2 * Tt
        expected_calls += beta2 * (Tt + 1) / 2
        # each branch must factor as (fixed system state) ⊗ (counter amplitudes)
        for M, ref in ((goods, phi1), (bads, phi0)):
            sv = np.linalg.svd(M, compute_uv=False)
            if sv.size > 1 and sv[0] > 0:
                schmidt = max(schmidt, float(sv[1] / sv[0]))
        g = beta2 * float(np.mean(np.sum(np.abs(goods) ** 2, axis=1)))
        out_mass += g
        out_overlap += beta2 * float(np.mean(np.abs(goods @ phi1.conj()) ** 2))
        beta2 *= p_bad
    rounds = t
    tail = beta2
    fidelity = out_overlap / out_mass  # terminated branches; the tail is reported separately

    # (a) Las Vegas loop
    if np.iterable(seed):
        seeds = list(seed)
        runs = len(seeds)
        rngs = [np.random.default_rng(sd) for sd in seeds]
    else:
        rngs = [np.random.default_rng(seed)] * runs
    R = AU @ AV
    calls = np.zeros(runs, dtype=np.int64)
    successes = 0
    min_fid = 1.0
    powers = {}
    for r in range(runs):
        rng = rngs[r]
        state = phi
        t = 0
        n_calls = 0
        while True:
            good, bad = mark(state)
            pg = float(np.linalg.norm(good) ** 2)
            if rng.random() < pg:
                out = good / np.sqrt(pg)
                min_fid = min(min_fid, float(abs(np.vdot(phi1, out)) ** 2))
                successes += 1
                break
            state = bad / np.linalg.norm(bad)
            t += 1
            if t > m_max:
                break
            j = int(rng.integers(1, schedule_length(t) + 1))
            if j not in powers:
                powers[j] = np.linalg.matrix_power(R, j)
            state = powers[j] @ state
            n_calls += j
        calls[r] = n_calls
    return AAResult(
        alpha=alpha, runs=runs, successes=successes, min_fidelity=min_fid,
        mean_calls=float(calls.mean()) if runs else float('nan'), se_calls=float(calls.std(ddof=1) / np.sqrt(runs)) if runs > 1 else 0.0,
        expected_calls=expected_calls, expected_beta_T=expected_beta_T,
        W_measured=W, W_reference=(W_U + W_V + 1) / alpha if alpha > 0 else np.inf,
        W_U=W_U, W_V=W_V, tail=tail, rounds=rounds, output_fidelity=fidelity,
        schmidt_defect=schmidt, calls=calls,
    )
