"""Phase-estimation estimators for R_s d_s and for generic witness sizes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .edge_space import EdgeSpace, ToleranceError, invariant_projector
from .electric import solve_electric
from .fixtures import fix_c
from .graph_core import Graph, attach_source_stub
from .transducers import (Transducer, compose_transducers, degraded_scale, generic_catalyst,
                          walk_transducer)
from .walks import walk_quantities

MAX_COUNTER = 1 << 16
MOM_GROUPS = 15


class RotationModel:
    """Rotation ``R = (I - 2|psi><psi|)(2P - I)`` together with a transducer realizing it.

    ``sin(theta) = ||P psi||``; on ``span{psi, P psi}`` the eigenvalues are ``e^{±2i theta}``.
    """

    def __init__(self, transducer: Transducer, psi, P, label=""):
        self.transducer = transducer
        self.psi = np.asarray(psi, dtype=complex)
        self.P = P
        self.label = label

    @classmethod
    def from_graph(cls, G: Graph):
        E = EdgeSpace(G)
        T = walk_transducer(G, E, extra_reflection=E.phi_s)
        m = cls(T, E.phi_s, E.invariant_projector(), "walk rotation")
        m.edge_space = E
        return m

    @classmethod
    def from_projectors(cls, Pi, Delta, psi):
        Pi = np.asarray(Pi, dtype=complex)
        Delta = np.asarray(Delta, dtype=complex)
        psi = np.asarray(psi, dtype=complex)
        if np.linalg.norm(Pi @ psi) > 1e-10:
            raise ValueError("psi is not in ker Pi")
        n = Pi.shape[0]
        I = np.eye(n)
        S = (I - 2 * np.outer(psi, psi.conj())) @ (2 * Pi - I) @ (2 * Delta - I)
        return cls(Transducer(S, I - Pi, "projector rotation"), psi, invariant_projector(Pi, Delta))

    @cached_property
    def R(self):
        n = self.psi.size
        return (np.eye(n) - 2 * np.outer(self.psi, self.psi.conj())) @ (2 * self.P - np.eye(n))

    @cached_property
    def sin_theta(self) -> float:
        return float(np.linalg.norm(self.P @ self.psi))

    @property
    def theta(self) -> float:
        return float(np.arcsin(min(1.0, self.sin_theta)))

    @cached_property
    def W(self) -> float:
        """Transduction complexity of the rotation on ``psi``."""
        return self.transducer.complexity(self.psi)

    def action_defect(self) -> float:
        """``||(transduced action - R) psi||`` and on ``P psi``."""
        A = self.transducer.public_action
        v = self.P @ self.psi
        return max(float(np.linalg.norm(A @ self.psi - self.R @ self.psi)),
                   float(np.linalg.norm(A @ v - self.R @ v)))

    def eigenphases(self):
        """Eigenphases of ``R`` on ``span{psi, P psi}`` (radians, sorted)."""
        v = self.P @ self.psi
        B = np.column_stack([self.psi, v])
        Q, _ = np.linalg.qr(B)
        if np.linalg.matrix_rank(B, tol=1e-12) < 2:
            Q = Q[:, :1]
        ev = np.linalg.eigvals(Q.conj().T @ self.R @ Q)
        return np.sort(np.angle(ev))

    def power_state(self, T) -> np.ndarray:
        """Rows ``(1/sqrt T) R^t psi`` for ``t < T`` (shape ``T x N``), via the transduced action."""
        A = self.transducer.public_action
        out = np.empty((T, self.psi.size), dtype=complex)
        v = self.psi
        for t in range(T):
            out[t] = v
            v = A @ v
        return out / np.sqrt(T)


def _check_T(T, N=1):
    if T < 1:
        raise ValueError("T must be >= 1")
    if T * N > MAX_COUNTER:
        raise ValueError(f"counter length {T} exceeds the dimension cap")


def controlled_power_state(G_or_model, T, mode="exact"):
    """The state ``(1/sqrt T) sum_t R^t |psi>|t>`` as a ``T x N`` array.

    ``mode='exact'`` applies the transduced action directly (the catalyst is
    known exactly).  ``mode='composed'`` builds the counter composition of
    ``S_t = R' ⊗ Pi_{>t} + I ⊗ Pi_{<=t}`` and returns its certified output;
    ``mode='degraded'`` runs that composed transducer with a truncated
    catalyst whose error bound is 1/10.  The composed modes also return the
    composition record.
    """
    model = G_or_model if isinstance(G_or_model, RotationModel) else RotationModel.from_graph(G_or_model)
    N = model.psi.size
    _check_T(T, N)
    if mode == "exact":
        return model.power_state(T)
    if mode not in ("composed", "degraded"):
        raise ValueError(f"unknown mode {mode!r}")
    if (T + 1) * T * N > 4096:
        raise ValueError(f"composed mode with T={T} exceeds the dense dimension cap")
    Tr = model.transducer
    IT = np.eye(T)

    def step(t):
        above = np.diag((np.arange(T) > t).astype(float))
        S = np.kron(Tr.S, above) + np.kron(np.eye(N), IT - above)
        return Transducer(S, np.kron(Tr.public, IT), f"S_{t}")

    public = np.kron(Tr.public, IT)
    psi00 = np.kron(model.psi, np.ones(T) / np.sqrt(T))
    comp = compose_transducers([step(t) for t in range(T)], public, psi00, keep_tail=True)
    D = T * N
    if mode == "composed":
        final = comp.certificate.tau[T * D:]
    else:
        c = degraded_scale(comp.certificate.w)
        big = comp.transducer
        out = big.public @ (big.S @ (comp.certificate.xi + c * comp.certificate.w))
        final = out[T * D:]
        comp.certificate.extra["scale"] = c
        comp.certificate.extra["distance"] = float(np.linalg.norm(out - comp.certificate.tau))
    return final.reshape(N, T).T, comp


def qpe_distribution(state) -> np.ndarray:
    """Counter outcome probabilities after the inverse QFT (phase ``k/T``)."""
    T = state.shape[0]
    amp = np.fft.fft(state, axis=0) / np.sqrt(T)
    p = np.sum(np.abs(amp) ** 2, axis=1)
    return p / p.sum()


def phase_to_sin(k, T):
    phi = np.asarray(k, dtype=float) / T
    return np.sin(np.pi * np.minimum(phi, 1 - phi))


def sin_to_Rd(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / (2.0 * s ** 2)


@dataclass
class EstimateRecord:
    estimate: float  # estimate of R_s d_s (or of omega)
    sin_estimate: float
    T: int
    tau: float
    walk_steps: int
    success: bool | None = None
    exact: float | None = None
    success_probability: float | None = None
    iterations: int = 1
    extra: dict = field(default_factory=dict)

    def to_record(self):
        rec = {k: v for k, v in self.__dict__.items() if k != "extra"}
        rec.update(self.extra)
        return rec


def _sample_sin(p, T, rng, repeats):
    ks = rng.choice(T, size=repeats, p=p)
    return float(np.median(phase_to_sin(ks, T)))


def qpe_estimate(G_or_model, tau, T, seed, repeats=1, mode="exact", tol=None) -> EstimateRecord:
    """Sample the phase-estimation readout of ``R`` on ``psi``.

    Returns an estimate of ``sin(theta) = 1/sqrt(2 R_s d_s)``; with
    ``repeats > 1`` the median over independent runs is used.  ``tol``, if
    given, sets the success band ``|sin_est - sin(theta)| <= tol``.
    """
    model = G_or_model if isinstance(G_or_model, RotationModel) else RotationModel.from_graph(G_or_model)
    state = controlled_power_state(model, T, "exact") if mode == "exact" else controlled_power_state(model, T, mode)[0]
    p = qpe_distribution(state)
    rng = np.random.default_rng(seed)
    s = _sample_sin(p, T, rng, repeats)
    rec = EstimateRecord(float(sin_to_Rd(s)), s, T, float(tau), int(math.ceil(tau * T)) * repeats,
                         exact=1.0 / (2 * model.sin_theta ** 2) if model.sin_theta > 0 else math.inf)
    if tol is not None:
        rec.success = abs(s - model.sin_theta) <= tol
        if repeats == 1:
            good = np.abs(phase_to_sin(np.arange(T), T) - model.sin_theta) <= tol
            rec.success_probability = float(p[good].sum())
    return rec


# ---------------------------------------------------------------------------
# known constant-factor estimate


def known_estimate_plan(ET_bar, p, eps, c=0.75):
    """Stub parameter, counter length and charged budget for the known-estimate procedure."""
    eta = ET_bar / p
    eta = max(eta, 1.0)
    ep = eta * p
    T = int(math.ceil(2 * math.pi * c * math.sqrt(2 * (1 + 2 * ep)) * (1 + 1 / ep) / eps))
    tau_hat = 3.0  # bound on ET/(Rd) on the stubbed graph
    return eta, T, tau_hat


@dataclass
class KnownEstimator:
    """Exact readout distribution for one (graph, ET_bar, p, eps) configuration."""

    graph: Graph
    ET_bar: float
    p: float
    eps: float

    def __post_init__(self):
        self.eta, self.T, self.tau_hat = known_estimate_plan(self.ET_bar, self.p, self.eps)
        _check_T(self.T)
        self.stubbed = attach_source_stub(self.graph, self.eta)
        model = RotationModel.from_graph(self.stubbed.graph)
        self.model = model
        self.dist = qpe_distribution(model.power_state(self.T))
        sins = phase_to_sin(np.arange(self.T), self.T)
        with np.errstate(divide="ignore"):
            self.outcomes = (sin_to_Rd(sins) - 1.0) / self.eta
        sol = solve_electric(self.graph)
        self.exact = sol.resistance * self.graph.degrees[self.graph.source]
        self.walk_steps = int(math.ceil(self.tau_hat * self.T))

    @property
    def success_probability(self) -> float:
        ok = np.abs(self.outcomes / self.exact - 1.0) <= self.eps
        return float(self.dist[ok].sum())

    def sample(self, seed) -> EstimateRecord:
        rng = np.random.default_rng(seed)
        k = int(rng.choice(self.T, p=self.dist))
        est = float(self.outcomes[k])
        return EstimateRecord(est, float(phase_to_sin(k, self.T)), self.T, self.tau_hat, self.walk_steps,
                              success=bool(abs(est / self.exact - 1.0) <= self.eps), exact=float(self.exact),
                              success_probability=self.success_probability,
                              extra={"eta": self.eta, "eps": self.eps})


def estimate_known(G: Graph, ET_bar, p, eps, seed) -> EstimateRecord:
    """Multiplicative estimate of ``R_s d_s`` from a constant-factor guess ``p``.

    Phase estimation runs on the stubbed graph with ``eta = ET_bar / p``; the
    estimate of ``R_hat d_hat`` maps back through ``(p_hat - 1) / eta``.
    """
    return KnownEstimator(G, float(ET_bar), float(p), float(eps)).sample(seed)


# ---------------------------------------------------------------------------
# binary search for the constant-factor estimate


def binary_search_plan(ET_bar):
    T = int(math.ceil(4 * math.sqrt(2) * math.pi * math.sqrt(ET_bar)))
    return T, 3.0


@dataclass
class BinarySearch:
    graph: Graph
    ET_bar: float

    def __post_init__(self):
        self.T, self.tau = binary_search_plan(self.ET_bar)
        self.threshold = 1.0 / (2 * math.sqrt(self.ET_bar))
        sol = solve_electric(self.graph)
        self.exact = sol.resistance * self.graph.degrees[self.graph.source]
        self.max_iter = int(math.ceil(math.log2(self.ET_bar))) + 2 if self.ET_bar > 1 else 2
        self._halve = {}

    def halve_probability(self, p_tilde) -> float:
        """Probability that the readout ``a = sqrt 2 sin(theta_est)`` falls below the threshold."""
        key = round(math.log2(p_tilde))
        if key not in self._halve:
            eta = p_tilde * self.ET_bar
            H = attach_source_stub(self.graph, eta).graph
            model = RotationModel.from_graph(H)
            dist = qpe_distribution(model.power_state(self.T))
            a = math.sqrt(2) * phase_to_sin(np.arange(self.T), self.T)
            self._halve[key] = float(dist[a <= self.threshold].sum())
        return self._halve[key]

    def can_halve(self, p_tilde):
        return p_tilde >= 2.0 / self.ET_bar

    def output_distribution(self) -> dict:
        """Exact law of the returned ``p_tilde`` (iteration count = exponent + 1)."""
        out = {}
        reach = 1.0
        pt = 1.0
        while True:
            if not self.can_halve(pt):
                out[pt] = out.get(pt, 0.0) + reach
                break
            h = self.halve_probability(pt)
            out[pt] = out.get(pt, 0.0) + reach * (1 - h)
            reach *= h
            pt /= 2
            if reach == 0.0:
                break
        return out

    def guarantee_probability(self) -> float:
        return float(sum(pr for pt, pr in self.output_distribution().items()
                         if 7 / 18 <= pt * self.exact <= 16))

    def run(self, seed) -> EstimateRecord:
        rng = np.random.default_rng(seed)
        pt = 1.0
        it = 0
        while True:
            it += 1
            if it > self.max_iter:
                raise ToleranceError(f"binary search exceeded {self.max_iter} iterations")
            if self.can_halve(pt) and rng.random() < self.halve_probability(pt):
                pt /= 2
                continue
            break
        ok = 7 / 18 <= pt * self.exact <= 16
        return EstimateRecord(float(pt), math.nan, self.T, self.tau, int(math.ceil(self.tau * self.T)) * it,
                              success=bool(ok), exact=float(self.exact), iterations=it,
                              success_probability=self.guarantee_probability(),
                              extra={"p_tilde": float(pt), "max_iterations": self.max_iter})


def binary_search_estimate(G: Graph, ET_bar, seed) -> EstimateRecord:
    """Constant-factor estimate ``p_tilde`` of ``1/(R_s d_s)`` by halving."""
    return BinarySearch(G, float(ET_bar)).run(seed)


# ---------------------------------------------------------------------------
# lower-bound fixture and witness sizes


def lower_bound_fixture(delta) -> dict:
    """The two-hypothesis instance ``w_sx = 1/2 ± delta``.

    Records both values of ``R_s d_s`` and the overlap of the two middle-vertex
    star states, the quantity any walk-based distinguisher must resolve.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    rd = {}
    stars = []
    for sign in (+1, -1):
        G = fix_c(sign * delta)
        sol = solve_electric(G)
        rd[sign] = sol.resistance * G.degrees[G.source]
        E = EdgeSpace(G)
        stars.append(E.phi(1))
    overlap = float(abs(np.vdot(stars[0], stars[1])))
    return {
        "graph": fix_c(delta),
        "Rd_plus": rd[+1],
        "Rd_minus": rd[-1],
        "ratio": rd[+1] / rd[-1],
        "star_overlap": overlap,
        "overlap_gap": 1.0 - overlap,
    }


def witness_size_estimate(Pi, Delta, psi, tau, T, seed) -> EstimateRecord:
    """Estimate ``omega = 1/||P psi||^2`` from the rotation ``(I - 2 psi psi†)(2Pi - I)(2Delta - I)``."""
    model = RotationModel.from_projectors(Pi, Delta, psi)
    p = qpe_distribution(model.power_state(T))
    rng = np.random.default_rng(seed)
    s = _sample_sin(p, T, rng, 1)
    omega = 1.0 / model.sin_theta ** 2 if model.sin_theta > 0 else math.inf
    W = model.W
    return EstimateRecord(1.0 / s ** 2 if s > 0 else math.inf, s, T, float(tau), int(math.ceil(tau * T)),
                          success=bool(abs(s - model.sin_theta) <= 2 * math.pi / T), exact=omega,
                          extra={"W": W, "tau_ok": bool(tau >= W + 1 - 1e-12)})


def resistance_summary(G: Graph) -> dict:
    ws = walk_quantities(G)
    m = RotationModel.from_graph(G)
    return {"Rd": ws.Rd, "sin_theta": m.sin_theta, "W": m.W, "ET_over_Rd": ws.ET / ws.Rd,
            "eigenphases": m.eigenphases().tolist()}
