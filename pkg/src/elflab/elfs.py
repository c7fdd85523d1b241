"""Electric flow sampling: the elfs chain, its coupling with the random walk,
fixed-point and exact elf preparation, and the quantum elfs process."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .edge_space import EdgeSpace, ToleranceError
from .electric import green_matrix, harmonic_measure, solve_electric
from .graph_core import Graph, attach_source_stub
from .transducers import (AAResult, Transducer, compose_transducers, walk_transducer,
                          zero_error_aa)
from .walks import DEFAULT_BUDGET, StepBudgetExceeded, vertex_quantities, walk_quantities


# ---------------------------------------------------------------------------
# transition kernel


def _tail_incidence(G: Graph):
    k = G.n_arcs
    return sparse.csr_matrix((np.ones(k), (G.arc_tail, np.arange(k))), shape=(G.n, k))


def elfs_kernel(G: Graph, V=None):
    """``n x |T|`` matrix whose column ``j`` is the next-source law from ``T[j]``.

    ``mu_x(y) = (1/(2 R_x)) sum over arcs (y, z) of f_x(y,z)^2 / w_yz``.
    """
    if V is None:
        V = green_matrix(G)
    D = V[G.arc_tail] - V[G.arc_head]
    E = G.arc_weight[:, None] * D ** 2  # f^2 / w per arc, per source
    R = V[G.transient, np.arange(len(G.transient))]
    return np.asarray(_tail_incidence(G) @ E) / (2.0 * R)


def elfs_step_distribution(G: Graph, x=None, check=True) -> dict:
    """Exact law of the next elfs source from ``x`` (default the graph's source)."""
    x = G.source if x is None else int(x)
    if G.sink_mask[x]:
        raise ValueError(f"vertex {x} lies in the sink")
    Gx = G.with_source(x) if x != G.source else G
    sol = solve_electric(Gx)
    p = np.zeros(G.n)
    np.add.at(p, G.arc_tail, sol.flow ** 2 / G.arc_weight)
    p /= 2.0 * sol.resistance
    if check:
        # the same law read off the flow state's first register
        amp = EdgeSpace(Gx).f
        q = np.zeros(G.n)
        np.add.at(q, G.arc_tail, np.abs(amp) ** 2)
        if np.abs(p - q).max() > 1e-10:
            raise ToleranceError("elfs kernel disagrees with the flow state's register statistics")
    return {int(y): float(p[y]) for y in np.flatnonzero(p > 0)}


def default_stub_parameters(G: Graph, vq=None):
    """``eta_x = ET_x / (R_x d_x)`` for every transient ``x`` (always >= 1)."""
    vq = vq or vertex_quantities(G)
    return np.maximum(vq.ET / vq.Rd, 1.0)


@dataclass(eq=False)
class ElfsChain:
    """Absorbing chain of elfs sources.

    With ``eta`` given, each step is the lazy kernel obtained by sampling the
    flow on the stubbed graph: stay put with probability ``1 - R_x/R_hat_x``,
    ``R_hat_x = R_x + 1/(eta_x d_x)``.
    """

    graph: Graph
    P: np.ndarray  # n x n, sink rows are identity
    eta: np.ndarray | None = None
    vq: object = None

    @cached_property
    def transient(self):
        return self.graph.transient

    @cached_property
    def Q(self):
        T = self.transient
        return self.P[np.ix_(T, T)]

    @cached_property
    def visits(self):
        """Expected number of steps spent at each transient vertex, ``(I - Q)^{-1}``."""
        k = len(self.transient)
        return np.linalg.inv(np.eye(k) - self.Q)

    @cached_property
    def EHT(self):
        return self.visits.sum(axis=1)

    @cached_property
    def arrival_matrix(self):
        T, M = self.transient, list(self.graph.sinks)
        return self.visits @ self.P[np.ix_(T, M)]

    def _row(self, x):
        return int(np.searchsorted(self.transient, x))

    def EHT_of(self, x=None):
        x = self.graph.source if x is None else x
        return float(self.EHT[self._row(x)])

    def arrival(self, x=None) -> dict:
        x = self.graph.source if x is None else x
        return {int(m): float(p) for m, p in zip(self.graph.sinks, self.arrival_matrix[self._row(x)])}

    def expected_sum(self, values, x=None) -> float:
        """``E[sum_{t < rho} values(Y_t)]`` for ``values`` indexed by transient vertex order."""
        x = self.graph.source if x is None else x
        return float(self.visits[self._row(x)] @ np.asarray(values))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.Q)))) if self.Q.size else 0.0

    def path_probabilities(self, depth, x=None) -> tuple[dict, float]:
        """Probabilities of source sequences ``(y_1, ..., y_k)`` with ``k <= depth``.

        Absorbed paths end at their sink vertex; surviving paths of length
        ``depth`` are reported too.  Returns ``(paths, surviving mass)``.
        """
        x = self.graph.source if x is None else int(x)
        sink = self.graph.sink_mask
        out = {}
        frontier = {(): 1.0}
        for _ in range(depth):
            nxt = {}
            for path, pr in frontier.items():
                cur = path[-1] if path else x
                row = self.P[cur]
                for y in np.flatnonzero(row > 0):
                    q = pr * row[y]
                    np_ = path + (int(y),)
                    if sink[y]:
                        out[np_] = out.get(np_, 0.0) + q
                    else:
                        nxt[np_] = q
            frontier = nxt
        surviving = float(sum(frontier.values()))
        out.update(frontier)
        return out, surviving


def elfs_chain(G: Graph, modified=False, eta=None) -> ElfsChain:
    """Exact elfs chain; ``modified`` (or an explicit ``eta``) adds the stub self-loops."""
    V = green_matrix(G)
    K = elfs_kernel(G, V)
    n, T = G.n, G.transient
    P = np.zeros((n, n))
    P[T] = K.T
    P[list(G.sinks), list(G.sinks)] = 1.0
    vq = vertex_quantities(G, V)
    if modified or eta is not None:
        if eta is None:
            eta = default_stub_parameters(G, vq)
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (len(T),)).copy()
        if np.any(eta < 1):
            raise ValueError("stub parameters must be >= 1")
        keep = vq.R / (vq.R + 1.0 / (eta * vq.degrees))
        P[T] *= keep[:, None]
        P[T, T] += 1.0 - keep
    return ElfsChain(G, P, eta, vq)


# ---------------------------------------------------------------------------
# sampling and the coupling with the walk


@dataclass
class ElfsTrace:
    sources: list  # Y_0 = s, ..., Y_rho in M
    nu: list | None  # stopping times, coupled mode only
    walk: list | None  # underlying walk path, coupled mode only
    seed: object = None

    @property
    def rho(self):
        return len(self.sources) - 1


class CouplingRule:
    """Markov stopping rule realizing the elfs chain inside a random walk.

    From source ``y`` the walk is stopped at a visit to ``x`` with probability
    ``mu_y(x) / (g_y(x) + mu_y(x))``, where ``g_y = (e_y - mu_y)(I - Q)^{-1}``
    is the expected number of non-stopping visits; ``g_y >= 0`` makes this a
    valid rule and the stopped position has law ``mu_y``.  A stop makes the
    current position the new source and the rule is checked again at the same
    time, so repeated sources give equal consecutive stopping times.
    """

    def __init__(self, G: Graph):
        self.graph = G
        T = G.transient
        V = green_matrix(G)
        K = elfs_kernel(G, V)  # n x |T|
        self.vq = vertex_quantities(G, V)
        Q = G.transition[np.ix_(T, T)]
        N = np.linalg.inv(np.eye(len(T)) - Q)
        Mu = K[T].T  # rows: source, cols: transient positions
        g = (np.eye(len(T)) - Mu) @ N
        self.min_occupation = float(g.min())
        if self.min_occupation < -1e-9:
            raise ToleranceError(f"negative occupation {self.min_occupation:.2e}: stopping rule invalid")
        g = np.maximum(g, 0.0)
        self.occupation = g
        denom = g + Mu
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(denom > 0, Mu / denom, 1.0)
        stop = np.ones((G.n, G.n))  # rows: source vertex, cols: position
        stop[np.ix_(T, T)] = q
        self.stop = stop
        ET = np.zeros(G.n)
        ET[T] = self.vq.ET
        self.ET = ET

    def expected_first_segment(self, x=None) -> float:
        """``E[nu_1] = sum_x g_s(x)``."""
        G = self.graph
        x = G.source if x is None else x
        return float(self.occupation[int(np.searchsorted(G.transient, x))].sum())


def simulate_elfs(G: Graph, seed, coupled=False, budget=DEFAULT_BUDGET, chain=None, rule=None) -> ElfsTrace:
    """One elfs trajectory.  ``coupled`` samples the walk and reads the elfs
    sources off it via the stopping rule."""
    rng = np.random.default_rng(seed)
    sink = G.sink_mask
    s = G.source
    if not coupled:
        chain = chain or elfs_chain(G)
        cdf = np.cumsum(chain.P, axis=1)
        ys = [s]
        while not sink[ys[-1]]:
            if len(ys) > budget:
                raise StepBudgetExceeded(f"elfs trace exceeded {budget} steps", partial=ys)
            ys.append(int(min(np.searchsorted(cdf[ys[-1]], rng.random(), side="right"), G.n - 1)))
        return ElfsTrace(ys, None, None, seed)
    rule = rule or CouplingRule(G)
    P = G.transition
    cdfw = np.cumsum(P, axis=1)
    ys, nus, path = [s], [], [s]
    x, t = s, 0
    while True:
        if t > budget:
            raise StepBudgetExceeded(f"coupled trace exceeded {budget} steps", partial=path)
        if sink[x] or rng.random() < rule.stop[ys[-1], x]:
            ys.append(x)
            nus.append(t)
            if sink[x]:
                break
            continue
        x = int(min(np.searchsorted(cdfw[x], rng.random(), side="right"), G.n - 1))
        path.append(x)
        t += 1
    return ElfsTrace(ys, nus, path, seed)


@dataclass
class ElfsBatch:
    arrival: np.ndarray
    rho: np.ndarray
    nu1: np.ndarray | None
    tau: np.ndarray | None
    sum_ET: np.ndarray | None
    seed: object = None

    @staticmethod
    def mean_se(a):
        a = np.asarray(a, dtype=float)
        return float(a.mean()), float(a.std(ddof=1) / np.sqrt(len(a)))


def simulate_elfs_batch(G: Graph, n_traces, seed, coupled=False, chain=None, rule=None,
                        budget=DEFAULT_BUDGET) -> ElfsBatch:
    """Vectorized independent elfs traces (``budget`` bounds total work)."""
    rng = np.random.default_rng(seed)
    k = int(n_traces)
    sink = G.sink_mask
    s = G.source
    rho = np.zeros(k, dtype=np.int64)
    work = 0
    if not coupled:
        chain = chain or elfs_chain(G)
        cdf = np.cumsum(chain.P, axis=1)
        cdf[:, -1] = 1.0
        pos = np.full(k, s)
        active = np.arange(k)
        while active.size:
            work += active.size
            if work > budget:
                raise StepBudgetExceeded(f"elfs batch exceeded {budget} steps")
            u = rng.random(active.size)
            new = (u[:, None] >= cdf[pos[active]]).sum(axis=1)
            pos[active] = new
            rho[active] += 1
            active = active[~sink[new]]
        return ElfsBatch(pos, rho, None, None, None, seed)
    rule = rule or CouplingRule(G)
    cdfw = np.cumsum(G.transition, axis=1)
    cdfw[:, -1] = 1.0
    pos = np.full(k, s)
    Y = np.full(k, s)
    t = np.zeros(k, dtype=np.int64)
    nu1 = np.full(k, -1, dtype=np.int64)
    sum_ET = np.zeros(k)
    active = np.arange(k)
    while active.size:
        work += active.size
        if work > budget:
            raise StepBudgetExceeded(f"coupled batch exceeded {budget} steps")
        x = pos[active]
        y = Y[active]
        stop = sink[x] | (rng.random(active.size) < rule.stop[y, x])
        st = active[stop]
        rho[st] += 1
        sum_ET[st] += rule.ET[Y[st]]
        first = st[nu1[st] < 0]
        nu1[first] = t[first]
        Y[st] = pos[st]
        mv = active[~stop]
        u = rng.random(mv.size)
        pos[mv] = (u[:, None] >= cdfw[pos[mv]]).sum(axis=1)
        t[mv] += 1
        active = active[~(stop & sink[x])]
    return ElfsBatch(pos, rho, nu1, t, sum_ET, seed)


def coupling_identities(G: Graph, samples=10 ** 5, seed=0) -> dict:
    """Exact ``E[sum_t ET_{Y_t}] = 2 HT_s`` and Monte Carlo ``E[nu_1] = ET_s/2``."""
    chain = elfs_chain(G)
    ws = walk_quantities(G)
    exact_sum = chain.expected_sum(chain.vq.ET)
    rule = CouplingRule(G)
    rep = {
        "expected_sum_ET": exact_sum,
        "two_HT": 2 * ws.HT,
        "sum_defect": abs(exact_sum - 2 * ws.HT),
        "ET_half": ws.ET / 2,
        "occupation_total": rule.expected_first_segment(),
        "min_occupation": rule.min_occupation,
    }
    if samples:
        b = simulate_elfs_batch(G, samples, seed, coupled=True, rule=rule)
        m, se = ElfsBatch.mean_se(b.nu1)
        rep.update(nu1_mean=m, nu1_se=se, nu1_z=(m - ws.ET / 2) / se if se > 0 else 0.0,
                   tau_mean=float(b.tau.mean()), sum_ET_mean=float(b.sum_ET.mean()))
    return rep


# ---------------------------------------------------------------------------
# fixed-point preparation


@dataclass
class AngleSchedule:
    L: int
    alpha: np.ndarray  # phases on the source reflection
    beta: np.ndarray  # phases on the flow reflection
    pbar: float
    eps: float
    gamma: float

    @property
    def rotations(self):
        return len(self.alpha)


def fixed_point_angles(pbar, eps, check=True) -> AngleSchedule:
    """Fixed-point search schedule for initial success probability ``>= pbar``.

    ``L = 2l + 1`` is the smallest odd length with
    ``T_L(1/gamma) >= 1/eps`` where ``gamma^{-1} = cosh(arccosh(1/eps)/L)``
    and ``1/gamma >= 1/sqrt(1 - pbar)``; the final success probability is
    at least ``1 - eps^2``.
    """
    if not 0 < pbar <= 1:
        raise ValueError("pbar must lie in (0, 1]")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if pbar >= 1:
        L = 1
    else:
        L = max(1, math.ceil(math.acosh(1 / eps) / math.acosh(1 / math.sqrt(1 - pbar))))
    if L % 2 == 0:
        L += 1
    l = (L - 1) // 2
    ginv = math.cosh(math.acosh(1 / eps) / L)
    gamma = 1 / ginv
    j = np.arange(1, l + 1)
    alpha = 2 * np.arctan2(1.0, np.tan(2 * np.pi * j / L) * math.sqrt(1 - gamma ** 2))
    beta = -alpha[::-1]
    sched = AngleSchedule(L, alpha, beta, float(pbar), float(eps), gamma)
    if check:
        worst = schedule_sweep(sched)
        if worst < 1 - eps ** 2 - 1e-9:
            raise ToleranceError(f"schedule reaches only {worst:.3e}")
    return sched


def apply_schedule_2d(sched: AngleSchedule, p0) -> float:
    """Final success probability in the two-dimensional model with initial probability ``p0``."""
    a = math.sqrt(p0)
    b = math.sqrt(max(0.0, 1 - p0))
    target = np.array([1.0, 0.0])
    s = np.array([a, b], dtype=complex)
    psi = s.copy()
    for al, be in zip(sched.alpha, sched.beta):
        psi = psi - (1 - np.exp(1j * be)) * target * np.vdot(target, psi)
        psi = psi - (1 - np.exp(-1j * al)) * s * np.vdot(s, psi)
    return float(abs(psi[0]) ** 2)


def schedule_sweep(sched: AngleSchedule, points=100) -> float:
    return min(apply_schedule_2d(sched, p) for p in np.linspace(sched.pbar, 1.0, points))


def elfs_rotation_transducer(E: EdgeSpace, theta, phi) -> Transducer:
    """``S_s(phi) (I - (1 - e^{i theta})(I - Pi_plus))`` with public space ``ker Pi_*``."""
    n = E.dim
    Ss = np.eye(n) - (1 - np.exp(-1j * phi)) * np.outer(E.phi_s, E.phi_s.conj())
    U = np.eye(n) - (1 - np.exp(1j * theta)) * (np.eye(n) - E.Pi_plus)
    return Transducer(Ss @ U, np.eye(n) - E.Pi_star, "elfs rotation")


@dataclass
class FixedPointResult:
    state: np.ndarray
    overlap: float  # |<f|out>|
    schedule: AngleSchedule
    W: float
    W_formula: float
    bound: float  # (1/sqrt pbar)(ET/(Rd)) ln(1/eps)
    residual: float


def fixed_point_prepare(G: Graph, pbar, eps) -> FixedPointResult:
    """Compose elfs rotations along the fixed-point schedule, starting from ``|phi_s>``."""
    ws = walk_quantities(G)
    if pbar > 1.0 / ws.Rd * (1 + 1e-12):
        raise ValueError(f"pbar={pbar} exceeds 1/(R_s d_s) = {1 / ws.Rd}")
    sched = fixed_point_angles(pbar / 2, eps)  # initial probability |<f|phi_s>|^2 >= pbar/2
    E = EdgeSpace(G)
    steps = [elfs_rotation_transducer(E, be, al) for al, be in zip(sched.alpha, sched.beta)]
    bound = (1 / math.sqrt(pbar)) * (ws.ET / ws.Rd) * math.log(1 / eps)
    if not steps:
        out = E.phi_s
        return FixedPointResult(out, float(abs(np.vdot(E.f, out))), sched, 0.0, 0.0, bound, 0.0)
    P = np.eye(E.dim) - E.Pi_star
    comp = compose_transducers(steps, P, E.phi_s, keep_tail=True)
    out = comp.psi0[-1]
    return FixedPointResult(out, float(abs(np.vdot(E.f, out))), sched, comp.certificate.W,
                            comp.W_formula, bound, comp.certificate.residual)


def fixed_point_recipe(G: Graph, eps, ET_bar=None) -> tuple[FixedPointResult, object]:
    """Fixed-point preparation on the stubbed graph with ``eta = ET_bar / (R_s d_s)``
    and ``pbar = 1/(1 + ET_bar)``; returns the result and the stubbed graph."""
    ws = walk_quantities(G)
    ET_bar = ws.ET if ET_bar is None else float(ET_bar)
    Gh = attach_source_stub(G, max(1.0, ET_bar / ws.Rd))
    return fixed_point_prepare(Gh.graph, 1.0 / (1.0 + ET_bar), eps), Gh


def modified_flow_overlap(G: Graph, eta) -> float:
    """``|<f_hat|f>|^2`` with ``f`` embedded in the stubbed graph's arc space; equals ``R_s / R_hat``."""
    Gh = attach_source_stub(G, eta)
    f = EdgeSpace(G).f
    fh = EdgeSpace(Gh.graph).f
    emb = np.zeros(Gh.graph.n_arcs, dtype=complex)
    emb[Gh.arc_map] = f
    val = float(abs(np.vdot(fh, emb)) ** 2)
    R = solve_electric(G).resistance
    Rh = solve_electric(Gh.graph).resistance
    if abs(val - R / Rh) > 1e-10:
        raise ToleranceError(f"overlap {val} differs from R/R_hat = {R / Rh}")
    return val


# ---------------------------------------------------------------------------
# exact preparation


@dataclass
class ExactElfResult:
    aa: AAResult
    modified: object
    alpha: float
    ET_bar: float
    W_over_sqrt_ET: float
    output: np.ndarray  # f_hat, the exact output state


def exact_elf_prepare(G: Graph, eta=None, ET_bar=None, Rd_estimate=None, seed=0, runs=10 ** 4,
                      m_max=10 ** 4) -> ExactElfResult:
    """Zero-error preparation of the flow state on the stubbed graph.

    ``eta`` defaults to ``ET_bar / Rd_estimate`` (both default to exact values).
    """
    ws = walk_quantities(G)
    ET_bar = ws.ET if ET_bar is None else float(ET_bar)
    if eta is None:
        Rd_estimate = ws.Rd if Rd_estimate is None else float(Rd_estimate)
        eta = max(1.0, ET_bar / Rd_estimate)
    Gh = attach_source_stub(G, eta)
    H = Gh.graph
    E = EdgeSpace(H)
    phi, fh = E.phi_s, E.f
    pub = np.eye(E.dim) - E.Pi_star
    U = Transducer(2 * np.outer(phi, phi.conj()) - np.eye(E.dim), pub, "source reflection")
    V = walk_transducer(H, E)
    aa = zero_error_aa(U, V, phi, fh, m_max=m_max, seed=seed, runs=runs)
    return ExactElfResult(aa, Gh, aa.alpha, ET_bar, aa.W_measured / math.sqrt(ET_bar), fh)


# ---------------------------------------------------------------------------
# quantum elfs process


@dataclass
class QuantumElfsResult:
    register_distribution: dict  # path -> probability from the simulated registers
    chain_paths: dict
    max_deviation: float
    surviving: float
    W: float  # composed transduction complexity
    reference: float  # E[sum_t sqrt(ET_bar_{Y_t})] over the same truncated process
    arrival: dict  # sink distribution over absorbed paths (normalized)
    extra: dict = field(default_factory=dict)


def quantum_elfs_process(G: Graph, depth_cap=3, m_max=10 ** 4, mode="exact", self_loops="record",
                         seed=0, perturbation=0.1) -> QuantumElfsResult:
    """Deferred-measurement simulation of the elfs process on a small graph.

    Each step prepares the stubbed-graph flow state from the current source
    with the zero-error transducer, then copies a random endpoint of the
    sampled edge into a fresh register.  Register amplitudes are tracked per
    path; garbage enters only through its norm, which is all the reduced
    register state depends on.  ``self_loops='record'`` keeps stub outcomes
    as repeated sources (the lazy chain); ``'retry'`` prepares again instead,
    which reproduces the plain chain.  ``mode='estimated'`` perturbs each
    ``R_x d_x`` by ``±perturbation`` before choosing the stub weight.
    """
    if G.n > 5 or depth_cap > 3:
        raise ValueError("quantum elfs simulation is limited to n <= 5 and depth <= 3")
    if self_loops not in ("record", "retry"):
        raise ValueError("self_loops must be 'record' or 'retry'")
    rng = np.random.default_rng(seed)
    vq = vertex_quantities(G)
    T = G.transient
    kernel = {}
    cost = {}
    etas = {}
    for i, x in enumerate(T):
        Rd = vq.Rd[i]
        if mode == "estimated":
            Rd = Rd * (1 + perturbation * rng.uniform(-1, 1))
        elif mode != "exact":
            raise ValueError(f"unknown mode {mode!r}")
        Gx = G.with_source(int(x))
        res = exact_elf_prepare(Gx, ET_bar=vq.ET[i], Rd_estimate=Rd, seed=seed, runs=0, m_max=m_max)
        etas[int(x)] = res.modified.eta
        H = res.modified.graph
        amp2 = np.abs(res.output) ** 2
        p = np.zeros(H.n)
        np.add.at(p, H.arc_tail, amp2)
        p[int(x)] += p[H.n - 1]  # the stub vertex stands in for x
        p = p[:G.n]
        stay = float(sum(amp2[a] for a in res.modified.stub_arcs))  # both stub arcs
        prep = 1.0
        if self_loops == "retry":
            p = p.copy()
            p[int(x)] -= stay
            p /= 1.0 - stay
            prep = 1.0 / (1.0 - stay)  # expected preparations per recorded step
        kernel[int(x)] = p
        cost[int(x)] = prep * (1.0 + res.aa.W_measured)
    sink = G.sink_mask
    dist, frontier = {}, {(): 1.0}
    W = 0.0
    ref = 0.0
    for _ in range(depth_cap):
        nxt = {}
        for path, pr in frontier.items():
            cur = path[-1] if path else G.source
            W += pr * cost[cur]
            ref += pr * math.sqrt(vq.lookup("ET", cur))
            for y in np.flatnonzero(kernel[cur] > 1e-15):
                q = pr * float(kernel[cur][y])
                key = path + (int(y),)
                (dist if sink[y] else nxt)[key] = q
        frontier = nxt
    surviving = float(sum(frontier.values()))
    dist.update(frontier)
    eta = np.array([etas[int(x)] for x in T])
    chain = elfs_chain(G, eta=eta) if self_loops == "record" else elfs_chain(G)
    paths, _ = chain.path_probabilities(depth_cap)
    keys = set(paths) | set(dist)
    dev = max(abs(paths.get(k, 0.0) - dist.get(k, 0.0)) for k in keys)
    absorbed = {}
    for k, v in dist.items():
        if k and sink[k[-1]]:
            absorbed[k[-1]] = absorbed.get(k[-1], 0.0) + v
    tot = sum(absorbed.values())
    arrival = {m: v / tot for m, v in absorbed.items()} if tot > 0 else {}
    return QuantumElfsResult(dist, paths, float(dev), surviving, float(W), float(ref), arrival,
                             {"eta": etas, "mode": mode, "self_loops": self_loops})


def arrival_check(G: Graph, chain: ElfsChain | None = None) -> float:
    """Max deviation between the elfs-chain arrival law and harmonic measure."""
    chain = chain or elfs_chain(G)
    hm = harmonic_measure(G)
    ar = chain.arrival()
    return max(abs(hm[m] - ar[m]) for m in hm)
