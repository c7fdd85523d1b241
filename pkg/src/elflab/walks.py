"""Random-walk quantities: escape probability, hitting/escape/commute times,
the absorbing-chain series, and Monte Carlo traces."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .electric import ElectricSolution, solve_electric
from .graph_core import Graph

DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class WalkStats:
    p: float  # escape probability 1 / (R_s d_s)
    HT: float
    ET: float
    CT: float
    R: float
    d_s: float
    W: float

    @property
    def Rd(self):
        return self.R * self.d_s

    def chain_holds(self, tol=1e-8) -> bool:
        """``1/p <= ET <= HT <= CT``."""
        a = [1.0 / self.p, self.ET, self.HT, self.CT]
        return all(a[i] <= a[i + 1] * (1 + tol) + tol for i in range(3))

    def to_record(self):
        return {"R_s": self.R, "HT": self.HT, "ET": self.ET, "CT": self.CT, "p": self.p}


def walk_quantities(G: Graph, sol: ElectricSolution | None = None) -> WalkStats:
    """Closed forms in terms of the voltages ``v`` of the unit electric flow."""
    if sol is None:
        sol = solve_electric(G)
    v, d = sol.voltages, G.degrees
    R = sol.resistance
    ds = float(d[G.source])
    return WalkStats(
        p=1.0 / (R * ds),
        HT=float(v @ d),
        ET=float((v ** 2) @ d / R),
        CT=R * G.total_weight,
        R=R,
        d_s=ds,
        W=G.total_weight,
    )


def spectral_gap(G: Graph, absolute=True) -> float:
    """Spectral gap of the transition matrix.

    With ``absolute`` (default) this is ``1 - max_{i>=2} |lambda_i|``, i.e.
    ``1 - ||P - pi 1^T||`` in the reversible inner product; otherwise
    ``1 - lambda_2``.
    """
    d = G.degrees
    S = G.weights / np.sqrt(np.outer(d, d))  # similar to P, symmetric
    lam = np.linalg.eigvalsh(S)
    lam = lam[np.argsort(-lam)]
    if absolute:
        return float(1.0 - max(lam[1], abs(lam[-1])))
    return float(1.0 - lam[1])


def transient_block(G: Graph) -> np.ndarray:
    T = G.transient
    return G.transition[np.ix_(T, T)]


@dataclass(frozen=True)
class FundamentalStats:
    visits: dict  # E_s[# visits to x before tau_M]
    HT: float
    Rd: float  # sum_t Q^t_ss
    ET: float
    ET_series: float | None  # degree-normalized Q-series value, regular graphs only
    mode: str
    visits_vs_voltage: float  # max |visits_x - d_x v_x|


def fundamental_matrix_stats(G: Graph, mode="exact", t_max=None) -> FundamentalStats:
    """Walk statistics from powers of the transient block ``Q``.

    ``mode='exact'`` uses ``(I - Q)^{-1}``; ``mode='series'`` sums
    ``Q^t`` for ``t < t_max``.  The degree-normalized escape-time series is
    reported only for regular graphs; the general value uses voltages.
    """
    T = G.transient
    Q = transient_block(G)
    k = len(T)
    i = int(np.searchsorted(T, G.source))
    if mode == "exact":
        N = np.linalg.inv(np.eye(k) - Q)
        row = N[i]
        weighted = (N @ N)[i, i]  # sum_t (t+1) Q^t_ss
    elif mode == "series":
        if t_max is None:
            raise ValueError("series mode needs t_max")
        row = np.zeros(k)
        weighted = 0.0
        cur = np.zeros(k)
        cur[i] = 1.0
        for t in range(int(t_max)):
            row += cur
            weighted += (t + 1) * cur[i]
            cur = cur @ Q
    else:
        raise ValueError(f"unknown mode {mode!r}")
    d = G.degrees
    Rd = float(row[i])
    R = Rd / d[G.source]
    v = np.zeros(G.n)
    v[T] = row / d[T]  # visits = d_x v_x
    ET_general = float(np.sum(v ** 2 * d) / R)
    ET_series = float(weighted / Rd) if G.is_regular() else None
    sol = solve_electric(G)
    dev = float(np.max(np.abs(row - d[T] * sol.voltages[T])))
    return FundamentalStats(
        visits={int(x): float(r) for x, r in zip(T, row)},
        HT=float(row.sum()),
        Rd=Rd,
        ET=ET_general,
        ET_series=ET_series,
        mode=mode,
        visits_vs_voltage=dev,
    )


def q_matrix_bounds(G: Graph, t_max=60) -> dict:
    """Numerical check of ``||Q|| <= 1 - delta m / n`` and
    ``Q^t_sx <= 1/n + (1 - delta)^t`` for regular graphs."""
    n, m = G.n, len(G.sinks)
    delta = spectral_gap(G, absolute=True)
    Q = transient_block(G)
    qnorm = float(np.linalg.norm(Q, 2))
    bound = 1.0 - delta * m / n
    i = int(np.searchsorted(G.transient, G.source))
    row = np.zeros(Q.shape[0])
    row[i] = 1.0
    worst = -np.inf
    for t in range(t_max):
        worst = max(worst, float(np.max(row - (1.0 / n + (1 - delta) ** t))))
        row = row @ Q
    return {"delta": delta, "Q_norm": qnorm, "Q_norm_bound": bound,
            "spectral_ok": qnorm <= bound + 1e-12,
            "mix_excess": worst, "mix_ok": worst <= 1e-12}


# ---------------------------------------------------------------------------
# Monte Carlo


class StepBudgetExceeded(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class WalkTrace:
    path: list
    tau: int  # hitting index of M
    sigma: int  # 1 + last visit to s before tau
    kappa: int | None  # first return to s after tau
    seed: object = None

    def to_csv_row(self):
        return ",".join(str(x) for x in self.path)


def _neighbor_tables(G: Graph):
    n = G.n
    deg = np.bincount(G.arc_tail, minlength=n)
    width = int(deg.max())
    nbr = np.zeros((n, width), dtype=np.int64)
    cdf = np.ones((n, width))
    order = np.argsort(G.arc_tail, kind="stable")
    starts = np.concatenate([[0], np.cumsum(deg)])
    for x in range(n):
        arcs = order[starts[x]:starts[x + 1]]
        nbr[x, :len(arcs)] = G.arc_head[arcs]
        c = np.cumsum(G.arc_weight[arcs]) / G.degrees[x]
        c[-1] = 1.0
        cdf[x, :len(arcs)] = c
        nbr[x, len(arcs):] = nbr[x, len(arcs) - 1]
    return nbr, cdf


def simulate_walk(G: Graph, seed, budget=DEFAULT_BUDGET, return_to_source=False) -> WalkTrace:
    """One trajectory from ``s`` until absorption in ``M``.

    With ``return_to_source`` the chain keeps running after absorption until
    it revisits ``s`` (the commute-time statistic ``kappa``); the path then
    includes that continuation.
    """
    rng = np.random.default_rng(seed)
    nbr, cdf = _neighbor_tables(G)
    s, sink = G.source, G.sink_mask
    path = [s]
    x = s
    last_s = 0
    t = 0
    while not sink[x]:
        if t >= budget:
            raise StepBudgetExceeded(f"walk exceeded {budget} steps", partial=path)
        x = int(nbr[x, np.searchsorted(cdf[x], rng.random(), side="right")])
        t += 1
        path.append(x)
        if x == s:
            last_s = t
    tau = t
    kappa = None
    if return_to_source:
        while True:
            if t >= budget:
                raise StepBudgetExceeded(f"walk exceeded {budget} steps", partial=path)
            x = int(nbr[x, np.searchsorted(cdf[x], rng.random(), side="right")])
            t += 1
            path.append(x)
            if x == s:
                kappa = t
                break
    return WalkTrace(path, tau, last_s + 1, kappa, seed)


@dataclass
class WalkBatch:
    tau: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray | None
    arrival: np.ndarray
    seed: object = None
    steps: int = field(default=0)

    def mean_se(self, name):
        a = getattr(self, name).astype(float)
        return float(a.mean()), float(a.std(ddof=1) / np.sqrt(len(a)))


def simulate_walks(G: Graph, n_traces, seed, budget=DEFAULT_BUDGET, return_to_source=False) -> WalkBatch:
    """Vectorized batch of independent walks from ``s``.

    ``budget`` bounds the total number of walker steps over the batch.
    """
    rng = np.random.default_rng(seed)
    nbr, cdf = _neighbor_tables(G)
    s, sink = G.source, G.sink_mask
    k = int(n_traces)
    pos = np.full(k, s)
    t = 0
    tau = np.full(k, -1)
    last_s = np.zeros(k, dtype=np.int64)
    kappa = np.full(k, -1) if return_to_source else None
    active = np.arange(k)
    phase2 = np.zeros(k, dtype=bool)
    arrival = np.full(k, -1, dtype=np.int64)
    steps = 0
    while active.size:
        if steps > budget:
            raise StepBudgetExceeded(f"batch exceeded {budget} steps")
        u = rng.random(active.size)
        p = pos[active]
        col = (u[:, None] >= cdf[p]).sum(axis=1)
        col = np.minimum(col, cdf.shape[1] - 1)
        new = nbr[p, col]
        pos[active] = new
        t += 1
        steps += active.size
        at_s = new == s
        ph = phase2[active]
        # first phase: record last visit to s, detect absorption
        upd = active[at_s & ~ph]
        last_s[upd] = t
        hit = active[sink[new] & ~ph]
        tau[hit] = t
        arrival[hit] = pos[hit]
        if return_to_source:
            back = active[at_s & ph]
            kappa[back] = t
            phase2[hit] = True
            done = np.zeros(k, dtype=bool)
            done[back] = True
        else:
            done = np.zeros(k, dtype=bool)
            done[hit] = True
        active = active[~done[active]]
    return WalkBatch(tau, last_s + 1, kappa, arrival, seed, steps)


@dataclass(frozen=True)
class VertexQuantities:
    """Per-source resistance, escape and hitting times for every transient vertex."""

    vertices: np.ndarray
    R: np.ndarray
    ET: np.ndarray
    HT: np.ndarray
    degrees: np.ndarray

    @property
    def Rd(self):
        return self.R * self.degrees

    def lookup(self, name, x):
        return float(getattr(self, name)[int(np.searchsorted(self.vertices, x))])


def vertex_quantities(G: Graph, V=None) -> VertexQuantities:
    """``R_x = V_xx``, ``ET_x = sum_y V_yx^2 d_y / V_xx``, ``HT_x = sum_y V_yx d_y`` from the Green matrix."""
    from .electric import green_matrix

    if V is None:
        V = green_matrix(G)
    T = G.transient
    d = G.degrees
    R = V[T, np.arange(len(T))]
    ET = (d @ V ** 2) / R
    HT = d @ V
    return VertexQuantities(T, R, ET, HT, d[T])
