"""Electric flows, effective resistance and the random-walk arrival distribution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .graph_core import Graph, GraphValidationError, ModifiedGraph


class SolverError(RuntimeError):
    pass


def dirichlet_laplacian(G: Graph) -> np.ndarray:
    """Graph Laplacian restricted to the transient vertices ``V \\ M``."""
    T = G.transient
    L = np.diag(G.degrees) - G.weights
    return L[np.ix_(T, T)]


def _factor(G: Graph):
    try:
        return sla.cho_factor(dirichlet_laplacian(G), lower=True)
    except np.linalg.LinAlgError:
        raise SolverError(f"restricted Laplacian of {G!r} is singular: some component misses the sink") from None


def green_matrix(G: Graph) -> np.ndarray:
    """Voltages for every transient source at once.

    Returns the ``n x |T|`` matrix whose column ``j`` is the voltage vector
    (zero on ``M``) for a unit current injected at ``G.transient[j]``.  It is
    the inverse of the restricted Laplacian, padded with zero rows on ``M``.
    """
    T = G.transient
    c = _factor(G)
    Vt = sla.cho_solve(c, np.eye(len(T)))
    V = np.zeros((G.n, len(T)))
    V[T] = 0.5 * (Vt + Vt.T)
    return V


def voltages(G: Graph, source=None) -> np.ndarray:
    s = G.source if source is None else int(source)
    if G.sink_mask[s]:
        raise GraphValidationError(f"source {s} lies in the sink")
    T = G.transient
    b = np.zeros(len(T))
    b[np.searchsorted(T, s)] = 1.0
    v = np.zeros(G.n)
    v[T] = sla.cho_solve(_factor(G), b)
    return v


@dataclass(frozen=True, eq=False)
class ElectricSolution:
    graph: Graph
    voltages: np.ndarray  # v_x, zero on M
    flow: np.ndarray  # unit flow on arcs, f[k] = w (v_tail - v_head)
    resistance: float  # R_s = v_s

    @property
    def source(self):
        return self.graph.source

    def demand(self) -> np.ndarray:
        """Net outflow at every vertex."""
        out = np.zeros(self.graph.n)
        np.add.at(out, self.graph.arc_tail, self.flow)
        return out

    def demand_residual(self) -> float:
        G = self.graph
        target = np.zeros(G.n)
        target[G.source] = 1.0
        dem = self.demand()
        res = np.abs(dem - target)[~G.sink_mask].max()
        # total inflow into M is one
        res = max(res, abs(-dem[G.sink_mask].sum() - 1.0))
        return float(res)

    def to_record(self) -> dict:
        G = self.graph
        return {
            "source": G.source,
            "sinks": list(G.sinks),
            "voltages": self.voltages.tolist(),
            "flow_arcs": [[int(x), int(y), float(f)] for x, y, f in zip(G.arc_tail, G.arc_head, self.flow)],
            "R_s": self.resistance,
            "residuals": {"demand": self.demand_residual(), "energy_minus_R": energy(self) - self.resistance},
        }


def solve_electric(G: Graph, source=None) -> ElectricSolution:
    """Unit electric flow from ``source`` (default ``G.source``) into the sink."""
    if source is not None and source != G.source:
        G = G.with_source(source)
    v = voltages(G)
    f = G.arc_weight * (v[G.arc_tail] - v[G.arc_head])
    sol = ElectricSolution(G, v, f, float(v[G.source]))
    res = sol.demand_residual()
    if res > 1e-8 * max(1.0, sol.resistance):
        raise SolverError(f"flow conservation residual {res:.3e} too large")
    return sol


def energy(sol: ElectricSolution) -> float:
    """Dissipated energy ``1/2 * sum over arcs f^2 / w``."""
    return 0.5 * float(np.sum(sol.flow ** 2 / sol.graph.arc_weight))


def flow_energy(G: Graph, flow) -> float:
    return 0.5 * float(np.sum(np.asarray(flow) ** 2 / G.arc_weight))


def harmonic_measure(G: Graph, source=None) -> dict:
    """Probability that the walk from the source is absorbed at each sink vertex.

    Solved on the absorbing chain, independently of the electric solver.
    """
    s = G.source if source is None else int(source)
    T, M = G.transient, np.asarray(G.sinks)
    P = G.transition
    Q = P[np.ix_(T, T)]
    B = P[np.ix_(T, M)]
    e = np.zeros(len(T))
    e[np.searchsorted(T, s)] = 1.0
    visits = np.linalg.solve((np.eye(len(T)) - Q).T, e)
    p = visits @ B
    return {int(m): float(pm) for m, pm in zip(M, p)}


def harmonic_measure_matrix(G: Graph) -> np.ndarray:
    """Arrival probabilities for every transient start, shape ``|T| x |M|``."""
    T, M = G.transient, np.asarray(G.sinks)
    P = G.transition
    Q = P[np.ix_(T, T)]
    return np.linalg.solve(np.eye(len(T)) - Q, P[np.ix_(T, M)])


@dataclass(frozen=True)
class EscapeIdentity:
    eta: float
    R_s: float
    d_s: float
    ET_s: float
    R_hat: float
    d_hat: float
    ET_hat: float
    terms: tuple  # (R_hat d_hat, eta R_s^2 d_s / R_hat, (R_s / R_hat) ET_s)

    @property
    def Rd_hat(self):
        return self.R_hat * self.d_hat

    @property
    def decomposition(self):
        return float(sum(self.terms))

    @property
    def ratio(self):
        return self.ET_hat / self.Rd_hat

    @property
    def bound(self):
        return 2.0 + self.ET_s / (self.eta * self.R_s * self.d_s)

    @property
    def holds(self):
        return self.ratio <= self.bound * (1 + 1e-12)


def escape_time_from_voltages(G: Graph, v) -> float:
    return float(np.sum(v ** 2 * G.degrees) / v[G.source])


def modified_escape_identity(Gh: ModifiedGraph) -> EscapeIdentity:
    """Both sides of the escape-time identity for the stubbed graph.

    ``ET_hat = R_hat d_hat + eta R_s^2 d_s / R_hat + (R_s / R_hat) ET_s``
    together with the bound ``ET_hat / (R_hat d_hat) <= 2 + ET_s / (eta R_s d_s)``.
    """
    G, H = Gh.base, Gh.graph
    v = voltages(G)
    vh = voltages(H)
    R, d = float(v[G.source]), float(G.degrees[G.source])
    ET = escape_time_from_voltages(G, v)
    Rh, dh = float(vh[H.source]), float(H.degrees[H.source])
    ETh = escape_time_from_voltages(H, vh)
    eta = Gh.eta
    terms = (Rh * dh, eta * R * R * d / Rh, (R / Rh) * ET)
    return EscapeIdentity(eta, R, d, ET, Rh, dh, ETh, terms)
