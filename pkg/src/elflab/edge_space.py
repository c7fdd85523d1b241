"""Operators on the arc space: star states, the symmetric/star/closed-flow
projectors, the walk unitary and the electric flow state."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .electric import ElectricSolution, solve_electric
from .graph_core import Graph, GraphValidationError
from .linalg import kernel_basis, pinv, projector_defects, unitarity_defect

MAX_ARCS = 1024


class ToleranceError(RuntimeError):
    """A numerical identity failed its tolerance."""


def _check_dim(G: Graph):
    if G.n_arcs > MAX_ARCS:
        raise GraphValidationError(f"arc space of dimension {G.n_arcs} exceeds the cap {MAX_ARCS}")


def swap_matrix(G: Graph) -> np.ndarray:
    m = G.n_arcs
    S = np.zeros((m, m))
    S[G.swap, np.arange(m)] = 1.0
    return S


def star_matrix(G: Graph) -> np.ndarray:
    """``2|E| x n`` matrix whose column ``x`` is the star state of ``x``."""
    _check_dim(G)
    d = G.degrees
    if np.any(d <= 0):
        raise GraphValidationError(f"isolated vertex {int(np.argmin(d))} has no star state")
    Phi = np.zeros((G.n_arcs, G.n))
    k = np.arange(G.n_arcs)
    Phi[k, G.arc_tail] = np.sqrt(G.arc_weight / d[G.arc_tail])
    return Phi


def star_state(G: Graph, x) -> np.ndarray:
    x = int(x)
    if not 0 <= x < G.n:
        raise GraphValidationError(f"vertex {x} out of range")
    return star_matrix(G)[:, x].astype(complex)


def flow_state(G: Graph, sol: ElectricSolution | None = None) -> np.ndarray:
    """Normalized flow state: amplitude ``f_xy / sqrt(2 R_s w_xy)`` on arc ``(x, y)``."""
    if sol is None:
        sol = solve_electric(G)
    return (sol.flow / np.sqrt(G.arc_weight * 2.0 * sol.resistance)).astype(complex)


@dataclass(frozen=True, eq=False)
class EdgeSpace:
    graph: Graph

    @cached_property
    def dim(self):
        return self.graph.n_arcs

    @cached_property
    def Phi(self):
        return star_matrix(self.graph)

    @cached_property
    def SWAP(self):
        return swap_matrix(self.graph)

    @cached_property
    def interior(self):
        G = self.graph
        keep = ~G.sink_mask
        keep[G.source] = False
        return np.flatnonzero(keep)

    @cached_property
    def Pi_plus(self):
        return 0.5 * (np.eye(self.dim) + self.SWAP)

    @cached_property
    def Pi_minus(self):
        return 0.5 * (np.eye(self.dim) - self.SWAP)

    @cached_property
    def Pi_star(self):
        # star states of distinct vertices have disjoint support, so they are orthonormal
        P = self.Phi[:, self.interior]
        return P @ P.T

    @cached_property
    def solution(self):
        return solve_electric(self.graph)

    @cached_property
    def f(self):
        return flow_state(self.graph, self.solution)

    @cached_property
    def closed_basis(self):
        """Orthonormal basis of antisymmetric states orthogonal to every star state outside ``M``."""
        G = self.graph
        nonsink = np.flatnonzero(~G.sink_mask)
        A = np.vstack([self.Pi_plus, self.Phi[:, nonsink].T])
        K = kernel_basis(A, scale=1.0)
        if K.shape[1]:
            leak = float(np.abs(K.conj().T @ self.f).max())
            if leak > 1e-9:
                raise ToleranceError(f"closed-flow space overlaps the flow state ({leak:.2e})")
        return K.astype(complex)

    @cached_property
    def Pi_cl(self):
        K = self.closed_basis
        return K @ K.conj().T

    @cached_property
    def U(self):
        U = (2 * self.Pi_star - np.eye(self.dim)) @ self.SWAP
        alt = (2 * self.Pi_star - np.eye(self.dim)) @ (2 * self.Pi_plus - np.eye(self.dim))
        if np.abs(U - alt).max() > 1e-12:
            raise ToleranceError("walk unitary forms disagree")
        return U.astype(complex)

    def partial_rotation(self, theta):
        """``I - (1 - e^{i theta})(I - Pi_plus)``."""
        return np.eye(self.dim) - (1 - np.exp(1j * theta)) * (np.eye(self.dim) - self.Pi_plus)

    def phi(self, x):
        return self.Phi[:, int(x)].astype(complex)

    @property
    def phi_s(self):
        return self.phi(self.graph.source)

    def invariant_projector(self):
        return invariant_projector(self.Pi_star, self.Pi_plus)

    def checks(self) -> dict:
        """Residuals of the structural identities on this graph."""
        G, sol = self.graph, self.solution
        Rd = sol.resistance * G.degrees[G.source]
        P = self.invariant_projector()
        f = self.f
        out = {
            "elf_projection": float(np.linalg.norm(P @ self.phi_s - f / np.sqrt(2 * Rd))),
            "flow_overlap": float(abs(np.vdot(self.phi_s, f) - 1 / np.sqrt(2 * Rd))),
            "flow_interior": float(np.abs(self.Phi[:, self.interior].T @ f).max()) if self.interior.size else 0.0,
            "sink_sum": float(abs(np.sqrt(G.degrees[list(G.sinks)]) @ (self.Phi[:, list(G.sinks)].T @ f)
                                  + 1 / np.sqrt(2 * sol.resistance))),
            "closed_flow": float(np.linalg.norm(self.Pi_cl @ f)),
            "closed_source": float(np.linalg.norm(self.Pi_cl @ self.phi_s)),
            "invariant_split": float(np.abs(P - (np.outer(f, f.conj()) + self.Pi_cl)).max()),
            "U_fixes_f": float(np.linalg.norm(self.U @ f - f)),
            "U_fixes_closed": float(np.abs(self.U @ self.closed_basis - self.closed_basis).max()) if self.closed_basis.shape[1] else 0.0,
            "unitarity": unitarity_defect(self.U),
            "pm_split": float(np.abs(self.Pi_plus + self.Pi_minus - np.eye(self.dim)).max()
                              + np.abs(self.Pi_plus @ self.Pi_minus).max()),
        }
        for name in ("Pi_plus", "Pi_star", "Pi_cl"):
            out[name] = max(projector_defects(getattr(self, name)))
        return out


def build_projectors(G: Graph) -> dict:
    E = EdgeSpace(G)
    return {"Pi_plus": E.Pi_plus, "Pi_star": E.Pi_star, "Pi_cl": E.Pi_cl}


def walk_unitary(G: Graph) -> np.ndarray:
    return EdgeSpace(G).U


def partial_rotation(G: Graph, theta) -> np.ndarray:
    return EdgeSpace(G).partial_rotation(theta)


def invariant_projector(Pi, Delta, tol=1e-8) -> np.ndarray:
    """Projector onto ``ker Pi ∩ ker Delta``.

    Evaluated as ``(I - Delta)[I - (Pi - Pi Delta Pi)^+ (I - Delta)]`` and
    cross-checked against an SVD of the stacked operators.
    """
    Pi = np.asarray(Pi)
    Delta = np.asarray(Delta)
    n = Pi.shape[0]
    I = np.eye(n)
    X = pinv(Pi - Pi @ Delta @ Pi)
    P1 = (I - Delta) @ (I - X @ (I - Delta))
    K = kernel_basis(np.vstack([Pi, Delta]), scale=1.0)
    P2 = K @ K.conj().T
    gap = float(np.abs(P1 - P2).max()) if n else 0.0
    if gap > tol:
        raise ToleranceError(f"pseudoinverse and SVD projectors differ by {gap:.2e}")
    return P2


def state_to_record(G: Graph, vec) -> dict:
    vec = np.asarray(vec, dtype=complex)
    return {
        "arcs": [[int(x), int(y)] for x, y in zip(G.arc_tail, G.arc_head)],
        "amplitudes": [[float(z.real), float(z.imag)] for z in vec],
    }


def operator_to_record(G: Graph, M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {
        "arcs": [[int(x), int(y)] for x, y in zip(G.arc_tail, G.arc_head)],
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in M],
    }
