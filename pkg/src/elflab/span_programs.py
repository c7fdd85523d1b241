"""Span programs: witness sizes, the pseudoinverse form of the negative
witness size, and the projector triple used by the witness-size estimator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .edge_space import ToleranceError, invariant_projector
from .linalg import kernel_basis, pinv, range_basis
from .transducers import Transducer, generic_catalyst


class NegativeInputError(ValueError):
    """The target is not reachable from the available subspace."""


def _orth(B, n):
    B = np.asarray(B, dtype=complex).reshape(n, -1)
    if B.shape[1] == 0:
        return B
    return range_basis(B)


@dataclass(eq=False)
class SpanProgram:
    """``(H, V, tau, A)`` with ``H = C^N``, input blocks ``H_{j,a}`` and the
    always/never-available subspaces ``H_true`` and ``H_false``.

    ``blocks[(j, a)]`` holds basis columns.  At construction ``tau`` is rescaled
    so that ``w_0 = A^+ tau`` has unit norm; ``tau_original`` keeps the input.
    """

    A: np.ndarray
    tau: np.ndarray
    blocks: dict
    true_basis: np.ndarray | None = None
    false_basis: np.ndarray | None = None
    tau_original: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        self.tau_original = np.asarray(self.tau, dtype=complex).ravel()
        if self.tau_original.size != self.A.shape[0]:
            raise ValueError("tau must live in the target space")
        N = self.dim
        self.blocks = {(int(j), a): _orth(B, N) for (j, a), B in self.blocks.items()}
        self.true_basis = _orth(np.zeros((N, 0)) if self.true_basis is None else self.true_basis, N)
        self.false_basis = _orth(np.zeros((N, 0)) if self.false_basis is None else self.false_basis, N)
        w0 = pinv(self.A) @ self.tau_original
        nw = np.linalg.norm(w0)
        if nw == 0:
            raise ValueError("tau is orthogonal to the image of A")
        self.tau = self.tau_original / nw
        self._check_cover()

    @property
    def dim(self):
        return self.A.shape[1]

    @cached_property
    def n_inputs(self):
        return 1 + max(j for j, _ in self.blocks) if self.blocks else 0

    def _check_cover(self):
        # H_{j,1} + ... + H_{j,q} is the whole block H_j; blocks of distinct j are orthogonal
        spans = []
        for j in range(self.n_inputs):
            cols = [B for (jj, _), B in self.blocks.items() if jj == j]
            spans.append(_orth(np.hstack(cols), self.dim) if cols else np.zeros((self.dim, 0)))
        for i in range(len(spans)):
            for k in range(i + 1, len(spans)):
                if spans[i].size and spans[k].size and np.abs(spans[i].conj().T @ spans[k]).max() > 1e-10:
                    raise ValueError(f"input blocks {i} and {k} are not orthogonal")

    @cached_property
    def w0(self):
        return pinv(self.A) @ self.tau

    def available_basis(self, x):
        x = tuple(int(v) for v in x)
        if len(x) != self.n_inputs:
            raise ValueError(f"input must have {self.n_inputs} bits")
        cols = [self.true_basis] + [self.blocks.get((j, a), np.zeros((self.dim, 0))) for j, a in enumerate(x)]
        B = np.hstack(cols)
        return _orth(B, self.dim) if B.shape[1] else B

    def available_projector(self, x):
        B = self.available_basis(x)
        return B @ B.conj().T

    @cached_property
    def T_perp_projector(self):
        """Projector onto ``T^perp``, where ``T = ker A ⊕ span{w_0}``."""
        R = range_basis(self.A.conj().T) if np.abs(self.A).max() > 0 else np.zeros((self.dim, 0))
        w = self.w0
        return R @ R.conj().T - np.outer(w, w.conj())

    def is_positive(self, x, tol=1e-9) -> bool:
        return _positive_solve(self, x)[1] <= tol

    @classmethod
    def from_dict(cls, d):
        def arr(v):
            v = np.asarray(v, dtype=float)
            if v.ndim >= 1 and v.shape[-1] == 2 and d.get("complex", False):
                return v[..., 0] + 1j * v[..., 1]
            return v
        blocks = {}
        for b in d["blocks"]:
            blocks[(int(b["j"]), int(b["a"]))] = arr(b["basis"]).reshape(d["dims"]["H"], -1)
        kw = {}
        for name in ("true", "false"):
            if d.get(name) is not None:
                kw[f"{name}_basis"] = arr(d[name]).reshape(d["dims"]["H"], -1)
        A = arr(d["A"]).reshape(d["dims"]["V"], d["dims"]["H"])
        return cls(A, arr(d["tau"]), blocks, **kw)

    def to_dict(self):
        return {
            "dims": {"H": self.dim, "V": self.A.shape[0]},
            "complex": True,
            "A": np.stack([self.A.real, self.A.imag], -1).tolist(),
            "tau": np.stack([self.tau_original.real, self.tau_original.imag], -1).tolist(),
            "blocks": [{"j": j, "a": a, "basis": np.stack([B.real, B.imag], -1).tolist()}
                       for (j, a), B in self.blocks.items()],
            "true": np.stack([self.true_basis.real, self.true_basis.imag], -1).tolist() if self.true_basis.size else None,
        }


def load_span_program(path) -> SpanProgram:
    with open(path) as fh:
        return SpanProgram.from_dict(json.load(fh))


def _positive_solve(P: SpanProgram, x):
    B = P.available_basis(x)
    if B.shape[1] == 0:
        return np.zeros(P.dim, dtype=complex), float(np.linalg.norm(P.tau))
    AB = P.A @ B
    c = pinv(AB) @ P.tau
    return B @ c, float(np.linalg.norm(AB @ c - P.tau))


@dataclass
class WitnessReport:
    x: tuple
    w_plus: float
    e_minus: float
    w_minus: float  # optimal min-error negative witness size
    positive: np.ndarray
    omega: np.ndarray


def positive_witness(P: SpanProgram, x, tol=1e-9):
    """Minimum-norm ``w`` in ``H(x)`` with ``A w = tau``; returns ``(w_+, w)``."""
    w, res = _positive_solve(P, x)
    if res > tol:
        raise NegativeInputError(f"x={tuple(x)} is a negative input (residual {res:.3e})")
    wp = float(np.linalg.norm(w) ** 2)
    Q = invariant_projector(P.T_perp_projector, np.eye(P.dim) - P.available_projector(x))
    q = float(np.linalg.norm(Q @ P.w0) ** 2)
    if abs(q * wp - 1.0) > 1e-9:
        raise ToleranceError(f"||P_Q w0||^2 w_+ = {q * wp} differs from 1")
    return wp, w


def negative_witness(P: SpanProgram, x):
    """Two-stage minimization over ``omega`` with ``<tau, omega> = 1``.

    First ``e_- = min ||Pi_{H(x)} A^† omega||^2``, then the smallest
    ``||A^† omega||^2`` among the minimizers.  Returns ``(e_-, w~_-, omega)``.
    """
    tau = P.tau
    Ad = P.A.conj().T
    Pi = P.available_projector(x)
    omega0 = tau / np.vdot(tau, tau)
    N = kernel_basis(tau.conj()[None, :], scale=1.0)  # directions keeping <tau, omega> fixed
    M = Pi @ Ad
    MN = M @ N
    z = -pinv(MN) @ (M @ omega0)
    K = kernel_basis(MN, scale=1.0) if N.shape[1] else N
    base = omega0 + N @ z
    if K.shape[1]:
        D = Ad @ N @ K
        y = -pinv(D) @ (Ad @ base)
        omega = base + N @ K @ y
    else:
        omega = base
    e = float(np.linalg.norm(M @ omega) ** 2)
    wt = float(np.linalg.norm(Ad @ omega) ** 2)
    return e, wt, omega


def witness_report(P: SpanProgram, x) -> WitnessReport:
    wp, w = positive_witness(P, x)
    e, wt, om = negative_witness(P, x)
    return WitnessReport(tuple(int(v) for v in x), wp, e, wt, w, om)


def pseudoinverse_identity(P: SpanProgram, x, tol=1e-8) -> dict:
    """``w~_-(x) = 1 + ||(Pi_T⊥ Pi_H(x) Pi_T⊥)^+ Pi_H(x)⊥ w_0||^2`` checked against the two-stage value."""
    positive_witness(P, x)
    Tp = P.T_perp_projector
    Hx = P.available_projector(x)
    rhs = 1.0 + float(np.linalg.norm(pinv(Tp @ Hx @ Tp) @ ((np.eye(P.dim) - Hx) @ P.w0)) ** 2)
    _, lhs, _ = negative_witness(P, x)
    gap = abs(lhs - rhs)
    if gap > tol * max(1.0, abs(lhs)):
        raise ToleranceError(f"negative witness size {lhs} vs pseudoinverse form {rhs}")
    return {"w_minus": lhs, "pseudoinverse": rhs, "gap": gap}


@dataclass
class ProjectorInstance:
    Pi: np.ndarray
    Delta: np.ndarray
    psi: np.ndarray
    w_plus: float
    w_minus: float
    W: float
    overlap: float  # ||P psi||^2 with P onto ker Pi ∩ ker Delta


def to_projector_instance(P: SpanProgram, x, tol=1e-8) -> ProjectorInstance:
    """``Pi = Pi_T⊥``, ``Delta = Pi_H(x)⊥``, ``psi = w_0``, with both bridge identities asserted."""
    wp, _ = positive_witness(P, x)
    _, wt, _ = negative_witness(P, x)
    n = P.dim
    Pi = P.T_perp_projector
    Delta = np.eye(n) - P.available_projector(x)
    psi = P.w0
    Pin = invariant_projector(Pi, Delta)
    ov = float(np.linalg.norm(Pin @ psi) ** 2)
    if abs(ov - 1 / wp) > tol:
        raise ToleranceError(f"||P psi||^2 = {ov} but 1/w_+ = {1 / wp}")
    I = np.eye(n)
    S = (2 * Pi - I) @ (2 * Delta - I)
    W = generic_catalyst(Transducer(S, I - Pi, "span program reflection"), psi).W
    if abs(W - (wt - 1)) > tol * max(1.0, wt):
        raise ToleranceError(f"transduction complexity {W} but w~_- - 1 = {wt - 1}")
    return ProjectorInstance(Pi, Delta, psi, wp, wt, W, ov)


# ---------------------------------------------------------------------------
# reference instances


def sp1() -> SpanProgram:
    """``A = (1 1)`` on ``C^2`` with one coordinate per input bit."""
    e = np.eye(2)
    return SpanProgram(np.array([[1.0, 1.0]]), np.array([np.sqrt(2)]),
                       {(0, 1): e[:, :1], (1, 1): e[:, 1:]})


def sp2() -> SpanProgram:
    """``A = [[1,1,0],[0,1,1]]``, ``tau ∝ (1, 1)``, ``H_{j,1} = span e_j``."""
    e = np.eye(3)
    A = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    return SpanProgram(A, np.sqrt(1.5) * np.ones(2), {(j, 1): e[:, j:j + 1] for j in range(3)})


def random_span_program(seed, max_V=8, max_H=10, complex_=False):
    """Random program with a positive input; returns ``(P, x)``.

    ``H`` is cut into input blocks, each split by a random rotation into the
    subspaces for ``a = 0`` and ``a = 1`` (either may be empty).
    """
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        N = int(rng.integers(2, max_H + 1))
        m = int(rng.integers(1, min(max_V, N) + 1))
        A = rng.standard_normal((m, N))
        if complex_:
            A = A + 1j * rng.standard_normal((m, N))
        tau = rng.standard_normal(m)
        n_in = int(rng.integers(1, N + 1))
        cuts = np.sort(rng.choice(np.arange(1, N), size=min(n_in - 1, N - 1), replace=False))
        parts = np.split(np.arange(N), cuts)
        blocks = {}
        for j, idx in enumerate(parts):
            Qb, _ = np.linalg.qr(rng.standard_normal((len(idx), len(idx))))
            B = np.zeros((N, len(idx)))
            B[idx] = Qb
            k = int(rng.integers(0, len(idx) + 1))
            if k:
                blocks[(j, 1)] = B[:, :k]
            if k < len(idx):
                blocks[(j, 0)] = B[:, k:]
        try:
            P = SpanProgram(A, tau, blocks)
        except ValueError:
            continue
        x = tuple(int(v) for v in rng.integers(0, 2, size=len(parts)))
        if P.n_inputs != len(parts):
            continue
        if P.is_positive(x):
            return P, x
    raise RuntimeError("no positive random instance found")
