"""Random-regular-graph checks of the expander bounds, and semi-supervised
labeling by harmonic measure."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elfs import (ElfsBatch, elfs_chain, elfs_kernel, quantum_elfs_process, simulate_elfs_batch)
from .electric import green_matrix, harmonic_measure, harmonic_measure_matrix
from .graph_core import Graph, random_regular_graph
from .walks import (DEFAULT_BUDGET, StepBudgetExceeded, simulate_walks, spectral_gap, transient_block,
                    vertex_quantities)

BOUND_NAMES = ("R", "ET", "HT", "EHT")


def bound_scales(n, m) -> dict:
    """Reference growth for each quantity: ``1``, ``1 + n/m^2``, ``n/m + ln n``, ``min(m, n/m + ln n)``."""
    ln = math.log(n)
    return {"R": 1.0, "ET": 1.0 + n / m ** 2, "HT": n / m + ln, "EHT": min(m, n / m + ln)}


@dataclass
class ExpanderReport:
    n: int
    d: int
    m: int
    seeds: list
    delta: list  # absolute spectral gap per seed
    constants: dict  # name -> max over seeds and sources of quantity / scale
    max_values: dict
    Q_norm_ok: bool
    Q_norm_slack: float  # min over seeds of (1 - delta m / n) - ||Q||
    absorption_constant: float  # min over seeds, sources of m * P(absorb in one elfs step)
    arrival_defect: float
    per_seed: list = field(default_factory=list)

    def to_record(self):
        return {k: v for k, v in self.__dict__.items()}


def _instance_stats(G: Graph):
    n, m = G.n, len(G.sinks)
    V = green_matrix(G)
    vq = vertex_quantities(G, V)
    K = elfs_kernel(G, V)
    chain = elfs_chain(G)
    absorb = K[list(G.sinks)].sum(axis=0)
    delta = spectral_gap(G, absolute=True)
    Q = transient_block(G)
    qn = float(np.linalg.norm(Q, 2))
    hm = harmonic_measure_matrix(G)
    arrival_defect = float(np.abs(chain.arrival_matrix - hm).max())
    return {
        "delta": delta,
        "R": float(vq.R.max()),
        "ET": float(vq.ET.max()),
        "HT": float(vq.HT.max()),
        "EHT": float(chain.EHT.max()),
        "Q_norm": qn,
        "Q_bound": 1.0 - delta * m / n,
        "absorption": float(m * absorb.min()),
        "arrival_defect": arrival_defect,
    }


def expander_stats(n, d, m, seeds) -> ExpanderReport:
    """Exact quantities over seeded random ``d``-regular graphs with ``m`` sinks."""
    seeds = list(seeds)
    scales = bound_scales(n, m)
    per = []
    for sd in seeds:
        G = random_regular_graph(n, d, m, sd)
        st = _instance_stats(G)
        st["seed"] = sd
        per.append(st)
    maxv = {k: max(p[k] for p in per) for k in BOUND_NAMES}
    consts = {k: maxv[k] / scales[k] for k in BOUND_NAMES}
    slack = min(p["Q_bound"] - p["Q_norm"] for p in per)
    return ExpanderReport(
        n, d, m, seeds, [p["delta"] for p in per], consts, maxv,
        Q_norm_ok=bool(slack >= -1e-12), Q_norm_slack=float(slack),
        absorption_constant=min(p["absorption"] for p in per),
        arrival_defect=max(p["arrival_defect"] for p in per),
        per_seed=per,
    )


def sink_sizes(n):
    """The two sink-size families: ``sqrt(n)`` and ``n/16``."""
    return {"sqrt": int(round(math.sqrt(n))), "sixteenth": max(1, n // 16)}


def expander_grid(ns=(64, 256, 1024), d=3, seeds=range(3)) -> dict:
    """Reports on the scale grid and, per family, the drift of every fitted
    constant: the largest ratio ``c(n2) / c(n1)`` over ``n1 < n2``."""
    reports = {}
    for fam in ("sqrt", "sixteenth"):
        reports[fam] = [expander_stats(n, d, sink_sizes(n)[fam], seeds) for n in ns]
    drift = {}
    for fam, reps in reports.items():
        for k in BOUND_NAMES:
            vals = [r.constants[k] for r in reps]
            drift[(fam, k)] = max(vals[j] / vals[i] for i in range(len(vals)) for j in range(i + 1, len(vals)))
    return {"reports": reports, "drift": drift}


def perturbed_arrival_tv(G: Graph, perturbation=0.1, seed=0) -> float:
    """TV distance between harmonic measure and the arrival law of the lazy elfs
    chain whose stub weights use ``R_x d_x`` perturbed by up to ``±perturbation``."""
    rng = np.random.default_rng(seed)
    vq = vertex_quantities(G)
    Rd = vq.Rd * (1 + perturbation * rng.uniform(-1, 1, size=vq.Rd.size))
    eta = np.maximum(vq.ET / Rd, 1.0)
    ar = elfs_chain(G, eta=eta).arrival()
    hm = harmonic_measure(G)
    return 0.5 * sum(abs(ar[k] - hm[k]) for k in hm)


# ---------------------------------------------------------------------------
# semi-supervised labeling


@dataclass
class LabeledGraph:
    graph: Graph
    labels: dict  # sink vertex -> 0/1

    def __post_init__(self):
        self.labels = {int(k): int(v) for k, v in self.labels.items()}
        if set(self.labels) != set(int(x) for x in self.graph.sinks):
            raise ValueError("labels must be given exactly on the sink vertices")
        if any(v not in (0, 1) for v in self.labels.values()):
            raise ValueError("labels must be binary")

    def label_vector(self):
        b = np.zeros(self.graph.n)
        for k, v in self.labels.items():
            b[k] = v
        return b


@dataclass
class LabelEstimate:
    value: float  # estimate of sum_m p_m b_m
    label: int
    se: float
    cost: float
    method: str
    partial: bool = False
    extra: dict = field(default_factory=dict)

    def to_record(self):
        rec = {k: v for k, v in self.__dict__.items() if k != "extra"}
        rec.update(self.extra)
        return rec


def ssl_label(LG: LabeledGraph, method="exact", budget=10 ** 4, seed=0) -> LabelEstimate:
    """Harmonic-measure label ``sum_m p_m b_m`` at the source, rounded at 1/2.

    ``budget`` is the number of samples for the Monte Carlo methods.  Costs:
    walk steps for ``walk-mc``; the elfs cost ``E[sum_t sqrt(ET_{Y_t})]`` per
    sample for the elfs methods.
    """
    G = LG.graph
    b = LG.label_vector()
    vq = vertex_quantities(G)
    chain = None
    elfs_cost = None
    if method in ("elfs-mc", "quantum-sim"):
        chain = elfs_chain(G)
        elfs_cost = chain.expected_sum(np.sqrt(vq.ET))
    if method == "exact":
        hm = harmonic_measure(G)
        val = float(sum(p * b[k] for k, p in hm.items()))
        return LabelEstimate(val, int(val >= 0.5), 0.0, 0.0, method)
    if method == "walk-mc":
        try:
            wb = simulate_walks(G, budget, seed, budget=DEFAULT_BUDGET)
        except StepBudgetExceeded:
            return LabelEstimate(math.nan, -1, math.nan, DEFAULT_BUDGET, method, partial=True)
        vals = b[wb.arrival]
        m, se = ElfsBatch.mean_se(vals)
        return LabelEstimate(m, int(m >= 0.5), se, float(wb.tau.mean()), method,
                             extra={"walk_steps": int(wb.steps)})
    if method == "elfs-mc":
        try:
            eb = simulate_elfs_batch(G, budget, seed, chain=chain)
        except StepBudgetExceeded:
            return LabelEstimate(math.nan, -1, math.nan, math.nan, method, partial=True)
        m, se = ElfsBatch.mean_se(b[eb.arrival])
        return LabelEstimate(m, int(m >= 0.5), se, elfs_cost, method,
                             extra={"mean_elfs_steps": float(eb.rho.mean())})
    if method == "quantum-sim":
        rng = np.random.default_rng(seed)
        if G.n <= 5:
            # sample register paths; an unabsorbed path restarts from its last source
            tables = {}

            def table(x):
                if x not in tables:
                    q = quantum_elfs_process(G.with_source(x), depth_cap=3)
                    keys = list(q.register_distribution)
                    pr = np.array([q.register_distribution[k] for k in keys])
                    tables[x] = (keys, pr / pr.sum())
                return tables[x]

            sink = G.sink_mask
            out = np.empty(budget, dtype=np.int64)
            for i in range(budget):
                x = G.source
                while not sink[x]:
                    keys, pr = table(x)
                    x = keys[rng.choice(len(keys), p=pr)][-1]
                out[i] = x
            vals = b[out]
            source = "register distribution"
        else:
            ar = chain.arrival()
            sinks = sorted(ar)
            probs = np.array([ar[k] for k in sinks])
            draws = rng.choice(len(sinks), size=budget, p=probs / probs.sum())
            vals = b[np.array(sinks)[draws]]
            source = "exact elfs chain (dimension guard)"
        m, se = ElfsBatch.mean_se(vals) if budget > 1 else (float(vals.mean()), 0.0)
        return LabelEstimate(m, int(m >= 0.5), se, elfs_cost, method, extra={"arrival_source": source})
    raise ValueError(f"unknown method {method!r}")
