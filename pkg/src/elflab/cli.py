"""Command-line interface.  Every command prints one JSON document that
includes the run configuration, so a run can be repeated exactly."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .edge_space import EdgeSpace, ToleranceError
from .fixtures import FIXTURES
from .graph_core import GraphValidationError, attach_source_stub, read_graph

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 2, 3


# ---------------------------------------------------------------------------
# output


def _encode(obj) -> str:
    """JSON with floats at 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag])
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(obj)


def _emit(result, args):
    text = dumps(result) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


# ---------------------------------------------------------------------------
# inputs


def resolve_graph(spec):
    """A path to an edge-list file, or a fixture name such as ``B`` / ``FIX-B``."""
    key = spec.upper().replace("FIX-", "").replace("FIX_", "")
    if key in FIXTURES and not os.path.exists(spec):
        return FIXTURES[key]()
    if not os.path.exists(spec):
        raise GraphValidationError(f"no graph file or fixture named {spec!r}")
    return read_graph(spec)


def parse_labels(spec) -> dict:
    """``"0:1,3:0"`` or a JSON file mapping sink vertex to label."""
    if os.path.exists(spec):
        with open(spec) as fh:
            return {int(k): int(v) for k, v in json.load(fh).items()}
    out = {}
    for item in spec.split(","):
        k, _, v = item.partition(":")
        if not _:
            raise ValueError(f"bad label item {item!r}; expected vertex:label")
        out[int(k)] = int(v)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args):
    from .walks import walk_quantities

    G = resolve_graph(args.graph)
    ws = walk_quantities(G)
    checks = EdgeSpace(G).checks() if G.n_arcs <= 1024 else {}
    out = ws.to_record()
    out.update(n=G.n, edges=G.n_edges, source=G.source, sinks=list(G.sinks), Rd=ws.Rd, identities=checks)
    return out


def cmd_estimate(args):
    from .resistance import binary_search_estimate, estimate_known
    from .walks import walk_quantities

    G = resolve_graph(args.graph)
    ws = walk_quantities(G)
    ET_bar = args.et_bound if args.et_bound is not None else ws.ET
    if ET_bar < ws.ET * (1 - 1e-12):
        raise ValueError(f"escape-time bound {ET_bar} is below the true value {ws.ET}")
    out = {}
    steps = 0
    p = args.p
    if p is None:
        bs = binary_search_estimate(G, ET_bar, args.seed)
        out["binary_search"] = bs.to_record()
        steps += bs.walk_steps
        p = 1.0 / bs.estimate
    rec = estimate_known(G, ET_bar, p, args.eps, args.seed + 1)
    steps += rec.walk_steps
    out.update(estimate=rec.estimate, exact=rec.exact, relative_error=abs(rec.estimate / rec.exact - 1),
               within_eps=rec.success, success_probability=rec.success_probability, T=rec.T,
               walk_steps=steps, p_guess=p, ET_bar=ET_bar)
    return out


def cmd_prepare(args):
    from .edge_space import state_to_record
    from .elfs import exact_elf_prepare, fixed_point_prepare, fixed_point_recipe
    from .walks import walk_quantities

    G = resolve_graph(args.graph)
    if args.method == "fixed-point":
        if args.pbar is None:
            res, Gh = fixed_point_recipe(G, args.eps)
            H = Gh.graph
        else:
            res, H = fixed_point_prepare(G, args.pbar, args.eps), G
        out = {"overlap": res.overlap, "L": res.schedule.L, "W": res.W, "W_formula": res.W_formula,
               "bound": res.bound, "residual": res.residual}
        if args.state:
            out["state"] = state_to_record(H, res.state)
        return out
    ws = walk_quantities(G)
    res = exact_elf_prepare(G, eta=args.eta, seed=args.seed, runs=args.runs, m_max=args.m_max)
    out = res.aa.to_record()
    out.update(eta=res.modified.eta, W_over_sqrt_ET=res.W_over_sqrt_ET, ET=ws.ET)
    if args.state:
        out["state"] = state_to_record(res.modified.graph, res.output)
    return out


def cmd_simulate(args):
    from .elfs import CouplingRule, ElfsBatch, coupling_identities, elfs_chain, simulate_elfs_batch
    from .electric import harmonic_measure

    G = resolve_graph(args.graph)
    chain = elfs_chain(G, modified=args.modified)
    out = {
        "EHT": {int(x): float(v) for x, v in zip(chain.transient, chain.EHT)},
        "arrival": chain.arrival(),
        "harmonic_measure": harmonic_measure(G),
        "expected_sum_ET": chain.expected_sum(chain.vq.ET),
    }
    if args.samples:
        rule = CouplingRule(G) if args.coupled else None
        b = simulate_elfs_batch(G, args.samples, args.seed, coupled=args.coupled, chain=chain, rule=rule)
        sinks = list(G.sinks)
        freq = {int(m): float(np.mean(b.arrival == m)) for m in sinks}
        mc = {"arrival": freq, "rho": ElfsBatch.mean_se(b.rho)}
        if args.coupled:
            mc.update(nu1=ElfsBatch.mean_se(b.nu1), tau=ElfsBatch.mean_se(b.tau),
                      sum_ET=ElfsBatch.mean_se(b.sum_ET))
            out["coupling"] = coupling_identities(G, samples=0)
        out["monte_carlo"] = mc
    return out


def cmd_expander(args):
    from .expander import expander_stats, perturbed_arrival_tv
    from .graph_core import random_regular_graph

    seeds = list(range(args.seed, args.seed + args.seeds))
    r = expander_stats(args.n, args.d, args.m, seeds)
    rec = r.to_record()
    rec["tv_estimated"] = max(perturbed_arrival_tv(random_regular_graph(args.n, args.d, args.m, s), seed=s)
                              for s in seeds) if args.n <= 256 else None
    return rec


def cmd_ssl(args):
    from .expander import LabeledGraph, ssl_label

    G = resolve_graph(args.graph)
    if args.source is not None:
        G = G.with_source(args.source)
    LG = LabeledGraph(G, parse_labels(args.labels))
    return ssl_label(LG, args.method, args.samples, args.seed).to_record()


def verify_suite() -> dict:
    """Identity checks on the built-in fixtures; each entry is ``(value, ok)``."""
    from .electric import harmonic_measure, modified_escape_identity
    from .elfs import coupling_identities, elfs_chain, fixed_point_prepare
    from .span_programs import pseudoinverse_identity, sp1, sp2, to_projector_instance
    from .transducers import effective_gap_transducer, elfs_reflection_certificate
    from .walks import walk_quantities

    out = {}

    def check(name, value, ok):
        out[name] = {"value": float(value), "ok": bool(ok)}

    for key, make in FIXTURES.items():
        G = make()
        E = EdgeSpace(G)
        ws = walk_quantities(G)
        for k, v in E.checks().items():
            check(f"{key}.{k}", v, v < 1e-9)
        cert = elfs_reflection_certificate(G)
        check(f"{key}.elfs_reflection", cert.residual, cert.residual < 1e-9)
        check(f"{key}.elfs_W", cert.extra["W_defect"], cert.extra["W_defect"] < 1e-9)
        for th in (0.0, np.pi / 4, np.pi / 2, np.pi):
            r = effective_gap_transducer(E.Pi_star, E.Pi_plus, E.phi_s, th)
            check(f"{key}.partial_rotation[{th:.4f}]", max(r.certificate.residual, r.lemma_residual),
                  max(r.certificate.residual, r.lemma_residual) < 1e-9)
        for eta in (1.0, 2.0, max(1.0, ws.ET / ws.Rd)):
            idn = modified_escape_identity(attach_source_stub(G, eta))
            d1 = abs(idn.Rd_hat - (1 + eta * ws.Rd))
            d2 = abs(idn.ET_hat - idn.decomposition)
            check(f"{key}.stub[{eta:.4g}]", max(d1, d2), d1 < 1e-10 and d2 < 1e-8)
        ch = elfs_chain(G)
        hm = harmonic_measure(G)
        dev = max(abs(ch.arrival()[m] - hm[m]) for m in hm)
        check(f"{key}.elfs_arrival", dev, dev < 1e-8)
        ci = coupling_identities(G, samples=0)
        check(f"{key}.sum_ET", ci["sum_defect"], ci["sum_defect"] < 1e-8)
        if key in ("A", "B"):
            fp = fixed_point_prepare(G, 1 / ws.Rd, 1e-4)
            check(f"{key}.fixed_point", 1 - fp.overlap, fp.overlap >= 1 - 1e-4)
    for name, P, xs in (("SP1", sp1(), [(1, 1), (1, 0)]), ("SP2", sp2(), [(1, 1, 0), (0, 1, 0)])):
        for x in xs:
            r = pseudoinverse_identity(P, x)
            inst = to_projector_instance(P, x)
            check(f"{name}.{''.join(map(str, x))}.lemma", r["gap"], r["gap"] < 1e-8)
            check(f"{name}.{''.join(map(str, x))}.W", abs(inst.W - (inst.w_minus - 1)),
                  abs(inst.W - (inst.w_minus - 1)) < 1e-8)
    return out


def cmd_verify(args):
    res = verify_suite()
    failed = [k for k, v in res.items() if not v["ok"]]
    out = {"checks": res, "failed": failed, "passed": len(res) - len(failed)}
    if failed:
        out["status"] = "tolerance"
    return out


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elflab", description="Electric flows, quantum walks and transducers.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write JSON here instead of stdout")
    common.add_argument("--json", action="store_true", help="JSON output (always on)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="accepted for reproducibility; runs are serial")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="resistance and walk times")
    a.add_argument("--graph", required=True)
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("estimate-resistance", parents=[common], help="phase-estimation estimate of R_s d_s")
    e.add_argument("--graph", required=True)
    e.add_argument("--et-bound", type=float, default=None, help="upper bound on ET_s (default: exact)")
    e.add_argument("--eps", type=float, default=0.1)
    e.add_argument("--p", type=float, default=None, help="constant-factor guess of R_s d_s (default: binary search)")
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("prepare-elf", parents=[common], help="prepare the electric flow state")
    r.add_argument("--graph", required=True)
    r.add_argument("--method", choices=["fixed-point", "exact"], default="exact")
    r.add_argument("--eps", type=float, default=1e-6)
    r.add_argument("--pbar", type=float, default=None)
    r.add_argument("--eta", type=float, default=None)
    r.add_argument("--runs", type=int, default=1000)
    r.add_argument("--m-max", type=int, default=10 ** 4)
    r.add_argument("--state", action="store_true", help="include the output amplitudes")
    r.set_defaults(func=cmd_prepare)

    s = sub.add_parser("simulate-elfs", parents=[common], help="elfs chain and traces")
    s.add_argument("--graph", required=True)
    s.add_argument("--samples", type=int, default=0)
    s.add_argument("--coupled", action="store_true")
    s.add_argument("--modified", action="store_true", help="lazy chain from the stubbed graphs")
    s.set_defaults(func=cmd_simulate)

    x = sub.add_parser("expander-report", parents=[common], help="expander bound constants")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--d", type=int, default=3)
    x.add_argument("--m", type=int, required=True)
    x.add_argument("--seeds", type=int, default=3)
    x.set_defaults(func=cmd_expander)

    l = sub.add_parser("ssl", parents=[common], help="harmonic-measure labeling")
    l.add_argument("--graph", required=True)
    l.add_argument("--labels", required=True, help="'v:b,...' or a JSON file")
    l.add_argument("--source", type=int, default=None)
    l.add_argument("--method", choices=["exact", "walk-mc", "elfs-mc", "quantum-sim"], default="exact")
    l.add_argument("--samples", type=int, default=10 ** 4)
    l.set_defaults(func=cmd_ssl)

    v = sub.add_parser("verify", parents=[common], help="identity suite on the fixtures")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        result = args.func(args)
    except ToleranceError as exc:
        _emit({"command": args.command, "config": _config(args), "error": str(exc), "status": "tolerance"}, args)
        return EXIT_TOLERANCE
    except (ValueError, GraphValidationError) as exc:
        print(f"elflab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = result.pop("status", "ok") if isinstance(result, dict) else "ok"
    _emit({"command": args.command, "config": _config(args), "status": status, "result": result}, args)
    return EXIT_TOLERANCE if status == "tolerance" else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
