"""Command-line surface.

Subcommands: generate, validate, normalize, hierarchy, cactus, sample,
join, tour, stats, optimize-params, oracle.  Everything is seeded and
deterministic: the same instance, seed, and flags produce byte-identical
output.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import generators
from .graph import parse_instance, normalize_to_special_triple, serialize_instance
from .hierarchy import build_cactus, build_hierarchy, min_cuts_via_hierarchy
from .join import (
    ReductionParams,
    build_charge_sites,
    build_join,
    classify,
    coin_rates,
    exact_eal_probabilities,
    integral_join_and_tour,
    shortest_path_metric,
    verify_join,
)
from .pipeline import SamplerParams, build_piece_samplers, sample_r0_tree
from .stats import ExperimentConfig, oracle_check, run_suite


def _read_instance(path: str, strict: bool = True):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read(), strict=strict)


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sampler_params(args) -> SamplerParams:
    return SamplerParams(
        sampler=args.sampler,
        mix_lambda=Fraction(args.mix_lambda).limit_denominator(10 ** 9),
    )


def _add_common(p: argparse.ArgumentParser, trials_default: int = 1) -> None:
    p.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--sampler", choices=("mi", "maxent", "mix"), default="mix")
    p.add_argument("--mix-lambda", type=float, default=0.4715)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def cmd_generate(args) -> int:
    rng = np.random.default_rng(args.seed)
    inst = generators.generate(
        args.family, rng, k=args.k, n=args.n, depth=args.depth,
        unit_costs=args.unit_costs,
    )
    _write(serialize_instance(inst), args.out)
    return 0


def cmd_validate(args) -> int:
    inst = _read_instance(args.instance, strict=not args.lenient)
    g = inst.graph
    print(f"valid: {g.n} vertices, {g.m} edges, lp cost {inst.lp_cost()}")
    return 0


def cmd_normalize(args) -> int:
    inst = _read_instance(args.instance, strict=False)
    out = normalize_to_special_triple(inst)
    _write(serialize_instance(out), args.out)
    return 0


def _hierarchy_json(h) -> dict:
    nodes = []
    for nd in h.nodes:
        entry = {
            "id": nd.node_id,
            "kind": ("root-cycle" if nd.is_root else nd.kind),
            "label": sorted(nd.label),
            "children": list(nd.children),
        }
        if nd.piece is not None:
            g = nd.piece.graph
            entry["piece"] = {
                "external_vertex": nd.piece.external_vertex,
                "vertices": [sorted(s) for s in g.vertex_sets],
                "edges": [
                    [eid, u, v] for eid, (u, v) in zip(g.edge_ids, g.endpoints)
                ],
                "chain": list(nd.piece.chain) if nd.piece.chain else None,
            }
        nodes.append(entry)
    return {"root": h.root_id, "nodes": nodes}


def cmd_hierarchy(args) -> int:
    inst = _read_instance(args.instance)
    h = build_hierarchy(inst)
    payload = _hierarchy_json(h)
    payload["min_cuts"] = [sorted(c.shore) for c in min_cuts_via_hierarchy(h)]
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_cactus(args) -> int:
    inst = _read_instance(args.instance)
    h = build_hierarchy(inst)
    cac = build_cactus(h)
    payload = {
        "edges": [
            [eid, u, v]
            for eid, (u, v) in zip(cac.graph.edge_ids, cac.graph.endpoints)
        ],
        "phi": {str(v): cac.phi[v] for v in sorted(cac.phi)},
        "cycles": [list(c) for c in cac.cycles],
    }
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_sample(args) -> int:
    inst = _read_instance(args.instance)
    h = build_hierarchy(inst)
    sp = _sampler_params(args)
    samplers = build_piece_samplers(h, sp)
    lines = []
    for trial in range(args.trials):
        ts = sample_r0_tree(h, sp, seed=args.seed, trial=trial, samplers=samplers)
        entry = {"trial": trial, "edges": sorted(ts.edges)}
        if args.dump_shift:
            entry["provenance"] = {
                str(nid): _json_safe(p) for nid, p in sorted(ts.provenance.items())
            }
        lines.append(json.dumps(entry))
    _write("\n".join(lines) + "\n", args.out)
    return 0


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(x) for x in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def cmd_join(args) -> int:
    inst = _read_instance(args.instance)
    h = build_hierarchy(inst)
    sp = _sampler_params(args)
    rp = ReductionParams.default(sp.effective_lambda)
    samplers = build_piece_samplers(h, sp)
    classes = classify(h)
    probs = exact_eal_probabilities(h, classes, samplers)
    rates = coin_rates(classes, rp, probs)
    sites = build_charge_sites(h, classes, rp)
    metric = shortest_path_metric(inst)
    cuts = min_cuts_via_hierarchy(h)
    cx = inst.lp_cost()
    rows = ["trial,seed,tree_cost,fractional_join_cost,integral_join_cost,tour_cost,ratio_to_cx"]
    for trial in range(args.trials):
        ts = sample_r0_tree(h, sp, seed=args.seed, trial=trial, samplers=samplers)
        rng = np.random.default_rng(
            np.random.SeedSequence(args.seed, spawn_key=(trial, 1 << 20))
        )
        js = build_join(h, classes, rp, ts.edges, rates, rng, sites)
        verify_join(js.z, ts.edges, h, cuts)
        frac_cost = sum(
            (inst.costs[e] * z for e, z in js.z.items()), Fraction(0)
        )
        res = integral_join_and_tour(
            inst, ts.edges, metric=metric, shortcut=not args.no_shortcut
        )
        ratio = float((res.tree_cost + res.join_cost) / cx)
        rows.append(
            f"{trial},{args.seed},{float(res.tree_cost):.10g},"
            f"{float(frac_cost):.10g},{float(res.join_cost):.10g},"
            f"{float(res.tour_cost):.10g},{ratio:.10g}"
        )
    _write("\n".join(rows) + "\n", args.out)
    return 0


def cmd_tour(args) -> int:
    inst = _read_instance(args.instance)
    h = build_hierarchy(inst)
    sp = _sampler_params(args)
    samplers = build_piece_samplers(h, sp)
    metric = shortest_path_metric(inst)
    best = None
    for trial in range(args.trials):
        ts = sample_r0_tree(h, sp, seed=args.seed, trial=trial, samplers=samplers)
        res = integral_join_and_tour(
            inst, ts.edges, metric=metric, shortcut=not args.no_shortcut
        )
        if best is None or res.tour_cost < best.tour_cost:
            best = res
    payload = {
        "tour": list(best.tour),
        "tour_cost": float(best.tour_cost),
        "tree_cost": float(best.tree_cost),
        "join_cost": float(best.join_cost),
        "ratio_to_cx": float((best.tree_cost + best.join_cost) / inst.lp_cost()),
        "trials": args.trials,
    }
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_stats(args) -> int:
    cfg = ExperimentConfig(
        instance=args.instance,
        family=args.family,
        k=args.k,
        n=args.n,
        depth=args.depth,
        unit_costs=args.unit_costs,
        gen_seed=args.gen_seed,
        piece=args.piece,
        sampler=args.sampler,
        mix_lambda=args.mix_lambda,
        trials=args.trials,
        seed=args.seed,
        suite=args.suite,
        calibration=args.calibration,
        delta_floor=args.delta_floor,
    )
    report = run_suite(cfg)
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write(text, args.out)
    return 0 if report.all_passed() else 1


def cmd_optimize_params(args) -> int:
    from .params import optimize

    res = optimize()
    payload = dict(res.as_floats())
    payload["binding"] = list(res.binding)
    payload["exact"] = {
        "tau": str(res.tau),
        "gamma": str(res.gamma),
        "beta": str(res.beta),
        "delta": str(res.delta),
    }
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_oracle(args) -> int:
    inst = _read_instance(args.instance)
    report = oracle_check(inst, _sampler_params(args))
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write(text, args.out)
    return 0 if report.all_passed() else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="htsp",
        description="Round half-integral subtour-elimination solutions to tours "
        "and verify the pipeline's probabilistic guarantees.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="emit a generated instance")
    p.add_argument("--family", choices=generators.FAMILIES, required=True)
    p.add_argument("--k", type=int, default=7, help="host cycle positions")
    p.add_argument("--n", type=int, default=12, help="vertex count (random family)")
    p.add_argument("--depth", type=int, default=2, help="nesting depth")
    p.add_argument("--unit-costs", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="parse and validate an instance")
    p.add_argument("instance")
    p.add_argument("--lenient", action="store_true",
                   help="skip the root-triple requirement")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("normalize", help="relabel an instance into root-triple form")
    p.add_argument("instance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("hierarchy", help="emit the cut hierarchy as JSON")
    p.add_argument("instance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("cactus", help="emit the min-cut cactus as JSON")
    p.add_argument("instance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cactus)

    p = sub.add_parser("sample", help="sample rooted trees")
    p.add_argument("instance")
    _add_common(p)
    p.add_argument("--dump-shift", action="store_true",
                   help="include the per-piece provenance ledger")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("join", help="per-trial join and tour costs as CSV")
    p.add_argument("instance")
    _add_common(p)
    p.add_argument("--no-shortcut", action="store_true")
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("tour", help="best tour over the sampled trials")
    p.add_argument("instance")
    _add_common(p, trials_default=10)
    p.add_argument("--no-shortcut", action="store_true")
    p.set_defaults(func=cmd_tour)

    p = sub.add_parser("stats", help="run a statistic suite")
    p.add_argument("--instance", default=None)
    p.add_argument("--family", choices=generators.FAMILIES, default=None)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--unit-costs", action="store_true")
    p.add_argument("--gen-seed", type=int, default=1)
    p.add_argument("--piece", choices=sorted(generators.PIECE_CATALOG), default=None)
    p.add_argument(
        "--suite",
        choices=("marginals", "correlations", "eal", "reduction", "cost",
                 "symmetry", "all"),
        default="all",
    )
    p.add_argument("--calibration", choices=("exact", "mc"), default="exact")
    p.add_argument("--delta-floor", type=float, default=None)
    _add_common(p, trials_default=100_000)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("optimize-params", help="reproduce the parameter optimization")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_optimize_params)

    p = sub.add_parser("oracle", help="exact no-sampling verification report")
    p.add_argument("instance")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
