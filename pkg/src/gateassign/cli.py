"""Command line entry point: generate, solve, price, check."""
from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from dataclasses import asdict

import numpy as np

from . import oracle, pricing
from .bnp import STRATEGIES, SolverConfig, solve
from .master import Duals
from .model import (
    InfeasibleInstanceError,
    InstanceError,
    generate_instance,
    instance_to_dict,
    load_instance,
    mean_interarrival_of,
    save_instance,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
EXIT_INFEASIBLE = 4
EXIT_CAP = 5

log = logging.getLogger("gateassign")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _write_json(data, path):
    text = json.dumps(data, indent=2)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _load(path):
    try:
        return load_instance(path)
    except InfeasibleInstanceError as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        sys.exit(EXIT_INFEASIBLE)
    except (OSError, InstanceError, ValueError) as exc:
        print(f"error: cannot read instance {path}: {exc}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def gantt(solution) -> list:
    """One text line per gate listing each flight's park-pushback interval."""
    lines = []
    width = len(str(len(solution.schedules) - 1))
    for s in solution.schedules:
        cells = [f"f{f}[{p}-{q}]" for f, p, q in zip(s.accepted, s.park_times, s.pushback_times)]
        body = " ".join(cells) if cells else "-"
        lines.append(f"gate {s.gate_id:>{width}} | delay {s.total_delay:>4} | {body}")
    return lines


# -- commands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    inst = generate_instance(
        args.flights, args.gates, args.mean_interarrival,
        heavy_fraction=args.heavy_fraction, seed=args.seed,
    )
    if args.out == "-":
        _write_json(instance_to_dict(inst), "-")
        info = sys.stderr
    else:
        save_instance(inst, args.out)
        info = sys.stdout
    overall = mean_interarrival_of(inst)
    print(f"instance {inst.name}: {inst.n_flights} flights, {inst.n_gates} gates", file=info)
    print(f"flight/gate ratio: {inst.n_flights / inst.n_gates:.2f}", file=info)
    print(f"mean inter-arrival: {overall:.2f} min overall, {overall * inst.n_gates:.2f} min per gate",
          file=info)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    cfg = SolverConfig(
        pricing=args.pricing,
        rel_gap=args.rel_gap,
        abs_gap=args.abs_gap,
        time_limit=args.time_limit,
        threads=args.threads,
        seed=args.seed,
    )
    sol = solve(inst, cfg)
    sol.validate()
    data = sol.to_dict()
    _write_json(data, args.out)
    lines = gantt(sol)
    if args.gantt:
        print("\n".join(lines), file=sys.stderr)
    if args.report:
        report = {
            "config": asdict(cfg),
            "solution": data,
            "log": sol.log,
            "gantt": lines,
        }
        _write_json(report, args.report)
    print(f"objective {sol.objective}  lb {sol.lb:.4f}  ub {sol.ub:.4f}  gap {sol.gap}  "
          f"nodes {sol.stats['nodes']}  {sol.stats['wall_seconds']:.2f}s  [{sol.status}]",
          file=sys.stderr)
    return EXIT_TIMEOUT if sol.status == "time_limit" else EXIT_OK


def _read_duals(inst, args):
    if args.duals:
        with open(args.duals) as fh:
            raw = json.load(fh)
        pi = raw["pi"] if isinstance(raw, dict) else raw
        mu = raw.get("mu", [0.0] * inst.n_gates) if isinstance(raw, dict) else [0.0] * inst.n_gates
        if len(pi) != inst.n_flights or len(mu) != inst.n_gates:
            raise ValueError("dual vector lengths do not match the instance")
        return Duals(np.asarray(pi, float), np.asarray(mu, float))
    rng = np.random.default_rng(args.seed)
    return Duals(rng.uniform(0.0, 60.0, inst.n_flights), np.zeros(inst.n_gates))


def cmd_price(args) -> int:
    inst = _load(args.instance)
    if not 0 <= args.gate < inst.n_gates:
        print(f"error: gate {args.gate} out of range", file=sys.stderr)
        return EXIT_USAGE
    try:
        duals = _read_duals(inst, args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: bad duals: {exc}", file=sys.stderr)
        return EXIT_USAGE
    inp = pricing.preprocess(inst, args.gate, duals)
    method = args.method
    if method == "dp":
        res = pricing.dp_recursive(inp)
    elif method == "adp":
        res = pricing.dp_tabular(inp)
    elif method == "sm":
        res = pricing.double_greedy(inp, args.seed)
    elif method in ("block", "block+"):
        res = pricing.block_decomposition(inp, improve=method == "block+")
    elif method == "rh":
        sigma = max(1, pricing.adjacency_parameter(inp))
        l = args.horizon or min(20, sigma)
        res = pricing.rolling_horizon(inp, max(l, args.window), args.window)
    else:  # oracle
        try:
            rep = oracle.brute_force_pricing(inp)
        except oracle.OracleCapExceeded as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CAP
        res = pricing.PricingResult(inp.gate_id, rep.optimizer, (), rep.optimum, "oracle")
    out = {
        "gate": res.gate_id,
        "strategy": res.strategy,
        "accepted": list(res.accepted),
        "park_times": list(res.park_times),
        "objective": res.objective,
        "reduced_cost": pricing.reduced_cost_of_result(res, inp),
        "candidates": len(inp),
        "adjacency": pricing.adjacency_parameter(inp),
    }
    _write_json(out, args.out)
    return EXIT_OK


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return ok


def _check_pricing(inst, trials, seed) -> int:
    worst = max(len(f) for f in inst.compatible_flights)
    if worst > oracle.PRICING_CAP:
        print(f"error: a gate has {worst} compatible flights; the pricing oracle stops at "
              f"{oracle.PRICING_CAP}", file=sys.stderr)
        return EXIT_CAP
    rng = np.random.default_rng(seed)
    exact = tab = sub = block = greedy = True
    greedy_runs = 200
    for _ in range(trials):
        duals = Duals(rng.uniform(0.0, 60.0, inst.n_flights), np.zeros(inst.n_gates))
        for g in inst.gates:
            inp = pricing.preprocess(inst, g.id, duals)
            opt = oracle.brute_force_pricing(inp).optimum
            rec = pricing.dp_recursive(inp).objective
            exact &= abs(rec - opt) <= 1e-9
            tab &= abs(pricing.dp_tabular(inp).objective - rec) <= 1e-9
            if len(inp):
                block &= pricing.block_decomposition(inp).objective >= 0.5 * opt - 1e-9
            ids = list(inp.ids)
            for _ in range(20):
                if not ids:
                    break
                u = ids[rng.integers(len(ids))]
                rest = [i for i in ids if i != u]
                big = [i for i in rest if rng.random() < 0.6]
                small = [i for i in big if rng.random() < 0.5]
                lhs = pricing.eval_f(inp, small + [u]) - pricing.eval_f(inp, small)
                rhs = pricing.eval_f(inp, big + [u]) - pricing.eval_f(inp, big)
                sub &= lhs >= rhs - 1e-9
            if opt > 0 and pricing.eval_f(inp, ids) >= 0:
                mean = np.mean([pricing.double_greedy(inp, int(s)).objective
                                for s in rng.integers(0, 2**31, greedy_runs)])
                greedy &= mean >= 0.45 * opt
    results = [
        _report("dp_recursive equals brute-force pricing", exact),
        _report("dp_tabular equals dp_recursive", tab),
        _report("diminishing returns of f", sub),
        _report("block decomposition reaches half the optimum", block),
        _report(f"double greedy mean over {greedy_runs} seeds >= 0.45 OPT", greedy),
    ]
    return EXIT_OK if all(results) else EXIT_FAIL


def _check_full(inst, seed) -> int:
    count = oracle.assignment_count(inst)
    if count > oracle.ASSIGNMENT_CAP:
        print(f"error: {count} assignments exceed the oracle cap of {oracle.ASSIGNMENT_CAP}",
              file=sys.stderr)
        return EXIT_CAP
    ref = oracle.brute_force_assignment(inst)
    sol = solve(inst, SolverConfig(rel_gap=1e-9, abs_gap=1e-6, seed=seed))
    st = sol.stats
    results = [
        _report("solver objective equals brute-force optimum",
                abs(sol.objective - ref.optimum) <= 1e-6, f"{sol.objective} vs {ref.optimum}"),
        _report("root bounds sandwich the optimum",
                st["root_lb"] <= ref.optimum + 1e-6 <= st["root_ub"] + 2e-6,
                f"{st['root_lb']:.4f} <= {ref.optimum} <= {st['root_ub']}"),
    ]
    return EXIT_OK if all(results) else EXIT_FAIL


def cmd_check(args) -> int:
    inst = _load(args.instance)
    if args.mode == "pricing":
        return _check_pricing(inst, args.trials, args.seed)
    return _check_full(inst, args.seed)


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gateassign", description="Gate assignment by branch-and-price.")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--flights", type=_positive_int, required=True)
    g.add_argument("--gates", type=_positive_int, required=True)
    g.add_argument("--mean-interarrival", type=_positive_float, default=10.0,
                   help="mean minutes between consecutive arrivals")
    g.add_argument("--heavy-fraction", type=float, default=0.2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--pricing", choices=STRATEGIES, default="sm+dp")
    s.add_argument("--rel-gap", type=_positive_float, default=0.02)
    s.add_argument("--abs-gap", type=_positive_float, default=0.5)
    s.add_argument("--time-limit", type=_positive_float, default=None, help="seconds")
    s.add_argument("--threads", type=_positive_int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.add_argument("--report", default=None, help="also write a run report JSON here")
    s.add_argument("--gantt", action="store_true", help="print a text Gantt chart to stderr")
    s.set_defaults(func=cmd_solve)

    pr = sub.add_parser("price", help="solve one gate's pricing problem")
    pr.add_argument("--instance", required=True)
    pr.add_argument("--gate", type=int, default=0)
    pr.add_argument("--duals", default=None, help="JSON list of pi, or {pi, mu}")
    pr.add_argument("--method", choices=["dp", "adp", "sm", "block", "block+", "rh", "oracle"],
                    default="dp")
    pr.add_argument("--horizon", type=_positive_int, default=None)
    pr.add_argument("--window", type=_positive_int, default=1)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", default="-")
    pr.set_defaults(func=cmd_price)

    c = sub.add_parser("check", help="compare the fast methods against brute force")
    c.add_argument("--instance", required=True)
    c.add_argument("--mode", choices=["pricing", "full"], default="pricing")
    c.add_argument("--trials", type=_positive_int, default=5)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
