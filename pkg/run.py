import argparse
import json
import sys
from itertools import product
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style

import analytic
from collider import PathCertificate, connect_path
from constants import ENUM_CAP, MIX_BUDGET, MIX_HORIZON, MODELS, NODE_BUDGET
from errors import BudgetExceeded, InvalidParameter, LabError
from geometry import EXPANSION_STRATEGIES, expand_via_pure, pure_vertices, shattering_scan
from graph_core import gen_gnm, gen_gnm_star, gen_gnp, gen_planted, load_graph, save_graph
from harness import SweepSpec, run_sweep, selftest
from iset_core import (VertexSet, count_layer, enumerate_layer, greedy_mis, max_is_exact,
                       require_independent, sample_greedy_subset)
from logger import log_failure, logger, set_verbosity
from metropolis import mixing_time_exact, mp_run, stationary_exact
from reporter import Reporter
from summarizer import Summarizer
from utils import parse_float_list, parse_int_list


def print_banner():
    banner = """
    ╔══════════════════════════════════════════════════════════════╗
    ║   isetlab - independent sets in sparse random graphs         ║
    ║   [+] generators   [+] layers   [+] geometry   [+] dynamics  ║
    ╚══════════════════════════════════════════════════════════════╝
    """
    print(banner, file=sys.stderr)


def _read_set(text: Optional[str], file: Optional[str], n: int) -> Optional[VertexSet]:
    if file:
        try:
            with open(file) as f:
                payload = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidParameter(f"{file}:{e.lineno}: {e.msg}")
        if not isinstance(payload, list):
            raise InvalidParameter(f"{file}: expected a JSON list of vertex indices")
        return VertexSet.from_indices(payload, n)
    if text is not None:
        return VertexSet.from_indices(parse_int_list(text), n)
    return None


def _write_or_print(reporter: Reporter, payload: dict, out: Optional[str]) -> None:
    if out:
        reporter.write_json(out, payload)
    else:
        print(json.dumps(payload, sort_keys=True))


def cmd_gen(args, reporter: Reporter) -> int:
    if args.model == "gnp":
        if args.p is None:
            log_failure("--prob is required for the gnp model")
            return 1
        graph = gen_gnp(args.n, args.p, args.seed)
    elif args.m is None:
        log_failure(f"--edges is required for the {args.model} model")
        return 1
    elif args.model == "gnm":
        graph = gen_gnm(args.n, args.m, args.seed)
    elif args.model == "gnm_star":
        graph = gen_gnm_star(args.n, args.m, args.seed)
    else:
        if args.k is None:
            log_failure("--size is required for the planted model")
            return 1
        graph, sigma = gen_planted(args.n, args.m, args.k, args.seed)
        sigma_path = Path(args.output).with_suffix(".sigma.json")
        reporter.write_json(sigma_path, sigma.to_list())
    save_graph(graph, args.output)
    logger.info(f"{Fore.CYAN}Generated {args.model} {graph!r} -> {args.output}{Style.RESET_ALL}")
    return 0


def cmd_enumerate(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    if args.count_only:
        rows = [reporter.count_row(args.k, count_layer(graph, args.k))]
    else:
        layer = enumerate_layer(graph, args.k, args.cap)
        if layer.truncated:
            logger.warning(f"{Fore.YELLOW}Layer truncated at {args.cap} members{Style.RESET_ALL}")
        rows = list(reporter.layer_rows(layer))
    if args.output:
        reporter.write_jsonl(args.output, rows)
    else:
        reporter.emit_jsonl(rows)
    return 0


def cmd_greedy(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    found = greedy_mis(graph, args.seed)
    _write_or_print(reporter, {"seed": args.seed, "size": found.size, "set": found.to_list()}, args.output)
    return 0


def cmd_exact(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    try:
        best = max_is_exact(graph, args.budget)
        payload = {"alpha": best.size, "set": best.to_list(), "optimal": True}
    except BudgetExceeded as e:
        payload = {"alpha_lower_bound": e.partial.size, "set": e.partial.to_list(), "optimal": False}
    _write_or_print(reporter, payload, args.output)
    return 0


def cmd_metropolis(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    if args.exact:
        table = stationary_exact(graph, args.lam, args.budget)
        payload = table.to_dict()
        if not table.truncated:
            report = mixing_time_exact(graph, args.lam, args.budget, args.horizon, args.lazy)
            payload["mixing_time"] = report.T
            payload["converged"] = report.converged
        _write_or_print(reporter, payload, args.output)
        return 0
    start = _read_set(args.start, None, graph.n) or VertexSet.empty(graph.n)
    trace = mp_run(graph, start, args.lam, args.steps, args.stride, args.seed,
                   parse_int_list(args.targets))
    logger.info(f"{Fore.CYAN}Chain summary: {trace.summary()}{Style.RESET_ALL}")
    if args.output:
        reporter.write_jsonl(args.output, trace.records())
    else:
        reporter.emit_jsonl(trace.records())
    return 0


def cmd_cluster(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    layer = enumerate_layer(graph, args.k, args.cap)
    reports = shattering_scan(layer, parse_int_list(args.gammas))
    rows = [r.to_dict() for r in reports]
    if args.output:
        reporter.write_jsonl(args.output, rows)
    else:
        reporter.emit_jsonl(rows)
    return 0


def cmd_path(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    sigma = _read_set(args.sigma, None, graph.n)
    tau = _read_set(args.tau, None, graph.n)
    if sigma is None or tau is None:
        if args.k is None:
            log_failure("give --sigma and --tau, or --size to sample a pair")
            return 1
        sigma = sample_greedy_subset(graph, args.k, args.seed)
        tau = sample_greedy_subset(graph, args.k, args.seed + 1)
        if sigma is None or tau is None:
            log_failure(f"greedy sets on this graph are smaller than k={args.k}")
            return 1
    result = connect_path(graph, sigma, tau, args.max_rounds)
    if isinstance(result, PathCertificate):
        logger.info(f"{Fore.GREEN}Connected in {result.rounds} rounds{Style.RESET_ALL}")
    else:
        logger.warning(f"{Fore.YELLOW}No path: {result.reason} after {result.rounds} rounds{Style.RESET_ALL}")
    _write_or_print(reporter, result.to_dict(), args.output)
    return 0


def cmd_expand(args, reporter: Reporter) -> int:
    graph = load_graph(args.graph)
    sigma = _read_set(args.sigma, args.sigma_file, graph.n)
    if sigma is None:
        log_failure("give --sigma or --sigma-file")
        return 1
    require_independent(graph, sigma, "sigma")
    grown = expand_via_pure(graph, sigma, args.strategy, args.seed)
    payload = {
        "k": sigma.size,
        "pure_vertices": pure_vertices(graph, sigma).size,
        "expanded_size": grown.size,
        "gamma_achieved": grown.size / sigma.size - 1 if sigma.size else 0.0,
        "set": grown.to_list(),
    }
    _write_or_print(reporter, payload, args.output)
    return 0


ANALYTIC_FORMULAS = {
    "star": (("n", "m", "k"), analytic.expected_count_star),
    "gnm": (("n", "m", "k"), analytic.expected_count_gnm),
    "second_moment": (("n", "m", "k"), lambda n, m, k: analytic.second_moment_terms(n, m, k).ratio),
    "expandable": (("n", "m", "k", "gamma", "delta"), analytic.expandable_expected),
    "cluster": (("n", "m", "k", "x", "lam"), analytic.cluster_expected),
}


def cmd_analytic(args, reporter: Reporter) -> int:
    grids = {
        "n": parse_int_list(args.n), "m": parse_int_list(args.m), "k": parse_int_list(args.k),
        "gamma": parse_float_list(args.gamma), "delta": parse_float_list(args.delta),
        "x": parse_float_list(args.x), "lam": parse_float_list(args.lam),
    }
    if args.formula == "profile":
        grid = parse_float_list(args.grid)
        rows = []
        for n, m in product(grids["n"], grids["m"]):
            for s, value in analytic.f_d_profile(n, m, grid):
                rows.append([n, m, s, value])
        reporter.write_csv(["n", "m", "s", "value"], rows)
        return 0
    if args.formula == "k_epsilon":
        eps = parse_float_list(args.eps)
        rows = [[n, m, e, analytic.k_epsilon(n, m, e)] for n, m, e in product(grids["n"], grids["m"], eps)]
        reporter.write_csv(["n", "m", "eps", "k"], rows)
        return 0
    names, formula = ANALYTIC_FORMULAS[args.formula]
    missing = [name for name in names if not grids[name]]
    if missing:
        log_failure(f"formula {args.formula} needs values for: {', '.join(missing)}")
        return 1
    rows = []
    for combo in product(*(grids[name] for name in names)):
        result = formula(*combo)
        flags = ""
        if isinstance(result, analytic.Estimate):
            flags = ";".join(f"{k}={v}" for k, v in sorted(result.meta.items()))
            result = result.value
        rows.append(list(combo) + [result.sign, result.log_mag, flags])
    reporter.write_csv(list(names) + ["sign", "log_mag", "flags"], rows)
    return 0


def cmd_sweep(args, reporter: Reporter) -> int:
    spec = SweepSpec.from_file(args.spec)
    if args.output:
        spec.output = args.output
    records = run_sweep(spec, args.workers)
    if not spec.output:
        reporter.emit_jsonl(r.to_dict() for r in records)
    if args.summarize:
        by = parse_list(args.by)
        rows = Summarizer(args.summarize).summarize([r.to_dict() for r in records], by)
        trend = Summarizer.is_nondecreasing([row["median"] for row in rows])
        reporter.write_summary(Path(args.spec).stem, by, args.summarize, rows, trend)
    return 0


def cmd_selftest(args, reporter: Reporter) -> int:
    results = selftest()
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        log_failure(f"{len(failed)} oracle(s) failed: {', '.join(failed)}")
        return 1
    logger.info(f"{Fore.GREEN}All {len(results)} oracles passed{Style.RESET_ALL}")
    return 0


def parse_list(text: Optional[str]) -> List[str]:
    return [part.strip() for part in (text or "").split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isetlab",
        description="isetlab - independent sets, solution-space geometry and Metropolis dynamics on random graphs",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = add("gen", "Generate a random graph")
    p.add_argument("--model", choices=MODELS, default="gnm", help="Random graph model")
    p.add_argument("-n", "--vertices", dest="n", type=int, required=True, help="Number of vertices")
    p.add_argument("-m", "--edges", dest="m", type=int, help="Number of edges (gnm, gnm_star, planted)")
    p.add_argument("-p", "--prob", dest="p", type=float, help="Edge probability (gnp)")
    p.add_argument("-k", "--size", dest="k", type=int, help="Planted set size (planted)")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--output", "-o", required=True, help="Graph file (.json or text edge list)")
    p.set_defaults(handler=cmd_gen)

    p = add("enumerate", "Enumerate or count the layer S_k")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("-k", "--size", dest="k", type=int, required=True, help="Set size")
    p.add_argument("--cap", type=int, default=ENUM_CAP, help="Maximum members to store")
    p.add_argument("--count-only", action="store_true", help="Only count the layer")
    p.add_argument("--output", "-o", help="JSONL output (stdout when omitted)")
    p.set_defaults(handler=cmd_enumerate)

    p = add("greedy", "Random-order greedy maximal independent set")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("--seed", type=int, default=0, help="Order seed")
    p.add_argument("--output", "-o", help="JSON output")
    p.set_defaults(handler=cmd_greedy)

    p = add("exact", "Maximum independent set by branch-and-bound")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("--budget", type=int, default=NODE_BUDGET, help="Search node budget")
    p.add_argument("--output", "-o", help="JSON output")
    p.set_defaults(handler=cmd_exact)

    p = add("metropolis", "Run the Metropolis chain or compute exact stationary quantities")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Fugacity (>= 1)")
    p.add_argument("--steps", type=int, default=10000, help="Chain steps")
    p.add_argument("--stride", type=int, default=1, help="Record every stride steps")
    p.add_argument("--seed", type=int, default=0, help="Chain seed")
    p.add_argument("--start", help="Start state as comma-separated vertices (empty set by default)")
    p.add_argument("--targets", default="", help="Sizes k1,k2,... whose hitting times are tracked")
    p.add_argument("--exact", action="store_true", help="Exact stationary table and mixing time instead of a run")
    p.add_argument("--budget", type=int, default=MIX_BUDGET, help="State budget for exact computations")
    p.add_argument("--horizon", type=int, default=MIX_HORIZON, help="Step horizon for the mixing time")
    p.add_argument("--lazy", action="store_true", help="Use the lazy kernel (I+K)/2 for the mixing time")
    p.add_argument("--output", "-o", help="Output file")
    p.set_defaults(handler=cmd_metropolis)

    p = add("cluster", "Gamma-connectivity partitions of a layer")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("-k", "--size", dest="k", type=int, required=True, help="Set size")
    p.add_argument("--gammas", default="2", help="Comma-separated adjacency radii")
    p.add_argument("--cap", type=int, default=ENUM_CAP, help="Maximum layer members")
    p.add_argument("--output", "-o", help="JSONL output")
    p.set_defaults(handler=cmd_cluster)

    p = add("path", "Connect two independent k-sets by Collider steps")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("--sigma", help="First set, comma-separated")
    p.add_argument("--tau", help="Second set, comma-separated")
    p.add_argument("-k", "--size", dest="k", type=int, help="Sample a greedy pair of this size instead")
    p.add_argument("--seed", type=int, default=0, help="Sampling seed")
    p.add_argument("--max-rounds", type=int, help="Round limit (default k)")
    p.add_argument("--output", "-o", help="JSON output")
    p.set_defaults(handler=cmd_path)

    p = add("expand", "Expand a set by an independent set of its pure subgraph")
    p.add_argument("--graph", "-g", required=True, help="Graph file")
    p.add_argument("--sigma", help="Set, comma-separated")
    p.add_argument("--sigma-file", help="JSON list of vertices (as written by gen --model planted)")
    p.add_argument("--strategy", choices=EXPANSION_STRATEGIES, default="min_degree", help="Expansion strategy")
    p.add_argument("--seed", type=int, default=0, help="Greedy order seed")
    p.add_argument("--output", "-o", help="JSON output")
    p.set_defaults(handler=cmd_expand)

    p = add("analytic", "Evaluate moment formulas over a parameter grid (CSV on stdout)")
    p.add_argument("--formula", required=True,
                   choices=sorted(ANALYTIC_FORMULAS) + ["profile", "k_epsilon"], help="Formula")
    p.add_argument("-n", default="", help="Comma-separated n values")
    p.add_argument("-m", default="", help="Comma-separated m values")
    p.add_argument("-k", default="", help="Comma-separated k values")
    p.add_argument("--gamma", default="", help="Comma-separated gamma values")
    p.add_argument("--delta", default="", help="Comma-separated delta values")
    p.add_argument("--x", default="", help="Comma-separated overlap fractions")
    p.add_argument("--lam", default="", help="Comma-separated lambda values")
    p.add_argument("--eps", default="", help="Comma-separated epsilon values (k_epsilon)")
    p.add_argument("--grid", default="", help="Comma-separated s values (profile)")
    p.set_defaults(handler=cmd_analytic)

    p = add("sweep", "Run a parameter sweep from a JSON spec")
    p.add_argument("--spec", required=True, help="Sweep spec file")
    p.add_argument("--workers", type=int, default=1, help="Worker processes")
    p.add_argument("--output", "-o", help="Override the spec's output path")
    p.add_argument("--summarize", help="Metric to summarize into results/<spec>_summary.md")
    p.add_argument("--by", default="", help="Comma-separated parameters to group the summary on")
    p.set_defaults(handler=cmd_sweep)

    p = add("selftest", "Run the embedded oracle suite")
    p.set_defaults(handler=cmd_selftest)
    return parser


def cli_dispatch(argv: List[str]) -> int:
    """
    Parse and execute one command.

    Returns:
        int: 0 on success, 1 on operational failure, 2 on usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    set_verbosity(args.verbose, args.quiet)
    try:
        return args.handler(args, Reporter())
    except (LabError, FileNotFoundError) as e:
        log_failure(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        log_failure(f"I/O error: {e}")
        return 1


def main():
    if "--quiet" not in sys.argv and "-q" not in sys.argv:
        print_banner()
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
