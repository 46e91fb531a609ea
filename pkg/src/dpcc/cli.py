"""Command-line interface: ``dpcc <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 malformed input file, 4 invariant
violation found by an audit.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .dp import PrivacyError, PrivacyLedger, PrivacyParams, compose_advanced, compose_basic
from .graph import (
    COMPLETE,
    EXACT_CUT_LIMIT,
    GENERAL,
    GraphError,
    SignedGraph,
    cut_distance_exact,
    cut_distance_lower_bound,
    generate_planted,
    parse_clustering,
    parse_edge_list,
    serialize_clustering,
    serialize_edge_list,
    split_signed,
)
from .oracle import BRUTE_FORCE_LIMIT, brute_force_opt, utility_gap
from .pivot import (
    TAG_BSIZE,
    TAG_CALM,
    TAG_DEGREE,
    TAG_HESITANT,
    TAG_NOISY_MAX,
    PivotDiagnostics,
    privacy_report,
    run_private_pivot,
)
from .release import STRATEGIES, ReleaseConfig, cluster_general
from .sweep import GridError, parse_grid, run_sweep

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_AUDIT = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read(path):
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}", EXIT_INPUT) from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}", EXIT_USAGE) from None


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_graph(path):
    try:
        return parse_edge_list(_read(path))
    except GraphError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _load_clustering(path, n):
    try:
        return parse_clustering(_read(path), n)
    except GraphError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _load_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno}: {exc.msg}", EXIT_INPUT) from None


def cmd_generate(args):
    try:
        sizes = [int(s) for s in args.clusters.split(",")]
        g, truth = generate_planted(args.n, sizes, args.flip, args.seed)
    except (ValueError, GraphError) as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    if args.mode == GENERAL:
        g = SignedGraph.from_signed_weights(g.signed)
    _write(args.out, serialize_edge_list(g))
    if args.truth:
        _write(args.truth, serialize_clustering(truth))


def cmd_run(args):
    g = _load_graph(args.graph)
    if args.alg == "private-pivot":
        if g.mode != COMPLETE:
            raise CliError(f"{args.graph}: private-pivot needs a complete-mode graph",
                           EXIT_INPUT)
        try:
            clustering, diag = run_private_pivot(g, args.eps, args.delta, args.seed,
                                                 noise=not args.no_noise)
        except PrivacyError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
        _write(args.out, serialize_clustering(clustering))
        if args.diagnostics:
            _write(args.diagnostics, _dump(diag.to_dict()))
        if args.report:
            if args.no_noise:
                raise CliError("no privacy report for a --no-noise run", EXIT_USAGE)
            _write(args.report, _dump(privacy_report(diag).to_dict()))
        return
    if g.mode != GENERAL:
        raise CliError(f"{args.graph}: --alg general needs a general-mode graph", EXIT_INPUT)
    try:
        cfg = ReleaseConfig(PrivacyParams(args.eps), seed=args.seed)
    except PrivacyError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    clustering, rec = cluster_general(g, cfg, args.strategy)
    rec.wall_ms = None
    _write(args.out, serialize_clustering(clustering))
    if args.diagnostics:
        _write(args.diagnostics, _dump(rec.to_dict()))
    if args.report:
        ledger = PrivacyLedger.from_list(rec.ledger)
        basic = compose_basic(ledger)
        _write(args.report, _dump({"epsilon_total": basic.epsilon, "delta_total": basic.delta,
                                   "charges": rec.ledger}))


def cmd_evaluate(args):
    g = _load_graph(args.graph)
    alg = _load_clustering(args.clustering, g.n)
    if args.truth:
        reference = _load_clustering(args.truth, g.n)
        ref_name = "truth"
    else:
        if g.n > BRUTE_FORCE_LIMIT:
            raise CliError(f"no --truth given and n={g.n} is too large for the oracle",
                           EXIT_USAGE)
        reference = brute_force_opt(g)
        ref_name = "oracle"
    gap = utility_gap(alg, g, reference, c_l=args.c_l, epsilon=args.eps, delta=args.delta)
    row = {"reference": ref_name, **gap.to_dict()}
    if args.format == "csv":
        keys = list(row)
        text = ",".join(keys) + "\n" + ",".join("" if row[k] is None else str(row[k])
                                                for k in keys) + "\n"
        _write(args.out, text)
    else:
        _write(args.out, _dump(row))


def cmd_audit_cut(args):
    g, h = _load_graph(args.graph_a), _load_graph(args.graph_b)
    if g.n != h.n:
        raise CliError(f"graphs have different node counts ({g.n} vs {h.n})", EXIT_INPUT)
    exact = args.method == "exact" or (args.method == "auto" and g.n <= args.limit)
    if exact and g.n > args.limit:
        raise CliError(f"exact cut distance limited to n <= {args.limit}", EXIT_USAGE)

    def measure(a, b):
        if exact:
            return cut_distance_exact(a, b, limit=args.limit)
        return cut_distance_lower_bound(a, b, restarts=args.restarts, rng_seed=args.seed)

    gp, gn = split_signed(g)
    hp, hn = split_signed(h)
    report = {
        "method": "exact" if exact else "lower-bound",
        "n": g.n,
        "cut_distance": measure(g, h),
        "cut_distance_positive": measure(gp, hp),
        "cut_distance_negative": measure(gn, hn),
    }
    report["beta"] = max(report["cut_distance_positive"], report["cut_distance_negative"])
    _write(args.out, _dump(report))


def _ledger_count_ok(diag):
    expected = (1 + len(diag.pivots)
                + sum(p.b_tilde is not None for p in diag.pivots)
                + diag.judge_calls)
    return expected == len(diag.ledger)


def audit_diagnostics(diag):
    """Replay a run's diagnostics; returns ``(report, hard_failure)``."""
    violations = diag.budget_violations()
    tags = {}
    for c in diag.ledger:
        tags[c.tag] = tags.get(c.tag, 0) + 1
    report = {
        "pivots": len(diag.pivots),
        "c_l": diag.params.c_l,
        "per_pivot_budget": 2 * diag.params.c_l,
        "per_node_budget": diag.node_budget(),
        "max_part_one_hesitant": max((p.hesitant_part_one for p in diag.pivots), default=0),
        "max_node_hesitant": int(diag.node_hesitant_total.max(initial=0)),
        "violations": violations,
        "r_trace_monotone": diag.r_trace_monotone(),
        "ledger_count_ok": _ledger_count_ok(diag),
        "ledger_tags": {t: tags.get(t, 0) for t in
                        (TAG_NOISY_MAX, TAG_DEGREE, TAG_BSIZE, TAG_HESITANT, TAG_CALM)},
    }
    hard = bool(violations["pivot_hard"]) or not report["r_trace_monotone"] \
        or not report["ledger_count_ok"]
    report["ok"] = not hard
    report["flagged"] = bool(violations["pivot"] or violations["node"])
    return report, hard


def cmd_audit_hesitant(args):
    data = _load_json(args.diagnostics)
    try:
        diag = PivotDiagnostics.from_dict(data)
    except (GraphError, PrivacyError) as exc:
        raise CliError(f"{args.diagnostics}: {exc}", EXIT_INPUT) from None
    report, hard = audit_diagnostics(diag)
    _write(args.out, _dump(report))
    if hard:
        raise CliError(f"{args.diagnostics}: invariant violation", EXIT_AUDIT)


def cmd_sweep(args):
    try:
        grid = parse_grid(_read(args.grid))
    except GridError as exc:
        raise CliError(f"{args.grid}: {exc}", EXIT_INPUT) from None
    if args.base_seed is not None:
        grid = type(grid)(grid.cells, grid.trials, args.base_seed)
    try:
        written = run_sweep(grid, args.out, jobs=args.jobs, timing=args.timing)
    except GridError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    print(f"{written} rows written to {args.out}", file=sys.stderr)


def cmd_account(args):
    if not 0 < args.delta_tilde < 1:
        raise CliError("--delta-tilde must lie in (0, 1)", EXIT_USAGE)
    data = _load_json(args.ledger)
    items = data.get("charges", data.get("ledger")) if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise CliError(f"{args.ledger}: expected a list of charges", EXIT_INPUT)
    try:
        ledger = PrivacyLedger.from_list(items)
        basic = compose_basic(ledger)
        adv = compose_advanced(ledger, args.delta_tilde)
    except PrivacyError as exc:
        raise CliError(f"{args.ledger}: {exc}", EXIT_INPUT) from None
    _write(args.out, _dump({
        "epsilon_basic": basic.epsilon,
        "delta_basic": basic.delta,
        "epsilon_advanced": adv.epsilon,
        "delta_advanced": adv.delta,
        "advanced_terms": list(adv.terms),
        "charges": ledger.to_list(),
    }))


def build_parser():
    parser = argparse.ArgumentParser(prog="dpcc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="planted-partition graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--clusters", required=True, help="comma-separated cluster sizes")
    p.add_argument("--flip", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=(COMPLETE, GENERAL), default=COMPLETE)
    p.add_argument("--out", default="-", help="graph file (default stdout)")
    p.add_argument("--truth", help="write the planted clustering here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="cluster a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--alg", choices=("private-pivot", "general"), required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="local-search")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true",
                   help="debug mode without noise; output is NOT private")
    p.add_argument("--out", default="-", help="clustering file (default stdout)")
    p.add_argument("--diagnostics", help="diagnostics JSON path")
    p.add_argument("--report", help="privacy report JSON path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="utility gap of a clustering")
    p.add_argument("--graph", required=True)
    p.add_argument("--clustering", required=True)
    p.add_argument("--truth", help="reference clustering; brute-force oracle if omitted")
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--c-l", dest="c_l", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit-cut", help="cut distance between two graph files")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--method", choices=("auto", "exact", "lower-bound"), default="auto")
    p.add_argument("--limit", type=int, default=EXACT_CUT_LIMIT)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_audit_cut)

    p = sub.add_parser("audit-hesitant", help="check diagnostics against hesitant budgets")
    p.add_argument("diagnostics")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_audit_hesitant)

    p = sub.add_parser("sweep", help="run an experiment grid to CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("account", help="compose a ledger JSON")
    p.add_argument("ledger")
    p.add_argument("--delta-tilde", type=float, default=1e-6)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_account)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"dpcc {args.command}: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
