"""Command-line front end: build trees, run solvers, emit reports.

All numerics live in the library; this module parses flags, orchestrates
one pipeline per subcommand, and serializes the result.  Reports are
deterministic: identical semantic config and seed produce byte-identical
JSON/CSV output (figures are rendered separately and are excluded from
that contract).  Exit codes: 0 success, 1 solver failure (with a partial
report), 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .tree_core import (
    BoundarySet,
    ParameterError,
    Ray,
    StructureError,
    TreeSpec,
    address_to_edge,
    build,
    counterexample,
    level_counts,
    path_children,
    spec_from_json,
    spec_to_json,
)
from .calculus import (
    Charge,
    SolverError,
    ValidationError,
    copotential,
    forward_defect,
    p_laplacian,
    potential,
)
from .capacity import capacity_optimize, capacity_recursive
from .wiener import _respec, wiener_series
from .stochastic import harmonic_measure_exact, simulate_escape
from .dirichlet import BoundaryRule, mean_value_residual, p_harmonic_extension, poisson
from .sobolev_carleson import capacity_via_carleson, carleson_norm, gram_solve

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2

_CONFIG_SKIP = {"func", "output", "figures", "threads"}


# ------------------------------------------------------------------ parsing

def parse_tree_spec(text: str, depth: int | None) -> TreeSpec:
    """Compact form kind:args, or a path to a JSON spec file."""
    text = text.strip()
    head, _, rest = text.partition(":")
    if head == "homogeneous":
        return TreeSpec("homogeneous", degrees=(int(rest),), depth=depth)
    if head == "spherical":
        degrees = tuple(int(x) for x in rest.split(","))
        return TreeSpec("spherical", degrees=degrees, depth=depth)
    if head == "path":
        if depth is not None:
            raise ParameterError("path:L fixes its own depth; drop --depth")
        return TreeSpec("explicit", children=path_children(int(rest)))
    if head == "counterexample":
        return TreeSpec("counterexample", spine_depth=int(rest), depth=depth)
    if os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            spec = spec_from_json(fh.read())
        if depth is not None:
            raise ParameterError("spec files fix their own depth; drop --depth")
        return spec
    raise ParameterError(f"unrecognized tree spec {text!r}")


def parse_boundary(tree, text: str) -> BoundarySet:
    if text.strip() in ("full", ""):
        return BoundarySet.full(tree)
    addresses = [t.strip() for t in text.split(",")]
    return BoundarySet.from_tent_addresses(tree, addresses)


def parse_ray(text: str) -> Ray:
    rule, _, dotted = text.strip().partition(":")
    if rule not in ("leftmost", "rightmost", "spine"):
        raise ParameterError(f"unknown ray rule {rule!r}")
    prefix = tuple(int(x) for x in dotted.split(".")) if dotted else ()
    return Ray(rule, prefix)


def parse_rule(text: str, default: float, value_at_o: float) -> BoundaryRule:
    head, _, rest = text.strip().partition(":")
    if head == "constant":
        return BoundaryRule("constant", value=float(rest or 1.0),
                            value_at_o=value_at_o)
    if head == "tent":
        if ":" in rest:
            address, _, value = rest.rpartition(":")
            inside = float(value)
        else:
            address, inside = rest, 1.0
        return BoundaryRule("tent-indicator", value=inside, address=address,
                            default=default, value_at_o=value_at_o)
    if head == "coordinate":
        return BoundaryRule("coordinate", value_at_o=value_at_o)
    raise ParameterError(f"unrecognized boundary rule {text!r}")


def parse_depths(text: str) -> list[int]:
    depths = [int(x) for x in text.split(",")]
    if len(depths) < 2:
        raise ParameterError("sweeps need at least two depths")
    if any(b <= a for a, b in zip(depths, depths[1:])):
        raise ParameterError("sweep depths must increase")
    return depths


# ---------------------------------------------------------------- rendering

def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_json(config: dict, result: dict) -> str:
    doc = {"version": __version__, "config": _jsonable(config),
           "result": _jsonable(result)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def render_csv(config: dict, header: list[str], rows: list[list],
               trailing: list[str]) -> str:
    compact = json.dumps(_jsonable(config), sort_keys=True,
                         separators=(",", ":"))
    lines = [f"# version: {__version__}", f"# config: {compact}",
             ",".join(header)]
    lines += [",".join(_fmt_cell(v) for v in row) for row in rows]
    lines += [f"# {note}" for note in trailing]
    return "\n".join(lines) + "\n"


def write_text(path: str | None, text: str) -> None:
    if not path:
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target),
                               prefix=".arbor-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def figure_path(output: str, name: str) -> str:
    stem, _ = os.path.splitext(output)
    return f"{stem}_{name}.png"


# ----------------------------------------------------------------- commands

def _build_tree(args):
    return build(parse_tree_spec(args.tree, args.depth))


def cmd_gen(args):
    spec = parse_tree_spec(args.tree, args.depth)
    tree = build(spec)
    counts = level_counts(tree)
    result = {
        "spec": spec_to_json(spec),
        "edge_count": int(tree.edge_count),
        "leaf_count": int(tree.leaf_edges.size),
        "depth": len(tree.edges_by_level) - 1,
        "level_counts": counts,
    }
    header = ["level", "edges"]
    rows = [[k, int(c)] for k, c in enumerate(counts)]

    def figures(out):
        from . import figures as fig
        x = np.arange(counts.size)
        fig.save_sequences(figure_path(out, "levels"), x,
                           {"edges per level": counts}, "level",
                           "tree growth by level", logy=counts.max() > 64)
        return [figure_path(out, "levels")]

    return result, (header, rows, []), figures


def cmd_capacity(args):
    tree = _build_tree(args)
    E = parse_boundary(tree, args.boundary)
    res = capacity_recursive(tree, E, args.p)
    result = {
        "capacity": res.capacity,
        "p": args.p,
        "boundary": args.boundary,
        "support_size": len(E),
        "edge_count": int(tree.edge_count),
        "solver": res.solver,
    }
    if args.cross_check:
        other = capacity_optimize(tree, E, args.p)
        result["cross_check"] = {
            "capacity": other.capacity,
            "solver": other.solver,
            "difference": abs(other.capacity - res.capacity),
        }
    header = ["capacity", "p", "support_size", "edge_count"]
    rows = [[res.capacity, args.p, len(E), int(tree.edge_count)]]

    def figures(out):
        from . import figures as fig
        fig.save_level_values(figure_path(out, "equilibrium"), tree.level,
                              res.eq_fn, "equilibrium drop",
                              f"equilibrium function, c={res.capacity:.6g}")
        return [figure_path(out, "equilibrium")]

    return result, (header, rows, []), figures


def cmd_equilibrium(args):
    tree = _build_tree(args)
    E = parse_boundary(tree, args.boundary)
    res = capacity_recursive(tree, E, args.p)
    pot = potential(tree, res.eq_fn)
    members = E.sorted_members()
    defect = float(np.max(np.abs(pot[members + 1] - 1.0))) if len(E) else 0.0
    result = dict(res.to_json_dict())
    result["max_boundary_defect"] = defect
    result["mass_energy_gap"] = abs(float(res.eq_measure.masses.sum())
                                    - res.capacity)
    header = ["leaf", "level", "mass"]
    pos = np.searchsorted(tree.leaf_edges, members)
    rows = [[int(a), int(tree.level[a]), float(res.eq_measure.masses[i])]
            for a, i in zip(members, pos)]
    trailing = [f"capacity: {_fmt_cell(res.capacity)}"]

    def figures(out):
        from . import figures as fig
        fig.save_level_values(figure_path(out, "measure"),
                              tree.level[members],
                              res.eq_measure.masses[pos], "leaf mass",
                              "equilibrium measure on the boundary set")
        return [figure_path(out, "measure")]

    return result, (header, rows, trailing), figures


def cmd_wiener(args):
    tree = _build_tree(args)
    E = parse_boundary(tree, args.boundary)
    report = wiener_series(tree, E, parse_ray(args.ray), args.p,
                           horizon=args.horizon)
    result = report.to_json_dict()
    result["capacity"] = report.meta.get("capacity")
    header = ["n", "depth", "c_n", "t_n", "partial_sum", "product", "epsilon"]
    rows = [[n, int(report.levels[n]), float(report.c_seq[n]),
             float(report.t_seq[n]), float(report.partial_sums[n]),
             float(report.product_seq[n]), report.epsilon]
            for n in range(report.levels.size)]
    trailing = [f"verdict: {report.verdict}", f"status: {report.status}"]

    def figures(out):
        from . import figures as fig
        fig.save_sequences(figure_path(out, "series"), report.levels,
                           {"c_n": report.c_seq,
                            "partial sum": report.partial_sums,
                            "product": report.product_seq},
                           "ray edge level", "capacity series along the ray")
        return [figure_path(out, "series")]

    return result, (header, rows, trailing), figures


def cmd_walk(args):
    tree = _build_tree(args)
    c2 = capacity_recursive(tree, BoundarySet.full(tree), 2.0).capacity
    start = tree.root_edge + 1
    exact = harmonic_measure_exact(tree, start).boundary_total
    est = simulate_escape(tree, start, args.n, args.seed,
                          threads=args.threads)
    result = {
        "capacity": c2,
        "exact_escape": exact,
        "mc_estimate": est.value,
        "std_error": est.std_error,
        "n_walks": est.n_walks,
        "seed": est.seed,
    }
    header = ["capacity", "exact_escape", "mc_estimate", "std_error",
              "n_walks", "seed"]
    rows = [[c2, exact, est.value, est.std_error, est.n_walks, est.seed]]

    def figures(out):
        from . import figures as fig
        fig.save_walk_summary(figure_path(out, "walk"), c2, exact,
                              est.value, est.std_error, est.n_walks)
        return [figure_path(out, "walk")]

    return result, (header, rows, []), figures


def cmd_dirichlet(args):
    tree = _build_tree(args)
    rule = parse_rule(args.rule, args.default, args.value_at_o)
    data = rule.realize(tree)
    if args.p == 2.0:
        g = poisson(tree, data)
        residual = mean_value_residual(tree, g)
    else:
        g = p_harmonic_extension(tree, data, args.p, tol=args.tol,
                                 max_sweeps=args.max_sweeps)
        lap = p_laplacian(tree, g, args.p)
        inner = np.flatnonzero(~tree.is_leaf)
        residual = float(np.max(np.abs(lap[inner + 1]))) if inner.size else 0.0
    vertex_level = np.concatenate(([0], tree.level + 1))
    result = {
        "p": args.p,
        "rule": args.rule,
        "value_at_o": args.value_at_o,
        "value_at_root_end": float(g[1]),
        "min": float(g.min()),
        "max": float(g.max()),
        "interior_residual": residual,
        "values": g,
    }
    header = ["vertex", "level", "value"]
    rows = [[x, int(vertex_level[x]), float(g[x])]
            for x in range(tree.vertex_count)]

    def figures(out):
        from . import figures as fig
        fig.save_level_values(figure_path(out, "solution"), vertex_level, g,
                              "vertex value",
                              f"Dirichlet solution, p={args.p:g}")
        return [figure_path(out, "solution")]

    return result, (header, rows, []), figures


def cmd_carleson(args):
    tree = _build_tree(args)
    E = parse_boundary(tree, args.boundary)
    res = capacity_recursive(tree, E, args.p)
    if args.point_mass is not None:
        edge = address_to_edge(tree, args.point_mass)
        if not tree.is_leaf[edge]:
            raise ParameterError("point-mass address must name a leaf edge")
        masses = np.zeros(tree.leaf_edges.size)
        masses[np.searchsorted(tree.leaf_edges, edge)] = 1.0
        mu = Charge(masses)
        measure = f"point-mass:{args.point_mass}"
    else:
        mu = res.eq_measure
        measure = "equilibrium"
    report = carleson_norm(tree, mu, args.p)
    bound = capacity_via_carleson(tree, E, args.p, [mu])
    result = dict(report.to_json_dict())
    result.update({
        "capacity": res.capacity,
        "best_lower_bound": bound,
        "measure": measure,
        "total_mass": float(np.asarray(mu.masses, dtype=np.float64).sum()),
    })
    header = ["cm_norm", "attaining_edge", "capacity_lower_bound", "capacity"]
    rows = [[report.cm_norm, report.attaining_edge,
             report.capacity_lower_bound, res.capacity]]

    def figures(out):
        from . import figures as fig
        from .calculus import tail_energies
        M = copotential(tree, mu).astype(np.float64)
        tails = tail_energies(tree, M, args.p)
        sel = M > 0
        fig.save_level_values(figure_path(out, "ratios"), tree.level[sel],
                              tails[sel] / M[sel], "tail energy / mass",
                              "measure-norm ratios by edge level")
        return [figure_path(out, "ratios")]

    return result, (header, rows, []), figures


def cmd_paper_example(args):
    tree, charge = counterexample(args.spine_depth, args.depth)
    M = copotential(tree, charge)               # exact rationals
    defect = forward_defect(tree, M)
    values = potential(tree, M)[tree.leaf_edges + 1]
    branch = np.asarray(tree.meta["leaf_branch"])
    tails = tree.meta["ray_tail"]
    off = np.flatnonzero(branch > 0)
    residuals = [values[i] + tails[i] for i in off]
    off_spine_zero = all(r == 0 for r in residuals)
    ws = wiener_series(tree, BoundarySet.full(tree), Ray("spine"), 2.0)
    sums = ws.partial_sums
    recovered = gram_solve(tree, np.array([float(v) for v in values]))
    gram_err = float(np.max(np.abs(
        recovered.masses - np.array([float(m) for m in charge.masses]))))
    result = {
        "spine_depth": int(args.spine_depth),
        "depth": len(tree.edges_by_level) - 1,
        "forward_additive": defect == 0,
        "off_spine_potential_cancels": bool(off_spine_zero),
        "off_spine_leaf_count": int(off.size),
        "spine_partial_sums": [float(s) for s in sums],
        "partial_sums_increasing": bool(np.all(np.diff(sums) > 0)),
        "wiener_verdict": ws.verdict,
        "gram_round_trip_max_error": gram_err,
        "charge_total": float(sum(charge.masses)),
    }
    header = ["n", "partial_sum"]
    rows = [[n, float(s)] for n, s in enumerate(sums)]
    trailing = [
        f"forward_additive: {_fmt_cell(result['forward_additive'])}",
        f"off_spine_potential_cancels: {_fmt_cell(off_spine_zero)}",
    ]

    def figures(out):
        from . import figures as fig
        fig.save_sequences(figure_path(out, "spine"), np.arange(len(sums)),
                           {"partial sum": sums}, "spine index",
                           "capacity series along the spine")
        return [figure_path(out, "spine")]

    return result, (header, rows, trailing), figures


def cmd_sweep(args):
    spec = parse_tree_spec(args.tree, None)
    depths = parse_depths(args.depths)
    quantities = [q.strip() for q in args.quantities.split(",")]
    known = {"capacity", "epsilon", "partial-sum"}
    bad = set(quantities) - known
    if bad:
        raise ParameterError(f"unknown sweep quantities {sorted(bad)}")
    ray = parse_ray(args.ray)
    columns: dict[str, list[float]] = {q: [] for q in quantities}
    for d in depths:
        tree = build(_respec(spec, d))
        E = parse_boundary(tree, args.boundary)
        if "capacity" in columns:
            columns["capacity"].append(
                capacity_recursive(tree, E, args.p).capacity)
        if "epsilon" in columns or "partial-sum" in columns:
            report = wiener_series(tree, E, ray, args.p)
            if "epsilon" in columns:
                columns["epsilon"].append(report.epsilon)
            if "partial-sum" in columns:
                columns["partial-sum"].append(
                    float(report.partial_sums[-1])
                    if report.partial_sums.size else 0.0)
    result = {"depths": depths, "columns": columns}
    trailing = []
    if "capacity" in columns:
        caps = np.array(columns["capacity"])
        ok = bool(np.all(np.diff(caps) <= 1e-12))
        result["monotone_capacity"] = "ok" if ok else "violated"
        trailing.append(f"monotone-capacity: {result['monotone_capacity']}")
    header = ["depth"] + quantities
    rows = [[d] + [columns[q][i] for q in quantities]
            for i, d in enumerate(depths)]

    def figures(out):
        from . import figures as fig
        fig.save_sequences(figure_path(out, "sweep"), depths,
                           {q: columns[q] for q in quantities}, "depth",
                           "depth sweep")
        return [figure_path(out, "sweep")]

    return result, (header, rows, trailing), figures


_HANDLERS = {
    "gen": cmd_gen,
    "capacity": cmd_capacity,
    "equilibrium": cmd_equilibrium,
    "wiener": cmd_wiener,
    "walk": cmd_walk,
    "dirichlet": cmd_dirichlet,
    "carleson": cmd_carleson,
    "paper-example": cmd_paper_example,
    "sweep": cmd_sweep,
}


# ------------------------------------------------------------------- parser

def _add_output_flags(sp):
    sp.add_argument("--output", default=None,
                    help="report file (default: stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--figures", action="store_true",
                    help="also render PNG figures next to --output")


def _add_tree_flags(sp, depth_default=None):
    sp.add_argument("--tree", required=True,
                    help="homogeneous:q | spherical:d1,d2,... | path:L | "
                         "counterexample:s | JSON spec file")
    sp.add_argument("--depth", type=int, default=depth_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arbor",
        description="potential theory on truncated rooted trees")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="build a tree and report its shape")
    _add_tree_flags(sp)
    _add_output_flags(sp)

    for name, blurb in (("capacity", "p-capacity of a boundary set"),
                        ("equilibrium", "equilibrium function and measure")):
        sp = sub.add_parser(name, help=blurb)
        _add_tree_flags(sp)
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--boundary", default="full",
                        help='"full" or comma-separated tent addresses')
        if name == "capacity":
            sp.add_argument("--cross-check", action="store_true",
                            help="also run the convex-program solver")
        _add_output_flags(sp)

    sp = sub.add_parser("wiener", help="capacity series along a ray")
    _add_tree_flags(sp)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--boundary", default="full")
    sp.add_argument("--ray", default="leftmost",
                    help="leftmost | rightmost | spine, with optional "
                         ":dotted.son.prefix")
    sp.add_argument("--horizon", type=int, default=None)
    _add_output_flags(sp)

    sp = sub.add_parser("walk", help="random-walk escape vs capacity")
    _add_tree_flags(sp)
    sp.add_argument("--n", type=int, default=10_000, help="walk count")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None,
                    help="overrides ARBOR_THREADS")
    _add_output_flags(sp)

    sp = sub.add_parser("dirichlet", help="harmonic extension of leaf data")
    _add_tree_flags(sp)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--rule", default="constant:1.0",
                    help="constant:v | tent:address:v | coordinate")
    sp.add_argument("--default", type=float, default=0.0,
                    help="value outside the tent")
    sp.add_argument("--value-at-o", type=float, default=0.0)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-sweeps", type=int, default=100_000)
    _add_output_flags(sp)

    sp = sub.add_parser("carleson", help="measure-norm bound vs capacity")
    _add_tree_flags(sp)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--boundary", default="full")
    sp.add_argument("--point-mass", default=None,
                    help="use a unit mass at this leaf address instead of "
                         "the equilibrium measure")
    _add_output_flags(sp)

    sp = sub.add_parser("paper-example",
                        help="exact checks on the signed-charge tree")
    sp.add_argument("--spine-depth", type=int, required=True)
    sp.add_argument("--depth", type=int, default=None)
    _add_output_flags(sp)

    sp = sub.add_parser("sweep", help="rebuild over depths and tabulate")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--depths", required=True,
                    help="comma-separated increasing depths")
    sp.add_argument("--quantities", default="capacity",
                    help="comma list from capacity,epsilon,partial-sum")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--boundary", default="full")
    sp.add_argument("--ray", default="leftmost")
    _add_output_flags(sp)

    return parser


def _config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())
            if k not in _CONFIG_SKIP}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.figures and not args.output:
        parser.error("--figures needs --output to place files next to")
    config = _config_of(args)
    try:
        result, (header, rows, trailing), figures = _HANDLERS[args.command](args)
    except (ParameterError, ValidationError, StructureError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as err:
        partial = {"error": {"message": str(err),
                             "details": _jsonable(err.info)},
                   "partial": True}
        write_text(args.output, render_json(config, partial))
        return EXIT_SOLVER
    if args.format == "csv":
        text = render_csv(config, header, rows, trailing)
    else:
        text = render_json(config, result)
    write_text(args.output, text)
    if args.figures:
        figures(args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
