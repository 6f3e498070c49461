"""Ray irregularity diagnostics along geodesic rays.

The capacity series of a boundary set along a ray, the telescoping
product identity tying it to the equilibrium deficit, the global
capacity form of the same series, and deficit sweeps over deepening
truncations.  Three independent routes to the series terms (tent
solves, the global measure, global capacities) keep each other honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .tree_core import (
    BoundarySet,
    ParameterError,
    Ray,
    Tree,
    TreeSpec,
    build,
    leaves_below,
    restrict_boundary,
    tent,
)
from .calculus import (
    Exponent,
    SolverError,
    copotential,
    footnote_map,
    potential,
)
from .capacity import capacity_recursive

__all__ = [
    "WienerReport",
    "wiener_series",
    "capacity_form_terms",
    "deficit",
    "sweep_verdict",
    "wiener_sweep",
]

REGULAR_EPS = 1e-6
STABLE_REL = 1e-3


@dataclass(frozen=True)
class WienerReport:
    """Per-level capacity series data for one (tree, set, ray, p) instance.

    c_seq[n] is the relative capacity of the set below the n-th ray edge,
    referred to its own tent and raised to the conjugate-over-p power;
    entries lie in [0, 1].  t_seq[n] is the tail sum of the dual-power map
    of the global equilibrium co-potential along the remaining ray edges,
    and epsilon is the deficit 1 - (potential of that map) at the deepest
    ray vertex used; product_seq[n] * (epsilon + t_seq[0]) equals
    epsilon + t_seq[n+1] up to roundoff (the telescoping identity).
    """

    levels: np.ndarray
    c_seq: np.ndarray
    t_seq: np.ndarray
    partial_sums: np.ndarray
    product_seq: np.ndarray
    epsilon: float
    t0: float
    verdict: str
    status: str
    telescoping_residual: float
    ray_edges: np.ndarray
    p: Exponent
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "levels": [int(x) for x in self.levels],
            "c_seq": [float(x) for x in self.c_seq],
            "t_seq": [float(x) for x in self.t_seq],
            "partial_sums": [float(x) for x in self.partial_sums],
            "product_seq": [float(x) for x in self.product_seq],
            "epsilon": self.epsilon,
            "t0": self.t0,
            "verdict": self.verdict,
            "status": self.status,
            "telescoping_residual": self.telescoping_residual,
            "p": self.p.p,
        }


def _included_prefix(tree: Tree, E: BoundarySet, ray: Ray,
                     horizon: Optional[int]) -> tuple[np.ndarray, str]:
    """Ray edges to use: prefix cut at the horizon and at support exit."""
    prefix = ray.realized_prefix(tree)
    if horizon is not None:
        if horizon < 0:
            raise ParameterError("horizon must be >= 0")
        prefix = prefix[: horizon + 1]
    members = E.members
    keep = []
    status = "ok"
    for a in map(int, prefix):
        if members.isdisjoint(int(x) for x in leaves_below(tree, a)):
            status = "truncated-outside-support"
            break
        keep.append(a)
    return np.array(keep, dtype=np.int64), status


def wiener_series(tree: Tree, E: BoundarySet, ray: Ray, p,
                  horizon: Optional[int] = None) -> WienerReport:
    """Assemble the capacity series of E along a ray, up to the horizon.

    Each series term comes from an independent equilibrium solve on the
    tent at the corresponding ray edge; the tails and the deficit come
    from one global equilibrium solve for E.  The series stops early,
    with an explanatory status, where the ray leaves the smallest closed
    set containing E.
    """
    ex = p if isinstance(p, Exponent) else Exponent.of(p)
    edges, status = _included_prefix(tree, E, ray, horizon)
    if edges.size == 0:
        return WienerReport(
            levels=np.array([], dtype=np.int64), c_seq=np.array([]),
            t_seq=np.array([]), partial_sums=np.array([]),
            product_seq=np.array([]), epsilon=1.0, t0=0.0,
            verdict="inconclusive", status=status,
            telescoping_residual=0.0, ray_edges=edges, p=ex)

    c_seq = np.empty(edges.size)
    for i, a in enumerate(map(int, edges)):
        t = tent(tree, a)
        rc = capacity_recursive(t.tree, restrict_boundary(tree, E, t), ex)
        c_seq[i] = rc.capacity ** (ex.p_conj - 1.0)

    res = capacity_recursive(tree, E, ex)
    M = copotential(tree, res.eq_measure)
    mp = footnote_map(M, ex)
    IMp = potential(tree, mp)
    mp_ray = mp[edges]
    t_seq = np.cumsum(mp_ray[::-1])[::-1]
    t0 = float(t_seq[0])
    epsilon = float(1.0 - IMp[int(edges[-1]) + 1])

    partial_sums = np.cumsum(c_seq)
    product_seq = np.cumprod(1.0 - c_seq)
    t_next = np.append(t_seq[1:], 0.0)
    residual = float(np.max(np.abs(
        product_seq * (epsilon + t0) - (epsilon + t_next))))
    verdict = ("regular-at-horizon"
               if product_seq[-1] < REGULAR_EPS and epsilon < REGULAR_EPS
               else "inconclusive")
    return WienerReport(
        levels=tree.level[edges].copy(), c_seq=c_seq, t_seq=t_seq,
        partial_sums=partial_sums, product_seq=product_seq,
        epsilon=epsilon, t0=t0, verdict=verdict, status=status,
        telescoping_residual=residual, ray_edges=edges, p=ex,
        meta={"capacity": res.capacity})


def capacity_form_terms(tree: Tree, E: BoundarySet, ray: Ray, p,
                        horizon: Optional[int] = None) -> np.ndarray:
    """The same series expressed through global capacities only.

    The term at a level-n ray edge a is g / (1 - n*g) with
    g = (capacity of E's part below a, in the whole tree) ** (p'/p).
    In exact arithmetic this equals the tent-relative series term: the
    dual-exponent reciprocal of a capacity grows by exactly one per
    series edge, and n unit edges sit above a.  A nonpositive
    denominator is impossible for a correct capacity and raises
    SolverError.
    """
    ex = p if isinstance(p, Exponent) else Exponent.of(p)
    edges, _ = _included_prefix(tree, E, ray, horizon)
    members = E.members
    terms = np.empty(edges.size)
    for i, a in enumerate(map(int, edges)):
        below = members.intersection(int(x) for x in leaves_below(tree, a))
        sub = BoundarySet(frozenset(below))
        cg = capacity_recursive(tree, sub, ex).capacity
        g = cg ** (ex.p_conj - 1.0)
        n = int(tree.level[a])
        denom = 1.0 - n * g
        if denom <= 0.0:
            raise SolverError(
                "capacity-form denominator is nonpositive; the global "
                "capacity exceeds its series bound", level=n, value=g)
        terms[i] = g / denom
    return terms


def _respec(spec: TreeSpec, d: int) -> TreeSpec:
    if spec.kind == "explicit":
        raise ParameterError("depth sweeps need a generator-backed spec")
    if spec.kind == "counterexample":
        return replace(spec, spine_depth=d, depth=None)
    return replace(spec, depth=d)


def deficit(spec: TreeSpec, boundary_rule: Callable[[Tree], BoundarySet],
            ray: Ray, p, depth_sweep: Sequence[int]) -> np.ndarray:
    """Equilibrium deficit along the ray at each truncation depth.

    For each depth the truncation is rebuilt, the equilibrium of the
    rebuilt boundary set solved, and 1 - (potential of the dual-power
    co-potential) evaluated at the end of the deepest non-leaf ray edge.
    Leaf ends of members carry deficit 0 identically, so the last
    interior vertex is the informative evaluation point.  A sequence
    tending to 0 indicates regularity; stabilization above 0 indicates
    irregularity (sweep_verdict applies the thresholds).
    """
    ex = p if isinstance(p, Exponent) else Exponent.of(p)
    out = np.empty(len(depth_sweep))
    for k, d in enumerate(depth_sweep):
        tree = build(_respec(spec, int(d)))
        E = boundary_rule(tree)
        res = capacity_recursive(tree, E, ex)
        IMp = potential(tree, footnote_map(
            copotential(tree, res.eq_measure), ex))
        prefix = ray.realized_prefix(tree)
        interior = prefix[~tree.is_leaf[prefix]]
        if interior.size == 0:
            out[k] = 1.0
        else:
            out[k] = 1.0 - IMp[int(interior[-1]) + 1]
    return out


def sweep_verdict(epsilons: Sequence[float]) -> str:
    """Horizon-stamped classification of a deficit sweep.

    regular-at-horizon: the deepest deficit is below 1e-6.
    irregular-suspected: the deficit stabilized (relative spread under
    1e-3 across the last three depths) at a value above 1e-3.
    Otherwise inconclusive.  No claim is made about the infinite tree.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        return "inconclusive"
    if eps[-1] < REGULAR_EPS:
        return "regular-at-horizon"
    if len(eps) >= 3:
        tail = eps[-3:]
        spread = max(tail) - min(tail)
        if spread < STABLE_REL * max(abs(eps[-1]), 1e-300) and eps[-1] > STABLE_REL:
            return "irregular-suspected"
    return "inconclusive"


def wiener_sweep(spec: TreeSpec,
                 boundary_rule: Callable[[Tree], BoundarySet],
                 ray: Ray, p, depth_sweep: Sequence[int],
                 horizon: Optional[int] = None) -> list[WienerReport]:
    """wiener_series on freshly built truncations at each sweep depth."""
    reports = []
    for d in depth_sweep:
        tree = build(_respec(spec, int(d)))
        reports.append(wiener_series(tree, boundary_rule(tree), ray, p, horizon))
    return reports
