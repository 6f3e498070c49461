"""p-capacities of boundary sets with equilibrium functions and measures.

Two independent solvers: a closed-form series/parallel recursion over the
tree, and a convex program solved by an interior-point conic solver.  Both
return the capacity, the extremal edge function f (nonnegative, potential
exactly 1 on the target set), and the extremal measure mu on the target
leaves.  The two agree to solver tolerance and their relation
I*mu = signed_pow(f, p-1) is the cross-check used throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tree_core import (
    BoundarySet,
    ParameterError,
    Tree,
    geodesic_to,
    restrict_boundary,
    tent,
)
from .calculus import (
    Charge,
    Exponent,
    SolverError,
    ValidationError,
    copotential,
    energy,
    footnote_map,
    tail_energies,
)

__all__ = [
    "EquilibriumResult",
    "capacity_recursive",
    "capacity_optimize",
    "spherical_capacity",
    "relative_capacity",
    "rescaling_residuals",
    "dual_admissibility_check",
]


@dataclass(frozen=True)
class EquilibriumResult:
    """Capacity of a boundary set with its extremal function and measure."""

    capacity: float
    eq_fn: np.ndarray       # edge function f, zero off the support of E's geodesics
    eq_measure: Charge      # nonnegative, supported on E
    p: Exponent
    solver: str
    tol: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "f": [float(x) for x in self.eq_fn],
            "mu": [float(x) for x in self.eq_measure.masses],
            "p": self.p.p,
            "tol": self.tol,
            "solver": self.solver,
        }


def _as_exponent(p) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent.of(p)


def capacity_recursive(tree: Tree, E: BoundarySet, p) -> EquilibriumResult:
    """Bottom-up series/parallel solve, then top-down reconstruction.

    Upward: a leaf tent has relative capacity 1 if the leaf belongs to E,
    else 0; sons combine in parallel (C = sum of son capacities) and the
    unit edge above them in series, c = C / (1 + C^(p'-1))^(p-1), which is
    the minimum of t^p + C (1-t)^p over the potential drop t on the edge.
    Downward: the optimal drop fraction t = C^(p'-1) / (1 + C^(p'-1))
    rebuilds f and the leaf masses f^(p-1).
    """
    ex = _as_exponent(p)
    E_mask = E.mask(tree)
    c = np.zeros(tree.edge_count)
    t = np.zeros(tree.edge_count)
    c[E_mask] = 1.0
    t[E_mask] = 1.0
    son_total = np.zeros(tree.edge_count)
    for ids in reversed(tree.edges_by_level):
        inner = ids[~tree.is_leaf[ids]]
        if inner.size:
            C = son_total[inner]
            u = np.zeros(inner.size)
            pos = C > 0
            u[pos] = C[pos] ** (ex.p_conj - 1.0)
            tt = u / (1.0 + u)
            t[inner] = tt
            c[inner] = tt ** (ex.p - 1.0)
        body = ids[ids != tree.root_edge]
        np.add.at(son_total, tree.parent[body], c[body])

    # top-down reconstruction of the drops
    s = np.zeros(tree.edge_count)
    s[0] = 1.0
    for ids in tree.edges_by_level[1:]:
        par = tree.parent[ids]
        s[ids] = s[par] * (1.0 - t[par])
    f = s * t
    leaf_masses = np.where(E_mask[tree.leaf_edges],
                           f[tree.leaf_edges] ** (ex.p - 1.0), 0.0)
    return EquilibriumResult(
        capacity=float(c[0]),
        eq_fn=f,
        eq_measure=Charge(leaf_masses),
        p=ex,
        solver="recursive",
    )


def relative_capacity(tree: Tree, E: BoundarySet, a: int, p) -> EquilibriumResult:
    """Capacity of the part of E below edge a, referred to the tent at a."""
    t = tent(tree, a)
    return capacity_recursive(t.tree, restrict_boundary(tree, E, t), p)


_CLARABEL_OPTS = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12,
                      max_iter=200)

# retreat ladder for deep instances that stall short of the tight settings;
# the primal/dual gap check after the solve still enforces the accuracy bar
_CLARABEL_RETRIES = (
    {},
    dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500),
)


def capacity_optimize(tree: Tree, E: BoundarySet, p, tol: float = 1e-9) -> EquilibriumResult:
    """Convex-program oracle: minimize the p-norm of f subject to
    potential(f) >= 1 at every member of E.

    The variable is restricted to edges below which E is reachable (the
    optimum is supported on the union of the members' geodesics).
    Nonnegativity of f is not imposed; it emerges and is asserted after the
    solve.  The equilibrium measure is read off the constraint duals.
    Raises SolverError, carrying the primal/dual bound pair, when the gap
    between the primal value and the measure's admissibility bound exceeds
    tol.
    """
    import cvxpy as cp
    from scipy import sparse

    ex = _as_exponent(p)
    if tol <= 0:
        raise ParameterError("tol must be positive")
    members = E.sorted_members()
    if members.size == 0:
        return EquilibriumResult(0.0, np.zeros(tree.edge_count),
                                 Charge.zero(tree), ex, "optimize", tol)

    rows, cols = [], []
    for i, leaf in enumerate(members):
        g = geodesic_to(tree, int(leaf))
        rows.extend([i] * g.size)
        cols.extend(int(x) for x in g)
    support = np.unique(np.array(cols))
    remap = np.full(tree.edge_count, -1, dtype=np.int64)
    remap[support] = np.arange(support.size)
    A = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, remap[np.array(cols)])),
        shape=(members.size, support.size),
    )

    x = cp.Variable(support.size)
    constraint = A @ x >= 1.0
    problem = cp.Problem(cp.Minimize(cp.pnorm(x, ex.p)), [constraint])
    with warnings.catch_warnings():
        # the tight tolerances often end "optimal_inaccurate" at ~1e-10;
        # accuracy is enforced below by the primal/dual gap check instead
        warnings.simplefilter("ignore")
        failure = None
        for opts in (_CLARABEL_OPTS, *_CLARABEL_RETRIES):
            try:
                problem.solve(solver=cp.CLARABEL, **opts)
                failure = None
                break
            except cp.error.SolverError as err:
                failure = err
        if failure is not None:
            raise SolverError(f"capacity program failed in every attempt: "
                              f"{failure}", attempts=1 + len(_CLARABEL_RETRIES))
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"capacity program ended with status {problem.status}",
                          status=problem.status)

    norm_val = float(problem.value)
    f = np.zeros(tree.edge_count)
    f[support] = np.asarray(x.value).ravel()
    min_f = float(f.min())
    f = np.maximum(f, 0.0)
    lam = np.maximum(np.asarray(constraint.dual_value).ravel(), 0.0)
    masses = np.zeros(tree.leaf_edges.size)
    masses[np.searchsorted(tree.leaf_edges, members)] = norm_val ** (ex.p - 1.0) * lam
    mu = Charge(masses)

    capacity = norm_val ** ex.p
    total = float(masses.sum())
    en = energy(tree, mu, ex)
    dual_bound = (total / en ** (1.0 / ex.p_conj)) ** ex.p if en > 0 else 0.0
    gap = abs(capacity - dual_bound)
    if gap > tol * max(1.0, capacity):
        raise SolverError(
            "optimizer gap above tolerance",
            primal=capacity, dual=dual_bound, gap=gap, tol=tol)
    return EquilibriumResult(
        capacity=capacity, eq_fn=f, eq_measure=mu, p=ex,
        solver="optimize", tol=tol,
        meta={"gap": gap, "min_f_before_clip": min_f,
              "status": problem.status},
    )


def spherical_capacity(degrees: Sequence[int], depth: int, p) -> float:
    """Closed form for the full boundary of a spherically symmetric tree.

    With N_k the number of level-k edges (N_0 = 1, N_k = d_1 ... d_k), the
    capacity of the truncation at ``depth`` is
    (sum_{k=0}^{depth} N_k^(1-p'))^(1-p): level-constant drops are optimal
    and the per-level Lagrange weights telescope.  depth 0 is the
    single-edge tree, capacity 1 for every p.
    """
    ex = _as_exponent(p)
    degrees = [int(d) for d in degrees]
    if depth < 0:
        raise ParameterError("depth must be >= 0")
    if len(degrees) < depth:
        raise ParameterError("degree list shorter than depth")
    if any(d < 1 for d in degrees):
        raise ParameterError("degrees must be >= 1")
    N = np.cumprod([1] + degrees[:depth]).astype(np.float64)
    return float(np.sum(N ** (1.0 - ex.p_conj)) ** (1.0 - ex.p))


def rescaling_residuals(tree: Tree, result: EquilibriumResult) -> tuple[float, float]:
    """Largest deviations from the two restriction identities.

    r1: over every edge a whose tent meets the support set, compare the
    global measure restricted below a against the tent's own equilibrium
    measure scaled by (1 - I M_p at b(a))^(p-1); the tent equilibria are
    solved independently.
    r2: over those edges, |M(a) * (1 - I M_p(b(a))) - tail energy at a|.

    The factor 1 - I M_p(b(a)) is the remaining potential below b(a);
    since I M_p = 1 at every member of the support set, it is computed as
    the geodesic sum of the dual-power map from a down to a member leaf.
    The literal difference 1 - (partial sum) is the same number in exact
    arithmetic but cancels catastrophically when the remainder is tiny.
    """
    ex = result.p
    masses = np.asarray(result.eq_measure.masses, dtype=np.float64)
    M = copotential(tree, result.eq_measure)
    fhat = footnote_map(M, ex)
    tails = tail_energies(tree, M, ex)
    support_leaves = tree.leaf_edges[masses > 0]
    E = BoundarySet(frozenset(int(a) for a in support_leaves))
    E_mask = E.mask(tree)

    # pick: a support leaf below each edge (-1 if none);
    # S: sum of fhat along the geodesic from the edge down to that leaf
    pick = np.full(tree.edge_count, -1, dtype=np.int64)
    S = np.zeros(tree.edge_count)
    for ids in reversed(tree.edges_by_level):
        for a in map(int, ids):
            if tree.is_leaf[a]:
                if E_mask[a]:
                    pick[a] = a
                    S[a] = fhat[a]
            else:
                for b in range(tree.child_start[a], tree.child_end[a]):
                    if pick[b] != -1:
                        pick[a] = pick[b]
                        S[a] = fhat[a] + S[b]
                        break

    leaf_pos = {int(a): i for i, a in enumerate(tree.leaf_edges)}
    r1 = 0.0
    r2 = 0.0
    for a in map(int, np.flatnonzero(pick != -1)):
        scale = S[a]
        r2 = max(r2, abs(M[a] * scale - tails[a]))
        t = tent(tree, a)
        sub = capacity_recursive(t.tree, restrict_boundary(tree, E, t), ex)
        local = sub.eq_measure.masses * scale ** (ex.p - 1.0)
        global_pos = [leaf_pos[int(t.edge_map[x])] for x in t.tree.leaf_edges]
        r1 = max(r1, float(np.max(np.abs(masses[global_pos] - local))))
    return r1, r2


def dual_admissibility_check(tree: Tree, E: BoundarySet, p,
                             candidates: Iterable[Charge]) -> float:
    """Best certified lower bound (mu(E) / energy^(1/p'))^p over candidates.

    Every candidate must be nonnegative, not identically zero, and
    supported inside E; violations raise ValidationError.  The bound is
    tight exactly for the (normalized) equilibrium measure.
    """
    ex = _as_exponent(p)
    member_mask = np.isin(tree.leaf_edges, E.sorted_members())
    best = 0.0
    seen = False
    for i, mu in enumerate(candidates):
        seen = True
        mu.check_for(tree)
        m = np.asarray(mu.masses, dtype=np.float64)
        if np.any(m < 0):
            raise ValidationError(f"candidate {i} has negative mass")
        if np.any(m[~member_mask] != 0):
            raise ValidationError(f"candidate {i} has mass outside the set")
        total = float(m.sum())
        if total == 0.0:
            raise ValidationError(f"candidate {i} is the zero measure")
        en = energy(tree, mu, ex)
        best = max(best, (total / en ** (1.0 / ex.p_conj)) ** ex.p)
    if not seen:
        return 0.0
    return best
