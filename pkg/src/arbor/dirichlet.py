"""Dirichlet problem on the truncated tree.

Boundary data lives on leaf ends plus an explicit value at the root
vertex.  The linear (p = 2) solution comes from a two-pass elimination;
the general-p minimizer of the gradient p-norm comes from a nonlinear
Gauss-Seidel sweep over level-parity colors, each local update solving
its one-dimensional strictly convex problem.  The two agree at p = 2,
and the harmonic-measure representation of the linear solution is kept
as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .tree_core import (
    ParameterError,
    Ray,
    Tree,
    TreeSpec,
    address_to_edge,
    build,
    leaves_below,
)
from .calculus import (
    Exponent,
    SolverError,
    ValidationError,
    gradient,
    p_laplacian,
    signed_pow,
)

__all__ = [
    "BoundaryData",
    "BoundaryRule",
    "poisson",
    "mean_value_residual",
    "p_harmonic_extension",
    "regular_convergence",
    "boundary_coordinates",
]


@dataclass(frozen=True)
class BoundaryData:
    """Values on the realized boundary: one per leaf edge, plus the root."""

    values: np.ndarray          # aligned with tree.leaf_edges
    value_at_o: float = 0.0

    def check_for(self, tree: Tree) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (tree.leaf_edges.size,):
            raise ValidationError(
                f"expected {tree.leaf_edges.size} boundary values, got {v.shape}")
        if not (np.all(np.isfinite(v)) and np.isfinite(self.value_at_o)):
            raise ValidationError("boundary values must be finite")

    @classmethod
    def constant(cls, tree: Tree, value: float,
                 value_at_o: float = 0.0) -> "BoundaryData":
        return cls(np.full(tree.leaf_edges.size, float(value)), float(value_at_o))

    @classmethod
    def from_values(cls, tree: Tree,
                    values: Union[Mapping[int, float], Sequence[float]],
                    value_at_o: float = 0.0) -> "BoundaryData":
        if isinstance(values, Mapping):
            arr = np.zeros(tree.leaf_edges.size)
            pos = {int(a): i for i, a in enumerate(tree.leaf_edges)}
            for edge, val in values.items():
                if int(edge) not in pos:
                    raise ValidationError(f"edge {edge} is not a leaf edge")
                arr[pos[int(edge)]] = float(val)
        else:
            arr = np.asarray(values, dtype=np.float64).copy()
        return cls(arr, float(value_at_o))


def boundary_coordinates(tree: Tree) -> np.ndarray:
    """A [0, 1) coordinate per leaf: son indices read as mixed-radix digits.

    Leaves sharing a length-k prefix differ by at most the prefix's stack
    of son-count reciprocals, so the map is Lipschitz for the boundary
    metric that shrinks geometrically with the common prefix length.
    """
    coord = np.zeros(tree.edge_count)
    width = np.zeros(tree.edge_count)
    width[tree.root_edge] = 1.0
    for ids in tree.edges_by_level[:-1]:
        for a in map(int, ids):
            lo, hi = tree.child_start[a], tree.child_end[a]
            k = hi - lo
            if k == 0:
                continue
            w = width[a] / k
            width[lo:hi] = w
            coord[lo:hi] = coord[a] + w * np.arange(k)
    return coord[tree.leaf_edges].copy()


@dataclass(frozen=True)
class BoundaryRule:
    """Depth-consistent recipe for boundary data, applicable to any build.

    kinds: "constant" (value everywhere); "tent-indicator" (value below
    the addressed edge, default elsewhere); "tent-values" (deepest match
    among (address, value) pairs, default elsewhere); "coordinate" (the
    mixed-radix boundary coordinate).  Addresses are dot-paths of son
    indices, "" meaning the root edge.
    """

    kind: str = "constant"
    value: float = 1.0
    address: str = ""
    pairs: tuple = ()
    default: float = 0.0
    value_at_o: float = 0.0

    def realize(self, tree: Tree) -> BoundaryData:
        n = tree.leaf_edges.size
        if self.kind == "constant":
            arr = np.full(n, float(self.value))
        elif self.kind == "tent-indicator":
            arr = np.full(n, float(self.default))
            edge = address_to_edge(tree, self.address)
            inside = np.isin(tree.leaf_edges, leaves_below(tree, edge))
            arr[inside] = float(self.value)
        elif self.kind == "tent-values":
            arr = np.full(n, float(self.default))
            for address, val in sorted(self.pairs,
                                       key=lambda av: av[0].count(".") + bool(av[0])):
                edge = address_to_edge(tree, address)
                inside = np.isin(tree.leaf_edges, leaves_below(tree, edge))
                arr[inside] = float(val)
        elif self.kind == "coordinate":
            arr = boundary_coordinates(tree)
        else:
            raise ParameterError(f"unknown boundary rule kind {self.kind!r}")
        return BoundaryData(arr, float(self.value_at_o))

    def limit_along(self, tree: Tree, ray: Ray) -> float:
        """Value of the rule at the ray's boundary point."""
        prefix = set(int(a) for a in ray.realized_prefix(tree))
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "tent-indicator":
            inside = address_to_edge(tree, self.address) in prefix
            return float(self.value) if inside else float(self.default)
        if self.kind == "tent-values":
            best = float(self.default)
            best_depth = -1
            for address, val in self.pairs:
                edge = address_to_edge(tree, address)
                if edge in prefix and int(tree.level[edge]) > best_depth:
                    best, best_depth = float(val), int(tree.level[edge])
            return best
        if self.kind == "coordinate":
            # realized-leaf coordinate; off by at most the leaf tent width
            edges = ray.realized_prefix(tree)
            coords = boundary_coordinates(tree)
            pos = int(np.searchsorted(tree.leaf_edges, int(edges[-1])))
            return float(coords[pos])
        raise ParameterError(f"unknown boundary rule kind {self.kind!r}")


def poisson(tree: Tree, data: BoundaryData) -> np.ndarray:
    """Harmonic interpolation of the boundary data, one vertex per entry.

    Upward pass eliminates each interior vertex against its parent;
    downward pass substitutes.  Equivalently the Poisson integral of the
    data against harmonic measure; the representation is not used here,
    which keeps it available as an independent check.
    """
    data.check_for(tree)
    phi = np.asarray(data.values, dtype=np.float64)
    g = np.empty(tree.vertex_count)
    g[tree.root_vertex] = data.value_at_o
    g[tree.leaf_edges + 1] = phi
    interior_any = bool((~tree.is_leaf).any())
    if not interior_any:
        return g

    deg_e = 1.0 + tree.n_sons
    A = np.zeros(tree.edge_count)
    D = np.zeros(tree.edge_count)
    accA = np.zeros(tree.edge_count)
    accD = np.zeros(tree.edge_count)
    for ids in reversed(tree.edges_by_level):
        leaf_ids = ids[tree.is_leaf[ids]]
        body = leaf_ids[leaf_ids != tree.root_edge]
        if body.size:
            np.add.at(accD, tree.parent[body], g[body + 1])
        inner = ids[~tree.is_leaf[ids]]
        if inner.size:
            A[inner] = 1.0 / (deg_e[inner] - accA[inner])
            D[inner] = A[inner] * accD[inner]
            body = inner[inner != tree.root_edge]
            np.add.at(accA, tree.parent[body], A[body])
            np.add.at(accD, tree.parent[body], D[body])

    root = tree.root_edge
    if not tree.is_leaf[root]:
        g[root + 1] = A[root] * data.value_at_o + D[root]
    for ids in tree.edges_by_level[1:]:
        inner = ids[~tree.is_leaf[ids]]
        if inner.size:
            g[inner + 1] = A[inner] * g[tree.begin[inner]] + D[inner]
    return g


def mean_value_residual(tree: Tree, g: np.ndarray) -> float:
    """Largest deviation from the neighbor average at interior vertices."""
    res = 0.0
    inner = np.flatnonzero(~tree.is_leaf)
    if inner.size == 0:
        return 0.0
    for a in map(int, inner):
        sons = tree.sons(a)
        around = g[tree.begin[a]] + g[sons + 1].sum()
        res = max(res, abs(g[a + 1] - around / (1 + sons.size)))
    return float(res)


def _son_vertex_matrix(tree: Tree) -> np.ndarray:
    width = int(tree.n_sons.max()) if tree.edge_count else 0
    M = np.full((tree.edge_count, max(width, 1)), -1, dtype=np.int64)
    for k in range(width):
        sel = tree.n_sons > k
        M[sel, k] = tree.child_start[sel] + k + 1
    return M


def _local_minimize(parent_vals: np.ndarray, son_vals: np.ndarray,
                    mask: np.ndarray, t0: np.ndarray, ex: Exponent) -> np.ndarray:
    """Solve min_t |t - parent|^p + sum |t - sons|^p rowwise.

    Stationarity F(t) = sum signed_pow(t - neighbor, p-1) = 0 with F
    strictly increasing; safeguarded Newton inside the neighbor-value
    bracket, falling back to bisection whenever the step leaves it.
    """
    V = np.concatenate([parent_vals[:, None], son_vals], axis=1)
    valid = np.concatenate([np.ones((len(parent_vals), 1), dtype=bool), mask],
                           axis=1)
    lo = np.where(valid, V, np.inf).min(axis=1)
    hi = np.where(valid, V, -np.inf).max(axis=1)
    t = np.clip(t0, lo, hi)
    pm1 = ex.p - 1.0
    for it in range(80):
        d = np.where(valid, t[:, None] - V, 0.0)
        F = np.where(valid, signed_pow(d, pm1), 0.0).sum(axis=1)
        if np.all(F == 0.0):
            break
        hi = np.where(F > 0, t, hi)
        lo = np.where(F > 0, lo, t)
        if np.max(hi - lo) < 1e-15 * (1.0 + np.max(np.abs(t))):
            break
        if it % 2:
            # every other step bisects so the bracket halves regardless
            # of how Newton behaves near the kinks of F
            t = 0.5 * (lo + hi)
            continue
        ad = np.where(valid, np.abs(d), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            Fp = pm1 * np.where(valid, ad ** (pm1 - 1.0), 0.0).sum(axis=1)
            newton = t - F / Fp
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        t = np.where(inside, newton, 0.5 * (lo + hi))
    return t


def p_harmonic_extension(tree: Tree, data: BoundaryData, p,
                         tol: float = 1e-10,
                         max_sweeps: int = 100_000) -> np.ndarray:
    """Minimizer of the gradient p-norm among interpolants of the data.

    Nonlinear Gauss-Seidel over level-parity colors; vertices of one
    color have no common edges, so a color updates as one vectorized
    batch.  Convergence contract: the interior p-Laplacian residual
    falls below tol within max_sweeps, else SolverError (the gradient
    p-norm is tracked and must never increase).  For p = 2 each local
    solve is the neighbor mean and the result matches ``poisson``.
    """
    ex = p if isinstance(p, Exponent) else Exponent.of(p)
    if tol <= 0:
        raise ParameterError("tol must be positive")
    data.check_for(tree)
    phi = np.asarray(data.values, dtype=np.float64)
    g = np.empty(tree.vertex_count)
    g[tree.root_vertex] = data.value_at_o
    g[tree.leaf_edges + 1] = phi
    inner = np.flatnonzero(~tree.is_leaf)
    if inner.size == 0:
        return g
    g[inner + 1] = 0.5 * (data.value_at_o + float(phi.mean()))

    M = _son_vertex_matrix(tree)
    colors = [inner[(tree.level[inner] + 1) % 2 == c] for c in (0, 1)]
    colors = [c for c in colors if c.size]
    son_idx = {id(c): M[c] for c in colors}

    def sweep_energy() -> float:
        return float(np.sum(np.abs(gradient(tree, g)) ** ex.p))

    last_energy = sweep_energy()
    for sweep in range(1, max_sweeps + 1):
        for rows in colors:
            idx = son_idx[id(rows)]
            mask = idx >= 0
            sons = g[np.where(mask, idx, 0)]
            parent_vals = g[tree.begin[rows]]
            if ex.p == 2.0:
                t = (parent_vals + np.where(mask, sons, 0.0).sum(axis=1)) \
                    / (1.0 + mask.sum(axis=1))
            else:
                t = _local_minimize(parent_vals, sons, mask, g[rows + 1], ex)
            g[rows + 1] = t
        lap = p_laplacian(tree, g, ex)
        residual = float(np.max(np.abs(lap[inner + 1])))
        if residual <= tol:
            return g
        if sweep % 16 == 0:
            e = sweep_energy()
            if e > last_energy * (1.0 + 1e-12) + 1e-300:
                raise SolverError("energy increased during relaxation",
                                  sweep=sweep, energy=e, previous=last_energy)
            last_energy = e
    raise SolverError("relaxation did not meet the residual tolerance",
                      residual=residual, tol=tol, sweeps=max_sweeps)


def regular_convergence(spec: TreeSpec, rule: BoundaryRule, ray: Ray,
                        depth_sweep: Sequence[int]) -> np.ndarray:
    """Gap between the harmonic extension and the rule's ray limit.

    For each depth: rebuild the truncation, realize the rule, solve the
    linear Dirichlet problem, and measure |solution - limit| at the end
    of the deepest non-leaf ray edge (at member leaf ends the boundary
    condition holds exactly, which would say nothing).  Gaps tending to
    0 exhibit the ray's regularity at the swept horizons.
    """
    gaps = np.empty(len(depth_sweep))
    for k, d in enumerate(depth_sweep):
        if spec.kind == "explicit":
            raise ParameterError("depth sweeps need a generator-backed spec")
        if spec.kind == "counterexample":
            sp = replace(spec, spine_depth=int(d), depth=None)
        else:
            sp = replace(spec, depth=int(d))
        tree = build(sp)
        g = poisson(tree, rule.realize(tree))
        prefix = ray.realized_prefix(tree)
        interior = prefix[~tree.is_leaf[prefix]]
        x = int(interior[-1]) + 1 if interior.size else tree.root_vertex
        gaps[k] = abs(g[x] - rule.limit_along(tree, ray))
    return gaps
