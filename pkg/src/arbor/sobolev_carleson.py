"""Gradient norms, Carleson-type measure norms, and charge recovery.

The measure norm taken here is the best constant bounding every subtree
energy tail by the mass under the same edge; for equilibrium measures
that constant is 1 and the supremum sits at the root edge, which turns
the norm into one more route to the capacity.  The recovery half of the
module inverts leaf values of the linear potential back to the charge,
which is exactly solvable at truncation scale and quantifies how
uniqueness degenerates under deepening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from .tree_core import BoundarySet, ParameterError, Tree, geodesic_to
from .calculus import (
    Charge,
    Exponent,
    SolverError,
    ValidationError,
    copotential,
    footnote_map,
    gradient,
    potential,
    tail_energies,
)
from .dirichlet import BoundaryData, poisson

__all__ = [
    "CarlesonReport",
    "sobolev_norm",
    "carleson_norm",
    "capacity_via_carleson",
    "radial_variation",
    "leaf_potential_values",
    "gram_solve",
    "uniqueness_gap",
]

_DENSE_LEAVES = 4096


def _as_exponent(p) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent.of(p)


def sobolev_norm(tree: Tree, g: np.ndarray, p) -> float:
    """p-th power of the gradient p-norm of a vertex function."""
    ex = _as_exponent(p)
    return float(np.sum(np.abs(gradient(tree, g)) ** ex.p))


@dataclass(frozen=True)
class CarlesonReport:
    """Best constant bounding subtree energy tails by the mass below."""

    cm_norm: float
    attaining_edge: int          # -1 for the zero measure
    capacity_lower_bound: float  # total mass / cm_norm**(p-1)
    infinite: bool = False

    def to_json_dict(self) -> dict:
        return {
            "cm_norm": None if self.infinite else self.cm_norm,
            "infinite": self.infinite,
            "attaining_edge": self.attaining_edge,
            "capacity_lower_bound": self.capacity_lower_bound,
        }


def _nonnegative_masses(tree: Tree, mu: Charge) -> np.ndarray:
    masses = np.asarray(mu.masses, dtype=np.float64)
    if masses.shape != (tree.leaf_edges.size,):
        raise ValidationError("charge does not match the tree's leaf count")
    if not np.all(np.isfinite(masses)):
        raise ValidationError("charge masses must be finite")
    if np.any(masses < 0):
        raise ValidationError("the measure norm is defined for masses >= 0")
    return masses


def carleson_norm(tree: Tree, mu: Charge, p) -> CarlesonReport:
    """Sup over edges of the subtree energy tail over the mass below it.

    Edges carrying no mass are skipped; one with no mass but a positive
    energy tail would make the supremum infinite and is flagged as such
    (it cannot arise for a leaf-supported measure, where the tail is a
    sum over exactly the edges whose mass term vanishes with it).
    """
    ex = _as_exponent(p)
    masses = _nonnegative_masses(tree, mu)
    M = copotential(tree, Charge(masses)).astype(np.float64)
    tails = tail_energies(tree, M, ex)
    pos = M > 0.0
    bad = ~pos & (tails > 0.0)
    if np.any(bad):
        edge = int(np.flatnonzero(bad)[0])
        return CarlesonReport(math.inf, edge, 0.0, infinite=True)
    if not pos.any():
        return CarlesonReport(0.0, -1, 0.0)
    ratios = np.full(tree.edge_count, -np.inf)
    ratios[pos] = tails[pos] / M[pos]
    edge = int(np.argmax(ratios))
    cm = float(ratios[edge])
    total = float(masses.sum())
    return CarlesonReport(cm, edge, total / cm ** (ex.p - 1.0))


def capacity_via_carleson(tree: Tree, E: BoundarySet, p,
                          candidates: Iterable[Charge]) -> float:
    """Best capacity lower bound produced by candidate measures on E.

    Every candidate must be nonnegative and supported in E.  Each bound
    is checked against the energy form of the same bound, which it can
    never exceed; the best one equals the capacity exactly when the
    equilibrium measure is among the candidates.
    """
    ex = _as_exponent(p)
    support = np.isin(tree.leaf_edges, E.sorted_members())
    best = 0.0
    for mu in candidates:
        masses = _nonnegative_masses(tree, mu)
        if np.any(masses[~support] != 0.0):
            raise ValidationError("candidate measure puts mass outside E")
        report = carleson_norm(tree, Charge(masses), ex)
        if report.cm_norm == 0.0:
            continue
        M = copotential(tree, Charge(masses)).astype(np.float64)
        en = float(np.sum(np.abs(M) ** ex.p_conj))
        dual_bound = float(masses.sum()) ** ex.p / en ** (ex.p - 1.0)
        if report.capacity_lower_bound > dual_bound * (1.0 + 1e-9) + 1e-300:
            raise SolverError("measure-norm bound exceeded its energy form",
                              cm_bound=report.capacity_lower_bound,
                              energy_bound=dual_bound)
        best = max(best, report.capacity_lower_bound)
    return best


def radial_variation(tree: Tree, g: np.ndarray, n: int) -> np.ndarray:
    """Vertex majorant summing |gradient| over geodesic edges of level <= n.

    Pointwise non-decreasing in n, and its gradient p-norm never exceeds
    that of g, since the cut gradient is |gradient(g)| on fewer edges.
    """
    depth = len(tree.edges_by_level) - 1
    if not 0 <= int(n) <= depth:
        raise ParameterError(f"cut level {n} outside 0..{depth}")
    drop = np.abs(gradient(tree, g))
    drop[tree.level > int(n)] = 0.0
    return potential(tree, drop)


def leaf_potential_values(tree: Tree, mu: Charge) -> np.ndarray:
    """Linear potential of the charge at the leaf end vertices.

    Exact for object-dtype (rational) masses; this is the forward map
    that gram_solve inverts.
    """
    return potential(tree, copotential(tree, mu))[tree.leaf_edges + 1]


def _geodesic_incidence(tree: Tree) -> scipy.sparse.csr_matrix:
    rows, cols = [], []
    for pos, leaf in enumerate(tree.leaf_edges):
        chain = geodesic_to(tree, int(leaf))
        rows.extend([pos] * chain.size)
        cols.extend(chain.tolist())
    data = np.ones(len(rows))
    return scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(tree.leaf_edges.size, tree.edge_count))


def gram_solve(tree: Tree,
               boundary_values: Union[Mapping[int, float], Sequence[float], np.ndarray],
               ) -> Charge:
    """The unique charge whose linear potential takes the given leaf values.

    The Gram matrix pairs leaf geodesics by their shared edge count and
    is positive definite at truncation scale, so the charge exists and
    is unique.  Small systems go through a dense Cholesky factorization
    of the Gram matrix; larger ones are eliminated sweep-wise instead
    (value interpolation by the linear Dirichlet solver, then reading
    the charge off the gradient), which costs one tree pass.  Either
    way the residual of the forward map is verified to 1e-10.
    """
    n = tree.leaf_edges.size
    if isinstance(boundary_values, Mapping):
        v = np.empty(n)
        pos = {int(a): i for i, a in enumerate(tree.leaf_edges)}
        seen = 0
        for edge, val in boundary_values.items():
            if int(edge) not in pos:
                raise ValidationError(f"edge {edge} is not a leaf edge")
            v[pos[int(edge)]] = float(val)
            seen += 1
        if seen != n:
            raise ValidationError("boundary values must cover every leaf")
    else:
        v = np.asarray(boundary_values, dtype=np.float64)
        if v.shape != (n,):
            raise ValidationError(f"expected {n} boundary values, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("boundary values must be finite")

    if n <= _DENSE_LEAVES:
        X = _geodesic_incidence(tree)
        G = (X @ X.T).toarray()
        masses = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), v)
    else:
        interpolant = poisson(tree, BoundaryData(v, value_at_o=0.0))
        masses = gradient(tree, interpolant)[tree.leaf_edges]

    mu = Charge(masses)
    residual = float(np.max(np.abs(leaf_potential_values(tree, mu) - v)))
    if residual > 1e-10 * max(1.0, float(np.max(np.abs(v)))):
        raise SolverError("charge recovery missed the residual tolerance",
                          residual=residual, leaves=int(n))
    return mu


def uniqueness_gap(tree: Tree, mu: Charge, nu: Charge, p) -> float:
    """Monotone pairing of two charges' potentials; 0 only when they agree.

    Sums, over the edges, the product of the difference of the linear
    co-potentials and the difference of their signed-power images.  Both
    factors share their sign edge by edge, so the sum is nonnegative and
    vanishes exactly when the co-potentials (hence the charges) agree.
    """
    ex = _as_exponent(p)
    M = copotential(tree, mu).astype(np.float64)
    V = copotential(tree, nu).astype(np.float64)
    return float(np.sum((M - V) * (footnote_map(M, ex) - footnote_map(V, ex))))
