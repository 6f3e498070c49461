"""Discrete calculus on rooted trees.

Potentials and gradients of edge/vertex functions, co-potentials of leaf
charges, signed powers, the conjugate-exponent footnote map, the
p-Laplacian, and energies.  Edge functions are arrays indexed by edge id,
vertex functions arrays indexed by vertex id (vertex 0 is the root vertex,
vertex a + 1 the end of edge a).  Everything works for float arrays and for
object arrays of Fractions; the exact path is used where bit-exactness is
asserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .tree_core import ParameterError, Tree

__all__ = [
    "Exponent",
    "Charge",
    "ValidationError",
    "SolverError",
    "signed_pow",
    "footnote_map",
    "potential",
    "gradient",
    "copotential",
    "subtree_sum",
    "forward_defect",
    "p_laplacian",
    "energy",
    "tail_energies",
    "mutual_energy",
    "level_sums",
]


class ValidationError(ValueError):
    """An input object violates a documented precondition."""


class SolverError(RuntimeError):
    """A numeric solve failed to reach its contract; carries diagnostics."""

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


@dataclass(frozen=True)
class Exponent:
    """An exponent p in (1, inf) together with its Holder conjugate."""

    p: float
    p_conj: float

    @classmethod
    def of(cls, p: float) -> "Exponent":
        p = float(p)
        if not (1.0 < p < np.inf):
            raise ParameterError("p must lie in (1, inf)")
        return cls(p, p / (p - 1.0))

    def dual(self) -> "Exponent":
        return Exponent(self.p_conj, self.p)


def _as_exponent(p) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent.of(p)


def signed_pow(a, s):
    """Odd power map sgn(a) * |a|**s, elementwise; requires s > 0."""
    if not s > 0:
        raise ParameterError("signed_pow exponent must be > 0")
    a = np.asarray(a)
    out = np.sign(a) * np.abs(a) ** s
    return out if out.ndim else out[()]


def footnote_map(f: np.ndarray, p) -> np.ndarray:
    """Pointwise signed power with exponent p' - 1; self-inverse across duals."""
    p = _as_exponent(p)
    return signed_pow(f, p.p_conj - 1.0)


@dataclass(frozen=True)
class Charge:
    """Signed masses on the truncation leaves, aligned with tree.leaf_edges."""

    masses: np.ndarray

    @property
    def total(self):
        return self.masses.sum()

    @classmethod
    def zero(cls, tree: Tree) -> "Charge":
        return cls(np.zeros(tree.leaf_edges.size))

    @classmethod
    def uniform(cls, tree: Tree, total: float = 1.0) -> "Charge":
        n = tree.leaf_edges.size
        return cls(np.full(n, total / n))

    @classmethod
    def point(cls, tree: Tree, leaf_edge: int, mass: float = 1.0) -> "Charge":
        masses = np.zeros(tree.leaf_edges.size)
        pos = int(np.searchsorted(tree.leaf_edges, leaf_edge))
        if pos >= masses.size or tree.leaf_edges[pos] != leaf_edge:
            raise ValidationError(f"edge {leaf_edge} is not a leaf")
        masses[pos] = mass
        return cls(masses)

    @classmethod
    def from_map(cls, tree: Tree, mapping: Mapping[int, float]) -> "Charge":
        masses = np.zeros(tree.leaf_edges.size)
        index = {int(a): i for i, a in enumerate(tree.leaf_edges)}
        for edge, mass in mapping.items():
            if int(edge) not in index:
                raise ValidationError(f"edge {edge} is not a leaf")
            masses[index[int(edge)]] = mass
        return cls(masses)

    def check_for(self, tree: Tree) -> None:
        if self.masses.shape != (tree.leaf_edges.size,):
            raise ValidationError("charge does not match the tree's leaf count")


def _edge_zeros_like(tree: Tree, template: np.ndarray) -> np.ndarray:
    if template.dtype == object:
        out = np.empty(tree.edge_count, dtype=object)
        out[:] = 0
        return out
    return np.zeros(tree.edge_count, dtype=np.result_type(template, np.float64))


def potential(tree: Tree, f: np.ndarray) -> np.ndarray:
    """Vertex function summing f along the geodesic from the root vertex.

    The value at vertex 0 is 0 (empty sum); at the end vertex of a leaf
    edge it is the boundary value of the truncated ray through that leaf.
    """
    f = np.asarray(f)
    if f.dtype == object:
        out = np.empty(tree.vertex_count, dtype=object)
        out[0] = 0
        for a in range(tree.edge_count):
            out[a + 1] = out[tree.begin[a]] + f[a]
        return out
    out = np.zeros(tree.vertex_count, dtype=np.result_type(f, np.float64))
    for ids in tree.edges_by_level:
        out[ids + 1] = out[tree.begin[ids]] + f[ids]
    return out


def gradient(tree: Tree, g: np.ndarray) -> np.ndarray:
    """Edge function g(end) - g(begin); exact inverse of potential."""
    g = np.asarray(g)
    ids = np.arange(tree.edge_count)
    return g[ids + 1] - g[tree.begin]


def subtree_sum(tree: Tree, w: np.ndarray) -> np.ndarray:
    """For every edge a, the sum of w over the subtree rooted at a."""
    w = np.asarray(w)
    acc = w.astype(object).copy() if w.dtype == object else w.astype(np.float64)
    if w.dtype == object:
        for a in range(tree.edge_count - 1, 0, -1):
            acc[tree.parent[a]] = acc[tree.parent[a]] + acc[a]
        return acc
    for ids in reversed(tree.edges_by_level[1:]):
        np.add.at(acc, tree.parent[ids], acc[ids])
    return acc


def copotential(tree: Tree, mu: Charge) -> np.ndarray:
    """Edge function a -> mass of the tent below a; forward additive."""
    mu.check_for(tree)
    w = _edge_zeros_like(tree, mu.masses)
    w[tree.leaf_edges] = mu.masses
    return subtree_sum(tree, w)


def _son_sums(tree: Tree, f: np.ndarray) -> np.ndarray:
    if f.dtype == object:
        out = np.empty(tree.edge_count, dtype=object)
        out[:] = 0
        for a in range(1, tree.edge_count):
            out[tree.parent[a]] = out[tree.parent[a]] + f[a]
        return out
    out = np.zeros(tree.edge_count, dtype=np.result_type(f, np.float64))
    if tree.edge_count > 1:
        np.add.at(out, tree.parent[1:], f[1:])
    return out


def forward_defect(tree: Tree, f: np.ndarray):
    """Largest deviation |f(a) - sum of f over the sons of a| over interior edges.

    Zero exactly when f is forward additive on the truncation; co-potentials
    of charges return 0 bit-exactly because the same summation order is used.
    """
    f = np.asarray(f)
    sums = _son_sums(tree, f)
    interior = ~tree.is_leaf
    if f.dtype == object:
        gaps = [abs(f[a] - sums[a]) for a in np.flatnonzero(interior)]
        return max(gaps) if gaps else 0
    if not interior.any():
        return 0.0
    return float(np.max(np.abs(f[interior] - sums[interior])))


def p_laplacian(tree: Tree, g: np.ndarray, p) -> np.ndarray:
    """Signed-power divergence at every vertex except the root vertex.

    Entry x = a + 1 holds sum over neighbors y of signed_pow(g(y) - g(x), p - 1).
    Entry 0 (the root vertex) is nan.  At leaf end vertices the son terms are
    structurally missing; mask with tree.is_leaf when testing harmonicity.
    """
    p = _as_exponent(p)
    flow = signed_pow(gradient(tree, g), p.p - 1.0)
    lap = np.empty(tree.vertex_count)
    lap[0] = np.nan
    lap[1:] = _son_sums(tree, flow) - flow
    return lap


def energy(tree: Tree, mu: Charge, p) -> float:
    """Sum over edges of |co-potential|^(p') for the charge mu."""
    p = _as_exponent(p)
    M = copotential(tree, mu).astype(np.float64)
    return float(np.sum(np.abs(M) ** p.p_conj))


def tail_energies(tree: Tree, M: np.ndarray, p) -> np.ndarray:
    """For every edge a, the energy sum of |M|^(p') over the subtree at a."""
    p = _as_exponent(p)
    M = np.asarray(M, dtype=np.float64)
    return subtree_sum(tree, np.abs(M) ** p.p_conj)


def mutual_energy(tree: Tree, mu: Charge, f: np.ndarray) -> float:
    """Sum over edges of f * co-potential(mu)."""
    M = copotential(tree, mu).astype(np.float64)
    return float(np.dot(np.asarray(f, dtype=np.float64), M))


def level_sums(tree: Tree, f: np.ndarray):
    """Sequence k -> sum of |f| over the edges at level k."""
    f = np.asarray(f)
    if f.dtype == object:
        return [sum(abs(f[a]) for a in ids) for ids in tree.edges_by_level]
    return np.array([np.abs(f[ids]).sum() for ids in tree.edges_by_level])
