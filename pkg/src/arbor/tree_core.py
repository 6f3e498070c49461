"""Rooted tree structures: construction, truncation, indexing, navigation.

Edges are the primary indexed objects.  The root edge has id 0, ids are
assigned breadth first with sons kept in construction order, so the sons of
any edge occupy a contiguous id range and every parent id is smaller than
its children's.  The end vertex of edge ``a`` is vertex ``a + 1``; vertex 0
is the root vertex below the root edge.  All arrays are read-only after
construction.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, NamedTuple, Optional

import numpy as np

__all__ = [
    "ParameterError",
    "StructureError",
    "Tree",
    "TreeSpec",
    "BoundarySet",
    "Ray",
    "Tent",
    "build",
    "counterexample",
    "tent",
    "geodesic_to",
    "level_counts",
    "leaves_below",
    "subtree_edges",
    "path_children",
    "spec_from_json",
    "spec_to_json",
]


class ParameterError(ValueError):
    """A generator parameter is out of range (depth, degrees, spine depth)."""


class StructureError(ValueError):
    """An explicit tree description is malformed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TreeSpec:
    """Generator-backed description of a truncated tree.

    kind is one of "homogeneous" (constant sons per edge), "spherical"
    (sons per edge constant on levels, given by ``degrees``), "explicit"
    (nested son lists) or "counterexample" (the built-in signed-charge
    demonstration tree, parametrized by ``spine_depth``).

    ``depth`` is the truncation level: edge levels run 0..depth and every
    generator-backed leaf sits at level depth (the counterexample's spine
    leaf may sit higher when depth > spine_depth).
    """

    kind: str
    degrees: tuple[int, ...] = ()
    depth: Optional[int] = None
    spine_depth: Optional[int] = None
    children: Any = None

    def resolved_depth(self) -> int:
        if self.kind == "spherical" and self.depth is None:
            return len(self.degrees)
        if self.kind == "counterexample" and self.depth is None:
            return int(self.spine_depth or 0)
        if self.kind == "explicit":
            return _nested_depth(self.children)
        if self.depth is None:
            raise ParameterError(f"depth required for kind {self.kind!r}")
        return int(self.depth)


def _nested_depth(children: Any) -> int:
    depth = 0
    frontier = list(children) if children else []
    while frontier:
        depth += 1
        frontier = [g for node in frontier for g in node]
    return depth


def path_children(length: int) -> list:
    """Nested son lists for an explicit path of ``length`` edges."""
    if length < 1:
        raise ParameterError("path length must be >= 1")
    node: list = []
    for _ in range(length - 1):
        node = [node]
    return node


@dataclass(frozen=True, eq=False)
class Tree:
    """Immutable truncated rooted tree with breadth-first edge ids."""

    parent: np.ndarray       # (E,) int64, -1 at the root edge
    begin: np.ndarray        # (E,) int64, begin vertex b(alpha); end vertex is alpha + 1
    child_start: np.ndarray  # (E,) int64, first son edge id
    child_end: np.ndarray    # (E,) int64, one past the last son edge id
    level: np.ndarray        # (E,) int64, level(root edge) = 0
    depth: int
    leaf_edges: np.ndarray   # sorted leaf edge ids
    is_leaf: np.ndarray      # (E,) bool
    edges_by_level: tuple    # edges_by_level[k] = int array of the edges at level k
    kind: str = "explicit"
    meta: dict = field(default_factory=dict)

    root_edge = 0
    root_vertex = 0

    @property
    def edge_count(self) -> int:
        return int(self.parent.size)

    @property
    def vertex_count(self) -> int:
        return int(self.parent.size) + 1

    @property
    def n_sons(self) -> np.ndarray:
        return self.child_end - self.child_start

    def sons(self, a: int) -> np.ndarray:
        return np.arange(self.child_start[a], self.child_end[a])

    def parent_edge(self, a: int) -> Optional[int]:
        p = int(self.parent[a])
        return None if p < 0 else p

    def end_vertex(self, a: int) -> int:
        return int(a) + 1

    def begin_vertex(self, a: int) -> int:
        return int(self.begin[a])

    @property
    def leaf_end_vertices(self) -> np.ndarray:
        return self.leaf_edges + 1

    @property
    def interior_vertices(self) -> np.ndarray:
        """End vertices of non-leaf edges (every vertex except o and leaf ends)."""
        return np.flatnonzero(~self.is_leaf) + 1


def _tree_from_arrays(parent: np.ndarray, level: Optional[np.ndarray],
                      kind: str, meta: Optional[dict] = None) -> Tree:
    parent = np.asarray(parent, dtype=np.int64)
    E = parent.size
    if E < 1 or parent[0] != -1:
        raise StructureError("edge 0 must be the root edge")
    ids = np.arange(E)
    if E > 1:
        body = parent[1:]
        if np.any(body < 0) or np.any(body >= ids[1:]):
            raise StructureError("parent ids must precede child ids")
        if np.any(np.diff(body) < 0):
            raise StructureError("edges must be numbered breadth first")
    if level is None:
        level = np.zeros(E, dtype=np.int64)
        for a in range(1, E):
            level[a] = level[parent[a]] + 1
    else:
        level = np.asarray(level, dtype=np.int64)
    counts = np.bincount(parent[1:], minlength=E) if E > 1 else np.zeros(E, dtype=np.int64)
    cs = np.concatenate([[0], np.cumsum(counts)])
    child_start = (1 + cs[:-1]).astype(np.int64)
    child_end = (1 + cs[1:]).astype(np.int64)
    is_leaf = counts == 0
    leaf_edges = np.flatnonzero(is_leaf)
    splits = np.searchsorted(level, np.arange(1, level[-1] + 1))
    edges_by_level = tuple(_frozen(part) for part in np.split(ids, splits))
    return Tree(
        parent=_frozen(parent),
        begin=_frozen(parent + 1),
        child_start=_frozen(child_start),
        child_end=_frozen(child_end),
        level=_frozen(level),
        depth=int(level.max()),
        leaf_edges=_frozen(leaf_edges),
        is_leaf=_frozen(is_leaf),
        edges_by_level=edges_by_level,
        kind=kind,
        meta=meta if meta is not None else {},
    )


def _build_level_regular(sons_per_level: list[int], kind: str) -> Tree:
    # sons_per_level[k] = number of sons of every level-k edge
    parents = [np.array([-1], dtype=np.int64)]
    levels = [np.zeros(1, dtype=np.int64)]
    prev_ids = np.array([0], dtype=np.int64)
    offset = 1
    for k, d in enumerate(sons_per_level):
        n = prev_ids.size * d
        parents.append(np.repeat(prev_ids, d))
        levels.append(np.full(n, k + 1, dtype=np.int64))
        prev_ids = offset + np.arange(n)
        offset += n
    return _tree_from_arrays(np.concatenate(parents), np.concatenate(levels), kind)


def build(spec: TreeSpec) -> Tree:
    """Materialize a TreeSpec as an immutable Tree."""
    kind = spec.kind
    if kind == "homogeneous":
        if not spec.degrees:
            raise ParameterError("homogeneous spec needs a degree")
        q = int(spec.degrees[0])
        depth = spec.resolved_depth()
        if q < 1 or depth < 1:
            raise ParameterError("need degree >= 1 and depth >= 1")
        return _build_level_regular([q] * depth, kind)
    if kind in ("spherical", "spherically-symmetric"):
        degrees = tuple(int(d) for d in spec.degrees)
        depth = spec.resolved_depth()
        if depth < 1:
            raise ParameterError("depth must be >= 1")
        if any(d < 1 for d in degrees):
            raise ParameterError("degrees must be >= 1")
        if len(degrees) < depth:
            raise ParameterError("degree list shorter than depth")
        return _build_level_regular(list(degrees[:depth]), "spherical")
    if kind == "explicit":
        return _build_explicit(spec.children)
    if kind == "counterexample":
        if spec.spine_depth is None:
            raise ParameterError("counterexample spec needs spine_depth")
        return counterexample(spec.spine_depth, spec.depth)[0]
    raise ParameterError(f"unknown tree kind {kind!r}")


def _build_explicit(children: Any) -> Tree:
    if children is None or not isinstance(children, (list, tuple)):
        raise StructureError("explicit spec needs nested son lists")
    parents = [-1]
    levels = [0]
    queue = deque([(0, 0, children)])
    while queue:
        eid, lvl, sons = queue.popleft()
        for sub in sons:
            if not isinstance(sub, (list, tuple)):
                raise StructureError("explicit tree nodes must be lists")
            parents.append(eid)
            levels.append(lvl + 1)
            queue.append((len(parents) - 1, lvl + 1, sub))
    return _tree_from_arrays(np.array(parents, dtype=np.int64),
                             np.array(levels, dtype=np.int64), "explicit")


def counterexample(spine_depth: int, depth: Optional[int] = None):
    """Truncation of the signed-charge demonstration tree.

    A spine of edges whose co-potential is 1 - 2^-n on the n-th spine edge;
    spine vertex n (n = 1..spine_depth) carries a branch of
    r = (n-1) * 2^(n+1) series chain edges, each subtending mass
    -2^-(n+1), feeding a dyadic subtree whose root edge also subtends
    -2^-(n+1), halving per generation.  The spine is cut after edge
    spine_depth + 1, which becomes a leaf carrying its full tent mass, so
    the co-potential stays forward additive at every interior edge.  All
    masses are exact dyadic rationals.

    Returns (tree, charge) where the charge's masses are Fractions aligned
    with ``tree.leaf_edges``.  tree.meta records the spine edge ids and,
    per off-spine leaf, the exact tail of the co-potential sum along any
    infinite continuation of the leaf's ray ("ray_tail").
    """
    from .calculus import Charge  # deferred: calculus imports tree_core

    s = int(spine_depth)
    N = s if depth is None else int(depth)
    if s < 2:
        raise ParameterError("spine_depth must be >= 2")
    if N < s:
        raise ParameterError("truncation depth must be >= spine_depth")

    def r_of(n: int) -> int:
        return (n - 1) * 2 ** (n + 1)

    # BFS over node descriptors: ("spine", n) / ("chain", n, j) / ("dy", n, k)
    parents = [-1]
    levels = [0]
    descriptors = [("spine", 1, 0)]
    queue = deque([(0, 0, ("spine", 1, 0))])
    while queue:
        eid, lvl, desc = queue.popleft()
        kind_, n, j = desc
        sons: list[tuple] = []
        if kind_ == "spine":
            if n <= s:
                head = ("chain", n, 1) if r_of(n) >= 1 else ("dy", n, 0)
                sons = [("spine", n + 1, 0), head]
        elif lvl + 1 <= N:
            if kind_ == "chain":
                sons = [("chain", n, j + 1)] if j < r_of(n) else [("dy", n, 0)]
            else:  # dyadic part
                sons = [("dy", n, j + 1), ("dy", n, j + 1)]
        for sub in sons:
            parents.append(eid)
            levels.append(lvl + 1)
            descriptors.append(sub)
            queue.append((len(parents) - 1, lvl + 1, sub))

    tree_meta: dict = {}
    tree = _tree_from_arrays(np.array(parents, dtype=np.int64),
                             np.array(levels, dtype=np.int64),
                             "counterexample", tree_meta)

    spine_edges = [e for e, d in enumerate(descriptors) if d[0] == "spine"]
    masses = np.empty(tree.leaf_edges.size, dtype=object)
    ray_tail = np.empty(tree.leaf_edges.size, dtype=object)
    branch = np.zeros(tree.leaf_edges.size, dtype=np.int64)
    for pos, leaf in enumerate(tree.leaf_edges):
        kind_, n, j = descriptors[leaf]
        if kind_ == "spine":
            masses[pos] = 1 - Fraction(1, 2 ** n)
            ray_tail[pos] = None  # the spine ray's potential diverges
            branch[pos] = 0
        elif kind_ == "chain":
            masses[pos] = -Fraction(1, 2 ** (n + 1))
            remaining = r_of(n) - j
            ray_tail[pos] = -remaining * Fraction(1, 2 ** (n + 1)) - Fraction(1, 2 ** n)
            branch[pos] = n
        else:
            masses[pos] = -Fraction(1, 2 ** (n + 1 + j))
            ray_tail[pos] = -Fraction(1, 2 ** (n + 1 + j))
            branch[pos] = n
    tree_meta["spine_edges"] = tuple(spine_edges)
    tree_meta["spine_set"] = frozenset(spine_edges)
    tree_meta["ray_tail"] = _frozen(ray_tail)
    tree_meta["leaf_branch"] = _frozen(branch)
    tree_meta["spine_depth"] = s
    return tree, Charge(masses=_frozen(masses))


@dataclass(frozen=True)
class BoundarySet:
    """A union of truncation-leaf tents, stored as the leaf edge ids."""

    members: frozenset[int]

    @classmethod
    def full(cls, tree: Tree) -> "BoundarySet":
        return cls(frozenset(int(a) for a in tree.leaf_edges))

    @classmethod
    def from_leaves(cls, tree: Tree, leaves: Iterable[int]) -> "BoundarySet":
        members = frozenset(int(a) for a in leaves)
        leaf_set = set(int(a) for a in tree.leaf_edges)
        if not members <= leaf_set:
            raise ParameterError("boundary members must be leaf edges")
        return cls(members)

    @classmethod
    def from_tent_addresses(cls, tree: Tree, addresses: Iterable[str]) -> "BoundarySet":
        """Leaves beneath the edges named by dot-paths of son indices.

        The empty address names the root edge (the full boundary).
        """
        members: set[int] = set()
        for addr in addresses:
            e = address_to_edge(tree, addr)
            members.update(int(a) for a in leaves_below(tree, e))
        return cls(frozenset(members))

    def mask(self, tree: Tree) -> np.ndarray:
        m = np.zeros(tree.edge_count, dtype=bool)
        if self.members:
            m[np.fromiter(self.members, dtype=np.int64)] = True
        return m

    def sorted_members(self) -> np.ndarray:
        return np.array(sorted(self.members), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.members)


def address_to_edge(tree: Tree, address: str) -> int:
    """Resolve a dot-path of son indices ("0.1.0") to an edge id."""
    e = 0
    text = address.strip()
    if text in ("", "root", "*"):
        return 0
    for part in text.split("."):
        sons = tree.sons(e)
        idx = int(part)
        if idx < 0 or idx >= sons.size:
            raise ParameterError(f"address {address!r} leaves the tree at {part!r}")
        e = int(sons[idx])
    return e


def subtree_edges(tree: Tree, a: int) -> np.ndarray:
    """All edge ids of the subtree rooted at edge a, in breadth-first order."""
    if a < 0 or a >= tree.edge_count:
        raise ParameterError(f"invalid edge id {a}")
    out = [np.array([a], dtype=np.int64)]
    frontier = out[0]
    while frontier.size:
        blocks = [np.arange(tree.child_start[e], tree.child_end[e]) for e in frontier]
        frontier = np.concatenate(blocks) if blocks else np.array([], dtype=np.int64)
        if frontier.size:
            out.append(frontier)
    return np.concatenate(out)


def leaves_below(tree: Tree, a: int) -> np.ndarray:
    sub = subtree_edges(tree, a)
    return sub[tree.is_leaf[sub]]


class Tent(NamedTuple):
    """Re-indexed subtree plus its full leaf set and the id map back."""

    tree: Tree
    boundary: BoundarySet
    edge_map: np.ndarray  # new edge id -> original edge id


def tent(tree: Tree, a: int) -> Tent:
    """The subtree rooted at edge a, re-indexed with a as the new root edge."""
    sub = subtree_edges(tree, a)
    inv = np.full(tree.edge_count, -1, dtype=np.int64)
    inv[sub] = np.arange(sub.size)
    new_parent = inv[tree.parent[sub]]
    new_parent[0] = -1
    new_level = tree.level[sub] - tree.level[a]
    sub_tree = _tree_from_arrays(new_parent, new_level, tree.kind)
    return Tent(sub_tree, BoundarySet.full(sub_tree), _frozen(sub.copy()))


def restrict_boundary(tree: Tree, E: BoundarySet, t: Tent) -> BoundarySet:
    """Map the members of E that lie inside the tent to tent edge ids."""
    inside = set(int(x) for x in t.edge_map) & E.members
    inv = {int(old): new for new, old in enumerate(t.edge_map)}
    return BoundarySet(frozenset(inv[m] for m in inside))


def geodesic_to(tree: Tree, a: int) -> np.ndarray:
    """Edge ids from the root edge down to a, inclusive."""
    if a < 0 or a >= tree.edge_count:
        raise ParameterError(f"invalid edge id {a}")
    chain = []
    e = int(a)
    while e >= 0:
        chain.append(e)
        e = int(tree.parent[e])
    return np.array(chain[::-1], dtype=np.int64)


def level_counts(tree: Tree) -> np.ndarray:
    return np.array([part.size for part in tree.edges_by_level], dtype=np.int64)


@dataclass(frozen=True)
class Ray:
    """A son-selection rule defining a boundary ray, stable across depths.

    ``prefix`` gives son indices taken first; after the prefix runs out the
    named rule applies ("leftmost", "rightmost", or "spine" on the
    counterexample tree).
    """

    rule: str = "leftmost"
    prefix: tuple[int, ...] = ()

    def realized_prefix(self, tree: Tree) -> np.ndarray:
        edges = [0]
        e = 0
        step = 0
        spine = tree.meta.get("spine_set") if self.rule == "spine" else None
        if self.rule == "spine" and spine is None:
            raise ParameterError("spine rays exist only on counterexample trees")
        while not tree.is_leaf[e]:
            sons = tree.sons(e)
            if step < len(self.prefix):
                idx = self.prefix[step]
                if idx < 0 or idx >= sons.size:
                    raise ParameterError(f"ray prefix leaves the tree at step {step}")
                e = int(sons[idx])
            elif self.rule == "leftmost":
                e = int(sons[0])
            elif self.rule == "rightmost":
                e = int(sons[-1])
            elif self.rule == "spine":
                on_spine = [int(x) for x in sons if int(x) in spine]
                if not on_spine:
                    raise ParameterError("spine ray lost the spine before a leaf")
                e = on_spine[0]
            else:
                raise ParameterError(f"unknown ray rule {self.rule!r}")
            edges.append(e)
            step += 1
        return np.array(edges, dtype=np.int64)


_SPEC_KEYS = ("kind", "degrees", "depth", "spine_depth", "children")


def spec_from_json(data) -> TreeSpec:
    """Parse {"kind": ..., "degrees": [...], "depth": N, ...} (dict or JSON text)."""
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if not isinstance(data, dict) or "kind" not in data:
        raise StructureError("tree spec must be an object with a 'kind' field")
    unknown = set(data) - set(_SPEC_KEYS)
    if unknown:
        raise StructureError(f"unknown tree spec fields: {sorted(unknown)}")
    return TreeSpec(
        kind=str(data["kind"]),
        degrees=tuple(int(d) for d in data.get("degrees", ()) or ()),
        depth=None if data.get("depth") is None else int(data["depth"]),
        spine_depth=None if data.get("spine_depth") is None else int(data["spine_depth"]),
        children=data.get("children"),
    )


def spec_to_json(spec: TreeSpec) -> dict:
    out: dict[str, Any] = {"kind": spec.kind}
    if spec.degrees:
        out["degrees"] = list(spec.degrees)
    if spec.depth is not None:
        out["depth"] = spec.depth
    if spec.spine_depth is not None:
        out["spine_depth"] = spec.spine_depth
    if spec.children is not None:
        out["children"] = spec.children
    return out
