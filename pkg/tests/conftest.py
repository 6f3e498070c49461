"""Shared builders for randomized trees, boundary sets, and charges."""

from __future__ import annotations

import numpy as np

from arbor.tree_core import BoundarySet, Tree, TreeSpec, build, path_children
from arbor.calculus import Charge


def dyadic(depth: int) -> Tree:
    return build(TreeSpec("homogeneous", degrees=(2,), depth=depth))


def homogeneous(q: int, depth: int) -> Tree:
    return build(TreeSpec("homogeneous", degrees=(q,), depth=depth))


def path(length: int) -> Tree:
    return build(TreeSpec("explicit", children=path_children(length)))


def spherical(degrees) -> Tree:
    return build(TreeSpec("spherical", degrees=tuple(degrees)))


def random_tree_spec(rng: np.random.Generator, max_edges: int = 400,
                     min_depth: int = 2) -> TreeSpec:
    """Random explicit tree, breadth-first growth under an edge budget.

    Interior growth keeps at least one son per edge until min_depth so the
    tree is never trivially shallow; beyond that, edges may become leaves.
    """
    budget = int(rng.integers(min_depth + 2, max_edges + 1))
    counter = [1]  # edges used; the root edge is spent already

    def grow(level: int) -> list:
        sons = []
        if counter[0] >= budget:
            return sons
        if level < min_depth:
            k = int(rng.integers(1, 4))
        else:
            k = int(rng.choice([0, 0, 1, 1, 2, 2, 3]))
        for _ in range(k):
            if counter[0] >= budget:
                break
            counter[0] += 1
            sons.append(None)  # placeholder; filled below to keep BFS-ish sizes
        return [grow(level + 1) for _ in sons]

    return TreeSpec("explicit", children=grow(0))


def random_tree(rng: np.random.Generator, max_edges: int = 400,
                min_depth: int = 2) -> Tree:
    return build(random_tree_spec(rng, max_edges, min_depth))


def random_boundary(rng: np.random.Generator, tree: Tree,
                    allow_empty: bool = False) -> BoundarySet:
    leaves = tree.leaf_edges
    keep = rng.random(leaves.size) < rng.uniform(0.2, 0.9)
    if not allow_empty and not keep.any():
        keep[rng.integers(0, leaves.size)] = True
    return BoundarySet(frozenset(int(a) for a in leaves[keep]))


def random_charge(rng: np.random.Generator, tree: Tree,
                  boundary: BoundarySet | None = None,
                  signed: bool = False) -> Charge:
    masses = rng.exponential(1.0, size=tree.leaf_edges.size)
    if signed:
        masses *= rng.choice([-1.0, 1.0], size=masses.size)
    if boundary is not None:
        mask = np.isin(tree.leaf_edges, boundary.sorted_members())
        masses = np.where(mask, masses, 0.0)
    return Charge(masses=masses)
