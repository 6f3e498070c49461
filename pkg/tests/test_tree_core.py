"""Tree construction, indexing, and navigation.

Claims covered:
- generator examples: homogeneous q=2 depth=1 has 3 edges; spherical (3,2)
  has level counts [1,3,6]; an explicit path of length 4 has 4 edges;
- breadth-first ids are stable, sons contiguous, parents precede children;
- tent extraction is self-similar and composes;
- the counterexample generator carries exact dyadic-rational leaf masses
  whose spine co-potential values are 1/2, 3/4, 7/8, ...
"""

from fractions import Fraction

import numpy as np
import pytest

from arbor.tree_core import (
    BoundarySet,
    ParameterError,
    Ray,
    StructureError,
    TreeSpec,
    address_to_edge,
    build,
    counterexample,
    geodesic_to,
    leaves_below,
    level_counts,
    path_children,
    restrict_boundary,
    spec_from_json,
    spec_to_json,
    tent,
)

from conftest import dyadic, path, random_tree, spherical


def test_smallest_dyadic_truncation():
    t = dyadic(1)
    assert t.edge_count == 3
    assert list(t.leaf_edges) == [1, 2]
    assert list(t.level) == [0, 1, 1]
    assert list(t.sons(0)) == [1, 2]
    assert t.parent_edge(0) is None
    assert t.parent_edge(2) == 0


def test_spherical_level_counts():
    t = spherical((3, 2))
    assert list(level_counts(t)) == [1, 3, 6]
    assert t.depth == 2


def test_explicit_path():
    t = path(4)
    assert t.edge_count == 4
    assert list(t.leaf_edges) == [3]
    assert list(geodesic_to(t, 3)) == [0, 1, 2, 3]


def test_dyadic_level_counts_and_bfs_ids():
    t = dyadic(3)
    assert list(level_counts(t)) == [1, 2, 4, 8]
    assert list(dyadic(2).parent) == [-1, 0, 0, 1, 1, 2, 2]
    assert level_counts(t).sum() == t.edge_count


def test_parent_child_consistency_random():
    rng = np.random.default_rng(11)
    for _ in range(25):
        t = random_tree(rng, max_edges=200)
        for a in range(1, t.edge_count):
            assert a in t.sons(t.parent[a])
        assert level_counts(t).sum() == t.edge_count
        # levels increase by one along parent chains
        assert np.all(t.level[1:] == t.level[t.parent[1:]] + 1)


def test_geodesic_levels_strictly_increase():
    t = dyadic(5)
    for leaf in t.leaf_edges:
        g = geodesic_to(t, leaf)
        assert g.size == t.level[leaf] + 1
        assert np.all(np.diff(t.level[g]) == 1)


def test_tent_identity_and_self_similarity():
    t = dyadic(3)
    whole = tent(t, 0)
    assert whole.tree.edge_count == t.edge_count
    assert np.array_equal(whole.edge_map, np.arange(t.edge_count))

    sub = tent(t, 1)
    assert sub.tree.edge_count == 7       # dyadic of depth 2
    assert sub.tree.leaf_edges.size == 4
    assert len(sub.boundary) == 4
    assert sub.tree.depth == 2

    p = path(4)
    assert tent(p, 2).tree.edge_count == 2


def test_tent_composes():
    t = dyadic(4)
    inner = tent(t, 2)
    b = int(inner.tree.sons(0)[1])            # son of the tent root
    twice = tent(inner.tree, b)
    direct = tent(t, int(inner.edge_map[b]))
    assert np.array_equal(inner.edge_map[twice.edge_map], direct.edge_map)
    assert np.array_equal(twice.tree.parent, direct.tree.parent)


def test_boundary_sets():
    t = dyadic(3)
    full = BoundarySet.full(t)
    assert len(full) == 8
    sub = BoundarySet.from_tent_addresses(t, ["0.1"])
    e = address_to_edge(t, "0.1")
    assert sub.members == set(int(x) for x in leaves_below(t, e))
    with pytest.raises(ParameterError):
        BoundarySet.from_leaves(t, [0])
    inner = tent(t, e)
    restricted = restrict_boundary(t, sub, inner)
    assert len(restricted) == len(sub)


def test_rays():
    t = dyadic(3)
    left = Ray("leftmost").realized_prefix(t)
    right = Ray("rightmost").realized_prefix(t)
    assert list(left) == [0, 1, 3, 7]
    assert left.size == t.depth + 1
    assert t.is_leaf[left[-1]] and t.is_leaf[right[-1]]
    mixed = Ray("leftmost", prefix=(1,)).realized_prefix(t)
    assert mixed[1] == t.sons(0)[1]


def test_counterexample_structure_small():
    tree, charge = counterexample(2)
    assert tree.edge_count == 7
    assert tree.meta["spine_edges"] == (0, 1, 3)
    masses = {int(a): m for a, m in zip(tree.leaf_edges, charge.masses)}
    assert sorted(masses.values()) == [Fraction(-1, 8)] * 3 + [Fraction(7, 8)]
    assert charge.total == Fraction(1, 2)


def test_counterexample_branch_one_has_no_chain():
    tree, charge = counterexample(3)
    # son list of the first spine edge: next spine edge, then the branch head
    head = int(tree.sons(0)[1])
    assert head not in tree.meta["spine_set"]
    # branch 1 has r = 0 series repetitions: its head is the dyadic root with
    # two sons already at the next level
    assert tree.sons(head).size == 2


def test_counterexample_spine_ray():
    tree, _ = counterexample(4)
    spine = Ray("spine").realized_prefix(tree)
    assert tuple(int(a) for a in spine) == tree.meta["spine_edges"]
    assert tree.is_leaf[spine[-1]]


def test_parameter_errors():
    with pytest.raises(ParameterError):
        build(TreeSpec("homogeneous", degrees=(2,), depth=0))
    with pytest.raises(ParameterError):
        build(TreeSpec("nonsense", depth=2))
    with pytest.raises(ParameterError):
        build(TreeSpec("spherical", degrees=(3,), depth=2))
    with pytest.raises(ParameterError):
        counterexample(1)
    with pytest.raises(ParameterError):
        counterexample(4, depth=3)
    with pytest.raises(StructureError):
        build(TreeSpec("explicit", children=[["bad"]]))
    with pytest.raises(ParameterError):
        path_children(0)


def test_spec_json_round_trip():
    spec = TreeSpec("spherical", degrees=(3, 2), depth=2)
    again = spec_from_json(spec_to_json(spec))
    assert again == spec
    spec2 = TreeSpec("explicit", children=path_children(4))
    assert spec_from_json(spec_to_json(spec2)) == spec2
    with pytest.raises(StructureError):
        spec_from_json({"kind": "homogeneous", "bogus": 1})


def test_immutability():
    t = dyadic(2)
    with pytest.raises(ValueError):
        t.parent[0] = 5
    with pytest.raises(ValueError):
        t.level[1] = 9
