"""Measure norms, gradient norms, and charge recovery from leaf values."""

import numpy as np
import pytest
from pytest import approx

from arbor import (
    BoundarySet,
    Charge,
    ParameterError,
    ValidationError,
    capacity_recursive,
    capacity_via_carleson,
    carleson_norm,
    copotential,
    counterexample,
    energy,
    footnote_map,
    gram_solve,
    gradient,
    leaf_potential_values,
    potential,
    radial_variation,
    sobolev_norm,
    uniqueness_gap,
)
import arbor.sobolev_carleson as sc

from conftest import (
    dyadic,
    homogeneous,
    path,
    random_boundary,
    random_charge,
    random_tree,
)

P_GRID = (1.5, 2.0, 3.0)


# ------------------------------------------------------------ gradient norms

def test_sobolev_norm_of_constant_is_zero():
    tree = homogeneous(3, 3)
    assert sobolev_norm(tree, np.full(tree.vertex_count, 4.2), 2.0) == 0.0


def test_sobolev_norm_of_path_ramp():
    L = 6
    tree = path(L)
    ramp = np.arange(L + 1) / L
    for p in P_GRID:
        assert sobolev_norm(tree, ramp, p) == approx(L ** (1.0 - p), rel=1e-12)


def test_sobolev_norm_of_potential_equals_energy():
    rng = np.random.default_rng(5)
    for p in P_GRID:
        tree = random_tree(rng, max_edges=200)
        mu = random_charge(rng, tree, signed=True)
        g = potential(tree, footnote_map(copotential(tree, mu), p))
        assert sobolev_norm(tree, g, p) == approx(energy(tree, mu, p),
                                                  rel=1e-12)


# -------------------------------------------------------------- measure norm

def test_equilibrium_measure_norm_is_one():
    rng = np.random.default_rng(23)
    for p in P_GRID:
        tree = random_tree(rng, max_edges=250)
        E = random_boundary(rng, tree)
        res = capacity_recursive(tree, E, p)
        report = carleson_norm(tree, res.eq_measure, p)
        assert report.cm_norm == approx(1.0, abs=1e-9)
        # the sup is met at the root edge
        M = copotential(tree, res.eq_measure).astype(np.float64)
        tail = float(np.sum(np.abs(M) ** (p / (p - 1.0))))
        assert tail / M[0] >= report.cm_norm - 1e-12
        assert report.capacity_lower_bound == approx(res.capacity, rel=1e-9)


def test_point_mass_norm_counts_geodesic_edges():
    tree = dyadic(4)
    masses = np.zeros(tree.leaf_edges.size)
    masses[3] = 1.0
    for p in (1.5, 2.0):
        report = carleson_norm(tree, Charge(masses), p)
        assert report.cm_norm == approx(5.0, rel=1e-12)
        assert report.attaining_edge == 0


def test_zero_measure_norm():
    tree = dyadic(2)
    report = carleson_norm(tree, Charge(np.zeros(4)), 2.0)
    assert report.cm_norm == 0.0
    assert report.attaining_edge == -1
    assert report.capacity_lower_bound == 0.0
    assert not report.infinite


def test_measure_norm_validation():
    tree = dyadic(2)
    with pytest.raises(ValidationError):
        carleson_norm(tree, Charge(np.array([1.0, -0.5, 0.0, 0.0])), 2.0)
    with pytest.raises(ValidationError):
        carleson_norm(tree, Charge(np.ones(3)), 2.0)


# -------------------------------------------------- capacity from the bounds

def test_equilibrium_candidate_recovers_capacity():
    rng = np.random.default_rng(41)
    for p in P_GRID:
        tree = random_tree(rng, max_edges=250)
        E = random_boundary(rng, tree)
        res = capacity_recursive(tree, E, p)
        got = capacity_via_carleson(tree, E, p, [res.eq_measure])
        assert got == approx(res.capacity, rel=1e-9)


def test_random_candidates_stay_below_capacity():
    rng = np.random.default_rng(43)
    for p in P_GRID:
        tree = random_tree(rng, max_edges=200)
        E = random_boundary(rng, tree)
        cap = capacity_recursive(tree, E, p).capacity
        cands = [random_charge(rng, tree, boundary=E) for _ in range(8)]
        best = capacity_via_carleson(tree, E, p, cands)
        assert 0.0 <= best <= cap * (1.0 + 1e-9) + 1e-15


def test_candidate_support_and_empty_list():
    tree = dyadic(3)
    E = BoundarySet.from_leaves(tree, tree.leaf_edges[:4])
    assert capacity_via_carleson(tree, E, 2.0, []) == 0.0
    stray = np.zeros(tree.leaf_edges.size)
    stray[-1] = 1.0
    with pytest.raises(ValidationError):
        capacity_via_carleson(tree, E, 2.0, [Charge(stray)])


# ----------------------------------------------------------- radial variation

def test_radial_variation_monotone_and_bounded():
    rng = np.random.default_rng(59)
    tree = random_tree(rng, max_edges=150)
    g = rng.normal(size=tree.vertex_count)
    depth = len(tree.edges_by_level) - 1
    prev = np.zeros(tree.vertex_count)
    for n in range(depth + 1):
        cur = radial_variation(tree, g, n)
        assert np.all(cur >= prev - 1e-15)
        for p in P_GRID:
            assert sobolev_norm(tree, cur, p) <= sobolev_norm(tree, g, p) + 1e-12
        prev = cur


def test_radial_variation_of_monotone_function():
    rng = np.random.default_rng(61)
    tree = random_tree(rng, max_edges=120)
    g = potential(tree, rng.uniform(0.1, 1.0, size=tree.edge_count))
    depth = len(tree.edges_by_level) - 1
    assert np.allclose(radial_variation(tree, g, depth), g, atol=1e-14)


def test_radial_variation_oscillating_path():
    L = 7
    tree = path(L)
    drops = np.array([(-1.0) ** k for k in range(L)])
    g = potential(tree, drops)
    assert set(np.unique(g)) == {0.0, 1.0}
    star = radial_variation(tree, g, L - 1)
    assert np.array_equal(star, np.arange(L + 1, dtype=float))
    base = radial_variation(tree, g, 0)
    assert np.array_equal(base, np.array([0.0] + [1.0] * L))
    with pytest.raises(ParameterError):
        radial_variation(tree, g, L)
    with pytest.raises(ParameterError):
        radial_variation(tree, g, -1)


# ------------------------------------------------------------ charge recovery

def test_gram_round_trip_random_charges():
    rng = np.random.default_rng(71)
    for _ in range(6):
        tree = random_tree(rng, max_edges=250)
        mu = random_charge(rng, tree, signed=True)
        values = leaf_potential_values(tree, mu)
        got = gram_solve(tree, values)
        assert np.max(np.abs(got.masses - mu.masses)) < 1e-9


def test_gram_path_closed_form():
    tree = path(4)
    got = gram_solve(tree, np.array([2.0]))
    assert got.masses == approx([0.5], abs=1e-12)


def test_gram_both_routes_agree(monkeypatch):
    rng = np.random.default_rng(73)
    tree = random_tree(rng, max_edges=200)
    mu = random_charge(rng, tree, signed=True)
    values = leaf_potential_values(tree, mu)
    dense = gram_solve(tree, values)
    monkeypatch.setattr(sc, "_DENSE_LEAVES", -1)   # force elimination
    swept = gram_solve(tree, values)
    assert np.max(np.abs(dense.masses - swept.masses)) < 1e-10


def test_gram_large_tree_uses_elimination():
    tree = dyadic(13)                # 8192 leaves, beyond the dense cutoff
    rng = np.random.default_rng(79)
    mu = Charge(rng.normal(size=tree.leaf_edges.size))
    got = gram_solve(tree, leaf_potential_values(tree, mu))
    assert np.max(np.abs(got.masses - mu.masses)) < 1e-9


def test_gram_counterexample_reproduces_exact_charge():
    tree, charge = counterexample(3)
    values = leaf_potential_values(tree, charge)     # exact rationals
    got = gram_solve(tree, np.array([float(v) for v in values]))
    want = np.array([float(m) for m in charge.masses])
    assert np.max(np.abs(got.masses - want)) < 1e-9
    zero = gram_solve(tree, np.zeros(tree.leaf_edges.size))
    assert np.max(np.abs(zero.masses)) < 1e-12


def test_gram_input_validation():
    tree = dyadic(2)
    leaves = [int(a) for a in tree.leaf_edges]
    full = {a: 1.0 for a in leaves}
    assert gram_solve(tree, full).masses.shape == (4,)
    with pytest.raises(ValidationError):
        gram_solve(tree, {leaves[0]: 1.0})
    with pytest.raises(ValidationError):
        gram_solve(tree, {**full, 0: 1.0})
    with pytest.raises(ValidationError):
        gram_solve(tree, np.ones(3))
    with pytest.raises(ValidationError):
        gram_solve(tree, np.array([1.0, np.inf, 0.0, 0.0]))


# ------------------------------------------------------------ uniqueness gap

def test_uniqueness_gap_sign_and_zero():
    rng = np.random.default_rng(83)
    for p in P_GRID:
        tree = random_tree(rng, max_edges=200)
        mu = random_charge(rng, tree, signed=True)
        nu = random_charge(rng, tree, signed=True)
        gap = uniqueness_gap(tree, mu, nu, p)
        assert gap > 0.0
        assert uniqueness_gap(tree, mu, mu, p) == 0.0
        assert uniqueness_gap(tree, nu, mu, p) == approx(gap, rel=1e-12)


def test_uniqueness_gap_detects_any_difference():
    rng = np.random.default_rng(89)
    tree = random_tree(rng, max_edges=100)
    mu = random_charge(rng, tree)
    bumped = mu.masses.copy()
    bumped[0] += 1e-6
    assert uniqueness_gap(tree, mu, Charge(bumped), 1.5) > 0.0
