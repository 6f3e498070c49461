"""Discrete calculus: potentials, gradients, co-potentials, energies.

Claims covered:
- potential/gradient are exact inverses (bit-exact on dyadic-rational and
  Fraction inputs, ulp-level on generic floats);
- co-potentials are forward additive with defect exactly zero;
- the counterexample spine carries co-potential 1/2, 3/4, 7/8 exactly;
- signed powers and the conjugate footnote map satisfy their sign and
  involution laws;
- the p-Laplacian of the potential of a footnote-mapped forward-additive
  function vanishes at interior vertices, and only there;
- frozen energies: uniform dyadic depth-3 charge has 2-energy 15/8; a unit
  mass on the single leaf of a length-L path has 2-energy L.
"""

from fractions import Fraction

import numpy as np
import pytest
from pytest import approx

from arbor.calculus import (
    Charge,
    Exponent,
    ValidationError,
    copotential,
    energy,
    footnote_map,
    forward_defect,
    gradient,
    level_sums,
    mutual_energy,
    p_laplacian,
    potential,
    signed_pow,
    subtree_sum,
    tail_energies,
)
from arbor.tree_core import ParameterError, counterexample

from conftest import dyadic, path, random_charge, random_tree


def _fraction_array(rng, n, denom_bits=8, num_range=64):
    out = np.empty(n, dtype=object)
    nums = rng.integers(-num_range, num_range + 1, size=n)
    dens = 2 ** rng.integers(0, denom_bits, size=n)
    out[:] = [Fraction(int(a), int(b)) for a, b in zip(nums, dens)]
    return out


def test_exponent():
    p = Exponent.of(1.5)
    assert p.p_conj == approx(3.0)
    assert 1 / p.p + 1 / p.p_conj == approx(1.0, abs=1e-15)
    assert p.dual().p == approx(3.0)
    with pytest.raises(ParameterError):
        Exponent.of(1.0)


def test_potential_examples():
    t = path(3)
    f = np.ones(3)
    assert list(potential(t, f)) == [0, 1, 2, 3]
    # two-edge geodesics, f = 2^-(level+1): boundary value 1/2 + 1/4
    t2 = dyadic(1)
    f2 = 0.5 ** (t2.level + 1.0)
    v = potential(t2, f2)
    assert v[t2.leaf_end_vertices] == approx(0.75)
    assert potential(t2, np.zeros(3)) == approx(np.zeros(4))


def test_gradient_examples():
    t = path(4)
    g = np.arange(5.0)  # level of the end vertex
    assert gradient(t, g) == approx(np.ones(4))
    assert gradient(t, np.full(5, 3.3)) == approx(np.zeros(4))


def test_round_trips_exact_on_fractions():
    rng = np.random.default_rng(5)
    for _ in range(20):
        t = random_tree(rng, max_edges=120)
        f = _fraction_array(rng, t.edge_count)
        v = potential(t, f)
        assert all(x == y for x, y in zip(gradient(t, v), f))
        g = _fraction_array(rng, t.vertex_count)
        w = potential(t, gradient(t, g))
        assert all(w[i] + g[0] == g[i] for i in range(t.vertex_count))


def test_round_trips_float():
    rng = np.random.default_rng(6)
    for _ in range(20):
        t = random_tree(rng, max_edges=300)
        f = rng.standard_normal(t.edge_count)
        assert gradient(t, potential(t, f)) == approx(f, rel=1e-12, abs=1e-12)
        g = rng.standard_normal(t.vertex_count)
        assert potential(t, gradient(t, g)) + g[0] == approx(g, rel=1e-12, abs=1e-12)


def test_copotential_path_and_dyadic():
    t = path(5)
    mu = Charge.point(t, int(t.leaf_edges[0]))
    assert copotential(t, mu) == approx(np.ones(5))

    t2 = dyadic(4)
    M = copotential(t2, Charge.uniform(t2))
    assert M == approx(0.5 ** t2.level.astype(float))


def test_copotential_forward_defect_is_zero_bitexact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        t = random_tree(rng, max_edges=300)
        M = copotential(t, random_charge(rng, t, signed=True))
        assert forward_defect(t, M) == 0.0


def test_forward_defect_of_ones_on_dyadic():
    t = dyadic(3)
    assert forward_defect(t, np.ones(t.edge_count)) == approx(1.0)


def test_counterexample_spine_copotential_exact():
    tree, charge = counterexample(4)
    M = copotential(tree, charge)
    spine = tree.meta["spine_edges"]
    for n, e in enumerate(spine, start=1):
        assert M[e] == 1 - Fraction(1, 2 ** n)
    assert forward_defect(tree, M) == 0


def test_signed_pow():
    assert signed_pow(-8.0, 1 / 3) == approx(-2.0)
    assert signed_pow(0.0, 0.37) == 0.0
    assert signed_pow(-2.0, 2.0) == approx(-4.0)
    a = np.array([-3.0, 0.0, 3.0])
    assert signed_pow(a, 2.0) == approx([-9.0, 0.0, 9.0])
    with pytest.raises(ParameterError):
        signed_pow(1.0, 0.0)
    # difference of signed powers has the sign of the argument difference
    rng = np.random.default_rng(8)
    for s in (0.5, 1.0, 2.0, 3.7):
        x, y = rng.standard_normal(50), rng.standard_normal(50)
        d = signed_pow(x, s) - signed_pow(y, s)
        assert np.all(np.sign(d) == np.sign(x - y))


def test_footnote_map():
    f = np.array([1.0, -4.0, 0.25])
    assert footnote_map(f, 2.0) == approx(f)
    assert footnote_map(np.array([8.0]), 3.0) == approx([8.0 ** 0.5])
    rng = np.random.default_rng(9)
    for p in (1.5, 2.0, 3.0, 4.5):
        ex = Exponent.of(p)
        g = rng.standard_normal(40)
        assert footnote_map(footnote_map(g, ex), ex.dual()) == approx(g, rel=1e-12)


def test_p_laplacian_constant_and_interior_harmonicity():
    t = dyadic(3)
    lap = p_laplacian(t, np.full(t.vertex_count, 2.5), 3.0)
    assert lap[1:] == approx(np.zeros(t.edge_count))

    rng = np.random.default_rng(10)
    for p in (1.5, 2.0, 3.0):
        tr = random_tree(rng, max_edges=200)
        M = copotential(tr, random_charge(rng, tr, signed=True))
        g = potential(tr, footnote_map(M, p))
        lap = p_laplacian(tr, g, p)
        interior = lap[tr.interior_vertices]
        # fractional-power round trips cost a few ulp at the scale of M
        tol = 1e-12 * max(1.0, float(np.abs(M).max()))
        assert interior == approx(np.zeros(interior.size), abs=tol)


def test_p_laplacian_detects_non_additive():
    t = dyadic(2)
    f = np.ones(t.edge_count)  # not forward additive
    for p in (1.5, 2.0, 3.0):
        g = potential(t, footnote_map(f, p))
        lap = p_laplacian(t, g, p)
        assert np.max(np.abs(lap[t.interior_vertices])) > 0.1


def test_energy_frozen_values():
    t = dyadic(3)
    assert energy(t, Charge.uniform(t), 2.0) == approx(15 / 8)
    L = 6
    tp = path(L)
    assert energy(tp, Charge.point(tp, int(tp.leaf_edges[0])), 2.0) == approx(L)
    assert energy(t, Charge.zero(t), 2.7) == 0.0


def test_mutual_energy_matches_energy():
    rng = np.random.default_rng(12)
    for p in (1.5, 2.0, 3.0):
        ex = Exponent.of(p)
        for _ in range(10):
            t = random_tree(rng, max_edges=250)
            mu = random_charge(rng, t, signed=True)
            M = copotential(t, mu)
            assert mutual_energy(t, mu, footnote_map(M, ex)) == approx(
                energy(t, mu, ex), rel=1e-12)
    t = dyadic(3)
    ind = np.zeros(t.edge_count)
    ind[0] = 1.0
    assert mutual_energy(t, Charge.uniform(t), ind) == approx(1.0)
    assert mutual_energy(t, Charge.uniform(t), np.zeros(t.edge_count)) == 0.0


def test_level_sums():
    t = dyadic(3)
    M = copotential(t, Charge.uniform(t))
    assert level_sums(t, M) == approx(np.ones(4))
    assert level_sums(t, np.ones(t.edge_count)) == approx([1, 2, 4, 8])
    # forward additive implies non-decreasing level sums (all leaves deepest)
    rng = np.random.default_rng(13)
    tree, charge = counterexample(5)
    Mx = copotential(tree, charge)
    seq = level_sums(tree, Mx)
    assert all(a <= b for a, b in zip(seq, seq[1:]))
    for _ in range(5):
        t2 = dyadic(4)
        M2 = copotential(t2, random_charge(rng, t2, signed=True))
        s2 = level_sums(t2, M2)
        assert np.all(np.diff(s2) >= -1e-12)


def test_tail_energies_and_subtree_sum():
    t = dyadic(3)
    mu = Charge.uniform(t)
    M = copotential(t, mu)
    tails = tail_energies(t, M, 2.0)
    assert tails[0] == approx(energy(t, mu, 2.0))
    ones = subtree_sum(t, np.ones(t.edge_count))
    assert ones[0] == t.edge_count


def test_charge_validation():
    t = dyadic(2)
    with pytest.raises(ValidationError):
        Charge.point(t, 0)
    with pytest.raises(ValidationError):
        Charge.from_map(t, {0: 1.0})
    with pytest.raises(ValidationError):
        copotential(t, Charge(np.ones(3)))
