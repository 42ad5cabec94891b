from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from randexp.base import BaseEnvironment, RandomScalar, advance, sample_base
from randexp.fiber import CircleAffine, FiberSystem, SymbolicPoint
from randexp.measures import (
    AlphabetBoundWarning,
    Atomic,
    CylinderProduct,
    GridDensity,
    IncompatibleMeasures,
    ProductRule,
    cylinder_mass,
    grid_disintegration,
    lebesgue,
    max_cylinder_mass,
    measure_distance,
    pullback_measure,
    push_forward,
    sample_fiber,
    skewed_product,
    uniform_product,
)

K2 = RandomScalar.constant(2)


@pytest.fixture
def w0():
    return sample_base(BaseEnvironment.singleton(), 1, 0)[0]


def test_uniform_binary_cylinder(w0):
    mu = uniform_product(K2).at(w0)
    assert cylinder_mass(mu, (1, 2, 1)) == Fraction(1, 8)
    assert cylinder_mass(mu, ()) == 1


def test_mixed_alphabet_product(fair, k23):
    w = next(w for w in sample_base(fair, 200, 3) if w.window(0, 3) == (0, 1, 0))
    mu = uniform_product(k23).at(w)
    assert cylinder_mass(mu, (1, 3, 2)) == Fraction(1, 12)
    assert sum(mu.word_distribution(3).values()) == 1
    assert len(mu.word_distribution(3)) == 12


def test_symbol_out_of_range_has_no_mass(w0):
    mu = uniform_product(K2).at(w0)
    with pytest.warns(AlphabetBoundWarning):
        assert cylinder_mass(mu, (3,)) == 0


def test_identity_pushforward_keeps_measure():
    g = GridDensity.uniform_grid("circle", [Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)])
    out = push_forward(g, CircleAffine(1, 0), None)
    assert measure_distance(g, out, "tv-grid") == 0


def test_doubling_keeps_lebesgue():
    g = GridDensity.uniform_grid("circle", [Fraction(1, 8)] * 8)
    out = push_forward(g, CircleAffine(2, 0), None)
    assert measure_distance(out, g, "tv-grid") == 0
    assert out.total_mass() == 1


def test_tripling_refines_and_keeps_lebesgue():
    g = GridDensity.uniform_grid("circle", [Fraction(1, 4)] * 4)
    out = push_forward(g, CircleAffine(3, 0), None)
    assert measure_distance(out, g, "tv-grid") == 0


def test_doubling_non_invariant_grid_is_preimage_average():
    g = GridDensity.uniform_grid("circle", [Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)])
    out = push_forward(g, CircleAffine(2, 0), None)
    # image cell [j/4, (j+1)/4) receives half of cells j//2... brute sum over cells
    expected = [Fraction(0)] * 4
    for i, m in enumerate(g.weights):
        lo = Fraction(i, 4)
        for half in (0, 1):
            y = (2 * (lo + Fraction(half, 8))) % 1
            expected[int(y * 4)] += m / 2
    assert [out.interval_mass(Fraction(j, 4), Fraction(j + 1, 4)) for j in range(4)] == expected


def test_shift_pushforward_of_uniform_product(fair, k23):
    sys = FiberSystem.shift(k23)
    dis = uniform_product(k23)
    for w in sample_base(fair, 10, 8):
        pushed = pullback_measure(sys, w, dis.at(advance(w, -1)))
        assert pushed.word_distribution(4) == dis.at(w).word_distribution(4)


def test_pushforward_preserves_total_mass(fair, k23):
    sys = FiberSystem.shift(k23)
    dis = skewed_product(k23)
    w = sample_base(fair, 1, 1)[0]
    pushed = pullback_measure(sys, w, dis.at(advance(w, -1)))
    assert sum(pushed.word_distribution(5).values()) == 1


def test_pushforward_to_wrong_fiber_rejected(fair, k23):
    w = sample_base(fair, 1, 1)[0]
    mu = uniform_product(k23).at(w)
    from randexp.fiber import Shift
    with pytest.raises(IncompatibleMeasures):
        push_forward(mu, Shift(), advance(w, 2))


def test_distance_of_equal_measures(w0):
    mu = uniform_product(K2).at(w0)
    assert measure_distance(mu, mu, "tv-cylinder", 5) == 0


def test_wasserstein_point_masses():
    a, b = Atomic.dirac(Fraction(0)), Atomic.dirac(Fraction(1, 2))
    assert measure_distance(a, b, "wasserstein-1d") == pytest.approx(0.5)


def test_tv_uniform_vs_skewed_depth_one(w0):
    u = uniform_product(K2).at(w0)
    s = CylinderProduct(ProductRule("skewed", head=Fraction(3, 4)), w0, K2)
    assert measure_distance(u, s, "tv-cylinder", 1) == Fraction(1, 4)


def test_tv_cylinder_rejects_grid():
    with pytest.raises(IncompatibleMeasures):
        measure_distance(GridDensity.lebesgue("circle"), GridDensity.lebesgue("circle"), "tv-cylinder", 2)


def test_atomic_sampling():
    assert sample_fiber(Atomic.dirac(Fraction(1, 3)), 5, 0) == [Fraction(1, 3)] * 5


def test_product_sampling_frequency(w0):
    pts = sample_fiber(uniform_product(K2).at(w0), 10000, 4, depth=4)
    assert abs(np.mean([p.coord(0) == 1 for p in pts]) - 0.5) < 0.02
    assert all(isinstance(p, SymbolicPoint) for p in pts[:10])


def test_grid_sampling_frequency():
    pts = sample_fiber(GridDensity.uniform_grid("circle", [Fraction(1, 4)] * 4), 10000, 5)
    counts = np.bincount([int(p * 4) for p in pts], minlength=4) / 10000
    assert np.all(np.abs(counts - 0.25) < 0.02)


def test_sampling_deterministic():
    g = GridDensity.lebesgue("circle")
    assert sample_fiber(g, 7, 3) == sample_fiber(g, 7, 3)


def test_product_cylinder_masses_sum_to_one(fair, k23):
    for w in sample_base(fair, 50, 12):
        mu = uniform_product(k23).at(w)
        for n in (1, 5, 12):
            # exact sum, grouped by value
            counts = Counter(mu.word_distribution(n).values())
            assert sum(m * c for m, c in counts.items()) == 1


def test_max_cylinder_mass_geometric(fair, k23):
    w = sample_base(fair, 1, 2)[0]
    mu = skewed_product(k23).at(w)
    p = max(max(mu.vector(i)) for i in range(12))
    for n in range(1, 13):
        assert max_cylinder_mass(mu, n) <= p ** n
    for n in range(1, 9):
        assert max(mu.word_distribution(n).values()) == max_cylinder_mass(mu, n)


def test_grid_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        grid_disintegration("circle", [Fraction(1, 2), Fraction(1, 4)])


def test_lebesgue_total_mass():
    assert lebesgue("interval").at(None).total_mass() == 1
