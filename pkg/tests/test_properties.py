"""Property tests for the structural invariants of the skew product and its measures."""

from fractions import Fraction

from hypothesis import assume, given
from hypothesis import strategies as st

from randexp.base import BaseEnvironment, BasePoint, RandomScalar, advance, eval_scalar, sample_base
from randexp.expansivity import expansive_diagnostic
from randexp.fiber import (
    FiberSpace,
    FiberSystem,
    SymbolicPoint,
    circle_distance,
    cocycle_apply,
    fiber_distance,
    symbolic_distance,
)
from randexp.gamma import bowen_membership, gamma_approx, gamma_mass
from randexp.measures import GridDensity, Mixture, lebesgue, skewed_product, uniform_product

FAIR = BaseEnvironment.bernoulli([Fraction(1, 2), Fraction(1, 2)])
K23 = RandomScalar.symbol_table({0: 2, 1: 3})

seeds = st.integers(0, 2 ** 62)
shifts = st.integers(-64, 64)
unit = st.fractions(0, 1, max_denominator=997).filter(lambda x: x < 1)
symbols = st.lists(st.integers(1, 3), max_size=8)
sym_points = st.builds(SymbolicPoint, symbols, st.lists(st.integers(1, 3), min_size=1, max_size=3))


def base_point(seed, offset=0):
    return BasePoint(FAIR, seed, offset)


# --------------------------------------------------------------------------- base


@given(seeds, shifts, shifts)
def test_group_action(seed, a, b):
    w = base_point(seed)
    assert advance(advance(w, a), b) == advance(w, a + b)
    assert advance(w, a).symbol(b) == w.symbol(a + b)


@given(st.integers(1, 12), shifts, shifts)
def test_rotation_base_is_periodic(m, a, b):
    env = BaseEnvironment.rotation(m)
    w = BasePoint(env, 0, a % m)
    assert advance(w, b + m) == advance(w, b)


@given(seeds, st.integers(-8, 8))
def test_half_radius(seed, k):
    w = base_point(seed)
    delta = RandomScalar.symbol_table({0: Fraction(1, 4), 1: Fraction(1, 9)})
    assert eval_scalar(delta.scaled(Fraction(1, 2)), w, k) == eval_scalar(delta, w, k) / 2


# --------------------------------------------------------------------------- cocycle


@given(seeds, st.integers(0, 10), st.integers(0, 10), sym_points)
def test_cocycle_symbolic(seed, n, m, x):
    sys = FiberSystem.shift(K23)
    w = base_point(seed)
    lhs = cocycle_apply(sys, w, x, n + m)
    rhs = cocycle_apply(sys, advance(w, n), cocycle_apply(sys, w, x, n), m)
    assert lhs.word(12) == rhs.word(12)


@given(seeds, st.integers(0, 10), st.integers(0, 10), unit)
def test_cocycle_expanding_exact(seed, n, m, x):
    sys = FiberSystem.expanding_circle(K23)
    w = base_point(seed)
    assert cocycle_apply(sys, w, x, n + m) == cocycle_apply(sys, advance(w, n), cocycle_apply(sys, w, x, n), m)


@given(seeds, st.integers(-10, 10), st.integers(-10, 10), st.floats(0, 1, exclude_max=True))
def test_cocycle_rotation(seed, n, m, x):
    sys = FiberSystem.rotation(RandomScalar.symbol_table({0: 0.41421356237309515, 1: 0.6180339887498949}))
    w = base_point(seed)
    lhs = cocycle_apply(sys, w, x, n + m)
    rhs = cocycle_apply(sys, advance(w, n), cocycle_apply(sys, w, x, n), m)
    assert circle_distance(lhs, rhs) <= 1e-10


@given(seeds, st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.integers(0, 20))
def test_rotation_is_isometric(seed, x, y, n):
    sys = FiberSystem.rotation(RandomScalar.constant(0.6180339887498949))
    w = base_point(seed)
    fx, fy = cocycle_apply(sys, w, x, n), cocycle_apply(sys, w, y, n)
    assert abs(circle_distance(fx, fy) - circle_distance(x, y)) <= 1e-10


# --------------------------------------------------------------------------- distance


@given(sym_points, sym_points, sym_points)
def test_symbolic_metric(x, y, z):
    dxy = symbolic_distance(x, y)
    assert 0 <= dxy < 2
    assert dxy == symbolic_distance(y, x)
    assert (dxy == 0) == (x.word(40) == y.word(40))
    assert symbolic_distance(x, z) <= dxy + symbolic_distance(y, z)


@given(sym_points, sym_points)
def test_symbolic_first_difference_bounds(x, y):
    i = next((j for j in range(40) if x.coord(j) != y.coord(j)), None)
    assume(i is not None)
    d = symbolic_distance(x, y)
    a, b = x.coord(i), y.coord(i)
    assert d >= Fraction(abs(a - b), a * b) / 2 ** i
    assert d <= Fraction(2, 2 ** i)
    lo, up = fiber_distance(FiberSpace.symbolic(RandomScalar.constant(3)), x, y, tail_depth=10)
    assert lo <= d <= up


# --------------------------------------------------------------------------- measures


@given(seeds, st.integers(0, 6))
def test_product_masses_sum_to_one(seed, depth):
    w = base_point(seed)
    for dis in (uniform_product(K23), skewed_product(K23)):
        assert sum(dis.at(w).word_distribution(depth).values()) == 1


@given(seeds, st.lists(st.integers(1, 2), max_size=6))
def test_cylinder_mass_conservation(seed, word):
    w = base_point(seed)
    mu = skewed_product(K23).at(w)
    k = FiberSpace.symbolic(K23).bound(w, len(word))
    word = tuple(word)
    assert sum(mu.cylinder_mass(word + (s,)) for s in range(1, k + 1)) == mu.cylinder_mass(word)


@given(unit, unit)
def test_grid_interval_additivity(a, b):
    a, b = sorted((a, b))
    mu = GridDensity.uniform_grid("circle", [Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)])
    mid = (a + b) / 2
    assert mu.interval_mass(a, mid) + mu.interval_mass(mid, b) == mu.interval_mass(a, b)
    assert mu.interval_mass(0, 1) == 1


@given(seeds, st.fractions(0, 1, max_denominator=50), st.lists(st.integers(1, 2), max_size=5))
def test_mixture_is_convex(seed, p, word):
    w = base_point(seed)
    mu, nu = uniform_product(K23).at(w), skewed_product(K23).at(w)
    mix = Mixture.of([(p, mu), (1 - p, nu)])
    assert mix.cylinder_mass(tuple(word)) == p * mu.cylinder_mass(tuple(word)) + (1 - p) * nu.cylinder_mass(tuple(word))


@given(seeds, st.fractions(Fraction(1, 50), Fraction(49, 50), max_denominator=50), unit)
def test_mixture_gamma_bracket_is_convex(seed, p, x):
    sys = FiberSystem.expanding_circle(K23)
    w = base_point(seed)
    leb = lebesgue("circle").at(w)
    grid = GridDensity.uniform_grid("circle", [Fraction(1, 8), Fraction(3, 8), Fraction(3, 8), Fraction(1, 8)])
    g = gamma_approx(sys, w, x, RandomScalar.constant(Fraction(1, 20)), 5)
    a, b = gamma_mass(leb, g), gamma_mass(grid, g)
    mix = gamma_mass(Mixture.of([(p, leb), (1 - p, grid)]), g)
    assert mix == (p * a[0] + (1 - p) * b[0], p * a[1] + (1 - p) * b[1])


# --------------------------------------------------------------------------- Gamma sets


@given(seeds, sym_points, st.integers(1, 8))
def test_center_in_symbolic_ball(seed, x, n):
    sys = FiberSystem.shift(K23)
    w = base_point(seed)
    assume(sys.space.contains(w, x))
    assert bowen_membership(sys, w, x, x, K23.map(lambda k: Fraction(1, k * k)), n) == "in"


@given(seeds, unit, st.integers(1, 8))
def test_center_in_circle_ball(seed, x, n):
    sys = FiberSystem.expanding_circle(K23)
    w = base_point(seed)
    g = gamma_approx(sys, w, x, RandomScalar.constant(Fraction(1, 20)), n)
    assert g.classify(x) == "in"


@given(seeds, sym_points, st.integers(1, 7))
def test_symbolic_bracket_ordered_and_nested(seed, x, n):
    sys = FiberSystem.shift(K23)
    w = base_point(seed)
    assume(sys.space.contains(w, x))
    mu = uniform_product(K23).at(w)
    delta = K23.map(lambda k: Fraction(1, k * k))
    lo, up = gamma_mass(mu, gamma_approx(sys, w, x, delta, n))
    lo2, up2 = gamma_mass(mu, gamma_approx(sys, w, x, delta, n + 1))
    assert 0 <= lo <= up <= 1
    assert lo2 <= up


@given(seeds, unit, st.integers(1, 8))
def test_circle_balls_nested(seed, x, n):
    sys = FiberSystem.expanding_circle(K23)
    w = base_point(seed)
    delta = RandomScalar.constant(Fraction(1, 20))
    a = gamma_approx(sys, w, x, delta, n)
    b = gamma_approx(sys, w, x, delta, n + 1)
    assert b.total_length() <= a.total_length()
    for lo, hi in b.arcs:
        assert a.classify((lo + hi) / 2) == "in"


@given(seeds, unit, st.fractions(Fraction(1, 100), Fraction(1, 4), max_denominator=100),
       st.fractions(Fraction(1, 100), Fraction(1, 4), max_denominator=100), st.integers(1, 6))
def test_radius_monotone(seed, x, r1, r2, n):
    r1, r2 = sorted((r1, r2))
    sys = FiberSystem.expanding_circle(K23)
    w = base_point(seed)
    mu = lebesgue("circle").at(w)
    small = gamma_mass(mu, gamma_approx(sys, w, x, RandomScalar.constant(r1), n))
    large = gamma_mass(mu, gamma_approx(sys, w, x, RandomScalar.constant(r2), n))
    assert small[0] <= large[1]


# --------------------------------------------------------------------------- reductions


@given(st.integers(0, 1000))
def test_singleton_drive_matches_fixed_map(seed):
    # symbol 1 of the rotation/doubling mix is the doubling map
    mixed = FiberSystem.mixed({0: FiberSystem.rotation(RandomScalar.constant(Fraction(1, 3))).maps()[0],
                               1: FiberSystem.expanding_circle(RandomScalar.constant(2)).maps()[0]})
    doubling = FiberSystem.expanding_circle(RandomScalar.constant(2))
    delta = RandomScalar.constant(Fraction(1, 10))
    leb = lebesgue("circle")
    a = expansive_diagnostic(mixed, leb, delta, BaseEnvironment.singleton(symbol=1), depth=6, n_base=1,
                             n_fiber=2, seed=seed)
    b = expansive_diagnostic(doubling, leb, delta, BaseEnvironment.singleton(), depth=6, n_base=1,
                             n_fiber=2, seed=seed)
    assert a.verdict == b.verdict
    assert [(r["x"], r["lower"], r["upper"]) for r in a.rows] == [(r["x"], r["lower"], r["upper"]) for r in b.rows]


def test_singleton_samples_are_one_point():
    env = BaseEnvironment.singleton(symbol=2)
    ws = sample_base(env, 5, 123)
    assert len(set(ws)) == 1
    assert ws[0].window(-3, 3) == (2,) * 6
