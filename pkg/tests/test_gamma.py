from fractions import Fraction

import pytest

from oracles import doubling_ball_arc, shift_bracket, shift_offset
from randexp.base import BaseEnvironment, RandomScalar, sample_base
from randexp.fiber import FiberSystem, SymbolicPoint
from randexp.gamma import bowen_membership, bowen_set, covered_by, forward_balls, gamma_approx, gamma_mass
from randexp.measures import GridDensity, lebesgue, uniform_product

QUARTER = RandomScalar.constant(Fraction(1, 4))
K2 = RandomScalar.constant(2)

# certified bracket of mu(B[x, 1/4, n]) for k = 2, uniform product: the ball is
# the in-cell C_{n+1}(x) plus one undecided cell of depth n + 4
SHIFT_OFFSET = 1


def shift_bracket_closed_form(n: int):
    return Fraction(1, 2 ** (n + 1)), Fraction(9, 2 ** (n + 4))


@pytest.fixture(scope="module")
def binary():
    w = sample_base(BaseEnvironment.singleton(), 1, 0)[0]
    return FiberSystem.shift(K2), w, uniform_product(K2).at(w)


def test_center_always_in(binary):
    sys, w, _ = binary
    x = SymbolicPoint((2, 1, 2))
    for n in (1, 5, 9):
        assert bowen_membership(sys, w, x, x, QUARTER, n) == "in"


def test_first_coordinate_difference_is_out(binary):
    sys, w, _ = binary
    assert bowen_membership(sys, w, SymbolicPoint(()), SymbolicPoint((2,)), QUARTER, 1) == "out"


def test_later_difference_enters_then_leaves(binary):
    sys, w, _ = binary
    x, y = SymbolicPoint(()), SymbolicPoint((1, 1, 2))
    # differences at shifted index 2, 1, 0 give distances 1/8, 1/4, 1/2
    assert [bowen_membership(sys, w, x, y, QUARTER, n) for n in (1, 2, 3)] == ["in", "in", "out"]


def test_rotation_never_separates(ex2):
    w = sample_base(ex2.env, 1, 4)[0]
    x = Fraction(1, 5)
    y = x + Fraction(3, 100)
    for n in (1, 10, 40):
        assert bowen_membership(ex2.sys, w, x, y, RandomScalar.constant(0.05), n) == "in"


def test_large_radius_gives_whole_fiber(binary):
    sys, w, mu = binary
    g = gamma_approx(sys, w, SymbolicPoint((1, 2)), RandomScalar.constant(5), 1)
    assert gamma_mass(mu, g) == (1, 1)


@pytest.mark.parametrize("x_word", [(1,) * 14, (2, 1, 2, 2, 1, 1, 2, 1, 2, 1, 1, 2, 2, 2), (2,) * 14])
def test_shift_offset_from_brute_force(binary, x_word):
    sys, w, mu = binary
    for n in range(1, 9):
        assert shift_offset(x_word, n, Fraction(1, 4), n + 4) == SHIFT_OFFSET
        g = gamma_approx(sys, w, SymbolicPoint(x_word), QUARTER, n)
        assert gamma_mass(mu, g) == shift_bracket(x_word, n, Fraction(1, 4), n + 4)
        assert gamma_mass(mu, g) == shift_bracket_closed_form(n)


def test_shift_depth_ten_upper(binary):
    sys, w, mu = binary
    g = gamma_approx(sys, w, SymbolicPoint((1, 2, 2, 1)), QUARTER, 10)
    lo, up = gamma_mass(mu, g)
    assert (lo, up) == shift_bracket_closed_form(10)
    assert up <= Fraction(1, 2 ** 8)


def test_doubling_arc_length():
    env = BaseEnvironment.singleton()
    sys = FiberSystem.expanding_circle(RandomScalar.constant(2))
    w = sample_base(env, 1, 0)[0]
    x, delta = Fraction(3, 7), Fraction(1, 20)
    for n in range(1, 9):
        g = gamma_approx(sys, w, x, RandomScalar.constant(delta), n)
        assert g.total_length() == 2 * delta / 2 ** (n - 1)
    # independent scan on a fine dyadic grid
    for n in (1, 3, 5):
        scan = doubling_ball_arc(x, delta, n)
        assert abs(scan - 2 * delta / 2 ** (n - 1)) <= Fraction(2, 1 << 16)


def test_rotation_ball_mass(ex2):
    for w in sample_base(ex2.env, 5, 1):
        for depth in (1, 7, 20):
            g = gamma_approx(ex2.sys, w, Fraction(1, 3), RandomScalar.constant(0.05), depth, "two-sided")
            lo, up = gamma_mass(GridDensity.lebesgue("circle"), g)
            assert lo <= up
            assert abs(lo - 0.1) < 1e-9 and abs(up - 0.1) < 1e-9


def test_isometry_closed_form(ex2):
    w = sample_base(ex2.env, 1, 2)[0]
    x = Fraction(9, 10)
    for depth in (1, 5, 30):
        g = gamma_approx(ex2.sys, w, x, RandomScalar.constant(0.05), depth, "two-sided")
        assert len(g.arcs) == 1
        lo, hi = g.arcs[0]
        assert abs(lo - (x - 0.05)) < 1e-9 and abs(hi - (x + 0.05)) < 1e-9


def test_forward_balls_match_single_sets(ex3):
    w = sample_base(ex3.env, 1, 5)[0]
    x = Fraction(2, 9)
    radius = lambda k: ex3.delta.value
    balls = forward_balls(ex3.sys, w, x, radius, 8)
    for n, g in enumerate(balls, start=1):
        single = bowen_set(ex3.sys, w, x, radius, (0, n - 1), sided="forward")
        assert g.arcs == single.arcs


def test_nesting_symbolic(ex1):
    for w in sample_base(ex1.env, 4, 3):
        x = SymbolicPoint((1, 2, 1, 1, 2, 1, 1, 1), (1,))
        if not ex1.sys.space.contains(w, x):
            continue
        prev = None
        for n in range(1, 8):
            g = gamma_approx(ex1.sys, w, x, ex1.delta, n)
            if prev is not None:
                assert all(covered_by(prev, c) for c in g.cells)
            prev = g


def test_bracket_ordering_and_exactness(ex1):
    w = sample_base(ex1.env, 1, 6)[0]
    mu = ex1.dis.at(w)
    g = gamma_approx(ex1.sys, w, SymbolicPoint(()), ex1.delta, 6)
    lo, up = gamma_mass(mu, g)
    assert lo <= up
    if not g.boundary:
        assert lo == up


def test_classify_center(ex3):
    w = sample_base(ex3.env, 1, 1)[0]
    x = Fraction(5, 11)
    g = gamma_approx(ex3.sys, w, x, ex3.delta, 6)
    assert g.classify(x) == "in"
    assert gamma_mass(lebesgue("circle").at(w), g)[0] > 0
