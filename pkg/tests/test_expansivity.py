from fractions import Fraction

import pytest

from randexp.base import BaseEnvironment, RandomScalar, sample_base
from randexp.expansivity import (
    EVIDENCE,
    INCONCLUSIVE,
    REFUTED,
    continuum_diagnostic,
    continuum_wise_check,
    countable_diagnostic,
    expansive_diagnostic,
    fit_log_decay,
    implication_chain_test,
    persists_above,
    stable_class_mass,
    strictly_decreasing,
)
from randexp.fiber import FiberSystem, SymbolicPoint
from randexp.measures import atomic_disintegration, uniform_product
from randexp.scenarios import builtin_suite

TENTH = RandomScalar.constant(Fraction(1, 10))


def test_random_shift_is_expansive(ex1):
    rep = expansive_diagnostic(ex1.sys, ex1.dis, ex1.delta, ex1.env, depth=12, n_base=6, n_fiber=2, seed=3)
    assert rep.verdict == EVIDENCE
    assert rep.notion == "positively-random-expansive"
    assert rep.fit["rate"] > 0.5


def test_rotations_refuted_with_ball_mass(ex2):
    rep = expansive_diagnostic(ex2.sys, ex2.dis, ex2.delta, ex2.env, depth=20, n_base=4, n_fiber=2, seed=1)
    assert rep.verdict == REFUTED
    assert rep.notion == "random-expansive"
    for wit in rep.witnesses:
        assert all(abs(m - 0.1) < 1e-9 for m in wit["lower"])


def test_atom_at_fixed_point_refuted():
    env = BaseEnvironment.singleton()
    sys = FiberSystem.expanding_circle(RandomScalar.constant(2))
    dis = atomic_disintegration([Fraction(0)], invariant=True)
    rep = expansive_diagnostic(sys, dis, RandomScalar.constant(Fraction(1, 20)), env, depth=10,
                               n_base=1, n_fiber=1, seed=0)
    assert rep.verdict == REFUTED
    assert any(wit["lower"][-1] == 1 for wit in rep.witnesses)


def test_random_shift_gamma_is_a_single_cell(ex1):
    rep = countable_diagnostic(ex1.sys, ex1.delta, ex1.env, depth=8, samples=4, seed=2)
    assert rep.verdict == EVIDENCE
    assert {r["cells"] for r in rep.rows} == {1}


def test_isometry_not_countably_expansive(ex2):
    rep = countable_diagnostic(ex2.sys, ex2.delta, ex2.env, depth=8, samples=3, seed=2)
    assert rep.verdict == REFUTED


def test_vacuous_radius_refutes_countable():
    env = BaseEnvironment.singleton()
    sys = FiberSystem.shift(RandomScalar.constant(2))
    rep = countable_diagnostic(sys, RandomScalar.constant(2), env, depth=8, samples=1, seed=0)
    assert rep.verdict == REFUTED
    assert rep.rows[-1]["reference_lower"] == 1


def test_long_segment_escapes_at_time_zero(ex4):
    w = sample_base(ex4.env, 1, 0)[0]
    assert continuum_wise_check(ex4.sys, w, (Fraction(0), Fraction(1, 5)), TENTH, 50).n == 0


def test_all_ones_escape_time(ex4):
    w = sample_base(BaseEnvironment.singleton(symbol=1), 1, 0)[0]
    # 2^(n-10) > 1/10 first holds at n = 7
    res = continuum_wise_check(ex4.sys, w, (Fraction(1, 3), Fraction(1, 1024)), TENTH, 200)
    assert res.n == 7
    assert res.mode == "forward"
    assert res.trace[-1][1] == Fraction(1, 8)


def test_rotation_never_escapes(ex2):
    w = sample_base(ex2.env, 1, 0)[0]
    res = continuum_wise_check(ex2.sys, w, (0.3, 0.001), RandomScalar.constant(0.05), 300)
    assert res.n is None
    assert res.mode == "two-sided"


def test_invertible_interval_searched_both_ways():
    env = BaseEnvironment.singleton()
    sys = FiberSystem.pl_interval({0: Fraction(1, 4)})
    # f doubles on [0, 1/4] and its inverse halves there, so [0, 1/64] escapes
    # forward only: 1/64 * 2^3 = 1/8 > 1/10
    w = sample_base(env, 1, 0)[0]
    res = continuum_wise_check(sys, w, (Fraction(0), Fraction(1, 64)), TENTH, 20)
    assert res.mode == "two-sided"
    assert res.n == 3


def test_continuum_vacuous_on_symbolic(ex1):
    rep = continuum_diagnostic(ex1.sys, ex1.delta, ex1.env)
    assert rep.verdict == EVIDENCE and rep.notes


def test_continuum_diagnostic_rotation_doubling_mix(ex4):
    rep = continuum_diagnostic(ex4.sys, ex4.delta, ex4.env, samples=20, seed=1, max_n=200)
    assert rep.verdict == EVIDENCE


def test_stable_mass_single_constraint_is_ball():
    env = BaseEnvironment.singleton()
    k = RandomScalar.constant(2)
    sys = FiberSystem.shift(k)
    w = sample_base(env, 1, 0)[0]
    table = stable_class_mass(sys, uniform_product(k), w, SymbolicPoint(()), [RandomScalar.constant(Fraction(1, 4))],
                              depth=8, starts=(0, 3))
    for row in table:
        if row["j"] == 0:
            assert row["upper"] <= Fraction(1, 2 ** (row["depth"] + 1))
    assert strictly_decreasing([r for r in table if r["j"] == 0]) == []
    # depth == j: one constraint at time j, the ball around f^j p pulled back
    single = next(r for r in table if r["j"] == 3 and r["depth"] == 3)
    assert single["upper"] == next(r for r in table if r["j"] == 0 and r["depth"] == 0)["upper"]


def test_stable_mass_isometry_stabilizes(ex2):
    w = sample_base(ex2.env, 1, 0)[0]
    table = stable_class_mass(ex2.sys, ex2.dis, w, Fraction(1, 2), [RandomScalar.constant(0.05)], depth=10, starts=(0,))
    assert all(abs(r["upper"] - 0.1) < 1e-9 for r in table)
    assert strictly_decreasing(table) == [(0, 0)]


def test_fit_log_decay_exact_line():
    fit = fit_log_decay([1, 2, 3, 4], [Fraction(1, 2 ** n) for n in (1, 2, 3, 4)])
    assert fit["slope"] == pytest.approx(-0.6931471805599453)
    assert fit["unexplained"] == pytest.approx(0, abs=1e-12)


def test_flat_tail_after_decay_is_not_persistent():
    depths = list(range(1, 13))
    decaying = [2.0 ** -d for d in range(1, 8)] + [2.0 ** -7] * 5
    assert persists_above(decaying, 1e-6)
    assert not persists_above(decaying, 1e-6, depths=depths)
    flat = [0.1] * 12
    assert persists_above(flat, 1e-6, depths=depths)


def test_inconclusive_when_nothing_decays(ex2):
    # a floor above the ball mass removes the refutation; no decay means no evidence
    rep = expansive_diagnostic(ex2.sys, ex2.dis, ex2.delta, ex2.env, depth=8, n_base=2, n_fiber=1, seed=0,
                               floor=0.5)
    assert rep.verdict == INCONCLUSIVE


def test_implication_chain_on_builtins():
    results = {r.name: r for r in implication_chain_test(builtin_suite(), depth=10, seed=0, n_base=4, n_fiber=2,
                                                          samples=4)}
    assert all(r.passed for r in results.values())
    iso = results["example2_isometry"].verdicts
    assert set(iso.values()) == {REFUTED}
    shift = results["example1_random_shift"].verdicts
    assert set(shift.values()) == {EVIDENCE}
    assert results["example4_continuum_mix"].verdicts["continuum"] == EVIDENCE


def test_diagnostics_deterministic(ex3):
    a = expansive_diagnostic(ex3.sys, ex3.dis, ex3.delta, ex3.env, depth=6, n_base=3, n_fiber=2, seed=9)
    b = expansive_diagnostic(ex3.sys, ex3.dis, ex3.delta, ex3.env, depth=6, n_base=3, n_fiber=2, seed=9)
    assert a.rows == b.rows and a.verdict == b.verdict
