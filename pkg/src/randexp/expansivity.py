"""Expansivity diagnostics at finite depth.

Each diagnostic samples base points from P and fiber points from a reference
measure plus a fixed adversarial set, computes certified Gamma-set brackets
along a depth grid, and turns the resulting curves into a verdict:

* ``refuted``: some sample keeps a certified lower bound >= ``floor`` over the
  last five depths, and the bound is stable there (min/max >= 0.9).
* ``evidence-for``: every sample's upper bound decays with least-squares slope
  (of log mass against depth) <= -0.05, and the pooled curve (mean log mass)
  is well described by a line: unexplained variance fraction <= 0.1.
* ``inconclusive`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .base import BaseEnvironment, BasePoint, RandomScalar, advance, derive_seed, eval_scalar, sample_base
from .fiber import FiberSystem, IntervalPL, SymbolicPoint
from .gamma import bowen_set, cylinders_at_depth, gamma_approx, gamma_mass, resolve_sided
from .measures import DisintegratedMeasure, lebesgue, sample_fiber, uniform_product

EVIDENCE = "evidence-for"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

SLOPE_MAX = -0.05
GROWTH_MAX = 0.1
UNEXPLAINED_MAX = 0.1
FLOOR = 1e-6
PERSIST = 5
STABILITY = 0.9


@dataclass
class ExpansivityReport:
    notion: str
    verdict: str
    rows: list[dict] = field(default_factory=list)
    fit: dict = field(default_factory=dict)
    witnesses: list[dict] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def witness(self) -> dict | None:
        return self.witnesses[0] if self.witnesses else None


def point_label(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(x)


def scalar_label(delta: RandomScalar):
    if delta.is_constant():
        return delta.sup()
    return {str(k): v for k, v in sorted(delta.table.items())} if delta.table else delta.form


def adversarial_points(sys: FiberSystem) -> list:
    kind = sys.space.kind
    if kind == "symbolic":
        return [SymbolicPoint(())]
    if kind == "circle":
        return [Fraction(0), Fraction(1, 2)]
    return [Fraction(0), Fraction(1, 2), Fraction(1)]


def fit_log_decay(depths: Sequence[int], masses: Sequence) -> dict:
    """Least-squares line through (depth, log mass) over the positive masses."""
    pts = [(d, math.log(m)) for d, m in zip(depths, masses) if m > 0]
    if len(pts) < 2 or len({d for d, _ in pts}) < 2:
        return {"slope": None, "intercept": None, "unexplained": None, "points": len(pts)}
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = float(np.sum((ys - ys.mean()) ** 2))
    unexplained = float(np.sum(resid ** 2)) / total if total > 0 else 0.0
    return {"slope": float(slope), "intercept": float(intercept),
            "unexplained": unexplained, "points": len(pts)}


def persists_above(values: Sequence, floor=FLOOR, persist: int = PERSIST,
                   depths: Sequence[int] | None = None) -> bool:
    """Lower bounds stay >= floor and stable over the last ``persist`` depths.

    With ``depths`` given, a curve that decays geometrically over the whole
    run does not count: a flat stretch at the end (e.g. a run of isometric
    steps in a random drive) is not a stabilized limit.
    """
    tail = list(values)[-persist:]
    if len(tail) < persist or min(tail) < floor:
        return False
    if min(tail) / max(tail) < STABILITY:
        return False
    if depths is not None:
        fit = fit_log_decay(depths, values)
        if fit["slope"] is not None and fit["slope"] <= SLOPE_MAX:
            return False
    return True


def decays(depths: Sequence[int], uppers: Sequence) -> tuple[bool, dict]:
    fit = fit_log_decay(depths, uppers)
    if uppers and uppers[-1] == 0:
        return True, fit
    if fit["slope"] is None:
        return False, fit
    return fit["slope"] <= SLOPE_MAX, fit


def _pooled(depths, curves) -> dict:
    positive = [c for c in curves if all(m > 0 for m in c)]
    if not positive:
        return {"slope": None, "intercept": None, "unexplained": None, "points": 0}
    logs = np.mean([[math.log(m) for m in c] for c in positive], axis=0)
    return fit_log_decay(depths, [math.exp(v) for v in logs])


def _sample_points(sys, mu, count, seed, adversarial: bool):
    pts = sample_fiber(mu, count, seed) if count else []
    return pts + (adversarial_points(sys) if adversarial else [])


def expansive_diagnostic(sys: FiberSystem, dis: DisintegratedMeasure, delta: RandomScalar,
                         env: BaseEnvironment, depth: int = 12, n_base: int = 8,
                         n_fiber: int = 4, seed: int = 0, sided: str = "auto",
                         depths: Sequence[int] | None = None, adversarial: bool = True,
                         floor: float = FLOOR) -> ExpansivityReport:
    """Does mu_w(Gamma_delta(x, w)) vanish for sampled (w, x)?

    ``sided='forward'`` tests positive expansivity (Gamma^+); ``'auto'`` uses
    two-sided sets when the fibers are invertible circle/interval maps.
    """
    sided = resolve_sided(sys, sided)
    notion = "random-expansive" if sided == "two-sided" else "positively-random-expansive"
    depths = list(depths or range(1, depth + 1))
    rows, curves, witnesses = [], [], []
    all_decay = True
    slopes = []
    for i, w in enumerate(sample_base(env, n_base, derive_seed(seed, 0))):
        mu = dis.at(w)
        for j, x in enumerate(_sample_points(sys, mu, n_fiber, derive_seed(seed, 1, i), adversarial)):
            lowers, uppers = [], []
            for d in depths:
                g = gamma_approx(sys, w, x, delta, d, sided)
                lo, up = gamma_mass(mu, g)
                lowers.append(lo)
                uppers.append(up)
                rows.append({"w": w.ident, "x": point_label(x), "depth": d,
                             "lower": lo, "upper": up, "complete": g.complete})
            ok, fit = decays(depths, uppers)
            all_decay &= ok
            if fit["slope"] is not None:
                slopes.append(fit["slope"])
            curves.append(uppers)
            if persists_above(lowers, floor, depths=depths):
                witnesses.append({"w": w.ident, "x": point_label(x), "depths": depths[-PERSIST:],
                                  "lower": lowers[-PERSIST:], "upper": uppers[-PERSIST:]})
    pooled = _pooled(depths, curves)
    fit = {"pooled_slope": pooled["slope"], "unexplained": pooled["unexplained"],
           "rate": -pooled["slope"] if pooled["slope"] is not None else None,
           "sample_slope_max": max(slopes) if slopes else None,
           "sample_slope_mean": float(np.mean(slopes)) if slopes else None}
    if witnesses:
        verdict = REFUTED
    elif all_decay and (pooled["unexplained"] is None or pooled["unexplained"] <= UNEXPLAINED_MAX):
        verdict = EVIDENCE
    else:
        verdict = INCONCLUSIVE
    params = {"measure": dis.name, "delta": scalar_label(delta), "sided": sided, "depths": depths,
              "n_base": n_base, "n_fiber": n_fiber, "seed": seed, "floor": floor}
    return ExpansivityReport(notion, verdict, rows, fit, witnesses, params)


def reference_measure(sys: FiberSystem) -> DisintegratedMeasure:
    """Non-atomic reference: uniform product on symbolic fibers, Lebesgue otherwise."""
    if sys.space.kind == "symbolic":
        return uniform_product(sys.space.alphabet_bound)
    return lebesgue(sys.space.kind)


def countable_diagnostic(sys: FiberSystem, delta: RandomScalar, env: BaseEnvironment,
                         depth: int = 12, samples: int = 8, seed: int = 0, sided: str = "auto",
                         reference: DisintegratedMeasure | None = None,
                         floor: float = FLOOR) -> ExpansivityReport:
    """Is Gamma_delta(x, w) countable? Tracks certified cell counts and sizes.

    Cell counts without exponential growth (slope of the sample-mean log count
    <= GROWTH_MAX, far below the log 2 of a full binary tree) together with
    geometrically shrinking cells in every sample point to a finite limit set.
    A certified-in union of positive reference mass that does not shrink is an
    uncountable subset and refutes.
    """
    sided = resolve_sided(sys, sided)
    ref = reference or reference_measure(sys)
    depths = list(range(1, depth + 1))
    rows, witnesses, log_counts = [], [], []
    all_ok = True
    for i, w in enumerate(sample_base(env, samples, derive_seed(seed, 0))):
        mu = ref.at(w)
        for x in _sample_points(sys, mu, 1, derive_seed(seed, 1, i), True):
            counts, sizes, inner = [], [], []
            for d in depths:
                g = gamma_approx(sys, w, x, delta, d, sided)
                lo, _ = gamma_mass(mu, g)
                if g.kind == "cylinders":
                    counts.append(cylinders_at_depth(sys.space, w, g.cells, d))
                else:
                    counts.append(g.cell_count)
                sizes.append(g.max_cell_size())
                inner.append(lo)
                rows.append({"w": w.ident, "x": point_label(x), "depth": d,
                             "cells": counts[-1], "boundary": len(g.boundary),
                             "max_cell": sizes[-1], "reference_lower": lo})
            log_counts.append(np.log(np.maximum(counts, 1)))
            shrinking, _ = decays(depths, sizes)
            all_ok &= shrinking
            if persists_above(inner, floor, depths=depths):
                witnesses.append({"w": w.ident, "x": point_label(x), "depths": depths[-PERSIST:],
                                  "reference_lower": inner[-PERSIST:]})
    growth = float(np.polyfit(depths, np.mean(log_counts, axis=0), 1)[0]) if log_counts else 0.0
    all_ok &= growth <= GROWTH_MAX
    verdict = REFUTED if witnesses else EVIDENCE if all_ok else INCONCLUSIVE
    params = {"reference": ref.name, "delta": scalar_label(delta), "sided": sided, "depth": depth, "samples": samples,
              "seed": seed}
    fit = {"count_growth": growth, "growth_max": GROWTH_MAX}
    return ExpansivityReport("countably-expansive", verdict, rows, fit, witnesses, params)


# --------------------------------------------------------------------------- continua


@dataclass(frozen=True)
class EscapeResult:
    n: int | None
    mode: str
    trace: tuple[tuple[int, object, object], ...]


def _image_length(f, seg):
    """Image of a segment (a, b) given in lifted/absolute coordinates."""
    if isinstance(f, IntervalPL):
        ya, yb = f(seg[0]), f(seg[1])
        return (min(ya, yb), max(ya, yb))
    a, b = seg
    s = f.slope
    lo = s * a + f.shift
    return (lo, lo + abs(s) * (b - a))


def _diam(kind: str, seg):
    length = seg[1] - seg[0]
    return min(length, Fraction(1, 2)) if kind == "circle" else length


def continuum_wise_check(sys: FiberSystem, w: BasePoint, segment: tuple, delta: RandomScalar,
                         max_n: int, forward_only: bool | None = None) -> EscapeResult:
    """Smallest |n| <= max_n with diam(f_w^n(segment)) > delta(theta^n w).

    ``segment`` is (start, length). Times are searched 0, 1, -1, 2, -2, ...;
    non-invertible systems are searched forward only.
    """
    kind = sys.space.kind
    if kind == "symbolic":
        raise ValueError("continuum checks need a circle or interval fiber")
    start, length = segment
    if length <= 0:
        raise ValueError("segment length must be positive")
    if forward_only is None:
        forward_only = not sys.invertible
    mode = "forward" if forward_only else "two-sided"
    seg0 = (start, start + length)
    trace = []
    d0 = _diam(kind, seg0)
    r0 = eval_scalar(delta, w, 0)
    trace.append((0, d0, r0))
    if d0 > r0:
        return EscapeResult(0, mode, tuple(trace))
    fwd, bwd = seg0, seg0
    for m in range(1, max_n + 1):
        fwd = _image_length(sys.generator_at(advance(w, m - 1)), fwd)
        d, r = _diam(kind, fwd), eval_scalar(delta, w, m)
        trace.append((m, d, r))
        if d > r:
            return EscapeResult(m, mode, tuple(trace))
        if not forward_only:
            bwd = _image_length(sys.inverse_at(advance(w, -m)), bwd)
            d, r = _diam(kind, bwd), eval_scalar(delta, w, -m)
            trace.append((-m, d, r))
            if d > r:
                return EscapeResult(-m, mode, tuple(trace))
    return EscapeResult(None, mode, tuple(trace))


def continuum_diagnostic(sys: FiberSystem, delta: RandomScalar, env: BaseEnvironment,
                         samples: int = 20, seed: int = 0, max_n: int = 200,
                         length=Fraction(1, 1000), forward_only: bool | None = None) -> ExpansivityReport:
    """Every sampled segment must leave the delta-tube at some time |n| <= max_n."""
    if sys.space.kind == "symbolic":
        return ExpansivityReport("continuum-wise", EVIDENCE, notes=[
            "symbolic fibers are totally disconnected: every continuum is a point"],
            params={"samples": 0})
    rows, witnesses = [], []
    rng = np.random.default_rng(derive_seed(seed, 2))
    span = 1 if sys.space.kind == "circle" else 1 - length
    mode = None
    for w in sample_base(env, samples, derive_seed(seed, 0)):
        start = Fraction(int(rng.integers(0, 1 << 30)), 1 << 30) * span
        res = continuum_wise_check(sys, w, (start, length), delta, max_n, forward_only)
        mode = res.mode
        rows.append({"w": w.ident, "start": start, "length": length, "escape": res.n})
        if res.n is None:
            witnesses.append({"w": w.ident, "start": start, "length": length,
                              "max_diameter": max(t[1] for t in res.trace), "max_n": max_n})
    verdict = REFUTED if witnesses else EVIDENCE
    escapes = [r["escape"] for r in rows if r["escape"] is not None]
    fit = {"max_escape": max(map(abs, escapes)) if escapes else None}
    params = {"samples": samples, "seed": seed, "max_n": max_n, "length": length, "mode": mode}
    return ExpansivityReport("continuum-wise", verdict, rows, fit, witnesses, params)


# --------------------------------------------------------------------------- stable classes


def stable_class_mass(sys: FiberSystem, dis: DisintegratedMeasure, w: BasePoint, p,
                      gammas: Sequence[RandomScalar], depth: int,
                      starts: Sequence[int] = (0, 1, 2)) -> list[dict]:
    """Upper bounds of mu_w(intersection over j <= k <= D of f_w^-k B[f_w^k p, gamma_i]).

    One row per (i, j, D) with j <= D <= depth.
    """
    mu = dis.at(w)
    out = []
    for i, gamma in enumerate(gammas):
        def radius(k, gamma=gamma):
            return eval_scalar(gamma, w, k)
        for j in starts:
            for D in range(j, depth + 1):
                g = bowen_set(sys, w, p, radius, (0, D), constrained=range(j, D + 1),
                              sided="forward")
                _, up = gamma_mass(mu, g)
                out.append({"i": i, "j": j, "depth": D, "upper": up})
    return out


def strictly_decreasing(table: list[dict]) -> list[tuple[int, int]]:
    """(i, j) pairs whose upper bounds fail to decrease strictly in depth."""
    bad = []
    keys = sorted({(r["i"], r["j"]) for r in table})
    for key in keys:
        ups = [r["upper"] for r in sorted(table, key=lambda r: r["depth"]) if (r["i"], r["j"]) == key]
        if any(b >= a for a, b in zip(ups, ups[1:])):
            bad.append(key)
    return bad


# --------------------------------------------------------------------------- implication chain


@dataclass
class ChainEntry:
    name: str
    sys: FiberSystem
    env: BaseEnvironment
    delta: RandomScalar
    measures: list[DisintegratedMeasure]


@dataclass
class ChainResult:
    name: str
    verdicts: dict
    violations: list[str]

    @property
    def passed(self) -> bool:
        return not self.violations


def implication_chain_test(suite: Sequence[ChainEntry], depth: int = 12, seed: int = 0,
                           n_base: int = 6, n_fiber: int = 3, samples: int = 6,
                           max_n: int = 200) -> list[ChainResult]:
    """Check expansive => countably-expansive => continuum-wise on each system.

    A violation is a stronger notion with evidence while a weaker one is
    refuted, or a countably-expansive system whose expansive diagnostic lacks
    evidence for some non-atomic measure.
    """
    results = []
    for idx, e in enumerate(suite):
        s = derive_seed(seed, idx)
        v = {}
        for m in e.measures:
            if not m.non_atomic:
                continue
            v[f"expansive:{m.name}"] = expansive_diagnostic(
                e.sys, m, e.delta, e.env, depth, n_base, n_fiber, s).verdict
        v["countable"] = countable_diagnostic(e.sys, e.delta, e.env, depth, samples, s).verdict
        v["continuum"] = continuum_diagnostic(e.sys, e.delta, e.env, samples, s, max_n).verdict
        bad = []
        exp_keys = [k for k in v if k.startswith("expansive:")]
        for k in exp_keys:
            if v[k] == EVIDENCE and v["countable"] == REFUTED:
                bad.append(f"{k} has evidence but countable is refuted")
            if v[k] == EVIDENCE and v["continuum"] == REFUTED:
                bad.append(f"{k} has evidence but continuum-wise is refuted")
            if v["countable"] == EVIDENCE and v[k] != EVIDENCE:
                bad.append(f"countable has evidence but {k} is {v[k]}")
        if v["countable"] == EVIDENCE and v["continuum"] == REFUTED:
            bad.append("countable has evidence but continuum-wise is refuted")
        results.append(ChainResult(e.name, v, bad))
    return results
