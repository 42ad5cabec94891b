"""Fiber entropy through the Brin-Katok functional.

For a sample (w, x) the sequence v_n = -log mu_w(B_w[x, delta, n]) / n is
computed from certified upper mass bounds (a lower entropy bound). Two
summaries are reported per sample:

* ``phi``: the minimum of v_n over the tail window [n_max/2, n_max], a direct
  finite stand-in for the liminf;
* ``slope``: the least-squares slope of -log mass against n over the same
  window. The ball mass behaves like C(delta) e^{-n h}, so the slope removes
  the -log C(delta)/n bias that dominates ``phi`` at small n.

The aggregate estimate is the mean slope at the smallest delta of the ladder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .base import BaseEnvironment, BasePoint, RandomScalar, derive_seed, eval_scalar, expectation, sample_base
from .expansivity import (
    EVIDENCE,
    ExpansivityReport,
    expansive_diagnostic,
    point_label,
    stable_class_mass,
    strictly_decreasing,
)
from .fiber import FiberSystem
from .gamma import forward_balls, gamma_mass
from .measures import DisintegratedMeasure, sample_fiber

ENTROPY_CAP = 50.0
H_MIN = 0.01
RATE_TOLERANCE = 0.05


def delta_ladder(sys: FiberSystem, count: int = 5) -> list[RandomScalar]:
    """Constant radii halving from diam/4."""
    top = Fraction(sys.space.diameter) / 4
    return [RandomScalar.constant(top / (1 << i)) for i in range(count)]


def bowen_mass_sequence(sys: FiberSystem, dis: DisintegratedMeasure, w: BasePoint, x,
                        delta: RandomScalar, n_max: int) -> list[tuple]:
    """Certified (lower, upper) brackets of mu_w(B_w[x, delta, n]) for n = 1..n_max."""
    mu = dis.at(w)
    balls = forward_balls(sys, w, x, lambda k: eval_scalar(delta, w, k), n_max)
    out = []
    for g in balls:
        lo, up = gamma_mass(mu, g)
        if out:
            # the balls are nested, so the bracket may be tightened monotonically
            up = min(up, out[-1][1])
        out.append((lo, up))
    return out


def _neg_log(m) -> float:
    if m <= 0:
        return math.inf
    if isinstance(m, Fraction):
        # exact rationals can be far below float range
        return -(math.log(m.numerator) - math.log(m.denominator))
    return -math.log(m)


@dataclass
class SampleSequence:
    w: str
    x: str
    values: list[float]
    phi: float
    slope: float
    truncated_at: int | None = None


@dataclass
class EntropyEstimate:
    delta: object
    n_max: int
    samples: list[SampleSequence]
    estimate: float
    half_width: float
    phi_mean: float
    H: float
    curve: list[dict] = field(default_factory=list)
    underflow: int = 0
    notes: list[str] = field(default_factory=list)


def _tail(n_max: int) -> range:
    return range(max(1, n_max // 2), n_max + 1)


def _summarize(masses: Sequence, n_max: int):
    logs = [_neg_log(up) for _, up in masses]
    truncated = None
    for n, v in enumerate(logs, start=1):
        if not math.isfinite(v) or (not isinstance(masses[n - 1][1], Fraction) and masses[n - 1][1] < 1e-300):
            truncated = n - 1
            break
    valid = logs[:truncated] if truncated is not None else logs
    values = [v / n for n, v in enumerate(valid, start=1)]
    tail = [n for n in _tail(n_max) if n <= len(valid)]
    phi = min(values[n - 1] for n in tail) if tail else float("nan")
    if len(tail) >= 2:
        slope = float(np.polyfit(np.array(tail, float), np.array([valid[n - 1] for n in tail]), 1)[0])
    else:
        slope = float("nan")
    return values, phi, slope, truncated


def _estimate_at(sys, dis, env, delta, n_max, samples, seed):
    base = sample_base(env, samples, derive_seed(seed, 0))
    out = []
    underflow = 0
    for i, w in enumerate(base):
        x = sample_fiber(dis.at(w), 1, derive_seed(seed, 1, i))[0]
        masses = bowen_mass_sequence(sys, dis, w, x, delta, n_max)
        values, phi, slope, trunc = _summarize(masses, n_max)
        underflow += trunc is not None
        out.append(SampleSequence(w.ident, point_label(x), values, phi, slope, trunc))
    return out, underflow


def brin_katok_estimate(sys: FiberSystem, dis: DisintegratedMeasure, env: BaseEnvironment,
                        n_max: int = 14, samples: int = 100, seed: int = 0,
                        ladder: Sequence[RandomScalar] | None = None,
                        curve_samples: int | None = None) -> EntropyEstimate:
    """Estimate h_mu(f) at the smallest ladder radius; report the whole ladder curve.

    ``curve_samples`` (default ``samples``) sets the sample count used for the
    larger radii of the ladder.
    """
    ladder = list(ladder or delta_ladder(sys))
    curve = []
    final = None
    underflow = 0
    for idx, delta in enumerate(ladder):
        last = idx == len(ladder) - 1
        count = samples if last else (curve_samples or samples)
        seqs, uf = _estimate_at(sys, dis, env, delta, n_max, count, seed)
        slopes = np.array([s.slope for s in seqs if math.isfinite(s.slope)])
        phis = np.array([s.phi for s in seqs if math.isfinite(s.phi)])
        mean = float(slopes.mean()) if slopes.size else float("nan")
        hw = float(1.96 * slopes.std(ddof=1) / math.sqrt(slopes.size)) if slopes.size > 1 else float("nan")
        curve.append({"delta_index": idx, "delta": delta.sup(), "estimate": mean, "half_width": hw,
                      "phi_mean": float(phis.mean()) if phis.size else float("nan"),
                      "phi": [s.phi for s in seqs]})
        if last:
            final = (seqs, mean, hw, float(phis.mean()) if phis.size else float("nan"))
            underflow = uf
    seqs, mean, hw, phi_mean = final
    notes = []
    if mean > ENTROPY_CAP:
        notes.append(f"estimate {mean:.3g} exceeds cap {ENTROPY_CAP}: estimation failure")
    if underflow:
        notes.append(f"{underflow} sequences truncated at mass underflow")
    H = max(mean, 0.0) / 2
    for row in curve:
        row["fraction_above_H"] = float(np.mean([p > H for p in row["phi"]]))
    return EntropyEstimate(ladder[-1].sup(), n_max, seqs, max(mean, 0.0), hw, phi_mean, H,
                           curve, underflow, notes)


def analytic_entropy_oracle(sys: FiberSystem, env: BaseEnvironment) -> float | None:
    """Integral of log deg over P for expanding-circle systems, else None."""
    if sys.generator not in ("expanding", "shift"):
        return None
    deg = sys.degree()
    if deg is None:
        return None
    return float(expectation(deg, env, lambda v: math.log(v)))


def fraction_trend(curve: list[dict]) -> bool:
    """Sampled fractions with phi > H are non-decreasing along the ladder."""
    fr = [row["fraction_above_H"] for row in curve]
    return all(b >= a for a, b in zip(fr, fr[1:]))


@dataclass
class ConsistencyReport:
    clauses: dict
    entropy: EntropyEstimate | None
    expansivity: list[ExpansivityReport]
    stable_tables: list[dict]
    witnesses: list[dict]

    @property
    def status(self) -> str:
        if self.clauses.get("a") == "not-applicable":
            return "not-applicable"
        return "pass" if all(v == "pass" for v in self.clauses.values()) else "violation"


def theorem_a_consistency(sys: FiberSystem, dis: DisintegratedMeasure, env: BaseEnvironment,
                          ladder: Sequence[RandomScalar] | None = None, depth: int = 10,
                          samples: int = 50, seed: int = 0, n_max: int = 14,
                          entropy_samples: int = 100, stable_depth: int = 6) -> ConsistencyReport:
    """Positive entropy must come with positive expansivity and null stable classes.

    (a) the entropy estimate exceeds H_MIN, otherwise the check is skipped;
    (b) the forward expansive diagnostic has evidence at some ladder radius with
        decay rate >= estimate/2 - RATE_TOLERANCE;
    (c) stable-class mass tables decrease strictly in depth for every sampled w.
    """
    ladder = list(ladder or delta_ladder(sys))
    est = brin_katok_estimate(sys, dis, env, n_max, entropy_samples, seed, ladder)
    clauses = {}
    if not est.estimate > H_MIN:
        clauses["a"] = "not-applicable"
        return ConsistencyReport(clauses, est, [], [], [])
    clauses["a"] = "pass"
    reports = []
    target = est.estimate / 2 - RATE_TOLERANCE
    ok_b = False
    for i, delta in enumerate(ladder):
        rep = expansive_diagnostic(sys, dis, delta, env, depth, n_base=max(1, samples // 5),
                                   n_fiber=2, seed=derive_seed(seed, 10, i), sided="forward")
        reports.append(rep)
        rate = rep.fit.get("rate")
        if rep.verdict == EVIDENCE and rate is not None and rate >= target:
            ok_b = True
            break
    clauses["b"] = "pass" if ok_b else "violation"
    tables, witnesses = [], []
    for i, w in enumerate(sample_base(env, samples, derive_seed(seed, 20))):
        p = sample_fiber(dis.at(w), 1, derive_seed(seed, 21, i))[0]
        table = stable_class_mass(sys, dis, w, p, ladder, stable_depth)
        bad = strictly_decreasing(table)
        tables.append({"w": w.ident, "p": point_label(p), "rows": table})
        if bad:
            witnesses.append({"w": w.ident, "p": point_label(p), "pairs": bad})
    clauses["c"] = "pass" if not witnesses else "violation"
    return ConsistencyReport(clauses, est, reports, tables, witnesses)
