"""Invariant measures by pullback averaging.

Pulling a disintegration back along the base orbit and averaging,

    mu_{n,w} = (1/n) sum_{i<n} (f_{w_-1} o ... o f_{w_-i})_* mu_{w_-i},

gives measures whose invariance defect f_{w*} mu_{n,w} - mu_{n,theta w}
telescopes to two terms, hence is at most 2/n in total variation on any
sub-algebra. Gamma-set masses are linear in the measure, so averages of
expansive disintegrations stay expansive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .base import BaseEnvironment, BasePoint, RandomScalar, advance, derive_seed, eval_scalar, sample_base
from .expansivity import EVIDENCE, ExpansivityReport, expansive_diagnostic
from .fiber import CircleAffine, FiberSystem, NonInvertibleError
from .gamma import bowen_set, canonical_cells, gamma_approx
from .measures import DisintegratedMeasure, FiberMeasure, Mixture, measure_distance, pullback_measure, push_forward

ARC_TOLERANCE = 1e-9


# --------------------------------------------------------------------------- Gamma sets under pullback


@dataclass
class IdentityCheck:
    passed: bool
    convention: str
    left: tuple
    right: tuple
    witness: dict | None = None


def _normalize_arcs(kind: str, arcs) -> tuple:
    if kind != "circle":
        return tuple(sorted(arcs))
    out = []
    for lo, hi in arcs:
        s = lo - (lo // 1)
        out.append((s, s + (hi - lo)))
    return tuple(sorted(out))


def _arcs_match(a, b, exact: bool) -> bool:
    if len(a) != len(b):
        return False
    if exact:
        return a == b
    return all(abs(x0 - y0) <= ARC_TOLERANCE and abs(x1 - y1) <= ARC_TOLERANCE
               for (x0, x1), (y0, y1) in zip(a, b))


def gamma_pullback_identity_check(sys: FiberSystem, w: BasePoint, x, delta: RandomScalar,
                                  depth: int) -> IdentityCheck:
    """(f_{w_-1})^-1 Gamma(x, w) versus Gamma((f_{w_-1})^-1 x, w_-1) at finite depth.

    Invertible fibers: the depth-n two-sided set at (w, x), with constraint
    times -(n-1)..n-1, pulled back by f_{w_-1}, must equal the set at w_-1
    around the preimage point with constraint times -(n-2)..n, each time k
    using radius delta(theta^k w_-1).

    Shift: one-step preimage convention. The forward set at (w, x) with times
    0..n-1 is pulled back by prepending every admissible symbol; it must equal
    the set at w_-1 around 1x with constraint times 1..n.
    """
    z = advance(w, -1)
    n = depth
    if sys.generator == "shift":
        fwd = gamma_approx(sys, w, x, delta, n, "forward")
        k0 = sys.space.bound(z, 0)
        left_in = [(a,) + c for a in range(1, k0 + 1) for c in fwd.cells]
        left_bd = [(a,) + c for a in range(1, k0 + 1) for c in fwd.boundary]
        xp = x.prepend((1,))
        right = bowen_set(sys, z, xp, lambda k: eval_scalar(delta, z, k), (0, n),
                          constrained=range(1, n + 1), sided="forward")
        L = (canonical_cells(sys.space, z, left_in), canonical_cells(sys.space, z, left_bd))
        R = (canonical_cells(sys.space, z, right.cells), canonical_cells(sys.space, z, right.boundary))
        ok = L == R
        wit = None if ok else {"w": w.ident, "x": repr(x), "left": L, "right": R}
        return IdentityCheck(ok, "one-step-preimage", L, R, wit)
    if not sys.invertible:
        raise NonInvertibleError("the pullback identity needs invertible fibers or the shift")
    g_inv = sys.inverse_at(z)
    left_set = gamma_approx(sys, w, x, delta, n, "two-sided")
    if isinstance(g_inv, CircleAffine):
        pulled = [(g_inv.slope * a + g_inv.shift, g_inv.slope * b + g_inv.shift) for a, b in left_set.arcs]
    else:
        pulled = [(g_inv(a), g_inv(b)) for a, b in left_set.arcs]
    xp = g_inv(x)
    right_set = bowen_set(sys, z, xp, lambda k: eval_scalar(delta, z, k), (-(n - 2), n),
                          sided="two-sided")
    kind = sys.space.kind
    L = _normalize_arcs(kind, pulled)
    R = _normalize_arcs(kind, right_set.arcs)
    exact = left_set.exact and right_set.exact
    ok = _arcs_match(L, R, exact)
    wit = None if ok else {"w": w.ident, "x": str(x), "left": L, "right": R}
    return IdentityCheck(ok, "exact" if exact else f"tolerance {ARC_TOLERANCE}", L, R, wit)


# --------------------------------------------------------------------------- pullback and averages


def pullback_disintegration(sys: FiberSystem, dis: DisintegratedMeasure, order: int = 1) -> DisintegratedMeasure:
    """w -> (f_{w_-1} o ... o f_{w_-order})_* mu_{w_-order}."""
    if order < 0:
        raise ValueError("order must be >= 0")

    def rule(w):
        mu = dis.at(advance(w, -order))
        for i in range(order, 0, -1):
            mu = pullback_measure(sys, advance(w, -(i - 1)), mu)
        return mu

    return DisintegratedMeasure(f"pullback{order}({dis.name})", rule, dis.invariant, dis.non_atomic)


@dataclass
class CesaroState:
    sys: FiberSystem
    dis: DisintegratedMeasure
    base: BasePoint
    components: list[FiberMeasure] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.components)

    @property
    def average(self) -> FiberMeasure:
        n = self.order
        return Mixture.of((Fraction(1, n), c) for c in self.components)

    def extend(self, steps: int = 1) -> "CesaroState":
        """Append the next components (i = order, order+1, ...)."""
        for _ in range(steps):
            i = self.order
            mu = self.dis.at(advance(self.base, -i))
            for j in range(i, 0, -1):
                mu = pullback_measure(self.sys, advance(self.base, -(j - 1)), mu)
            self.components.append(mu)
        return self

    def shifted(self) -> "CesaroState":
        """The state at theta(w) of the same order, reusing the pushed components."""
        nxt = advance(self.base, 1)
        f = self.sys.generator_at(self.base)
        comps = [self.dis.at(nxt)] + [push_forward(c, f, nxt) for c in self.components[:-1]]
        return CesaroState(self.sys, self.dis, nxt, comps)


def cesaro_average(sys: FiberSystem, dis: DisintegratedMeasure, w: BasePoint, n: int) -> CesaroState:
    if n < 1:
        raise ValueError("n must be >= 1")
    return CesaroState(sys, dis, w).extend(n)


def cesaro_measure(sys: FiberSystem, dis: DisintegratedMeasure, w: BasePoint, n: int) -> FiberMeasure:
    """mu_{n,w} without keeping components: mu_{m+1,v} = (mu_v + m f_* mu_{m,v_-1})/(m+1)."""
    v = advance(w, -(n - 1))
    avg = dis.at(v)
    for m in range(1, n):
        f = sys.generator_at(v)
        v = advance(v, 1)
        avg = Mixture.of([(Fraction(1, m + 1), dis.at(v)),
                          (Fraction(m, m + 1), push_forward(avg, f, v))])
    return avg


def cesaro_disintegration(sys: FiberSystem, dis: DisintegratedMeasure, n: int) -> DisintegratedMeasure:
    return DisintegratedMeasure(f"cesaro{n}({dis.name})", lambda w: cesaro_measure(sys, dis, w, n),
                                invariant=dis.invariant, non_atomic=dis.non_atomic)


def invariance_defect(sys: FiberSystem, w: BasePoint, mu_w: FiberMeasure, mu_next: FiberMeasure,
                      mode: str = "tv-cylinder", depth: int = 8):
    """Distance between f_{w*} mu_w and mu_{theta w}."""
    pushed = push_forward(mu_w, sys.generator_at(w), advance(w, 1))
    return measure_distance(pushed, mu_next, mode, depth)


def default_mode(sys: FiberSystem) -> str:
    return "tv-cylinder" if sys.space.kind == "symbolic" else "tv-grid"


def powers_of_two(n_max: int) -> list[int]:
    out, n = [], 1
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


@dataclass
class ConstructionReport:
    rows: list[dict]
    envelope_ok: bool
    hypothesis: str
    initial: ExpansivityReport | None
    final: ExpansivityReport | None
    final_measures: dict
    params: dict

    def csv_rows(self) -> list[tuple]:
        return [(r["w_id"], r["n"], r["depth"], r["defect"]) for r in self.rows]


def construct_invariant(sys: FiberSystem, dis: DisintegratedMeasure, env: BaseEnvironment,
                        delta: RandomScalar, n_max: int = 256, probe_depth: int = 8,
                        base_samples: int = 20, seed: int = 0,
                        orders: Sequence[int] | None = None, probe_depths: Sequence[int] | None = None,
                        diag_depth: int = 12, diag_base: int = 6, diag_fiber: int = 3) -> ConstructionReport:
    """Defect curves of the Cesaro averages plus expansivity of the start and the result."""
    orders = sorted(orders or powers_of_two(n_max))
    mode = default_mode(sys)
    probes = list(probe_depths or ([probe_depth] if mode == "tv-cylinder" else [0]))
    rows = []
    envelope_ok = True
    finals = {}
    for w in sample_base(env, base_samples, derive_seed(seed, 0)):
        state = CesaroState(sys, dis, w)
        for n in orders:
            state.extend(n - state.order)
            avg = state.average
            nxt = state.shifted().average
            for d in probes:
                defect = invariance_defect(sys, w, avg, nxt, mode, d)
                ok = defect <= Fraction(2, n)
                envelope_ok &= bool(ok)
                rows.append({"w_id": w.ident, "n": n, "depth": d, "defect": defect})
        finals[w.ident] = state.average
    initial = expansive_diagnostic(sys, dis, delta, env, diag_depth, diag_base, diag_fiber,
                                   derive_seed(seed, 1))
    hypothesis = "met" if initial.verdict == EVIDENCE else "unmet"
    final = expansive_diagnostic(sys, cesaro_disintegration(sys, dis, orders[-1]), delta, env,
                                 diag_depth, diag_base, diag_fiber, derive_seed(seed, 1))
    params = {"n_max": orders[-1], "orders": orders, "mode": mode, "probe_depths": probes,
              "base_samples": base_samples, "seed": seed}
    return ConstructionReport(rows, envelope_ok, hypothesis, initial, final, finals, params)
