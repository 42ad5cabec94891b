"""Per-fiber measures mu_w, disintegrations w -> mu_w, pushforwards and distances.

Representations:

* :class:`CylinderProduct` -- product measure on a symbolic fiber whose
  coordinate vectors are exact fractions;
* :class:`GridDensity` -- piecewise-constant density on the circle or interval;
* :class:`Atomic` -- finitely many weighted points;
* :class:`Mixture` -- finite convex combination of the above (Cesaro averages).

All masses stay exact whenever the inputs are rational.
"""

from __future__ import annotations

import bisect
import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .base import BasePoint, Number, RandomScalar, advance, eval_scalar
from .fiber import CircleAffine, FiberSystem, IntervalPL, Shift, SymbolicPoint

SAMPLE_DEPTH = 64
_U53 = 1 << 53


class AlphabetBoundWarning(UserWarning):
    """A cylinder word exceeds the alphabet bound of its fiber; its mass is 0."""


class IncompatibleMeasures(ValueError):
    """The two measures cannot be compared or combined in the requested way."""


# --------------------------------------------------------------------------- cylinders


@dataclass(frozen=True)
class CylinderSet:
    """C_w(x_0 ... x_{n-1})."""

    base: BasePoint
    word: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.word)


def _uniform(k: int) -> tuple[Fraction, ...]:
    return (Fraction(1, k),) * k


def _headed(k: int, first: Number) -> tuple[Number, ...]:
    rest = (1 - first) / (k - 1)
    return (first,) + (rest,) * (k - 1)


@dataclass(frozen=True)
class ProductRule:
    """Coordinate law of a product measure.

    The vector of a coordinate depends on its alphabet bound k and on its age,
    the number of shift steps since the measure was created. ``head`` (if set)
    gives the mass of symbol 1 at age 0; older coordinates use ``first`` (mass
    of symbol 1, default uniform). Rules with ``head`` have memory 1: after one
    pushforward they no longer depend on age.
    """

    name: str = "uniform"
    head: Number | None = None
    first: Number | None = None

    @property
    def memory(self) -> int:
        return 0 if self.head is None else 1

    def vector(self, k: int, age: int) -> tuple[Number, ...]:
        if self.head is not None and age < 1:
            return _headed(k, self.head)
        if self.first is not None:
            return _headed(k, self.first)
        return _uniform(k)

    def max_entry(self, k_values: Iterable[int]) -> Number:
        out = 0
        for k in k_values:
            for age in (0, 1):
                out = max(out, max(self.vector(k, age)))
        return out


class FiberMeasure:
    """Common interface; concrete classes below."""

    def key(self):
        raise NotImplementedError

    def total_mass(self):
        raise NotImplementedError


@lru_cache(maxsize=1 << 16)
def _product_vector(rule, base, bound, age, i):
    return rule.vector(eval_scalar(bound, base, i), age + i)


@dataclass(frozen=True)
class CylinderProduct(FiberMeasure):
    rule: ProductRule
    base: BasePoint
    bound: RandomScalar
    age: int = 0

    def vector(self, i: int) -> tuple[Number, ...]:
        return _product_vector(self.rule, self.base, self.bound, self.age, i)

    def cylinder_mass(self, word: Sequence[int]) -> Number:
        mass = Fraction(1)
        for i, s in enumerate(word):
            v = self.vector(i)
            if not 1 <= s <= len(v):
                warnings.warn(f"symbol {s} at coordinate {i} exceeds alphabet bound {len(v)}",
                              AlphabetBoundWarning, stacklevel=3)
                return Fraction(0)
            mass *= v[s - 1]
        return mass

    def word_distribution(self, depth: int) -> dict[tuple[int, ...], Number]:
        vectors = [self.vector(i) for i in range(depth)]
        if all(isinstance(p, (int, Fraction)) for v in vectors for p in v):
            # integer numerators over a common denominator, one division at the end
            dist, denom = {(): 1}, 1
            for v in vectors:
                d = math.lcm(*(Fraction(p).denominator for p in v))
                nums = [int(p * d) for p in v]
                dist = {u + (s + 1,): m * q for u, m in dist.items() for s, q in enumerate(nums) if q}
                denom *= d
            # product masses take few distinct values; build each Fraction once
            values = {m: Fraction(m, denom) for m in set(dist.values())}
            return {u: values[m] for u, m in dist.items()}
        dist = {(): Fraction(1)}
        for v in vectors:
            dist = {u + (s + 1,): m * p for u, m in dist.items() for s, p in enumerate(v) if p}
        return dist

    def key(self):
        return ("product", self.rule, self.base, self.bound, min(self.age, self.rule.memory))

    def total_mass(self):
        return Fraction(1)

    def is_atomic(self) -> bool:
        return False


@dataclass(frozen=True)
class GridDensity(FiberMeasure):
    """Piecewise-constant density: cell i = [edges[i], edges[i+1]] has mass weights[i]."""

    kind: str
    edges: tuple[Number, ...]
    weights: tuple[Number, ...]

    def __post_init__(self):
        if self.kind not in ("circle", "interval"):
            raise ValueError("grid densities live on the circle or the interval")
        if len(self.edges) != len(self.weights) + 1:
            raise ValueError("need len(edges) == len(weights) + 1")
        if self.edges[0] != 0 or self.edges[-1] != 1:
            raise ValueError("edges must run from 0 to 1")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")
        if any(p < 0 for p in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "weights", tuple(self.weights))

    @classmethod
    def uniform_grid(cls, kind: str, weights: Sequence[Number]) -> "GridDensity":
        R = len(weights)
        return cls(kind, tuple(Fraction(i, R) for i in range(R + 1)), tuple(weights))

    @classmethod
    def lebesgue(cls, kind: str) -> "GridDensity":
        return cls(kind, (0, 1), (Fraction(1),))

    @property
    def resolution(self) -> int:
        return len(self.weights)

    def density(self, i: int):
        return self.weights[i] / (self.edges[i + 1] - self.edges[i])

    def interval_mass(self, a, b):
        """Mass of [a, b] with 0 <= a <= b <= 1."""
        if b <= a:
            return 0
        e = self.edges
        i = max(bisect.bisect_right(e, a) - 1, 0)
        total = 0
        while i < len(self.weights) and e[i] < b:
            lo, hi = max(a, e[i]), min(b, e[i + 1])
            if hi > lo:
                total += self.weights[i] * (hi - lo) / (e[i + 1] - e[i])
            i += 1
        return total

    def arc_mass(self, lo, hi):
        """Mass of the lifted arc [lo, hi] (circle) or of [lo, hi] clipped to [0, 1]."""
        if self.kind == "interval":
            return self.interval_mass(max(lo, 0), min(hi, 1))
        if hi - lo >= 1:
            return sum(self.weights)
        shift = math.floor(lo)
        a, b = lo - shift, hi - shift
        if b <= 1:
            return self.interval_mass(a, b)
        return self.interval_mass(a, 1) + self.interval_mass(0, b - 1)

    def key(self):
        return ("grid", self.kind, self.edges, self.weights)

    def total_mass(self):
        return sum(self.weights)

    def is_atomic(self) -> bool:
        return False


@dataclass(frozen=True)
class Atomic(FiberMeasure):
    atoms: tuple[tuple[object, Number], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("atomic measure needs at least one atom")
        if any(p <= 0 for _, p in self.atoms):
            raise ValueError("atom weights must be positive")
        if abs(sum(p for _, p in self.atoms) - 1) > 1e-12:
            raise ValueError("atom weights must sum to 1")
        object.__setattr__(self, "atoms", tuple((x, p) for x, p in self.atoms))

    @classmethod
    def dirac(cls, x) -> "Atomic":
        return cls(((x, Fraction(1)),))

    def cylinder_mass(self, word: Sequence[int]) -> Number:
        n = len(word)
        return sum((p for x, p in self.atoms if x.word(n) == tuple(word)), Fraction(0))

    def word_distribution(self, depth: int) -> dict[tuple[int, ...], Number]:
        out: dict = {}
        for x, p in self.atoms:
            u = x.word(depth)
            out[u] = out.get(u, 0) + p
        return out

    def key(self):
        return ("atomic", self.atoms)

    def total_mass(self):
        return sum(p for _, p in self.atoms)

    def is_atomic(self) -> bool:
        return True


@dataclass(frozen=True)
class Mixture(FiberMeasure):
    """sum_i weight_i * component_i with equal components merged."""

    components: tuple[tuple[Number, FiberMeasure], ...]

    @classmethod
    def of(cls, pairs: Iterable[tuple[Number, FiberMeasure]]) -> FiberMeasure:
        merged: dict = {}
        order: list = []
        for weight, comp in pairs:
            inner = comp.components if isinstance(comp, Mixture) else ((1, comp),)
            for w2, c in inner:
                k = c.key()
                if k not in merged:
                    merged[k] = [0, c]
                    order.append(k)
                merged[k][0] += weight * w2
        comps = tuple((merged[k][0], merged[k][1]) for k in order if merged[k][0])
        if len(comps) == 1 and comps[0][0] == 1:
            return comps[0][1]
        return cls(comps)

    def cylinder_mass(self, word):
        return sum(w * c.cylinder_mass(word) for w, c in self.components)

    def word_distribution(self, depth: int):
        out: dict = {}
        for w, c in self.components:
            for u, m in c.word_distribution(depth).items():
                out[u] = out.get(u, 0) + w * m
        return out

    def arc_mass(self, lo, hi):
        return sum(w * c.arc_mass(lo, hi) for w, c in self.components)

    def key(self):
        return ("mixture", tuple((w, c.key()) for w, c in self.components))

    def total_mass(self):
        return sum(w * c.total_mass() for w, c in self.components)

    def is_atomic(self) -> bool:
        return any(c.is_atomic() for _, c in self.components)


def cylinder_mass(mu: FiberMeasure, c: CylinderSet | Sequence[int]) -> Number:
    """mu_w(C_w(word)); exact when mu is rational."""
    word = c.word if isinstance(c, CylinderSet) else tuple(c)
    if not hasattr(mu, "cylinder_mass"):
        raise IncompatibleMeasures(f"{type(mu).__name__} has no cylinder masses")
    if isinstance(c, CylinderSet) and isinstance(mu, CylinderProduct) and c.base != mu.base:
        raise IncompatibleMeasures("cylinder and measure live on different fibers")
    return mu.cylinder_mass(word)


# --------------------------------------------------------------------------- pushforward


def _accumulate_pieces(kind: str, pieces: list) -> GridDensity:
    """Build a step density from (lo, hi, mass) pieces inside [0, 1]."""
    pts = sorted({0, 1} | {p for lo, hi, m in pieces for p in (lo, hi)})
    index = {p: i for i, p in enumerate(pts)}
    diff = [0] * len(pts)
    for lo, hi, m in pieces:
        d = m / (hi - lo)
        diff[index[lo]] += d
        diff[index[hi]] -= d
    dens = list(itertools.accumulate(diff))[:-1]
    edges, weights, last = [pts[0]], [], None
    for i, d in enumerate(dens):
        width = pts[i + 1] - pts[i]
        if last is not None and d == last:
            edges[-1] = pts[i + 1]
            weights[-1] += d * width
        else:
            edges.append(pts[i + 1])
            weights.append(d * width)
        last = d
    # exact inputs give exact totals; float inputs get renormalised rounding
    total = sum(weights)
    if not isinstance(total, Fraction) or total != 1:
        weights = [w / total for w in weights]
    return GridDensity(kind, tuple(edges), tuple(weights))


def _push_grid(mu: GridDensity, f) -> GridDensity:
    pieces = []
    e = mu.edges
    for i, m in enumerate(mu.weights):
        if not m:
            continue
        e0, e1 = e[i], e[i + 1]
        if isinstance(f, CircleAffine):
            start, end = f.slope * e0 + f.shift, f.slope * e1 + f.shift
            span = end - start
            j = math.floor(start)
            while start < end:
                seg_end = min(end, j + 1)
                if seg_end > start:
                    pieces.append((start - j, seg_end - j, m * (seg_end - start) / span))
                start = seg_end
                j += 1
        elif isinstance(f, IntervalPL):
            for x0, x1, a, b in f.branches():
                s, t = max(e0, x0), min(e1, x1)
                if t > s:
                    pieces.append((a * s + b, a * t + b, m * (t - s) / (e1 - e0)))
        else:
            raise IncompatibleMeasures(f"cannot push a grid density through {f!r}")
    return _accumulate_pieces(mu.kind, pieces)


def push_forward(mu: FiberMeasure, f, target: BasePoint) -> FiberMeasure:
    """f_* mu, where f maps the fiber of mu into E_target."""
    if isinstance(mu, Mixture):
        return Mixture.of((w, push_forward(c, f, target)) for w, c in mu.components)
    if isinstance(mu, CylinderProduct):
        if not isinstance(f, Shift):
            raise IncompatibleMeasures("product measures are pushed by the shift only")
        if advance(mu.base, 1) != target:
            raise IncompatibleMeasures("measure does not live on the preimage fiber")
        return CylinderProduct(mu.rule, target, mu.bound, mu.age + 1)
    if isinstance(mu, GridDensity):
        return _push_grid(mu, f)
    if isinstance(mu, Atomic):
        merged: dict = {}
        for x, p in mu.atoms:
            y = f(x)
            merged[y] = merged.get(y, 0) + p
        return Atomic(tuple(merged.items()))
    raise IncompatibleMeasures(f"unsupported measure {type(mu).__name__}")


def pullback_measure(sys: FiberSystem, w: BasePoint, mu_prev: FiberMeasure) -> FiberMeasure:
    """f_{w_-1 *} mu_{w_-1}: the image on E_w of a measure on E_{theta^-1 w}."""
    w_prev = advance(w, -1)
    return push_forward(mu_prev, sys.generator_at(w_prev), w)


# --------------------------------------------------------------------------- distances


def _tv_words(mu, nu, depth: int):
    if isinstance(mu, CylinderProduct) and isinstance(nu, CylinderProduct) and mu.base != nu.base:
        raise IncompatibleMeasures("measures live on different fibers")
    a, b = mu.word_distribution(depth), nu.word_distribution(depth)
    return sum(abs(a.get(u, 0) - b.get(u, 0)) for u in set(a) | set(b)) / 2


def _cells(mu: FiberMeasure):
    """(edges, weights) of a grid density or of a mixture of grid densities."""
    if isinstance(mu, GridDensity):
        return mu.edges, mu.weights
    if isinstance(mu, Mixture) and all(isinstance(c, GridDensity) for _, c in mu.components):
        pts = sorted({p for _, c in mu.components for p in c.edges})
        weights = []
        for lo, hi in zip(pts, pts[1:]):
            weights.append(sum(w * c.interval_mass(lo, hi) for w, c in mu.components))
        return tuple(pts), tuple(weights)
    raise IncompatibleMeasures("tv-grid needs grid densities")


def _tv_grid(mu, nu):
    (e1, w1), (e2, w2) = _cells(mu), _cells(nu)
    g1, g2 = GridDensity(_kind(mu), e1, w1), GridDensity(_kind(nu), e2, w2)
    pts = sorted(set(e1) | set(e2))
    return sum(abs(g1.interval_mass(a, b) - g2.interval_mass(a, b)) for a, b in zip(pts, pts[1:])) / 2


def _kind(mu):
    if isinstance(mu, GridDensity):
        return mu.kind
    if isinstance(mu, Mixture):
        return _kind(mu.components[0][1])
    return None


def _cdf_profile(mu: FiberMeasure, pts: list):
    """Right-continuous CDF value at each point and density on each gap."""
    if isinstance(mu, Atomic):
        vals = [sum((float(p) for x, p in mu.atoms if x <= t), 0.0) for t in pts]
        return vals, [0.0] * (len(pts) - 1)
    if isinstance(mu, Mixture):
        parts = [(float(w), _cdf_profile(c, pts)) for w, c in mu.components]
        vals = [sum(w * v[0][i] for w, v in parts) for i in range(len(pts))]
        dens = [sum(w * v[1][i] for w, v in parts) for i in range(len(pts) - 1)]
        return vals, dens
    if isinstance(mu, GridDensity):
        vals = [float(mu.interval_mass(0, t)) for t in pts]
        dens = [float(mu.interval_mass(a, b) / (b - a)) for a, b in zip(pts, pts[1:])]
        return vals, dens
    raise IncompatibleMeasures("wasserstein-1d needs grid or atomic measures")


def _support_points(mu):
    if isinstance(mu, Atomic):
        return {x for x, _ in mu.atoms}
    if isinstance(mu, GridDensity):
        return set(mu.edges)
    if isinstance(mu, Mixture):
        return set().union(*(_support_points(c) for _, c in mu.components))
    raise IncompatibleMeasures("wasserstein-1d needs grid or atomic measures")


def _abs_linear_integral(v0: float, slope: float, length: float) -> float:
    """integral_0^length |v0 + slope*t| dt."""
    v1 = v0 + slope * length
    if v0 * v1 >= 0:
        return abs(v0 + v1) / 2 * length
    t0 = -v0 / slope
    return abs(v0) * t0 / 2 + abs(v1) * (length - t0) / 2


def _wasserstein(mu, nu, circle: bool) -> float:
    pts = sorted({0.0, 1.0} | {float(p) for p in _support_points(mu) | _support_points(nu)})
    Fm, dm = _cdf_profile(mu, pts)
    Fn, dn = _cdf_profile(nu, pts)
    segs = [(Fm[i] - Fn[i], dm[i] - dn[i], pts[i + 1] - pts[i]) for i in range(len(pts) - 1)]

    def cost(alpha: float) -> float:
        return sum(_abs_linear_integral(v - alpha, s, h) for v, s, h in segs if h > 0)

    if not circle:
        return cost(0.0)
    ends = [v for v, s, h in segs] + [v + s * h for v, s, h in segs]
    lo, hi = min(ends), max(ends)
    if hi - lo < 1e-15:
        return cost(lo)
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, cost(lo), cost(hi)))


def measure_distance(mu: FiberMeasure, nu: FiberMeasure, mode: str = "tv-cylinder", depth: int = 8):
    """Distance between two measures on the same fiber.

    ``tv-cylinder`` is (1/2) sum over depth-``depth`` cylinders of |mu - nu|;
    ``tv-grid`` compares on the common refinement of two step densities;
    ``wasserstein-1d`` is the transport distance on the circle or the interval.
    """
    if mode == "tv-cylinder":
        if not (hasattr(mu, "word_distribution") and hasattr(nu, "word_distribution")):
            raise IncompatibleMeasures("tv-cylinder needs symbolic measures")
        return _tv_words(mu, nu, depth)
    if mode == "tv-grid":
        if _kind(mu) != _kind(nu):
            raise IncompatibleMeasures("measures live on different fiber kinds")
        return _tv_grid(mu, nu)
    if mode == "wasserstein-1d":
        kinds = {_kind(m) for m in (mu, nu)} - {None}
        if len(kinds) > 1:
            raise IncompatibleMeasures("measures live on different fiber kinds")
        circle = kinds != {"interval"}
        return _wasserstein(mu, nu, circle)
    raise ValueError(f"unknown distance mode {mode!r}")


# --------------------------------------------------------------------------- sampling


def _rational_uniform(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(0, _U53, dtype=np.int64)), _U53)


@lru_cache(maxsize=1 << 12)
def _cumulative(probs: tuple) -> tuple[float, ...]:
    return tuple(itertools.accumulate(float(p) for p in probs))


def _draw(rng: np.random.Generator, probs: Sequence[Number]) -> int:
    cum = _cumulative(tuple(probs))
    return min(bisect.bisect_right(cum, rng.random() * cum[-1]), len(probs) - 1)


def _sample_one(mu: FiberMeasure, rng: np.random.Generator, depth: int):
    if isinstance(mu, Mixture):
        comp = mu.components[_draw(rng, [w for w, _ in mu.components])][1]
        return _sample_one(comp, rng, depth)
    if isinstance(mu, Atomic):
        return mu.atoms[_draw(rng, [p for _, p in mu.atoms])][0]
    if isinstance(mu, GridDensity):
        i = _draw(rng, mu.weights)
        lo, hi = mu.edges[i], mu.edges[i + 1]
        if isinstance(lo, float) or isinstance(hi, float):
            return lo + (hi - lo) * rng.random()
        return lo + (hi - lo) * _rational_uniform(rng)
    if isinstance(mu, CylinderProduct):
        word = tuple(_draw(rng, mu.vector(i)) + 1 for i in range(depth))
        return SymbolicPoint(word, (1,))
    raise IncompatibleMeasures(f"cannot sample {type(mu).__name__}")


def sample_fiber(mu: FiberMeasure, count: int, seed: int, depth: int = SAMPLE_DEPTH) -> list:
    """``count`` points drawn from mu, deterministic in ``seed``.

    Symbolic samples carry ``depth`` drawn coordinates followed by a constant
    tail of 1s; circle and interval samples are exact dyadic rationals when the
    density edges are rational.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return [_sample_one(mu, rng, depth) for _ in range(count)]


# --------------------------------------------------------------------------- disintegrations


@dataclass(frozen=True)
class DisintegratedMeasure:
    """A rule w -> mu_w together with the driving law P (implicit in the points)."""

    name: str
    rule: Callable[[BasePoint], FiberMeasure]
    invariant: bool = False
    non_atomic: bool = True

    def at(self, w: BasePoint) -> FiberMeasure:
        return self.rule(w)

    def __call__(self, w: BasePoint) -> FiberMeasure:
        return self.rule(w)


def product_disintegration(k: RandomScalar, rule: ProductRule, invariant: bool | None = None):
    inv = rule.memory == 0 if invariant is None else invariant
    return DisintegratedMeasure(f"product:{rule.name}", lambda w: CylinderProduct(rule, w, k),
                                invariant=inv, non_atomic=True)


def uniform_product(k: RandomScalar) -> DisintegratedMeasure:
    return product_disintegration(k, ProductRule("uniform"))


def skewed_product(k: RandomScalar, head: Number = Fraction(3, 4)) -> DisintegratedMeasure:
    """Uniform product except the first coordinate, which puts ``head`` on symbol 1."""
    return product_disintegration(k, ProductRule("skewed", head=head))


def lebesgue(kind: str = "circle") -> DisintegratedMeasure:
    g = GridDensity.lebesgue(kind)
    return DisintegratedMeasure(f"lebesgue:{kind}", lambda w: g, invariant=True, non_atomic=True)


def grid_disintegration(kind: str, weights: Sequence[Number], invariant: bool = False):
    g = GridDensity.uniform_grid(kind, weights)
    return DisintegratedMeasure(f"grid:{kind}:{len(weights)}", lambda w: g,
                                invariant=invariant, non_atomic=True)


def atomic_disintegration(points: Sequence, weights: Sequence[Number] | None = None,
                          invariant: bool = False) -> DisintegratedMeasure:
    ws = weights or [Fraction(1, len(points))] * len(points)
    a = Atomic(tuple(zip(points, ws)))
    return DisintegratedMeasure("atomic", lambda w: a, invariant=invariant, non_atomic=False)


def max_cylinder_mass(mu: CylinderProduct, depth: int) -> Number:
    """Largest depth-n cylinder mass of a product measure (no enumeration)."""
    return math.prod(max(mu.vector(i)) for i in range(depth))
