"""Fiber spaces E_w, generators f_w and the cocycle f_w^n.

Three fiber kinds are supported:

* ``symbolic`` -- one-sided sequences with x_i <= k(theta^i w), metric
  d(x, y) = sum_i 2^-i |1/x_i - 1/y_i|, dynamics the left shift;
* ``circle`` -- R/Z with arc-length metric;
* ``interval`` -- [0, 1] with the euclidean metric.

Circle maps are lifts z -> slope*z + shift; interval maps are increasing
piecewise-linear homeomorphisms given by their knots. Both keep rational
inputs rational, so Bowen sets can be computed exactly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .base import BasePoint, Number, RandomScalar, advance, eval_scalar


class NonInvertibleError(ValueError):
    """Raised when a backward iterate is requested from a non-invertible system."""


# --------------------------------------------------------------------------- points


@dataclass(frozen=True)
class SymbolicPoint:
    """A sequence given by a finite prefix followed by a repeated block."""

    prefix: tuple[int, ...] = ()
    period: tuple[int, ...] = (1,)

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be non-empty")
        if any(s < 1 for s in self.prefix + self.period):
            raise ValueError("symbols are positive integers")
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))

    def coord(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def word(self, n: int) -> tuple[int, ...]:
        return tuple(self.coord(i) for i in range(n))

    def shifted(self, n: int = 1) -> "SymbolicPoint":
        if n <= len(self.prefix):
            return SymbolicPoint(self.prefix[n:], self.period)
        r = (n - len(self.prefix)) % len(self.period)
        return SymbolicPoint((), self.period[r:] + self.period[:r])

    def prepend(self, symbols: Sequence[int]) -> "SymbolicPoint":
        return SymbolicPoint(tuple(symbols) + self.prefix, self.period)

    def __repr__(self):
        head = "".join(map(str, self.prefix))
        return f"{head}({''.join(map(str, self.period))})^inf"


FiberPoint = Union[SymbolicPoint, Fraction, float, int]


# --------------------------------------------------------------------------- spaces


@dataclass(frozen=True)
class FiberSpace:
    kind: str
    alphabet_bound: RandomScalar | None = None

    def __post_init__(self):
        if self.kind not in ("symbolic", "circle", "interval"):
            raise ValueError(f"unknown fiber kind {self.kind!r}")
        if self.kind == "symbolic":
            if self.alphabet_bound is None:
                raise ValueError("symbolic fibers need an alphabet bound k")
            if any(not isinstance(v, int) or v < 2 for v in self.alphabet_bound.values()):
                raise ValueError("alphabet bound must be an integer >= 2")

    @classmethod
    def symbolic(cls, k: RandomScalar) -> "FiberSpace":
        return cls("symbolic", k)

    @classmethod
    def circle(cls) -> "FiberSpace":
        return cls("circle")

    @classmethod
    def interval(cls) -> "FiberSpace":
        return cls("interval")

    def bound(self, w: BasePoint, i: int = 0) -> int:
        """Alphabet bound k(theta^i w) of coordinate i in E_w."""
        return eval_scalar(self.alphabet_bound, w, i)

    @property
    def diameter(self):
        if self.kind == "circle":
            return Fraction(1, 2)
        if self.kind == "interval":
            return 1
        K = self.alphabet_bound.sup()
        return 2 * (1 - Fraction(1, K))

    def contains(self, w: BasePoint, x: FiberPoint, depth: int = 64) -> bool:
        if self.kind == "symbolic":
            if not isinstance(x, SymbolicPoint):
                return False
            if any(x.coord(i) > self.bound(w, i) for i in range(max(depth, len(x.prefix)))):
                return False
            return max(x.period) <= self.alphabet_bound.inf()
        if isinstance(x, SymbolicPoint):
            return False
        return 0 <= x < 1 if self.kind == "circle" else 0 <= x <= 1


# --------------------------------------------------------------------------- maps


@dataclass(frozen=True)
class CircleAffine:
    """Circle map with lift z -> slope*z + shift (slope a positive integer)."""

    slope: int
    shift: Number = 0

    def __call__(self, x):
        return (self.slope * x + self.shift) % 1

    @property
    def invertible(self) -> bool:
        return self.slope == 1

    def inverse(self) -> "CircleAffine":
        if self.slope != 1:
            raise NonInvertibleError(f"degree-{self.slope} circle map has no inverse")
        return CircleAffine(1, -self.shift)

    @property
    def degree(self) -> int:
        return self.slope


@dataclass(frozen=True)
class IntervalPL:
    """Increasing piecewise-linear homeomorphism of [0, 1] through the given knots."""

    knots: tuple[tuple[Number, Number], ...]

    def __post_init__(self):
        xs = [k[0] for k in self.knots]
        ys = [k[1] for k in self.knots]
        if xs[0] != 0 or xs[-1] != 1 or ys[0] != 0 or ys[-1] != 1:
            raise ValueError("knots must run from (0,0) to (1,1)")
        if any(b <= a for a, b in zip(xs, xs[1:])) or any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", tuple((k[0], k[1]) for k in self.knots))

    @classmethod
    def tent_homeo(cls, breakpoint: Number) -> "IntervalPL":
        """Slope 2 on [0, b], then the line to (1, 1)."""
        return cls(((0, 0), (breakpoint, 2 * breakpoint), (1, 1)))

    def branches(self):
        """(x_lo, x_hi, slope, intercept) for each linear piece."""
        out = []
        for (x0, y0), (x1, y1) in zip(self.knots, self.knots[1:]):
            a = (y1 - y0) / (x1 - x0)
            out.append((x0, x1, a, y0 - a * x0))
        return out

    def __call__(self, x):
        xs = [k[0] for k in self.knots]
        i = min(max(bisect.bisect_right(xs, x) - 1, 0), len(xs) - 2)
        x0, x1, a, b = self.branches()[i]
        return a * x + b

    @property
    def invertible(self) -> bool:
        return True

    def inverse(self) -> "IntervalPL":
        return IntervalPL(tuple((y, x) for x, y in self.knots))


@dataclass(frozen=True)
class Shift:
    def __call__(self, x: SymbolicPoint) -> SymbolicPoint:
        return x.shifted(1)

    @property
    def invertible(self) -> bool:
        return False

    def inverse(self):
        raise NonInvertibleError("the one-sided shift is not invertible")


IDENTITY_CIRCLE = CircleAffine(1, 0)
IDENTITY_INTERVAL = IntervalPL(((0, 0), (1, 1)))


# --------------------------------------------------------------------------- systems


@dataclass(frozen=True)
class FiberSystem:
    """Fiber space plus the measurable choice w -> f_w.

    ``generator`` is ``shift``, ``expanding`` (x -> deg(w) x mod 1),
    ``rotation`` (x -> x + angle(w)), ``mixed`` (per-symbol table of maps),
    ``pl`` (per-symbol table of interval homeomorphisms) or ``identity``.
    """

    space: FiberSpace
    generator: str
    param: RandomScalar | None = None
    table: Mapping[int, object] | None = None
    name: str = ""

    def __post_init__(self):
        kind = self.space.kind
        ok = {
            "shift": kind == "symbolic",
            "expanding": kind == "circle",
            "rotation": kind == "circle",
            "mixed": kind in ("circle", "interval"),
            "pl": kind == "interval",
            "identity": kind in ("circle", "interval"),
        }
        if not ok.get(self.generator, False):
            raise ValueError(f"generator {self.generator!r} does not act on {kind} fibers")
        if self.generator in ("expanding", "rotation") and self.param is None:
            raise ValueError(f"{self.generator} needs a parameter scalar")
        if self.generator == "expanding":
            if any(not isinstance(d, int) or d < 2 for d in self.param.values()):
                raise ValueError("degrees must be integers >= 2")
        if self.generator in ("mixed", "pl") and not self.table:
            raise ValueError(f"{self.generator} needs a per-symbol map table")
        if self.table is not None:
            object.__setattr__(self, "table", dict(self.table))

    def __hash__(self):
        items = tuple(sorted(self.table.items())) if self.table else None
        return hash((self.space, self.generator, self.param, items, self.name))

    # constructors
    @classmethod
    def shift(cls, k: RandomScalar, name: str = "") -> "FiberSystem":
        return cls(FiberSpace.symbolic(k), "shift", name=name)

    @classmethod
    def expanding_circle(cls, degree: RandomScalar, name: str = "") -> "FiberSystem":
        return cls(FiberSpace.circle(), "expanding", param=degree, name=name)

    @classmethod
    def rotation(cls, angle: RandomScalar, name: str = "") -> "FiberSystem":
        return cls(FiberSpace.circle(), "rotation", param=angle.map(lambda a: a, positive=False),
                   name=name)

    @classmethod
    def mixed(cls, table: Mapping[int, object], space: str = "circle", name: str = "") -> "FiberSystem":
        return cls(FiberSpace(space), "mixed", table=table, name=name)

    @classmethod
    def pl_interval(cls, breakpoints: Mapping[int, Number], name: str = "") -> "FiberSystem":
        table = {s: IntervalPL.tent_homeo(b) for s, b in breakpoints.items()}
        return cls(FiberSpace.interval(), "pl", table=table, name=name)

    @classmethod
    def identity(cls, space: str = "circle", name: str = "") -> "FiberSystem":
        return cls(FiberSpace(space), "identity", name=name)

    def generator_at(self, w: BasePoint):
        """The map f_w : E_w -> E_{theta(w)}."""
        g = self.generator
        if g == "shift":
            return Shift()
        if g == "expanding":
            return CircleAffine(eval_scalar(self.param, w), 0)
        if g == "rotation":
            return CircleAffine(1, eval_scalar(self.param, w))
        if g == "identity":
            return IDENTITY_CIRCLE if self.space.kind == "circle" else IDENTITY_INTERVAL
        return self.table[w.symbol(0)]

    def maps(self):
        g = self.generator
        if g == "shift":
            return [Shift()]
        if g == "expanding":
            return [CircleAffine(d, 0) for d in self.param.values()]
        if g == "rotation":
            return [CircleAffine(1, a) for a in self.param.values()]
        if g == "identity":
            return [self.generator_at(None)]
        return list(self.table.values())

    @property
    def invertible(self) -> bool:
        return all(m.invertible for m in self.maps())

    @property
    def is_isometric(self) -> bool:
        return self.generator in ("rotation", "identity") or (
            self.generator == "mixed" and all(isinstance(m, CircleAffine) and m.slope == 1
                                              for m in self.maps()))

    def inverse_at(self, w: BasePoint):
        """(f_w)^-1 : E_{theta(w)} -> E_w."""
        return self.generator_at(w).inverse()

    def degree(self) -> RandomScalar | None:
        """Declared degree scalar, if the system has one."""
        if self.generator == "expanding":
            return self.param
        if self.generator == "shift":
            return self.space.alphabet_bound
        return None


def cocycle_apply(sys: FiberSystem, w: BasePoint, x: FiberPoint, n: int) -> FiberPoint:
    """f_w^n(x); negative n composes inverses along theta^-1(w), ..., theta^n(w)."""
    if n >= 0:
        for k in range(n):
            x = sys.generator_at(advance(w, k))(x)
        return x
    if not sys.invertible:
        raise NonInvertibleError(f"f_w^{n} requested on a non-invertible system")
    for k in range(1, -n + 1):
        x = sys.inverse_at(advance(w, -k))(x)
    return x


def orbit(sys: FiberSystem, w: BasePoint, x: FiberPoint, n: int) -> list:
    """[x, f_w x, ..., f_w^{n-1} x]."""
    out = [x]
    for k in range(n - 1):
        x = sys.generator_at(advance(w, k))(x)
        out.append(x)
    return out


def circle_distance(x, y):
    d = abs(x - y) % 1
    return min(d, 1 - d)


def symbolic_distance(x: SymbolicPoint, y: SymbolicPoint) -> Fraction:
    """Exact value of sum_i 2^-i |1/x_i - 1/y_i| for eventually periodic points."""
    start = max(len(x.prefix), len(y.prefix))
    period = math.lcm(len(x.period), len(y.period))

    def term(i):
        a, b = x.coord(i), y.coord(i)
        return Fraction(abs(b - a), a * b) / (1 << i) if a != b else 0

    head = sum((term(i) for i in range(start)), Fraction(0))
    cycle = sum((term(i) for i in range(start, start + period)), Fraction(0))
    return head + cycle / (1 - Fraction(1, 1 << period))


def fiber_distance(space: FiberSpace, x: FiberPoint, y: FiberPoint, tail_depth: int = 64):
    """Certified (lower, upper) bracket of d(x, y).

    Symbolic distances sum the first ``tail_depth`` terms exactly and bound the
    rest by sum_{i >= tail_depth} 2^-i = 2^-(tail_depth-1).
    """
    if space.kind == "circle":
        d = circle_distance(x, y)
        return d, d
    if space.kind == "interval":
        d = abs(x - y)
        return d, d
    if tail_depth < 1:
        raise ValueError("tail_depth must be positive")
    total = Fraction(0)
    for i in range(tail_depth):
        a, b = x.coord(i), y.coord(i)
        if a != b:
            total += Fraction(abs(b - a), a * b) / (1 << i)
    return total, total + Fraction(1, 1 << (tail_depth - 1))
