"""Random Bowen balls and finite-depth approximations of Gamma sets.

A Bowen-type set is {y in E_w : d(f_w^k x, f_w^k y) <= r_k for k in K} for a
finite window K of times. Symbolic fibers get it as a union of cylinders found
by a pruned search with certified distance brackets; circle and interval fibers
get it as a union of arcs obtained by pulling constraint arcs back through the
piecewise-affine maps. Rational inputs give exact arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .base import BasePoint, RandomScalar, advance, eval_scalar
from .fiber import (
    CircleAffine,
    FiberSystem,
    NonInvertibleError,
    SymbolicPoint,
    cocycle_apply,
    fiber_distance,
    symbolic_distance,
)
from .measures import Atomic, FiberMeasure, GridDensity, Mixture

DEFAULT_BUFFER = 4
DEFAULT_BUDGET = 200_000
FLOAT_SLACK = 1e-12
_TAIL_EXTRA = 48


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GammaSetApprox:
    """Certified finite-depth approximation of a Gamma set or Bowen ball.

    Symbolic fibers: ``cells`` are cylinders (words) all of whose points are in
    the set, ``boundary`` are cylinders that could not be decided at the
    maximal word length. Circle and interval fibers: ``arcs`` are closed
    intervals in lifted coordinates; with ``exact=False`` their endpoints carry
    a floating-point slack of ``FLOAT_SLACK``.
    """

    base: BasePoint
    center: object
    depth: int
    sided: str
    space: str
    window: tuple[int, int]
    cells: tuple[tuple[int, ...], ...] = ()
    boundary: tuple[tuple[int, ...], ...] = ()
    arcs: tuple[tuple[object, object], ...] = ()
    exact: bool = True
    complete: bool = True
    max_len: int = 0
    explored: frozenset = field(default=frozenset(), compare=False, repr=False)
    pruned: frozenset = field(default=frozenset(), compare=False, repr=False)

    @property
    def kind(self) -> str:
        return "cylinders" if self.space == "symbolic" else "arcs"

    @property
    def cell_count(self) -> int:
        return len(self.cells) if self.kind == "cylinders" else len(self.arcs)

    def slack(self):
        return 0 if self.exact else FLOAT_SLACK

    def total_length(self):
        return sum(hi - lo for lo, hi in self.arcs)

    def max_cell_size(self):
        """Diameter bound of the largest certified piece."""
        if self.kind == "arcs":
            return max((hi - lo for lo, hi in self.arcs), default=0)
        if not self.cells:
            return 0
        m = min(len(c) for c in self.cells)
        return Fraction(2, 1 << m) if m else 2

    def classify(self, y) -> str:
        """Membership of a point y relative to the certified approximation."""
        if self.kind == "cylinders":
            for c in self.cells:
                if y.word(len(c)) == c:
                    return "in"
            for c in self.boundary:
                if y.word(len(c)) == c:
                    return "boundary"
            return "out"
        eps = self.slack()
        best = "out"
        for lo, hi in self.arcs:
            t = _lift_near(y, lo - eps) if self.space == "circle" else y
            if lo + eps <= t <= hi - eps:
                return "in"
            if lo - eps <= t <= hi + eps:
                best = "boundary"
        return best


def _lift_near(y, lo):
    """Representative of y mod 1 in [lo, lo + 1)."""
    return y + math.ceil(lo - y) if y < lo else y - math.floor(y - lo)


# --------------------------------------------------------------------------- symbolic search


def _symbolic_search(sys: FiberSystem, w: BasePoint, x: SymbolicPoint, radii: dict,
                     max_len: int, budget: int):
    """Cylinders certified inside / undecided for the constraints ``radii`` (time -> r)."""
    space = sys.space
    K = int(space.alphabet_bound.sup())
    J = max_len + _TAIL_EXTRA
    bounds = [space.bound(w, j) for j in range(J)]
    xs = [x.coord(j) for j in range(J)]
    if any(a > k for a, k in zip(xs, bounds)):
        raise ValueError("center point is not in the fiber E_w")
    # integer arithmetic: every quantity is scaled by L * 2^J * R
    times = sorted(radii)
    rad = {k: Fraction(radii[k]) for k in times}
    L = math.lcm(*range(1, K + 1))
    R = math.lcm(1, *(r.denominator for r in rad.values()))
    unit = L * R
    thresh = {k: rad[k].numerator * (unit // rad[k].denominator) << (J - k) for k in times}
    # G[m] bounds sum_{j >= m} 2^-j max_a |1/x_j - 1/a|, tail included
    G = [0] * (J + 1)
    G[J] = (L - L // K) * R * 2
    for j in range(J - 1, -1, -1):
        xj, kj = xs[j], bounds[j]
        mj = max(L // xj - L // kj, L - L // xj) * R
        G[j] = G[j + 1] + (mj << (J - j))

    def status(word, prefix):
        m = len(word)
        decided_in = True
        for k in times:
            low = prefix[m] - prefix[min(k, m)]
            t = thresh[k]
            if low > t:
                return "out"
            if decided_in and low + G[max(m, k)] > t:
                decided_in = False
        return "in" if decided_in else "open"

    cells, boundary = [], []
    explored, pruned = set(), set()
    stack = [((), (0,))]
    nodes = 0
    complete = True
    while stack:
        word, prefix = stack.pop()
        nodes += 1
        if nodes > budget:
            complete = False
            boundary.append(word)
            boundary.extend(wd for wd, _ in stack)
            break
        st = status(word, prefix)
        if st == "out":
            pruned.add(word)
            continue
        if st == "in":
            cells.append(word)
            continue
        m = len(word)
        if m >= max_len:
            boundary.append(word)
            continue
        explored.add(word)
        xm = xs[m]
        for a in range(bounds[m], 0, -1):
            diff = (abs(L // a - L // xm) * R) << (J - m)
            stack.append((word + (a,), prefix + (prefix[-1] + diff,)))
    return sorted(cells), sorted(boundary), complete, frozenset(explored), frozenset(pruned)


# --------------------------------------------------------------------------- arcs


def _allowed(kind: str, c, r, lo, hi):
    """Intervals of z in [lo, hi] within distance r of c (circle: of some c + m)."""
    if kind == "interval":
        a, b = max(lo, c - r), min(hi, c + r)
        return [(a, b)] if b > a else []
    if r >= Fraction(1, 2):
        return [(lo, hi)]
    out = []
    m = math.floor(lo - c - r)
    while c + m - r <= hi:
        a, b = max(lo, c + m - r), min(hi, c + m + r)
        if b > a:
            out.append((a, b))
        m += 1
    return out


def _constrain(kind, pieces, c, r):
    out = []
    for lo, hi, a, b in pieces:
        A, B = a * lo + b, a * hi + b
        for za, zb in _allowed(kind, c, r, A, B):
            tl, th = (za - b) / a, (zb - b) / a
            if th > tl:
                out.append((max(tl, lo), min(th, hi), a, b))
    return out


def _apply(kind, pieces, f):
    if isinstance(f, CircleAffine):
        return [(lo, hi, f.slope * a, (f.slope * b + f.shift) % 1 if kind == "circle" else f.slope * b + f.shift)
                for lo, hi, a, b in pieces]
    out = []
    for lo, hi, a, b in pieces:
        A, B = a * lo + b, a * hi + b
        for x0, x1, s, i in f.branches():
            za, zb = max(A, x0), min(B, x1)
            if zb > za:
                out.append(((za - b) / a, (zb - b) / a, s * a, s * b + i))
    return out


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def _arc_search(sys: FiberSystem, w: BasePoint, x, radii: dict, kmin: int, kmax: int):
    kind = sys.space.kind
    if kind == "circle":
        domain = (-Fraction(1, 2), Fraction(1, 2))
    else:
        domain = (-x, 1 - x)
    pieces = [(domain[0], domain[1], 1, x)]
    if 0 in radii:
        pieces = _constrain(kind, pieces, x, radii[0])
    c = x
    for k in range(1, kmax + 1):
        f = sys.generator_at(advance(w, k - 1))
        pieces = _apply(kind, pieces, f)
        c = f(c)
        if k in radii:
            pieces = _constrain(kind, pieces, c, radii[k])
    if kmin < 0:
        pieces = [(lo, hi, 1, x) for lo, hi in _merge((lo, hi) for lo, hi, _, _ in pieces)]
        c = x
        for k in range(-1, kmin - 1, -1):
            g = sys.inverse_at(advance(w, k))
            pieces = _apply(kind, pieces, g)
            c = g(c)
            if k in radii:
                pieces = _constrain(kind, pieces, c, radii[k])
    merged = _merge((lo, hi) for lo, hi, _, _ in pieces)
    return [(x + lo, x + hi) for lo, hi in merged]


def _is_exact(values: Iterable) -> bool:
    return not any(isinstance(v, float) for v in values)


# --------------------------------------------------------------------------- public API


def bowen_set(sys: FiberSystem, w: BasePoint, x, radius: Callable[[int], object],
              window: tuple[int, int], constrained: Iterable[int] | None = None,
              buffer: int = DEFAULT_BUFFER, budget: int = DEFAULT_BUDGET,
              sided: str = "custom") -> GammaSetApprox:
    """Certified approximation of {y : d(f^k x, f^k y) <= radius(k), k in window}.

    ``window`` is an inclusive (kmin, kmax); ``constrained`` restricts the
    times that actually carry a constraint (default: all of the window).
    """
    kmin, kmax = window
    if kmin < 0 and not sys.invertible:
        raise NonInvertibleError("two-sided constraints need an invertible system")
    times = list(range(kmin, kmax + 1)) if constrained is None else sorted(constrained)
    radii = {k: radius(k) for k in times}
    depth = kmax + 1
    if sys.space.kind == "symbolic":
        if kmin < 0:
            raise NonInvertibleError("symbolic fibers are one-sided")
        max_len = kmax + 1 + buffer
        cells, boundary, complete, explored, pruned = _symbolic_search(
            sys, w, x, radii, max_len, budget)
        exact = _is_exact(radii.values())
        return GammaSetApprox(w, x, depth, sided, "symbolic", window, tuple(cells),
                              tuple(boundary), exact=exact, complete=complete,
                              max_len=max_len, explored=explored, pruned=pruned)
    arcs = _arc_search(sys, w, x, radii, kmin, kmax)
    exact = _is_exact([x, *radii.values(), *(v for a in arcs for v in a)])
    return GammaSetApprox(w, x, depth, sided, sys.space.kind, window, arcs=tuple(arcs),
                          exact=exact)


def forward_balls(sys: FiberSystem, w: BasePoint, x, radius: Callable[[int], object],
                  n_max: int, buffer: int = DEFAULT_BUFFER,
                  budget: int = DEFAULT_BUDGET) -> list[GammaSetApprox]:
    """B_w[x, radius, n] for n = 1..n_max; arcs are built in a single forward pass."""
    if sys.space.kind == "symbolic":
        return [bowen_set(sys, w, x, radius, (0, n - 1), buffer=buffer, budget=budget,
                          sided="forward") for n in range(1, n_max + 1)]
    kind = sys.space.kind
    lo, hi = (-Fraction(1, 2), Fraction(1, 2)) if kind == "circle" else (-x, 1 - x)
    pieces = _constrain(kind, [(lo, hi, 1, x)], x, radius(0))
    out = []
    c = x
    for k in range(n_max):
        if k:
            f = sys.generator_at(advance(w, k - 1))
            pieces = _apply(kind, pieces, f)
            c = f(c)
            pieces = _constrain(kind, pieces, c, radius(k))
        arcs = tuple((x + a, x + b) for a, b in _merge((a, b) for a, b, _, _ in pieces))
        exact = _is_exact([x, radius(k), *(v for a in arcs for v in a)])
        out.append(GammaSetApprox(w, x, k + 1, "forward", kind, (0, k), arcs=arcs, exact=exact))
    return out


def _window(depth: int, sided: str) -> tuple[int, int]:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if sided == "forward":
        return 0, depth - 1
    if sided == "two-sided":
        return -(depth - 1), depth - 1
    raise ValueError(f"unknown sidedness {sided!r}")


def resolve_sided(sys: FiberSystem, sided: str) -> str:
    if sided == "auto":
        return "two-sided" if sys.invertible and sys.space.kind != "symbolic" else "forward"
    if sided == "two-sided" and not sys.invertible:
        raise NonInvertibleError("two-sided Gamma sets need an invertible system")
    return sided


def gamma_approx(sys: FiberSystem, w: BasePoint, x, delta: RandomScalar, depth: int,
                 sided: str = "forward", buffer: int = DEFAULT_BUFFER,
                 budget: int = DEFAULT_BUDGET) -> GammaSetApprox:
    """Depth-``depth`` approximation of Gamma_delta(x, w) (two-sided) or Gamma^+ (forward)."""
    sided = resolve_sided(sys, sided)
    window = _window(depth, sided)
    return bowen_set(sys, w, x, lambda k: eval_scalar(delta, w, k), window,
                     buffer=buffer, budget=budget, sided=sided)


def _arc_mass(mu: FiberMeasure, arcs, eps, circle: bool):
    if isinstance(mu, Mixture):
        lo = hi = 0
        for wgt, comp in mu.components:
            a, b = _arc_mass(comp, arcs, eps, circle)
            lo += wgt * a
            hi += wgt * b
        return lo, hi
    if isinstance(mu, GridDensity):
        if eps:
            low = sum(mu.arc_mass(a + eps, b - eps) for a, b in arcs if b - a > 2 * eps)
            up = sum(mu.arc_mass(a - eps, b + eps) for a, b in arcs)
            return low, min(up, 1)
        m = sum(mu.arc_mass(a, b) for a, b in arcs)
        return m, m
    if isinstance(mu, Atomic):
        low = up = 0
        for y, p in mu.atoms:
            inside = strict = False
            for a, b in arcs:
                t = _lift_near(y, a - eps) if circle else y
                if a + eps <= t <= b - eps:
                    strict = True
                if a - eps <= t <= b + eps:
                    inside = True
            low += p if strict else 0
            up += p if inside else 0
        return low, up
    raise TypeError(f"cannot integrate arcs against {type(mu).__name__}")


def gamma_mass(mu: FiberMeasure, g: GammaSetApprox):
    """Certified (lower, upper) bracket of mu_w of the approximated set.

    Since the true Gamma set is contained in every finite-depth approximation,
    ``upper`` also bounds mu_w(Gamma).
    """
    if g.kind == "cylinders":
        if not hasattr(mu, "cylinder_mass"):
            raise TypeError(f"cannot integrate cylinders against {type(mu).__name__}")
        lower = sum((mu.cylinder_mass(c) for c in g.cells), Fraction(0))
        upper = lower + sum((mu.cylinder_mass(c) for c in g.boundary), Fraction(0))
        return lower, upper
    return _arc_mass(mu, g.arcs, g.slack(), g.space == "circle")


def bowen_membership(sys: FiberSystem, w: BasePoint, x, y, delta: RandomScalar, n: int,
                     sided: str = "forward", tail_depth: int = 64) -> str:
    """'in', 'out' or 'boundary' for y against B_w[x, delta, n] (or +-n)."""
    sided = resolve_sided(sys, sided)
    kmin, kmax = _window(n, sided)
    verdict = "in"
    for k in range(kmin, kmax + 1):
        fx, fy = cocycle_apply(sys, w, x, k), cocycle_apply(sys, w, y, k)
        if isinstance(fx, SymbolicPoint) and isinstance(fy, SymbolicPoint):
            lo = hi = symbolic_distance(fx, fy)
        else:
            lo, hi = fiber_distance(sys.space, fx, fy, tail_depth)
        r = eval_scalar(delta, w, k)
        if lo > r:
            return "out"
        if hi > r:
            verdict = "boundary"
    return verdict


def canonical_cells(space, w: BasePoint, words) -> tuple:
    """Merge complete sibling families so equal sets get equal cell lists."""
    cells = set(words)
    changed = True
    while changed:
        changed = False
        parents = {c[:-1] for c in cells if c}
        for u in sorted(parents, key=len, reverse=True):
            k = space.bound(w, len(u))
            kids = {u + (a,) for a in range(1, k + 1)}
            if kids <= cells:
                cells -= kids
                cells.add(u)
                changed = True
    # drop cells covered by a shorter cell
    return tuple(sorted(c for c in cells if not any(c[:m] in cells for m in range(len(c)))))


def cylinders_at_depth(space, w: BasePoint, words, depth: int) -> int:
    """Number of depth-``depth`` cylinders meeting the union of ``words``."""
    prefixes = {c[:depth] for c in canonical_cells(space, w, words)}
    total = 0
    for u in prefixes:
        m = 1
        for i in range(len(u), depth):
            m *= space.bound(w, i)
        total += m
    return total


def covered_by(coarse: GammaSetApprox, word: tuple[int, ...]) -> bool:
    """Whether cylinder ``word`` lies inside the in/boundary cells of ``coarse``."""
    keep = set(coarse.cells) | set(coarse.boundary)
    for m in range(len(word) + 1):
        if word[:m] in keep:
            return True
        if word[:m] not in coarse.explored:
            return False
    # word is an interior node of the coarse search: no pruned cell may lie below it
    return not any(c[:len(word)] == word for c in coarse.pruned)
