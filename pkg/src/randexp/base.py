"""Driving system (Omega, P, theta): environments, base points and random scalars.

A base point is a pair (seed, offset). Its symbol at index k is a pure function
of (seed, offset + k), so theta is exactly invertible and sequences are only
materialized on demand.
"""

from __future__ import annotations

import bisect
import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

Number = int | float | Fraction

_BLOCK = 256
_MASK64 = (1 << 64) - 1


def as_number(value) -> Number:
    """Parse a config value: strings become exact fractions, floats stay floats."""
    if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not a number: {value!r}")


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


@lru_cache(maxsize=1 << 16)
def _uniform_block(seed: int, block: int) -> np.ndarray:
    rng = np.random.default_rng([seed & _MASK64, _zigzag(block)])
    return rng.random(_BLOCK)


def uniform_at(seed: int, index: int) -> float:
    """Counter-based uniform variate attached to ``index`` of the sequence ``seed``."""
    block, pos = divmod(index, _BLOCK)
    return float(_uniform_block(seed, block)[pos])


def _cumulative(weights: Sequence[Number]) -> tuple[float, ...]:
    acc = list(itertools.accumulate(float(p) for p in weights))
    acc[-1] = 1.0
    return tuple(acc)


@dataclass(frozen=True)
class BaseEnvironment:
    """One of the four supported driving systems.

    ``kind`` is ``singleton`` (one point whose symbols all equal ``fixed``),
    ``rotation`` (theta = +1 on Z/m), ``bernoulli``
    (two-sided shift with i.i.d. symbols) or ``markov`` (two-sided stationary
    Markov shift).
    """

    kind: str
    m: int = 1
    weights: tuple[Number, ...] = ()
    matrix: tuple[tuple[Number, ...], ...] = ()
    stationary: tuple[Number, ...] = ()
    fixed: int = 0
    description: str = ""
    _chains: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False,
                                  compare=False, hash=False)

    def __post_init__(self):
        if self.kind == "singleton":
            if self.fixed < 0:
                raise ValueError("singleton symbol must be >= 0")
        elif self.kind == "rotation":
            if self.m < 1:
                raise ValueError("rotation needs m >= 1")
        elif self.kind == "bernoulli":
            if not self.weights:
                raise ValueError("bernoulli needs weights")
            if any(p <= 0 for p in self.weights):
                raise ValueError("bernoulli weights must be positive")
            if abs(sum(self.weights) - 1) > 1e-12:
                raise ValueError("bernoulli weights must sum to 1")
        elif self.kind == "markov":
            n = len(self.matrix)
            if n == 0 or any(len(row) != n for row in self.matrix):
                raise ValueError("markov matrix must be square and non-empty")
            for row in self.matrix:
                if any(p < 0 for p in row) or abs(sum(row) - 1) > 1e-12:
                    raise ValueError("markov rows must be probability vectors")
            if len(self.stationary) != n:
                raise ValueError("stationary vector has wrong length")
            pi = np.array([float(p) for p in self.stationary])
            P = np.array([[float(p) for p in row] for row in self.matrix])
            if abs(pi.sum() - 1) > 1e-12 or np.max(np.abs(pi @ P - pi)) > 1e-9:
                raise ValueError("stationary vector is not stationary")
            if np.any(pi <= 0):
                raise ValueError("stationary vector must be positive")
        else:
            raise ValueError(f"unknown environment kind {self.kind!r}")

    @classmethod
    def singleton(cls, description: str = "", symbol: int = 0) -> "BaseEnvironment":
        return cls("singleton", fixed=symbol, description=description)

    @classmethod
    def rotation(cls, m: int, description: str = "") -> "BaseEnvironment":
        return cls("rotation", m=m, description=description)

    @classmethod
    def bernoulli(cls, weights: Sequence[Number], description: str = "") -> "BaseEnvironment":
        return cls("bernoulli", weights=tuple(weights), description=description)

    @classmethod
    def markov(cls, matrix, stationary, description: str = "") -> "BaseEnvironment":
        return cls("markov", matrix=tuple(tuple(r) for r in matrix),
                   stationary=tuple(stationary), description=description)

    @property
    def alphabet_size(self) -> int:
        if self.kind == "singleton":
            return self.fixed + 1
        if self.kind == "rotation":
            return self.m
        if self.kind == "bernoulli":
            return len(self.weights)
        return len(self.matrix)

    def symbol_law(self) -> tuple[Number, ...]:
        """One-dimensional marginal of the symbol process."""
        if self.kind == "singleton":
            return (0,) * self.fixed + (1,)
        if self.kind == "rotation":
            return tuple(Fraction(1, self.m) for _ in range(self.m))
        if self.kind == "bernoulli":
            return self.weights
        return self.stationary

    def window_law(self, length: int) -> dict[tuple[int, ...], Number]:
        """Law of ``length`` consecutive symbols under P (stationary)."""
        if length == 0:
            return {(): 1}
        if self.kind == "singleton":
            return {(self.fixed,) * length: 1}
        if self.kind == "rotation":
            return {tuple((s + i) % self.m for i in range(length)): Fraction(1, self.m)
                    for s in range(self.m)}
        if self.kind == "bernoulli":
            out = {}
            for word in itertools.product(range(len(self.weights)), repeat=length):
                out[word] = math.prod(self.weights[s] for s in word)
            return out
        out = {}
        for word in itertools.product(range(len(self.matrix)), repeat=length):
            p = self.stationary[word[0]]
            for a, b in zip(word, word[1:]):
                p = p * self.matrix[a][b]
            if p:
                out[word] = p
        return out

    def symbol(self, seed: int, index: int) -> int:
        if self.kind == "singleton":
            return self.fixed
        if self.kind == "rotation":
            return (seed + index) % self.m
        if self.kind == "bernoulli":
            return bisect.bisect_right(self._cum_weights, uniform_at(seed, index))
        return self._markov_symbol(seed, index)

    @property
    def _cum_weights(self) -> tuple[float, ...]:
        cum = self.__dict__.get("_cw")
        if cum is None:
            cum = _cumulative(self.weights)
            object.__setattr__(self, "_cw", cum)
        return cum

    def _markov_tables(self):
        tables = self.__dict__.get("_mt")
        if tables is None:
            n = len(self.matrix)
            forward = [_cumulative(row) for row in self.matrix]
            pi = [float(p) for p in self.stationary]
            backward = []
            for i in range(n):
                row = [pi[j] * float(self.matrix[j][i]) / pi[i] for j in range(n)]
                total = sum(row)
                backward.append(_cumulative([r / total for r in row]))
            tables = (_cumulative(self.stationary), forward, backward)
            object.__setattr__(self, "_mt", tables)
        return tables

    def _markov_symbol(self, seed: int, index: int) -> int:
        start, forward, backward = self._markov_tables()
        with self._lock:
            chain = self._chains.get(seed)
            if chain is None:
                s0 = bisect.bisect_right(start, uniform_at(seed, 0))
                chain = self._chains[seed] = ([s0], [s0])
            fwd, bwd = chain
            while index >= len(fwd):
                j = len(fwd)
                fwd.append(bisect.bisect_right(forward[fwd[-1]], uniform_at(seed, j)))
            while -index >= len(bwd):
                j = -len(bwd)
                bwd.append(bisect.bisect_right(backward[bwd[-1]], uniform_at(seed, j)))
            return fwd[index] if index >= 0 else bwd[-index]


@dataclass(frozen=True)
class BasePoint:
    """A point w of Omega; ``offset`` is its position along the theta-orbit of ``seed``."""

    env: BaseEnvironment
    seed: int
    offset: int = 0

    def symbol(self, k: int = 0) -> int:
        """Symbol of theta^k(w) at index 0."""
        return self.env.symbol(self.seed, self.offset + k)

    def window(self, start: int, stop: int) -> tuple[int, ...]:
        return tuple(self.symbol(k) for k in range(start, stop))

    def advance(self, k: int) -> "BasePoint":
        return advance(self, k)

    @property
    def ident(self) -> str:
        return f"{self.seed}:{self.offset}"


def advance(w: BasePoint, k: int) -> BasePoint:
    """theta^k(w) for any signed k."""
    offset = w.offset + k
    if w.env.kind == "rotation":
        offset %= w.env.m
    elif w.env.kind == "singleton":
        offset = 0
    return BasePoint(w.env, w.seed, offset)


def derive_seed(master: int, *counters: int) -> int:
    """Child seed fixed by (master, counters); independent of scheduling order."""
    ss = np.random.SeedSequence([master & _MASK64, *(_zigzag(c) for c in counters)])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def sample_base(env: BaseEnvironment, count: int, master_seed: int) -> list[BasePoint]:
    """``count`` P-typical base points, deterministic in ``master_seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if env.kind == "singleton":
        return [BasePoint(env, 0, 0) for _ in range(count)]
    rng = np.random.default_rng(master_seed & _MASK64)
    if env.kind == "rotation":
        return [BasePoint(env, 0, int(s)) for s in rng.integers(0, env.m, size=count)]
    seeds = rng.integers(0, 2**63 - 1, size=count, dtype=np.int64)
    return [BasePoint(env, int(s), 0) for s in seeds]


@dataclass(frozen=True)
class RandomScalar:
    """A random variable on Omega depending on a finite window of symbols.

    ``form`` is ``constant`` (``value``), ``table`` (``table[symbol at 0]``) or
    ``window`` (``table[symbols in [-radius, radius]]``). Values may be any
    hashable objects; positivity is only enforced for ``positive=True``.
    """

    form: str
    value: object = None
    table: Mapping = field(default_factory=dict)
    radius: int = 0
    positive: bool = True

    def __post_init__(self):
        if self.form not in ("constant", "table", "window"):
            raise ValueError(f"unknown scalar form {self.form!r}")
        if self.form == "constant" and self.value is None:
            raise ValueError("constant scalar needs a value")
        if self.form != "constant" and not self.table:
            raise ValueError(f"{self.form} scalar needs a table")
        if self.form == "window":
            if self.radius < 0:
                raise ValueError("window radius must be >= 0")
            if any(len(key) != 2 * self.radius + 1 for key in self.table):
                raise ValueError("window keys must have length 2*radius+1")
        if self.positive and any(not v > 0 for v in self.values()):
            raise ValueError("random scalar must be strictly positive")
        # mappings are not hashable; freeze for use as cache keys
        object.__setattr__(self, "table", dict(self.table))

    def __hash__(self):
        return hash((self.form, self.value, tuple(sorted(self.table.items(), key=repr)), self.radius))

    @classmethod
    def constant(cls, value, positive: bool = True) -> "RandomScalar":
        return cls("constant", value=value, positive=positive)

    @classmethod
    def symbol_table(cls, table: Mapping[int, object], positive: bool = True) -> "RandomScalar":
        return cls("table", table=dict(table), positive=positive)

    @classmethod
    def window_function(cls, radius: int, table, positive: bool = True) -> "RandomScalar":
        return cls("window", table={tuple(k): v for k, v in dict(table).items()},
                   radius=radius, positive=positive)

    def values(self) -> list:
        if self.form == "constant":
            return [self.value]
        return list(self.table.values())

    def sup(self):
        return max(self.values())

    def inf(self):
        return min(self.values())

    def __call__(self, w: BasePoint, k: int = 0):
        return eval_scalar(self, w, k)

    def map(self, fn: Callable, positive: bool | None = None) -> "RandomScalar":
        pos = self.positive if positive is None else positive
        if self.form == "constant":
            return RandomScalar("constant", value=fn(self.value), positive=pos)
        return RandomScalar(self.form, table={k: fn(v) for k, v in self.table.items()},
                            radius=self.radius, positive=pos)

    def scaled(self, factor) -> "RandomScalar":
        """Pointwise multiple; ``scaled(Fraction(1, 2))`` gives delta/2."""
        return self.map(lambda v: v * factor)

    def is_constant(self) -> bool:
        return self.form == "constant" or len(set(self.values())) == 1


def eval_scalar(delta: RandomScalar, w: BasePoint, k: int = 0):
    """Value of ``delta`` at theta^k(w)."""
    if delta.form == "constant":
        return delta.value
    if delta.form == "table":
        s = w.symbol(k)
        try:
            return delta.table[s]
        except KeyError:
            raise KeyError(f"symbol {s} missing from scalar table") from None
    key = w.window(k - delta.radius, k + delta.radius + 1)
    try:
        return delta.table[key]
    except KeyError:
        raise KeyError(f"window {key} missing from scalar table") from None


def expectation(g: RandomScalar, env: BaseEnvironment, fn: Callable = lambda v: v):
    """Closed-form integral of fn(g) against P."""
    if g.form == "constant":
        return fn(g.value)
    if g.form == "table":
        return sum(p * fn(g.table[s]) for s, p in enumerate(env.symbol_law()) if p)
    law = env.window_law(2 * g.radius + 1)
    return sum(p * fn(g.table[word]) for word, p in law.items())
