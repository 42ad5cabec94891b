"""Scenario configuration: a single JSON document validated by pydantic.

Numbers may be given as JSON numbers or as exact fraction strings ("1/9");
strings stay exact through the whole computation.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, ValidationError, field_validator, model_validator

from .base import BaseEnvironment, RandomScalar, as_number
from .fiber import IDENTITY_CIRCLE, IDENTITY_INTERVAL, CircleAffine, FiberSystem, IntervalPL
from .measures import (
    DisintegratedMeasure,
    atomic_disintegration,
    grid_disintegration,
    lebesgue,
    skewed_product,
    uniform_product,
)

SCHEMA_VERSION = "randexp.scenario/1"

Num = Union[int, float, str]


class ConfigError(ValueError):
    """Itemized validation failure; ``errors`` holds (path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))


def _positive(v):
    try:
        x = as_number(v)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {v!r}") from exc
    if not x > 0:
        raise ValueError("must be positive")
    return v


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --------------------------------------------------------------------------- scalars


class ConstantScalar(Strict):
    form: Literal["constant"]
    value: Num

    @field_validator("value")
    @classmethod
    def _check(cls, v):
        return _positive(v)


class TableScalar(Strict):
    form: Literal["table"]
    table: dict[int, Num]

    @field_validator("table")
    @classmethod
    def _check(cls, v):
        if not v:
            raise ValueError("table must not be empty")
        for val in v.values():
            _positive(val)
        return v


ScalarSpec = Annotated[Union[ConstantScalar, TableScalar], Field(discriminator="form")]


def build_scalar(spec) -> RandomScalar:
    if spec.form == "constant":
        return RandomScalar.constant(as_number(spec.value))
    return RandomScalar.symbol_table({k: as_number(v) for k, v in spec.table.items()})


# --------------------------------------------------------------------------- environments


class SingletonEnv(Strict):
    kind: Literal["singleton"]
    symbol: NonNegativeInt = 0


class RotationEnv(Strict):
    kind: Literal["rotation"]
    m: PositiveInt


class BernoulliEnv(Strict):
    kind: Literal["bernoulli"]
    weights: list[Num] = Field(min_length=1)


class MarkovEnv(Strict):
    kind: Literal["markov"]
    matrix: list[list[Num]]
    stationary: list[Num]


EnvSpec = Annotated[Union[SingletonEnv, RotationEnv, BernoulliEnv, MarkovEnv], Field(discriminator="kind")]


def build_environment(spec, description: str = "") -> BaseEnvironment:
    if spec.kind == "singleton":
        return BaseEnvironment.singleton(description, spec.symbol)
    if spec.kind == "rotation":
        return BaseEnvironment.rotation(spec.m, description)
    if spec.kind == "bernoulli":
        return BaseEnvironment.bernoulli([as_number(p) for p in spec.weights], description)
    return BaseEnvironment.markov([[as_number(p) for p in row] for row in spec.matrix],
                                  [as_number(p) for p in spec.stationary], description)


# --------------------------------------------------------------------------- fiber systems


class RotationMap(Strict):
    map: Literal["rotation"]
    angle: Num


class ExpandingMap(Strict):
    map: Literal["expanding"]
    degree: int = Field(ge=2)


class PLMap(Strict):
    map: Literal["pl"]
    breakpoint: Num


class IdentityMap(Strict):
    map: Literal["identity"]


MapSpec = Annotated[Union[RotationMap, ExpandingMap, PLMap, IdentityMap], Field(discriminator="map")]


class ShiftSystem(Strict):
    generator: Literal["shift"]
    alphabet: ScalarSpec


class ExpandingSystem(Strict):
    generator: Literal["expanding"]
    degree: ScalarSpec


class RotationSystem(Strict):
    generator: Literal["rotation"]
    angle: ScalarSpec


class MixedSystem(Strict):
    generator: Literal["mixed"]
    space: Literal["circle", "interval"] = "circle"
    table: dict[int, MapSpec]


class PLSystem(Strict):
    generator: Literal["pl_interval"]
    breakpoints: dict[int, Num]


class IdentitySystem(Strict):
    generator: Literal["identity"]
    space: Literal["circle", "interval"] = "circle"


SystemSpec = Annotated[Union[ShiftSystem, ExpandingSystem, RotationSystem, MixedSystem, PLSystem,
                             IdentitySystem], Field(discriminator="generator")]


def _build_map(spec, space: str):
    if spec.map == "rotation":
        return CircleAffine(1, as_number(spec.angle))
    if spec.map == "expanding":
        return CircleAffine(spec.degree, 0)
    if spec.map == "pl":
        return IntervalPL.tent_homeo(as_number(spec.breakpoint))
    return IDENTITY_CIRCLE if space == "circle" else IDENTITY_INTERVAL


def build_system(spec, name: str = "") -> FiberSystem:
    g = spec.generator
    if g == "shift":
        return FiberSystem.shift(build_scalar(spec.alphabet), name)
    if g == "expanding":
        return FiberSystem.expanding_circle(build_scalar(spec.degree), name)
    if g == "rotation":
        return FiberSystem.rotation(build_scalar(spec.angle), name)
    if g == "pl_interval":
        return FiberSystem.pl_interval({k: as_number(v) for k, v in spec.breakpoints.items()}, name)
    if g == "identity":
        return FiberSystem.identity(spec.space, name)
    table = {k: _build_map(m, spec.space) for k, m in spec.table.items()}
    return FiberSystem.mixed(table, spec.space, name)


def system_space(spec) -> str:
    if spec.generator == "shift":
        return "symbolic"
    if spec.generator == "pl_interval":
        return "interval"
    if spec.generator in ("mixed", "identity"):
        return spec.space
    return "circle"


# --------------------------------------------------------------------------- measures


class UniformProduct(Strict):
    rule: Literal["uniform_product"]


class SkewedProduct(Strict):
    rule: Literal["skewed_product"]
    head: Num = "3/4"


class LebesgueMeasure(Strict):
    rule: Literal["lebesgue"]


class GridMeasure(Strict):
    rule: Literal["grid"]
    weights: list[Num] = Field(min_length=1)


class AtomicMeasure(Strict):
    rule: Literal["atomic"]
    points: list[Num] = Field(min_length=1)
    weights: list[Num] | None = None


MeasureSpec = Annotated[Union[UniformProduct, SkewedProduct, LebesgueMeasure, GridMeasure, AtomicMeasure],
                        Field(discriminator="rule")]

_PRODUCT_RULES = ("uniform_product", "skewed_product")


def build_measure(spec, system_spec) -> DisintegratedMeasure:
    space = system_space(system_spec)
    if spec.rule in _PRODUCT_RULES:
        k = build_scalar(system_spec.alphabet)
        if spec.rule == "uniform_product":
            return uniform_product(k)
        return skewed_product(k, as_number(spec.head))
    if spec.rule == "lebesgue":
        return lebesgue(space)
    if spec.rule == "grid":
        return grid_disintegration(space, [as_number(p) for p in spec.weights])
    pts = [as_number(p) for p in spec.points]
    ws = [as_number(p) for p in spec.weights] if spec.weights else None
    return atomic_disintegration(pts, ws)


# --------------------------------------------------------------------------- diagnostics


class ExpansiveDiag(Strict):
    kind: Literal["expansive"]
    seed: int
    depth: PositiveInt = 12
    n_base: PositiveInt = 8
    n_fiber: int = Field(4, ge=0)
    sided: Literal["auto", "forward", "two-sided"] = "auto"
    measure: MeasureSpec | None = None


class CountableDiag(Strict):
    kind: Literal["countable"]
    seed: int
    depth: PositiveInt = 10
    samples: PositiveInt = 6


class ContinuumDiag(Strict):
    kind: Literal["continuum"]
    seed: int
    samples: PositiveInt = 20
    max_n: PositiveInt = 200
    length: Num = "1/1000"
    forward_only: bool | None = None

    @field_validator("length")
    @classmethod
    def _check(cls, v):
        return _positive(v)


class EntropyDiag(Strict):
    kind: Literal["entropy"]
    seed: int
    n_max: PositiveInt = 14
    samples: PositiveInt = 100
    curve_samples: PositiveInt | None = None


class TheoremADiag(Strict):
    kind: Literal["theorem_a"]
    seed: int
    depth: PositiveInt = 10
    samples: PositiveInt = 20
    n_max: PositiveInt = 14
    entropy_samples: PositiveInt = 100
    stable_depth: PositiveInt = 6


class ConstructDiag(Strict):
    kind: Literal["construct"]
    seed: int
    n_max: PositiveInt = 64
    probe_depth: PositiveInt = 8
    base_samples: PositiveInt = 5
    start: MeasureSpec | None = None


class GammaIdentityDiag(Strict):
    kind: Literal["gamma_identity"]
    seed: int
    depth: int = Field(6, ge=2)
    samples: PositiveInt = 20


class ChainDiag(Strict):
    kind: Literal["implication_chain"]
    seed: int
    depth: PositiveInt = 12


DiagnosticSpec = Annotated[Union[ExpansiveDiag, CountableDiag, ContinuumDiag, EntropyDiag, TheoremADiag,
                                 ConstructDiag, GammaIdentityDiag, ChainDiag], Field(discriminator="kind")]

Verdict = Literal["evidence-for", "refuted", "inconclusive", "pass", "violation", "not-applicable"]


class OutputSpec(Strict):
    format: Literal["json", "csv"] = "json"
    path: str | None = None


class ScenarioConfig(Strict):
    schema_version: Literal["randexp.scenario/1"] = SCHEMA_VERSION
    name: str
    description: str = ""
    environment: EnvSpec
    system: SystemSpec
    measure: MeasureSpec
    delta: ScalarSpec
    ladder: list[ScalarSpec] | None = None
    diagnostics: list[DiagnosticSpec] = Field(min_length=1)
    expected: dict[str, Verdict] = Field(default_factory=dict)
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _resolve(self):
        space = system_space(self.system)
        measures = [("measure", self.measure)]
        for i, d in enumerate(self.diagnostics):
            for attr in ("measure", "start"):
                m = getattr(d, attr, None)
                if m is not None:
                    measures.append((f"diagnostics.{i}.{attr}", m))
        for path, m in measures:
            if m.rule in _PRODUCT_RULES and space != "symbolic":
                raise ValueError(f"{path}: product measures need a symbolic (shift) system")
            if m.rule not in _PRODUCT_RULES and space == "symbolic":
                raise ValueError(f"{path}: {m.rule} measures need a circle or interval system")
        kinds = {d.kind for d in self.diagnostics}
        for key in self.expected:
            if key not in kinds:
                raise ValueError(f"expected.{key}: no diagnostic of that kind is listed")
        return self


# --------------------------------------------------------------------------- loading


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _errors(exc: ValidationError) -> list[tuple[str, str]]:
    return [(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"]) for e in exc.errors()]


def validate_document(doc: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_errors(exc)) from None


def load_config(source, overrides: dict | None = None) -> ScenarioConfig:
    """Built-in name, path to a JSON file, inline JSON text, or a dict."""
    from .scenarios import BUILTINS

    if isinstance(source, dict):
        doc = source
    elif isinstance(source, str) and source in BUILTINS:
        doc = BUILTINS[source]
    else:
        text = None
        p = Path(source)
        if isinstance(source, Path) or (len(str(source)) < 4096 and p.exists()):
            try:
                text = p.read_text()
            except OSError as exc:
                raise ConfigError([("<source>", f"cannot read {source}: {exc}")]) from None
        else:
            text = str(source)
            if not text.lstrip().startswith("{"):
                known = ", ".join(BUILTINS)
                raise ConfigError([("<source>", f"no built-in scenario or file named {text!r} (built-ins: {known})")])
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([("<source>", f"invalid JSON: {exc}")]) from None
        if not isinstance(doc, dict):
            raise ConfigError([("<root>", "a scenario must be a JSON object")])
    if overrides:
        doc = _deep_merge(doc, overrides)
    return validate_document(doc)


def dump_config(cfg: ScenarioConfig) -> dict:
    return cfg.model_dump(mode="json")


def json_schema() -> dict:
    return ScenarioConfig.model_json_schema()
