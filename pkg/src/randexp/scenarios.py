"""Built-in scenarios and the scenario runner."""

from __future__ import annotations

import copy
import datetime as _dt
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from .base import derive_seed, sample_base
from .config import (
    ScenarioConfig,
    build_environment,
    build_measure,
    build_scalar,
    build_system,
    dump_config,
    load_config,
    system_space,
)
from .entropy import analytic_entropy_oracle, brin_katok_estimate, delta_ladder, theorem_a_consistency
from .expansivity import (
    ChainEntry,
    ExpansivityReport,
    continuum_diagnostic,
    countable_diagnostic,
    expansive_diagnostic,
    implication_chain_test,
    point_label,
)
from .invariant import construct_invariant, gamma_pullback_identity_check
from .measures import (
    CylinderProduct,
    GridDensity,
    Mixture,
    grid_disintegration,
    lebesgue,
    sample_fiber,
    skewed_product,
    uniform_product,
)

REPORT_SCHEMA = "randexp.report/1"

SQRT2_ANGLE = 0.41421356237309515
GOLDEN_ANGLE = 0.6180339887498949
FAIR = ["1/2", "1/2"]
TEST_GRID = ["1/8", "3/8", "3/8", "1/8"]

BUILTINS: dict[str, dict] = {
    "example1_random_shift": {
        "name": "example1_random_shift",
        "description": "Random one-sided shift over alphabets k in {2,3}, uniform product fibers, delta = k^-2",
        "environment": {"kind": "bernoulli", "weights": FAIR},
        "system": {"generator": "shift", "alphabet": {"form": "table", "table": {"0": 2, "1": 3}}},
        "measure": {"rule": "uniform_product"},
        "delta": {"form": "table", "table": {"0": "1/4", "1": "1/9"}},
        "diagnostics": [
            {"kind": "expansive", "seed": 1, "depth": 16, "n_base": 25, "n_fiber": 3},
            {"kind": "countable", "seed": 2, "depth": 10, "samples": 6},
            {"kind": "continuum", "seed": 3},
            {"kind": "entropy", "seed": 4, "n_max": 14, "samples": 60, "curve_samples": 20},
            {"kind": "theorem_a", "seed": 5, "depth": 10, "samples": 10, "entropy_samples": 40},
            {"kind": "construct", "seed": 6, "n_max": 64, "base_samples": 5,
             "start": {"rule": "skewed_product"}},
            {"kind": "gamma_identity", "seed": 7, "depth": 6, "samples": 10},
        ],
        "expected": {"expansive": "evidence-for", "countable": "evidence-for",
                     "continuum": "evidence-for", "theorem_a": "pass", "construct": "evidence-for",
                     "gamma_identity": "pass"},
    },
    "example2_isometry": {
        "name": "example2_isometry",
        "description": "Random circle rotations with Lebesgue fibers; no expansive measure exists",
        "environment": {"kind": "bernoulli", "weights": FAIR},
        "system": {"generator": "rotation",
                   "angle": {"form": "table", "table": {"0": SQRT2_ANGLE, "1": GOLDEN_ANGLE}}},
        "measure": {"rule": "lebesgue"},
        "delta": {"form": "constant", "value": 0.05},
        "diagnostics": [
            {"kind": "expansive", "seed": 1, "depth": 50, "n_base": 10, "n_fiber": 3},
            {"kind": "countable", "seed": 2, "depth": 10, "samples": 6},
            {"kind": "continuum", "seed": 3},
            {"kind": "entropy", "seed": 4, "n_max": 14, "samples": 40, "curve_samples": 10},
            {"kind": "theorem_a", "seed": 5, "samples": 10, "entropy_samples": 40},
            {"kind": "construct", "seed": 6, "n_max": 16, "base_samples": 3},
            {"kind": "gamma_identity", "seed": 7, "depth": 6, "samples": 10},
        ],
        "expected": {"expansive": "refuted", "countable": "refuted", "continuum": "refuted",
                     "theorem_a": "not-applicable", "construct": "refuted", "gamma_identity": "pass"},
    },
    "example3_expanding": {
        "name": "example3_expanding",
        "description": "Random expanding circle maps x -> deg(w) x mod 1, deg in {2,3}, Lebesgue fibers",
        "environment": {"kind": "bernoulli", "weights": FAIR},
        "system": {"generator": "expanding", "degree": {"form": "table", "table": {"0": 2, "1": 3}}},
        "measure": {"rule": "lebesgue"},
        "delta": {"form": "constant", "value": "1/20"},
        "diagnostics": [
            {"kind": "expansive", "seed": 1, "depth": 12, "n_base": 10, "n_fiber": 3},
            {"kind": "countable", "seed": 2, "depth": 10, "samples": 6},
            {"kind": "continuum", "seed": 3},
            {"kind": "entropy", "seed": 4, "n_max": 14, "samples": 500, "curve_samples": 50},
            {"kind": "theorem_a", "seed": 5, "depth": 10, "samples": 50, "entropy_samples": 100},
            {"kind": "construct", "seed": 6, "n_max": 16, "base_samples": 3,
             "start": {"rule": "grid", "weights": TEST_GRID}},
        ],
        "expected": {"expansive": "evidence-for", "countable": "evidence-for",
                     "continuum": "evidence-for", "theorem_a": "pass", "construct": "evidence-for"},
    },
    "example4_continuum_mix": {
        "name": "example4_continuum_mix",
        "description": "Symbol 0 rotates by the golden angle, symbol 1 doubles; continuum-wise expansive",
        "environment": {"kind": "bernoulli", "weights": FAIR},
        "system": {"generator": "mixed", "space": "circle",
                   "table": {"0": {"map": "rotation", "angle": GOLDEN_ANGLE},
                             "1": {"map": "expanding", "degree": 2}}},
        "measure": {"rule": "lebesgue"},
        "delta": {"form": "constant", "value": "1/10"},
        "diagnostics": [
            {"kind": "continuum", "seed": 3, "samples": 100, "max_n": 200},
            {"kind": "expansive", "seed": 1, "depth": 24, "n_base": 8, "n_fiber": 3},
            {"kind": "countable", "seed": 2, "depth": 24, "samples": 6},
            {"kind": "entropy", "seed": 4, "n_max": 14, "samples": 60, "curve_samples": 20},
            {"kind": "implication_chain", "seed": 8, "depth": 12},
        ],
        "expected": {"continuum": "evidence-for", "expansive": "evidence-for",
                     "countable": "evidence-for", "implication_chain": "pass"},
    },
}


def builtin_names() -> list[str]:
    return list(BUILTINS)


def builtin_document(name: str) -> dict:
    return copy.deepcopy(BUILTINS[name])


def chain_measures(cfg: ScenarioConfig) -> list:
    """Non-atomic disintegrations used by the implication chain for a system."""
    sys_spec = cfg.system
    if system_space(sys_spec) == "symbolic":
        k = build_scalar(sys_spec.alphabet)
        return [uniform_product(k), skewed_product(k)]
    space = system_space(sys_spec)
    return [lebesgue(space), grid_disintegration(space, [Fraction(p) for p in TEST_GRID])]


def builtin_suite() -> list[ChainEntry]:
    out = []
    for name in BUILTINS:
        cfg = load_config(name)
        out.append(ChainEntry(name, build_system(cfg.system, name), build_environment(cfg.environment),
                              build_scalar(cfg.delta), chain_measures(cfg)))
    return out


# --------------------------------------------------------------------------- serialization helpers


def measure_payload(mu) -> dict:
    if isinstance(mu, Mixture):
        return {"type": "mixture", "components": [{"weight": w, "measure": measure_payload(c)}
                                                   for w, c in mu.components]}
    if isinstance(mu, CylinderProduct):
        return {"type": "cylinder-product", "rule": mu.rule.name, "head": mu.rule.head,
                "base": mu.base.ident, "age": mu.age, "depth1": list(mu.vector(0))}
    if isinstance(mu, GridDensity):
        return {"type": "grid-density", "kind": mu.kind, "edges": list(mu.edges), "weights": list(mu.weights)}
    return {"type": "atomic", "atoms": [[point_label(x), p] for x, p in mu.atoms]}


def expansivity_payload(rep: ExpansivityReport) -> dict:
    return {"notion": rep.notion, "verdict": rep.verdict, "fit": rep.fit, "witnesses": rep.witnesses,
            "params": rep.params, "notes": rep.notes, "table": rep.rows}


# --------------------------------------------------------------------------- runner


@dataclass
class RunReport:
    config: dict
    results: list[dict]
    golden: dict
    timing: dict = field(default_factory=dict)
    schema: str = REPORT_SCHEMA
    version: str = __version__

    @property
    def failed(self) -> bool:
        return any(r["status"] == "error" for r in self.results)


def _run_one(d, cfg: ScenarioConfig, ctx: dict) -> tuple[str, dict]:
    sys, env, dis, delta = ctx["sys"], ctx["env"], ctx["dis"], ctx["delta"]
    ladder = ctx["ladder"]
    if d.kind == "expansive":
        m = build_measure(d.measure, cfg.system) if d.measure else dis
        rep = expansive_diagnostic(sys, m, delta, env, d.depth, d.n_base, d.n_fiber, d.seed, d.sided)
        return rep.verdict, expansivity_payload(rep)
    if d.kind == "countable":
        rep = countable_diagnostic(sys, delta, env, d.depth, d.samples, d.seed)
        return rep.verdict, expansivity_payload(rep)
    if d.kind == "continuum":
        rep = continuum_diagnostic(sys, delta, env, d.samples, d.seed, d.max_n, Fraction(d.length)
                                   if isinstance(d.length, str) else d.length, d.forward_only)
        return rep.verdict, expansivity_payload(rep)
    if d.kind == "entropy":
        est = brin_katok_estimate(sys, dis, env, d.n_max, d.samples, d.seed, ladder, d.curve_samples)
        oracle = analytic_entropy_oracle(sys, env)
        rel = abs(est.estimate - oracle) / oracle if oracle else None
        table = [{"w": s.w, "x": s.x, "n": n, "value": v}
                 for s in est.samples for n, v in enumerate(s.values, start=1)]
        curve = [{k: v for k, v in row.items() if k != "phi"} for row in est.curve]
        payload = {"estimate": est.estimate, "half_width": est.half_width, "phi_mean": est.phi_mean,
                   "H": est.H, "delta": est.delta, "n_max": est.n_max, "oracle": oracle,
                   "relative_error": rel, "curve": curve, "underflow": est.underflow,
                   "notes": est.notes, "table": table}
        return None, payload
    if d.kind == "theorem_a":
        rep = theorem_a_consistency(sys, dis, env, ladder, d.depth, d.samples, d.seed, d.n_max,
                                    d.entropy_samples, d.stable_depth)
        payload = {"clauses": rep.clauses, "status": rep.status,
                   "estimate": rep.entropy.estimate if rep.entropy else None,
                   "expansivity": [{"verdict": r.verdict, "rate": r.fit.get("rate"),
                                    "delta": r.params.get("delta")} for r in rep.expansivity],
                   "witnesses": rep.witnesses,
                   "table": [dict(row, w=t["w"], p=t["p"]) for t in rep.stable_tables for row in t["rows"]]}
        return rep.status, payload
    if d.kind == "construct":
        start = build_measure(d.start, cfg.system) if d.start else dis
        rep = construct_invariant(sys, start, env, delta, d.n_max, d.probe_depth, d.base_samples, d.seed)
        verdict = rep.final.verdict if rep.envelope_ok else "violation"
        payload = {"envelope_ok": rep.envelope_ok, "hypothesis": rep.hypothesis,
                   "initial_verdict": rep.initial.verdict, "final_verdict": rep.final.verdict,
                   "params": rep.params, "table": rep.rows,
                   "final_measures": {k: measure_payload(v) for k, v in rep.final_measures.items()}}
        return verdict, payload
    if d.kind == "gamma_identity":
        rows, fails = [], []
        for i, w in enumerate(sample_base(env, d.samples, derive_seed(d.seed, 0))):
            x = sample_fiber(dis.at(w), 1, derive_seed(d.seed, 1, i))[0]
            chk = gamma_pullback_identity_check(sys, w, x, delta, d.depth)
            rows.append({"w": w.ident, "x": point_label(x), "passed": chk.passed,
                         "convention": chk.convention})
            if not chk.passed:
                fails.append(chk.witness)
        return ("pass" if not fails else "violation"), {"table": rows, "witnesses": fails}
    if d.kind == "implication_chain":
        res = implication_chain_test(builtin_suite(), d.depth, d.seed)
        rows = [{"system": r.name, **r.verdicts, "violations": "; ".join(r.violations)} for r in res]
        ok = all(r.passed for r in res)
        return ("pass" if ok else "violation"), {"table": rows}
    raise ValueError(f"unknown diagnostic {d.kind!r}")


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Replace every diagnostic seed by ``seed``."""
    doc = dump_config(cfg)
    for d in doc["diagnostics"]:
        d["seed"] = seed
    return ScenarioConfig.model_validate(doc)


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> RunReport:
    """Run the listed diagnostics in order; failures are captured per diagnostic."""
    if seed is not None:
        cfg = with_seed(cfg, seed)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    ctx = {
        "sys": build_system(cfg.system, cfg.name),
        "env": build_environment(cfg.environment, cfg.description),
        "dis": build_measure(cfg.measure, cfg.system),
        "delta": build_scalar(cfg.delta),
    }
    ctx["ladder"] = [build_scalar(s) for s in cfg.ladder] if cfg.ladder else delta_ladder(ctx["sys"])
    results = []
    durations = []
    for i, d in enumerate(cfg.diagnostics):
        t = time.perf_counter()
        try:
            verdict, payload = _run_one(d, cfg, ctx)
            results.append({"index": i, "kind": d.kind, "status": "ok", "verdict": verdict,
                            "payload": payload})
        except Exception as exc:  # noqa: BLE001 - captured into the report
            results.append({"index": i, "kind": d.kind, "status": "error", "verdict": None,
                            "error": f"{type(exc).__name__}: {exc}"})
        durations.append(round(time.perf_counter() - t, 3))
    golden = {}
    for kind, want in cfg.expected.items():
        got = [r["verdict"] for r in results if r["kind"] == kind]
        golden[kind] = {"expected": want, "observed": got[0] if got else None,
                        "match": bool(got) and got[0] == want}
    timing = {"started": started, "wall_clock_s": round(time.perf_counter() - t0, 3),
              "per_diagnostic_s": durations}
    return RunReport(dump_config(cfg), results, golden, timing)

