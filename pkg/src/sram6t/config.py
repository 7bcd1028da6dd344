"""Run configuration: a strict JSON document.

Every block is optional and falls back to the shipped defaults, but any key
not in the schema is rejected, as is any value of the wrong type or out of
range. Errors carry the dotted path of the offending key. The schema is
documented in ``docs/formats.md``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

from .cell import TRANSISTORS, Technology
from .device import MosParams
from .ser import SerParams
from .variability import METRICS


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check(path, value, kind, pred=None, why=""):
    if kind == "float" and not _num(value):
        raise ConfigError(path, "expected a number")
    if kind == "int" and (not isinstance(value, int) or isinstance(value, bool)):
        raise ConfigError(path, "expected an integer")
    if kind == "str" and not isinstance(value, str):
        raise ConfigError(path, "expected a string")
    if kind == "floats":
        if not isinstance(value, list) or not value or not all(_num(v) for v in value):
            raise ConfigError(path, "expected a non-empty list of numbers")
    if kind == "strs":
        if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
            raise ConfigError(path, "expected a non-empty list of strings")
    if pred is not None and not pred(value):
        raise ConfigError(path, why or "value out of range")
    return value


def _block(path, d, allowed):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")
    return d


pos = (lambda v: v > 0, "must be positive")
nonneg = (lambda v: v >= 0, "must be >= 0")

MOS_SCHEMA = {
    "polarity": ("str", None, ""),
    "L": ("float",) + pos, "Vt0": ("float",) + pos, "mu_Csth": ("float",) + pos,
    "n_slope": ("float", lambda v: v >= 1, "must be >= 1"),
    "eta_dibl": ("float",) + nonneg, "temperature": ("float",) + pos,
    "k_sat": ("float",) + pos, "alpha": ("float", lambda v: 1 <= v <= 2, "must be in [1, 2]"),
    "k_vdsat": ("float",) + pos, "lambda_clm": ("float",) + nonneg,
}
TECH_SCHEMA = {
    "vdd": ("float",) + pos, "wmin": ("float",) + pos, "cj": ("float",) + nonneg,
    "c_wire": ("float",) + nonneg, "cj_bl": ("float",) + nonneg,
    "c_bl_wire": ("float",) + nonneg,
    "cells_per_bitline": ("int", lambda v: v >= 1, "must be >= 1"),
    "sense_dv": ("float",) + pos, "a_vt": ("float",) + nonneg,
}
SER_NONNEG = {"flux", "a_e", "b_e", "c_e", "a_h", "b_h", "c_h"}
SER_SCHEMA = {f.name: ("float",) + (nonneg if f.name in SER_NONNEG else pos)
              for f in fields(SerParams)}
OVERRIDE_SCHEMA = {k: v for k, v in MOS_SCHEMA.items() if k not in ("polarity", "L")}


def _fill(path, d, schema):
    out = {}
    for k, v in d.items():
        kind, pred, why = schema[k]
        out[k] = _check(f"{path}.{k}", v, kind, pred, why)
    return out


def _parse_mos(path, d, base: MosParams, polarity):
    d = _fill(path, _block(path, d, MOS_SCHEMA), MOS_SCHEMA)
    if d.get("polarity", polarity) != polarity:
        raise ConfigError(f"{path}.polarity", f"must be {polarity!r}")
    return replace(base, **d)


def parse_technology(d, base: Technology | None = None):
    """Technology and SER parameters from a (possibly partial) block."""
    base = Technology.default() if base is None else base
    d = _block("technology", d, set(TECH_SCHEMA) | {"nmos", "pmos", "ser"})
    kw = _fill("technology", {k: v for k, v in d.items() if k in TECH_SCHEMA}, TECH_SCHEMA)
    if "nmos" in d:
        kw["nmos"] = _parse_mos("technology.nmos", d["nmos"], base.nmos, "n")
    if "pmos" in d:
        kw["pmos"] = _parse_mos("technology.pmos", d["pmos"], base.pmos, "p")
    ser = SerParams()
    if "ser" in d:
        ser = SerParams(**_fill("technology.ser", _block("technology.ser", d["ser"], SER_SCHEMA),
                                SER_SCHEMA))
    return replace(base, **kw), ser


@dataclass(frozen=True)
class CellBlock:
    cr: float = 1.0
    pr: float = 1.0
    wmin_um: float | None = None
    overrides: dict = field(default_factory=dict)   # transistor -> {field: value}

    def to_dict(self):
        d = {"cr": self.cr, "pr": self.pr, "overrides": self.overrides}
        if self.wmin_um is not None:
            d["wmin_um"] = self.wmin_um
        return d


@dataclass(frozen=True)
class SweepVwl:
    start: float = 0.0
    stop: float | None = None     # default: vdd
    step: float = 0.02
    reference_cr: float = 2.0


@dataclass(frozen=True)
class MonteCarloBlock:
    trials: int = 1000
    metrics: tuple = ("v_trip", "v_read", "wlvm", "srrv")
    bins: int = 30
    chunk: int = 256
    cr: float | None = None       # default: the cell block's CR


@dataclass(frozen=True)
class AnalysisBlock:
    sweep_cr: tuple = (1.0, 1.5, 2.0, 2.5)
    sweep_vwl: SweepVwl = SweepVwl()
    montecarlo: MonteCarloBlock = MonteCarloBlock()
    seed: int | None = None
    max_step_s: float = 0.1e-12
    transient: bool = True        # include timing and simulated Q_crit


@dataclass(frozen=True)
class RunConfig:
    technology: Technology
    ser: SerParams = SerParams()
    cell: CellBlock = CellBlock()
    analysis: AnalysisBlock = AnalysisBlock()
    output_dir: str = "out"

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(Technology.default())

    def to_dict(self) -> dict:
        tech = self.technology.to_dict()
        tech["ser"] = self.ser.to_dict()
        a = self.analysis
        vwl = {"start": a.sweep_vwl.start, "step": a.sweep_vwl.step,
               "reference_cr": a.sweep_vwl.reference_cr}
        if a.sweep_vwl.stop is not None:
            vwl["stop"] = a.sweep_vwl.stop
        mc = {"trials": a.montecarlo.trials, "metrics": list(a.montecarlo.metrics),
              "bins": a.montecarlo.bins, "chunk": a.montecarlo.chunk}
        if a.montecarlo.cr is not None:
            mc["cr"] = a.montecarlo.cr
        analysis = {"sweep_cr": list(a.sweep_cr), "sweep_vwl": vwl, "montecarlo": mc,
                    "max_step_s": a.max_step_s, "transient": a.transient}
        if a.seed is not None:
            analysis["seed"] = a.seed
        return {"technology": tech, "cell": self.cell.to_dict(), "analysis": analysis,
                "output": {"dir": self.output_dir}}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _parse_cell(d):
    d = _block("cell", d, {"cr", "pr", "wmin_um", "overrides"})
    ge1 = (lambda v: v >= 1, "must be >= 1")
    kw = {}
    for k, spec in (("cr", ("float",) + ge1), ("pr", ("float",) + ge1),
                    ("wmin_um", ("float",) + pos)):
        if k in d:
            kw[k] = _check(f"cell.{k}", d[k], *spec)
    if "overrides" in d:
        ov = _block("cell.overrides", d["overrides"], set(TRANSISTORS))
        kw["overrides"] = {name: _fill(f"cell.overrides.{name}",
                                       _block(f"cell.overrides.{name}", sub, OVERRIDE_SCHEMA),
                                       OVERRIDE_SCHEMA)
                           for name, sub in ov.items()}
    return CellBlock(**kw)


def _parse_analysis(d):
    d = _block("analysis", d, {"sweep_cr", "sweep_vwl", "montecarlo", "seed",
                               "max_step_s", "transient"})
    kw = {}
    if "sweep_cr" in d:
        kw["sweep_cr"] = tuple(_check("analysis.sweep_cr", d["sweep_cr"], "floats",
                                      lambda g: all(1 <= v <= 2.5 for v in g),
                                      "grid values must lie in [1, 2.5]"))
    if "sweep_vwl" in d:
        s = _block("analysis.sweep_vwl", d["sweep_vwl"], {"start", "stop", "step", "reference_cr"})
        sk = {}
        for k, spec in (("start", ("float",) + nonneg), ("stop", ("float",) + pos),
                        ("step", ("float",) + pos),
                        ("reference_cr", ("float", lambda v: v >= 1, "must be >= 1"))):
            if k in s:
                sk[k] = _check(f"analysis.sweep_vwl.{k}", s[k], *spec)
        vw = SweepVwl(**sk)
        if vw.stop is not None and vw.stop < vw.start:
            raise ConfigError("analysis.sweep_vwl.stop", "must be >= start")
        kw["sweep_vwl"] = vw
    if "montecarlo" in d:
        m = _block("analysis.montecarlo", d["montecarlo"], {"trials", "metrics", "bins", "chunk", "cr"})
        mk = {}
        ge1 = (lambda v: v >= 1, "must be >= 1")
        for k, spec in (("trials", ("int",) + ge1), ("bins", ("int",) + ge1),
                        ("chunk", ("int",) + ge1), ("cr", ("float",) + ge1)):
            if k in m:
                mk[k] = _check(f"analysis.montecarlo.{k}", m[k], *spec)
        if "metrics" in m:
            mk["metrics"] = tuple(_check("analysis.montecarlo.metrics", m["metrics"], "strs",
                                         lambda ms: all(x in METRICS for x in ms),
                                         f"unknown metric; choose from {', '.join(METRICS)}"))
        kw["montecarlo"] = MonteCarloBlock(**mk)
    if "seed" in d:
        kw["seed"] = _check("analysis.seed", d["seed"], "int",
                            lambda v: 0 <= v < 2**64, "must fit in 64 bits")
    if "max_step_s" in d:
        kw["max_step_s"] = _check("analysis.max_step_s", d["max_step_s"], "float",
                                  lambda v: 0 < v <= 1e-11, "must be in (0, 10 ps]")
    if "transient" in d:
        if not isinstance(d["transient"], bool):
            raise ConfigError("analysis.transient", "expected true or false")
        kw["transient"] = d["transient"]
    return AnalysisBlock(**kw)


def from_dict(d: dict, base: Technology | None = None) -> RunConfig:
    d = _block("", d, {"technology", "cell", "analysis", "output"})
    tech, ser = parse_technology(d.get("technology", {}), base)
    cell = _parse_cell(d.get("cell", {}))
    analysis = _parse_analysis(d.get("analysis", {}))
    out = "out"
    if "output" in d:
        o = _block("output", d["output"], {"dir"})
        if "dir" in o:
            out = _check("output.dir", o["dir"], "str", lambda v: v != "", "must not be empty")
    return RunConfig(tech, ser, cell, analysis, out)


def loads(text: str, base: Technology | None = None) -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<document>", f"invalid JSON at line {e.lineno} column {e.colno}") from e
    return from_dict(d, base)


def load(path, base: Technology | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {path}: {e.strerror}") from e
    return loads(text, base)


def build_cell(cfg: RunConfig, cr: float | None = None):
    """The configured cell (optionally at another CR) with overrides applied."""
    from .cell import make_cell
    d = make_cell(cfg.cell.cr if cr is None else cr, cfg.cell.pr, cfg.cell.wmin_um, cfg.technology)
    if cfg.cell.overrides:
        d = d.replace_transistors(**{name: replace(getattr(d, name), **vals)
                                     for name, vals in cfg.cell.overrides.items()})
    return d
