"""6T cell description: sizing, node capacitances, area and bias conditions.

Transistor names follow the usual schematic: inverter A is ``n_a``/``p_a``
driving node A with its gates on node B, ``acc_a`` connects node A to
bit-line A. Side B mirrors it.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .device import MosParams

TRANSISTORS = ("n_a", "n_b", "p_a", "p_b", "acc_a", "acc_b")


class SizingError(ValueError):
    pass


@dataclass(frozen=True)
class Technology:
    """Process-level defaults shared by every cell built from it."""

    nmos: MosParams = field(default_factory=MosParams)
    pmos: MosParams = field(default_factory=lambda: MosParams(polarity="p", Vt0=0.42))
    vdd: float = 1.2
    wmin: float = 0.12             # um
    cj: float = 1.0e-15            # F per um of attached device width
    c_wire: float = 0.1e-15        # F, fixed wiring cap per storage node
    cj_bl: float = 0.5e-15         # F per um of access drain on the bit-line
    c_bl_wire: float = 20e-15      # F
    cells_per_bitline: int = 256
    sense_dv: float = 0.1          # V of bit-line droop
    a_vt: float = 3.5              # mV*um, Pelgrom coefficient

    @classmethod
    def default(cls) -> "Technology":
        """The calibrated technology shipped with the package."""
        text = resources.files("sram6t").joinpath("data/defaults.json").read_text()
        return cls.from_dict(json.loads(text)["technology"])

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("nmos", "pmos"):
            d[key].pop("W")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Technology":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown technology key(s): {sorted(unknown)}")
        mos_known = {f.name for f in fields(MosParams)} - {"W"}
        for key, pol in (("nmos", "n"), ("pmos", "p")):
            if key in d:
                sub = dict(d[key])
                bad = set(sub) - mos_known
                if bad:
                    raise KeyError(f"unknown {key} key(s): {sorted(bad)}")
                sub.setdefault("polarity", pol)
                d[key] = MosParams(**sub)
        return cls(**d)


@dataclass(frozen=True)
class CellDesign:
    Wn: float
    Wp: float
    Wacc: float
    L: float
    n_a: MosParams
    n_b: MosParams
    p_a: MosParams
    p_b: MosParams
    acc_a: MosParams
    acc_b: MosParams
    tech: Technology

    @property
    def cr(self) -> float:
        return self.Wn / self.Wacc

    @property
    def pr(self) -> float:
        return self.Wp / self.Wacc

    @property
    def vdd(self) -> float:
        return self.tech.vdd

    def transistors(self) -> dict:
        return {name: getattr(self, name) for name in TRANSISTORS}

    def replace_transistors(self, **mos) -> "CellDesign":
        return replace(self, **mos)


def make_cell(cr: float = 1.0, pr: float = 1.0, wmin: float | None = None,
              tech: Technology | None = None) -> CellDesign:
    """Size a symmetric 6T cell from its cell ratio and pull-up ratio.

    Access and pull-up devices start at the minimum width; the pull-down is
    ``cr`` times the access width and the pull-up ``pr`` times it.
    """
    tech = Technology.default() if tech is None else tech
    wmin = tech.wmin if wmin is None else wmin
    if cr < 1 or pr < 1:
        raise SizingError(f"CR and PR must be >= 1 (got CR={cr}, PR={pr})")
    if wmin <= 0:
        raise SizingError("Wmin must be positive")
    wacc = wmin
    wn = cr * wacc
    wp = pr * wacc
    L = tech.nmos.L
    n = replace(tech.nmos, W=wn)
    p = replace(tech.pmos, W=wp)
    acc = replace(tech.nmos, W=wacc)
    return CellDesign(Wn=wn, Wp=wp, Wacc=wacc, L=L, n_a=n, n_b=n, p_a=p, p_b=p,
                      acc_a=acc, acc_b=acc, tech=tech)


def node_capacitance(d: CellDesign, node: str = "A") -> float:
    """Storage-node capacitance: junction/gate cap per width plus fixed wiring."""
    if node not in ("A", "B"):
        raise ValueError("node must be 'A' or 'B'")
    return d.tech.cj * (d.Wn + d.Wp + d.Wacc) + d.tech.c_wire


def bitline_capacitance(d: CellDesign) -> float:
    return d.tech.cells_per_bitline * d.tech.cj_bl * d.Wacc + d.tech.c_bl_wire


def relative_area(d: CellDesign) -> float:
    """Cell area normalized to the minimum-size cell (PR = 1 only).

    Affine in CR, pinned so that the CR=2 cell is 4/3 of the CR=1 cell.
    """
    if abs(d.pr - 1.0) > 1e-12:
        raise SizingError("relative_area is defined for PR = 1")
    return 1.0 + (d.cr - 1.0) / 3.0


@dataclass(frozen=True)
class BiasCondition:
    vdd: float
    vcell: float
    vwl: float
    vbl_a: float
    vbl_b: float

    def __post_init__(self):
        for name in ("vdd", "vcell", "vwl", "vbl_a", "vbl_b"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def hold(cls, vdd: float, vcell: float | None = None) -> "BiasCondition":
        vcell = vdd if vcell is None else vcell
        return cls(vdd, vcell, 0.0, vdd, vdd)

    @classmethod
    def read(cls, vdd: float, vwl: float | None = None,
             vcell: float | None = None) -> "BiasCondition":
        vwl = vdd if vwl is None else vwl
        vcell = vdd if vcell is None else vcell
        return cls(vdd, vcell, vwl, vdd, vdd)

    @classmethod
    def write_s0(cls, vdd: float, vwl: float | None = None) -> "BiasCondition":
        """Write a 0 into node A (bit-line A low)."""
        vwl = vdd if vwl is None else vwl
        return cls(vdd, vdd, vwl, 0.0, vdd)

    @classmethod
    def write_s1(cls, vdd: float, vwl: float | None = None) -> "BiasCondition":
        vwl = vdd if vwl is None else vwl
        return cls(vdd, vdd, vwl, vdd, 0.0)


@dataclass(frozen=True)
class CellState:
    """S1 stores A=1, B=0; S0 is its complement."""

    label: str

    def __post_init__(self):
        if self.label not in ("S0", "S1"):
            raise ValueError("state label must be 'S0' or 'S1'")

    def voltages(self, vcell: float) -> tuple[float, float]:
        return (vcell, 0.0) if self.label == "S1" else (0.0, vcell)

    def complement(self) -> "CellState":
        return CellState("S0" if self.label == "S1" else "S1")


S0 = CellState("S0")
S1 = CellState("S1")
