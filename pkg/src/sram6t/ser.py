"""Closed-form alpha-particle soft-error-rate model.

Critical charges are affine in the pull-down and pull-up widths, and the
upset rate sums an electron-collection term over the n-diffusion area and a
hole-collection term over the p-diffusion area:

    SER = flux * (A_n * exp(-beta_e * Qe) + A_p * exp(-beta_h * Qh))

Charges are carried in fC and the betas in 1/C; :data:`FC` is the single
conversion point.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .cell import CellDesign, Technology, make_cell

FC = 1e-15   # C per fC


@dataclass(frozen=True)
class SerParams:
    flux: float = 1.0          # normalized particles / (um^2 * time)
    beta_e: float = 4.95e14    # 1/C
    beta_h: float = 1.26e15    # 1/C
    a_e: float = 0.45          # fC
    b_e: float = 3.6           # fC/um
    c_e: float = 6.5           # fC/um
    a_h: float = 0.53          # fC
    b_h: float = 11.3          # fC/um
    c_h: float = 2.67          # fC/um
    l_drain: float = 0.2       # um, diffusion length for A = W * l_drain

    def __post_init__(self):
        if self.flux < 0:
            raise ValueError("flux must be >= 0")
        for name in ("beta_e", "beta_h", "l_drain"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("a_e", "b_e", "c_e", "a_h", "b_h", "c_h"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SerParams":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise KeyError(f"unknown ser key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SerReport:
    q_crit_e: float    # fC
    q_crit_h: float    # fC
    term_e: float
    term_h: float

    @property
    def ser(self) -> float:
        return self.term_e + self.term_h


def qcrit_linear(wn: float, wp: float, p: SerParams = SerParams()) -> tuple[float, float]:
    """Electron and hole critical charges (fC) for the given widths (um)."""
    if wn < 0 or wp < 0:
        raise ValueError("widths must be >= 0")
    return p.a_e + p.b_e * wn + p.c_e * wp, p.a_h + p.b_h * wn + p.c_h * wp


def ser(d: CellDesign, p: SerParams = SerParams()) -> SerReport:
    qe, qh = qcrit_linear(d.Wn, d.Wp, p)
    term_e = p.flux * d.Wn * p.l_drain * math.exp(-p.beta_e * qe * FC)
    term_h = p.flux * d.Wp * p.l_drain * math.exp(-p.beta_h * qh * FC)
    return SerReport(qe, qh, term_e, term_h)


SWEEP_HEADER = "cr,qcrit_e_fC,qcrit_h_fC,ser_norm"


def ser_sweep(cr_grid, p: SerParams = SerParams(), pr: float = 1.0,
              wmin: float | None = None, tech: Technology | None = None):
    """Rows ``(cr, qcrit_e_fC, qcrit_h_fC, ser / ser(CR=1))``."""
    cr_grid = [float(c) for c in cr_grid]
    if any(c < 1.0 or c > 2.5 for c in cr_grid):
        raise ValueError("CR grid must lie within [1, 2.5]")
    tech = Technology.default() if tech is None else tech
    ref = ser(make_cell(1.0, pr, wmin, tech), p).ser
    rows = []
    for cr in cr_grid:
        r = ser(make_cell(cr, pr, wmin, tech), p)
        rows.append((cr, r.q_crit_e, r.q_crit_h, r.ser / ref if ref > 0 else 0.0))
    return rows
