"""Hold-mode subthreshold leakage of the 6T cell.

With the cell storing S1 (A high, B low) three devices are off with the
full supply across them: the pull-down on the '1' side, the pull-up on the
'0' side, and the access device on the '0' side (bit-line precharged high).
The access device on the '1' side has no drain-source voltage and is left
out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import CellDesign, CellState, S1
from .device import BiasPoint, subthreshold_current


@dataclass(frozen=True)
class LeakageReport:
    i_s1: float   # off pull-down, '1' side
    i_s2: float   # off pull-up, '0' side
    i_s3: float   # off access, '0' side

    @property
    def supply_total(self) -> float:
        return self.i_s1 + self.i_s2

    @property
    def bitline_total(self) -> float:
        return self.i_s3

    @property
    def total(self) -> float:
        return self.i_s1 + self.i_s2 + self.i_s3

    def csv_row(self, cr, pr):
        return [cr, pr, self.i_s1, self.i_s2, self.i_s3, self.supply_total,
                self.bitline_total]


CSV_HEADER = ["cr", "pr", "i_s1_A", "i_s2_A", "i_s3_A", "supply_A", "bitline_A"]


def leakage(d: CellDesign, state: CellState = S1, vdd: float | None = None) -> LeakageReport:
    """Leakage components for a cell in hold (word-line low, bit-lines at vdd)."""
    vdd = d.vdd if vdd is None else vdd
    off = BiasPoint(Vgs=0.0, Vds=vdd)
    if state.label == "S1":
        pd, pu, acc = d.n_a, d.p_b, d.acc_b
    else:
        pd, pu, acc = d.n_b, d.p_a, d.acc_a
    vals = [subthreshold_current(m, off) for m in (pd, pu, acc)]
    return LeakageReport(*(float(v) if np.ndim(v) == 0 else v for v in vals))
