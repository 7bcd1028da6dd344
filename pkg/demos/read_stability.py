"""
Read stability of a minimum-size cell
=====================================

The minimum-size cell (CR = 1) gives up some read margin against a
conventional CR = 2 cell. Lowering the word-line during the read wins it
back.
"""
import numpy as np

from sram6t import dc
from sram6t.cell import BiasCondition, make_cell

msc = make_cell(1.0)
cc = make_cell(2.0)
vdd = msc.vdd

# read margins at the full word-line
r1, r2 = dc.rsnm(msc), dc.rsnm(cc)
print(f"RSNM  CR=1: {r1 * 1e3:6.1f} mV   CR=2: {r2 * 1e3:6.1f} mV   ratio {r1 / r2:.3f}")
print(f"hold SNM CR=1: {dc.hold_snm(msc) * 1e3:.1f} mV")

# the '0' node rises to V_READ; the cell flips once that passes the trip point
print(f"V_READ {dc.v_read(msc) * 1e3:.1f} mV, V_TRIP {dc.trip_point(msc) * 1e3:.1f} mV")

# sweep the word-line level of the small cell
for vwl in np.arange(0.6, vdd + 1e-9, 0.1):
    r = dc.rsnm(msc, BiasCondition.read(vdd, vwl))
    bar = "#" * int(r * 200)
    print(f"  Vwl {vwl:4.2f} V  {r * 1e3:6.1f} mV  {bar}")

# at 0.9 Vdd the small cell is about as stable as the big one at Vdd
assisted = dc.rsnm(msc, BiasCondition.read(vdd, 0.9 * vdd))
print(f"CR=1 at 0.9 Vdd: {assisted * 1e3:.1f} mV vs CR=2 at Vdd: {r2 * 1e3:.1f} mV")

# the butterfly itself, a few samples of each curve
bf = dc.butterfly(msc, BiasCondition.read(vdd))
for i in range(0, bf.a.vin.size, 200):
    print(f"  in {bf.a.vin[i]:.2f}  out_A {bf.a.vout[i]:.3f}  out_B {bf.b.vout[i]:.3f}")
