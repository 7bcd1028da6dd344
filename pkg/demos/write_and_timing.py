"""
Writes, reads and what the cell ratio costs
===========================================

A weaker pull-down makes the cell easier to write and faster to flip, but
the bit-line discharges more slowly on a read.
"""
from sram6t import dc, transient
from sram6t.cell import make_cell, relative_area

for cr in (1.0, 1.5, 2.0, 2.5):
    d = make_cell(cr)
    print(f"CR {cr:3.1f}  area {relative_area(d):.3f}  "
          f"WNM {dc.wnm(d) * 1e3:5.1f} mV  WLVM {dc.wlvm(d) * 1e3:5.0f} mV  "
          f"read {transient.read_delay(d) * 1e12:5.1f} ps  "
          f"write {transient.write_delay(d) * 1e12:4.1f} ps")

# read assist slows the read: the access device is weaker
msc = make_cell(1.0)
print(f"CR 1 read at Vwl = 1.0 V: {transient.read_delay(msc, vwl=1.0) * 1e12:.1f} ps")

# energy drawn from the cell supply over one write
for cr in (1.0, 2.0):
    print(f"write energy CR {cr}: {transient.write_energy(make_cell(cr)) * 1e15:.2f} fJ")

# a full waveform is available too
cfg = transient.TransientConfig(stop_time=100e-12,
                                vwl=transient.wordline_pulse(msc.vdd),
                                vbl_a=transient.Pwl.const(0.0))
w = transient.simulate(msc, cfg=cfg)
for i in range(0, w.t.size, 100):
    print(f"  t {w.t[i] * 1e12:5.1f} ps  A {w.v_a[i]:.3f} V  B {w.v_b[i]:.3f} V")
