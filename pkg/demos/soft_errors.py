"""
Soft errors and the cell ratio
==============================

A larger pull-down stores more charge but also collects more. The closed
form weighs both; the transient simulation gives the critical charge
directly.
"""
from sram6t import transient
from sram6t.cell import make_cell
from sram6t.ser import SWEEP_HEADER, ser_sweep

print(SWEEP_HEADER)
for row in ser_sweep([1.0, 1.5, 2.0, 2.5]):
    print(",".join(f"{v:.4g}" for v in row))

# simulated critical charge: a short strike on the node holding '1'
for cr in (1.0, 2.0):
    d = make_cell(cr)
    q_e = transient.critical_charge(d, tau_f=50e-12) / transient.FEMTO
    q_h = transient.critical_charge(d, tau_f=50e-12, polarity="hole") / transient.FEMTO
    print(f"CR {cr}: Qcrit electron {q_e:.2f} fC, hole {q_h:.2f} fC")
