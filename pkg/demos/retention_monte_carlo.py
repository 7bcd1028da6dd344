"""
Retention under mismatch
========================

Random threshold mismatch spreads the supply read retention voltage. The
far tail of a Gaussian fit says how often a cell in a large array would
lose data when read at a lowered supply.
"""
from sram6t.cell import make_cell
from sram6t.variability import McConfig, PelgromModel, gaussian_fail_prob, monte_carlo

msc = make_cell(1.0)
model = PelgromModel(msc.tech.a_vt)

# a few hundred trials are enough to see the shape; use 10^4 for real numbers
for metric in ("v_trip", "v_read", "srrv"):
    dist = monte_carlo(msc, model, McConfig(trials=400, seed=1, metric=metric))
    print(f"{metric:7s} mean {dist.mean * 1e3:6.1f} mV  sigma {dist.std * 1e3:5.1f} mV  "
          f"censored {dist.censored}")

srrv = monte_carlo(msc, model, McConfig(trials=400, seed=1, metric="srrv"))
for c, lo in zip(srrv.counts, srrv.edges):
    print(f"  {lo * 1e3:6.1f} mV  {'*' * int(c)}")

# probability that the retention margin is gone, at Vdd and at Vdd - 10%
print(f"P(fail) at Vdd       : {srrv.fail_prob():.3g}")
print(f"P(fail) at 0.9 Vdd   : {srrv.fail_prob(0.1 * msc.vdd):.3g}")

# tails stay accurate far out, where 1 - cdf would round to zero
print(f"10-sigma tail: {gaussian_fail_prob(10.0, 1.0):.4g}")
