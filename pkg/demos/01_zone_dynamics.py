"""
Zone dynamics and the fundamental diagram
=========================================

A single zone fed by four gates. With every gate wide open the zone fills
past its critical accumulation and production collapses.
"""

import numpy as np

from fairgate import builtin
from fairgate.plant import nfd_flow, receiving_capacity, run

spec = builtin("single_zone")
zone = spec.zones[0]

# The diagram is a parabola peaking at half the jam accumulation
for n in np.linspace(0, zone.n_jam, 7):
    print(f"n={n:6.1f}  F(n)={nfd_flow(n, zone):7.1f} veh/h  "
          f"receiving={receiving_capacity(n, zone, spec.gates):7.1f} veh/h")

# Run with no control: every gate at r_max for 6 hours
trace = run(spec, "none", seed=0)
hours = trace.t / 3600
for h in (0.5, 1, 2, 4, 6):
    k = int(np.searchsorted(hours, h))
    k = min(k, len(trace) - 1)
    print(f"t={hours[k]:4.2f} h  n={trace.n[k, 0]:6.1f}  flow={trace.flow[k, 0]:6.1f}  "
          f"queued={trace.queue[k].sum():7.1f}")

# Every vehicle is accounted for
print("conservation error:", trace.conservation_error())
