"""
Perimeter gating with a PI loop
===============================

The same zone, now gated. The controller picks one entering green ratio per
cycle and every gate of the zone gets it.
"""

from fairgate import builtin
from fairgate.gating import ControllerParams, ZoneControllerState, pi_raw, pi_update
from fairgate.plant import run

# One controller step by hand
params = ControllerParams(K_P=0.007, K_I=0.001, n_target=240, r_min=0.2, r_max=0.5)
state = ZoneControllerState("z", prev_rate=0.5, prev_n=280)
print("raw rate:", round(pi_raw(state, 300, params), 12))
print("clamped :", pi_update(state, 300, params))

# Closed loop on the single-zone scenario
spec = builtin("single_zone")
target = spec.zones[0].n_target
gated = run(spec, "gating", seed=0)
free = run(spec, "none", seed=0)

late = gated.t >= 7200
print(f"target n = {target:g}")
print(f"gating after 2 h: n in [{gated.n[late, 0].min():.2f}, {gated.n[late, 0].max():.2f}]")
print(f"uncontrolled peak n: {free.n[:, 0].max():.1f} of jam {spec.zones[0].n_jam:g}")
print(f"mean flow  gating {gated.flow.mean():7.1f}  vs  none {free.flow.mean():7.1f} veh/h")

# The rate settles where inflow balances the zone's production at the target
print("final rate:", round(float(gated.rate[-1, 0]), 4))
