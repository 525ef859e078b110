"""
Splitting a zone's inflow budget across gates
=============================================

Gating gives every gate the same ratio. Balancing keeps the zone total and
re-divides it by queue length, either proportionally or max-min fairly.
"""

import numpy as np

from fairgate.balancing import balance, demands_from_queues, maxmin_allocate, maxmin_oracle, proportional_allocate
from fairgate.gating import compute_budget

bounds = (0.2, 0.5)
queues = np.array([5.0, 40.0, 120.0, 0.0])
caps = np.full(4, 50.0)
zone_rate = 0.33
budget = compute_budget(zone_rate, len(queues))
print(f"zone rate {zone_rate} over {len(queues)} gates -> budget {budget:.2f}")

# Proportional: grant ~ queue share, clipped to the bounds
prop = proportional_allocate(queues, budget, bounds)
print("proportional:", np.round(prop.grants, 4), "total", round(prop.total_granted, 12))

# Max-min: every gate asks for a ratio scaled from its queue, water-filling serves the
# smallest requests first
demands = demands_from_queues(queues, caps, bounds)
mm = maxmin_allocate(demands, budget, bounds)
print("requests    :", np.round(demands, 4))
print("max-min     :", np.round(mm.grants, 4), "total", round(mm.total_granted, 12))

# Brute force on a 0.01 grid agrees
ref = maxmin_oracle(np.round(demands, 2), round(budget, 2), bounds)
print("oracle      :", np.round(ref.grants, 4))

# balance() wraps both and always hands out exactly the gating total; when requests
# fall short of the budget the rest is spread evenly, up to r_max
for mech in ("prop", "maxmin"):
    g = balance(zone_rate, queues, mech, bounds, queue_caps=caps)
    print(f"{mech:7s} sum = {g.sum():.12f}  (gating {budget:.12f})")
