"""
Baselines across a battery sweep
================================

Larger batteries let nodes afford more updates. The sweep below shows how
the optimal, distance-based and random policies respond.
"""

from uav_aoi.harness import get_scenario, run_comparison

scenario = get_scenario("scenario3-micro")
report = run_comparison(scenario, seed=0, episodes=200)

names = scenario.policies
print("e_max " + "".join(f"{n:>10s}" for n in names))
for value in scenario.sweep.values:
    print(f"{value:>5d} " + "".join(f"{report.row(n, value).mean_total:>10.2f}" for n in names))

# The optimal cost never rises with battery size; the random walk stays far
# above it because it wastes both flight time and energy.
