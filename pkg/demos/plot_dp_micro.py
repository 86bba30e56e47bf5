"""
Exact optimum on a micro instance
=================================

Backward induction over the full state lattice gives the optimal policy for
small grids. We solve a 5 x 5 instance and replay the optimal trajectory.
"""

from uav_aoi import dp
from uav_aoi.env import make_spec

spec = make_spec(
    grid_size=(5, 5),
    node_cells=[(2, 4), (0, 0)],
    quanta_capacity=8,
    horizon=8,
    start_cell=(0, 2),
    final_cell=(4, 2),
    aoi_cap=10,
)
index = dp.enumerate_states(spec)
print(f"{index.size} lattice states over {index.num_stages} stages")

solution = dp.solve(spec)
print(f"optimal sum-AoI from the start: {solution.initial_value}")

# %%
# The greedy trajectory follows the stored argmin actions slot by slot.
total, trace = solution.greedy_trajectory()
for t in trace:
    ages = [n.aoi for n in t.state.nodes]
    print(f"slot {t.state.slot}: at {tuple(t.state.uav.cell)} ages {ages} -> {t.action.movement}{t.action.schedule}")
print(f"replayed total {total}")
