"""
How many battery quanta does one update cost?
=============================================

A ground node pays for each packet with whole energy quanta. The cost grows
with the distance between the node and the UAV overhead.
"""

from uav_aoi.env import Cell, GridSpec, NodeConfig, RadioParams, channel_gain, required_quanta

# default radio: 1 MHz band, 20 Mbit packets, -100 dBm noise, UAV at 100 m
radio = RadioParams()
grid = GridSpec(11, 11)
node = NodeConfig.with_quanta(Cell(0, 5), quanta_capacity=26)

print("cells away  gain        quanta")
for k in range(7):
    g = channel_gain(radio, grid, Cell(k, 5), node.cell)
    print(f"{k:>10d}  {g:.3e}  {required_quanta(radio, node, g):>6d}")

# Five cells (500 m) costs 26 quanta and two cells (200 m) costs 5: a full
# battery of 26 quanta buys exactly one long-range update.
