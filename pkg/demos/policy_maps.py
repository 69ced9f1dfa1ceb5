"""
Optimal policy maps
===================

Solve the default eight-source scenario at a scarce and a generous harvest
rate and look at what the node does in every (battery, age) state.
"""

import numpy as np

from aoidiv import default_scenario, extract_thresholds
from aoidiv.experiments import run_shape_grid, solve

# %%
# Each character is one state: ``.`` idles, a digit queries that source.
# Rows are battery levels (top = full), columns are ages 1..30.


def show(solution):
    pm = solution.policy_map
    for b in range(pm.shape[0] - 1, -1, -1):
        print(f"b={b:2d} " + "".join("." if a == 0 else str(a) for a in pm[b]))


for lam in (0.2, 0.6):
    sol = solve(default_scenario(harvest_prob=lam))
    print(f"\nharvest rate {lam}: average AoI {sol.gain:.4f} after {sol.iterations} sweeps")
    show(sol)

    # %%
    # Every battery column is a threshold rule: idle while the age is below
    # a level, query from then on. The level falls as the battery fills.
    rep = extract_thresholds(sol.policy_map)
    D = sol.policy_map.shape[1]
    print("first querying age per battery level:", ["-" if t == D else int(t) + 1 for t in rep.thresholds])

# %%
# The same solve across the nine cost/age shape pairs. With little energy the
# node leans on the cheap end of the catalogue; more energy widens the mix.
for cell in run_shape_grid(default_scenario()):
    print(f"lambda={cell.harvest_prob} {cell.cost_shape:>11} costs, {cell.age_shape:>11} ages:"
          f" sources {cell.sources_used}, costs {list(cell.config.source_costs)}")
