"""
Optimal versus aggressive across harvest rates
==============================================

The aggressive rule spends on the best affordable source every slot. The
ratio of the optimal average AoI to the aggressive one (the efficiency)
shows how much planning buys at each harvest rate.
"""

from aoidiv import default_scenario
from aoidiv.experiments import DEFAULT_LAMBDAS, long_rows, sweep_lambda, write_rows

cfg = default_scenario()
rows = sweep_lambda(cfg, DEFAULT_LAMBDAS, T=2000, M=100, seed=1)

print(f"{'lambda':>6} {'opt AoI':>8} {'agg AoI':>8} {'eff':>6} {'eff MC':>7} {'opt E':>6} {'agg E':>6}")
for r in rows:
    print(f"{r['lambda']:6.1f} {r['optimal_aoi']:8.3f} {r['aggressive_aoi']:8.3f} {r['efficiency']:6.3f}"
          f" {r['efficiency_mc']:7.3f} {r['optimal_energy']:6.3f} {r['aggressive_energy']:6.3f}")

# %%
# The long table (one line per policy and method) is what the CLI writes.
path = write_rows(long_rows(rows), "results/demo_sweep_lambda.csv")
print("wrote", path)
