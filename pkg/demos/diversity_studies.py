"""
What a wider source catalogue is worth
======================================

Three studies on the default scenario: more expensive sources, a single
source instead of a catalogue, and catalogues of different sizes.
"""

from aoidiv import default_scenario
from aoidiv.experiments import sweep_cost_scale, sweep_network_size, sweep_single_source

cfg = default_scenario()

# %%
# Scaling every cost by 1.5 pushes the top three sources past the battery,
# so they are dropped; the rest are recalibrated on their new prices.
res = sweep_cost_scale(cfg, 1.5, (0.2, 0.5, 0.8), overflow="drop", monte_carlo=False)
print("costs", res["base_costs"], "->", res["scaled_costs"], "dropped", res["dropped_sources"])
for b, s in zip(res["base"], res["scaled"]):
    print(f"lambda={b['lambda']}: gap C {b['aggressive_aoi'] - b['optimal_aoi']:.3f},"
          f" gap 1.5C {s['aggressive_aoi'] - s['optimal_aoi']:.3f},"
          f" optimal C {b['optimal_aoi']:.3f} vs 1.5C {s['optimal_aoi']:.3f}")

# %%
# One source with reliability proportional to its cost (p = 0.1 at c = 1).
rows = sweep_single_source(cfg, costs=range(1, 20, 3), lambdas=(0.2, 0.8))
for r in rows:
    print(f"single source c={r['cost']:2d} p={r['p']:.2f} lambda={r['lambda']}: AoI {r['avg_aoi']:.3f}")

# %%
# Nested catalogues carved out of a 16-source vector.
for pol in ("optimal", "aggressive"):
    for r in sweep_network_size(cfg, lambdas=(0.2, 0.6), policy=pol):
        print(f"{pol:>10} n={r['n']:2d} lambda={r['lambda']}: AoI {r['avg_aoi']:.3f} costs [{r['costs']}]")
