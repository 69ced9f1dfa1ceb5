"""Seeded Monte Carlo evaluation of decision rules.

Replication ``m`` draws from its own stream seeded by ``(seed, m)``, so
results do not depend on how replications are batched or ordered. Each slot
consumes exactly two uniforms per replication (harvest, update age) whether
or not the node queries, which gives common random numbers across policies
for free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import IDLE, State, next_aoi
from .policies import DecisionRule
from .scenario import ScenarioConfig

BLOCK = 250


def sample_age(cdf: np.ndarray, u: float) -> int:
    """Inverse-CDF draw of an update age (ages start at 1)."""
    return int(np.searchsorted(cdf, u, side="right")) + 1


def step(state: State, action: int, harvest: bool, age_draw: float, config: ScenarioConfig) -> State:
    """Advance one slot. Affordability is judged on the battery at slot start."""
    b, d = state
    if action == IDLE:
        spend, update = 0, None
    else:
        src = config.sources[action - 1]
        if src.cost > b:
            raise ValueError(f"action {action} (cost {src.cost}) unaffordable at battery {b}")
        spend, update = src.cost, sample_age(src.age_cdf, age_draw)
    gain = config.harvest_amount if harvest else 0
    nb = min(b - spend + gain, config.battery_capacity)
    return State(nb, next_aoi(d, update, config.aoi_cap))


def replication_rng(seed: int, m: int, stream: int | None = None) -> np.random.Generator:
    key = (m,) if stream is None else (m, stream)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True, eq=False)
class SimulationMetrics:
    policy: str
    avg_aoi: float
    stderr_aoi: float
    avg_energy_per_slot: float
    source_usage: np.ndarray
    replications: int
    horizon: int
    seed: int
    fingerprint: str = ""
    per_replication_aoi: np.ndarray = field(default=None, repr=False)
    ledger: dict = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "policy": self.policy,
            "avg_aoi": self.avg_aoi,
            "stderr": self.stderr_aoi,
            "energy": self.avg_energy_per_slot,
            "usage": [int(x) for x in self.source_usage],
            "seed": self.seed,
            "T": self.horizon,
            "M": self.replications,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _age_cdf_table(config: ScenarioConfig) -> np.ndarray:
    """Row ``a`` is the age cdf of action ``a``; the idle row never updates."""
    beta = config.age_max
    table = np.ones((len(config.sources) + 1, beta))
    for s in config.sources:
        table[s.index] = s.age_cdf
    return table


def simulate(rule, config: ScenarioConfig, T: int | None = None, M: int | None = None,
             seed: int | None = None, stream: int | None = None, check: bool = False,
             name: str | None = None) -> SimulationMetrics:
    """Run ``M`` independent ``T``-slot episodes of a stationary rule.

    ``rule`` is a :class:`DecisionRule` or an action table over state
    indices. Every episode starts from the empty battery at the AoI cap and
    averages ``aoi(t)`` over ``t = 1..T``. The standard error is taken across
    replication means.
    """
    T = config.sim_horizon if T is None else int(T)
    M = config.sim_replications if M is None else int(M)
    seed = config.rng_seed if seed is None else int(seed)
    if T < 1 or M < 1:
        raise ValueError("T and M must be positive")
    if isinstance(rule, DecisionRule):
        table = rule.table(config)
        name = name or rule.name
    else:
        table = np.asarray(rule, dtype=np.int64)
        name = name or "table"
    if table.shape != (config.n_states,):
        raise ValueError(f"action table must have {config.n_states} entries")

    B, D, e, lam = config.battery_capacity, config.aoi_cap, config.harvest_amount, config.harvest_prob
    costs = np.array((0,) + config.source_costs, dtype=np.int64)
    levels = np.repeat(np.arange(B + 1), D)
    if np.any(costs[table] > levels):
        raise ValueError("action table picks an unaffordable action")
    cdf = _age_cdf_table(config)
    n_actions = len(costs)

    aoi_sum = np.zeros(M, dtype=np.int64)
    harvested = np.zeros(M, dtype=np.int64)
    spent = np.zeros(M, dtype=np.int64)
    overflow = np.zeros(M, dtype=np.int64)
    final = np.zeros(M, dtype=np.int64)
    usage = np.zeros(n_actions, dtype=np.int64)

    for lo in range(0, M, BLOCK):
        idx = np.arange(lo, min(lo + BLOCK, M))
        draws = np.stack([replication_rng(seed, int(m), stream).random((2, T)) for m in idx])
        harvest = (draws[:, 0, :] < lam).astype(np.int64) * e
        age_u = draws[:, 1, :]
        b = np.zeros(idx.size, dtype=np.int64)
        d = np.full(idx.size, D, dtype=np.int64)
        for t in range(T):
            a = table[b * D + d - 1]
            usage += np.bincount(a, minlength=n_actions)
            c = costs[a]
            raw = b - c + harvest[:, t]
            nb = np.minimum(raw, B)
            overflow[idx] += raw - nb
            spent[idx] += c
            harvested[idx] += harvest[:, t]
            upd = (cdf[a] <= age_u[:, t, None]).sum(axis=1) + 1
            upd = np.where(a == IDLE, D, upd)
            d = np.minimum(np.minimum(d + 1, upd), D)
            b = nb
            aoi_sum[idx] += d
            if check:
                assert b.min() >= 0 and b.max() <= B, "battery out of range"
                assert d.min() >= 1 and d.max() <= D, "aoi out of range"
        final[idx] = b

    per_rep = aoi_sum / T
    mean = float(aoi_sum.sum()) / (M * T)
    if M > 1:
        var = math.fsum(((per_rep - mean) ** 2).tolist()) / (M - 1)
        stderr = math.sqrt(var / M)
    else:
        stderr = 0.0
    ledger = {"initial": np.zeros(M, dtype=np.int64), "harvested": harvested, "spent": spent,
              "overflow": overflow, "final": final}
    return SimulationMetrics(name, mean, stderr, float(spent.sum()) / (M * T), usage, M, T, seed,
                             config.fingerprint(), per_rep, ledger)
