"""Stationary deterministic decision rules.

Every rule maps a :class:`~aoidiv.mdp.State` to an action (``0`` idle,
``i`` query source ``i``) and can be tabulated over the whole state space,
which is what the simulator and the exact evaluator consume.
"""

from __future__ import annotations

import numpy as np

from .mdp import IDLE, State
from .scenario import ScenarioConfig
from .solver import PolicySolution


class PolicyCorruptionError(ValueError):
    """A stored policy entry is not feasible in its own state."""


def aggressive_action(state: State, costs) -> int:
    """Query the most expensive affordable source; idle if none is affordable."""
    best = IDLE
    for i, c in enumerate(costs, start=1):
        if c <= state.battery:
            best = i
    return best


def tabular_action(state: State, solution: PolicySolution, costs=None) -> int:
    a = solution.action(state.battery, state.aoi)
    if costs is not None and a != IDLE and costs[a - 1] > state.battery:
        raise PolicyCorruptionError(f"stored action {a} unaffordable in {state}")
    return a


class DecisionRule:
    name = "rule"

    def __call__(self, state: State) -> int:
        raise NotImplementedError

    def table(self, config: ScenarioConfig) -> np.ndarray:
        """Action for every state index ``b * aoi_cap + aoi - 1``."""
        D = config.aoi_cap
        out = np.empty(config.n_states, dtype=np.int64)
        for b in range(config.battery_capacity + 1):
            for d in range(1, D + 1):
                out[b * D + d - 1] = self(State(b, d))
        costs = config.source_costs
        levels = np.repeat(np.arange(config.battery_capacity + 1), D)
        spend = np.array((0,) + costs)[out]
        if np.any(spend > levels):
            raise PolicyCorruptionError(f"{self.name} picks an unaffordable action")
        return out

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class AggressivePolicy(DecisionRule):
    name = "aggressive"

    def __init__(self, costs):
        self.costs = tuple(costs)
        if any(b <= a for a, b in zip(self.costs, self.costs[1:])):
            raise ValueError("costs must be strictly increasing")

    def __call__(self, state):
        return aggressive_action(state, self.costs)


class AlwaysIdle(DecisionRule):
    name = "idle"

    def __call__(self, state):
        return IDLE


class FixedSource(DecisionRule):
    """Query one source whenever it is affordable."""

    def __init__(self, source: int, costs):
        self.source = int(source)
        self.cost = tuple(costs)[self.source - 1]
        self.name = f"source-{self.source}"

    def __call__(self, state):
        return self.source if state.battery >= self.cost else IDLE


class TabularPolicy(DecisionRule):
    name = "optimal"

    def __init__(self, solution: PolicySolution, costs=None, name=None):
        self.solution = solution
        self.costs = None if costs is None else tuple(costs)
        if name:
            self.name = name

    def __call__(self, state):
        return tabular_action(state, self.solution, self.costs)

    def table(self, config):
        if (config.battery_capacity, config.aoi_cap) != (self.solution.battery_capacity, self.solution.aoi_cap):
            raise ValueError("policy table does not match the scenario's state space")
        out = np.asarray(self.solution.policy, dtype=np.int64).copy()
        levels = np.repeat(np.arange(config.battery_capacity + 1), config.aoi_cap)
        if np.any(np.array((0,) + config.source_costs)[out] > levels):
            raise PolicyCorruptionError("stored policy picks an unaffordable action")
        return out


def idle_table(config: ScenarioConfig) -> np.ndarray:
    return np.zeros(config.n_states, dtype=np.int64)
