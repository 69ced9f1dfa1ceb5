"""Finite MDP over (battery, AoI) states.

States are indexed densely as ``b * aoi_cap + (aoi - 1)``. Actions are plain
integers: ``IDLE = 0`` and ``i`` for querying source ``i`` (1-based).

Each action's kernel factorizes into a battery part and an age part, so the
per-action transition matrix is ``kron(battery_matrix, age_matrix)`` with
rows of infeasible ``(state, action)`` pairs left empty (masking) or routed
to ``(0, aoi_cap)`` (penalty).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .scenario import ScenarioConfig

IDLE = 0


class State(NamedTuple):
    battery: int
    aoi: int


def state_index(battery: int, aoi: int, aoi_cap: int) -> int:
    return battery * aoi_cap + (aoi - 1)


def state_of(index: int, aoi_cap: int) -> State:
    b, r = divmod(int(index), aoi_cap)
    return State(b, r + 1)


def next_aoi(aoi: int, update_age: int | None, aoi_cap: int) -> int:
    """``min(aoi + 1, update_age, aoi_cap)``; ``None`` means no update arrived."""
    if not 1 <= aoi <= aoi_cap:
        raise ValueError(f"aoi {aoi} outside 1..{aoi_cap}")
    if update_age is None:
        update_age = aoi_cap
    elif not 1 <= update_age <= aoi_cap:
        raise ValueError(f"update age {update_age} outside 1..{aoi_cap}")
    return min(aoi + 1, update_age, aoi_cap)


def feasible_actions(state: State, config: ScenarioConfig) -> list[int]:
    return [IDLE] + [s.index for s in config.sources if s.cost <= state.battery]


def age_matrix(pmf: np.ndarray | None, aoi_cap: int) -> np.ndarray:
    """Row ``d-1`` is the next-age distribution from age ``d``.

    ``pmf=None`` is the idle (no update) case.
    """
    A = np.zeros((aoi_cap, aoi_cap))
    for d in range(1, aoi_cap + 1):
        if pmf is None:
            A[d - 1, next_aoi(d, None, aoi_cap) - 1] = 1.0
            continue
        for j, g in enumerate(pmf, start=1):
            if g > 0:
                A[d - 1, next_aoi(d, j, aoi_cap) - 1] += g
    return A


def battery_matrix(cost: int, config: ScenarioConfig) -> np.ndarray:
    """Battery transition for spending ``cost`` (0 for idle) in one slot."""
    B, e, lam = config.battery_capacity, config.harvest_amount, config.harvest_prob
    M = np.zeros((B + 1, B + 1))
    for b in range(B + 1):
        if b < cost:
            continue
        M[b, min(b - cost + e, B)] += lam
        M[b, b - cost] += 1.0 - lam
    return M


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Sparse per-action kernels plus expected one-step rewards.

    ``matrices[a]`` is an ``(S, S)`` CSR matrix; ``rewards[a, s]`` is the
    expected next AoI, NaN where ``a`` is infeasible in ``s``.
    """

    battery_capacity: int
    aoi_cap: int
    action_costs: np.ndarray  # index 0 is idle
    feasible: np.ndarray  # (S, A) bool
    matrices: tuple
    rewards: np.ndarray  # (A, S)
    penalty: bool = False

    def __post_init__(self):
        # action-major stack: row a * S + s is the kernel of (s, a)
        object.__setattr__(self, "stacked", sp.vstack(self.matrices, format="csr"))

    @property
    def allowed(self) -> np.ndarray:
        """Actions the optimizer may pick: affordable ones, or all under the penalty kernel."""
        return np.ones_like(self.feasible) if self.penalty else self.feasible

    @property
    def n_states(self) -> int:
        return (self.battery_capacity + 1) * self.aoi_cap

    @property
    def n_actions(self) -> int:
        return len(self.action_costs)

    def state(self, index: int) -> State:
        return state_of(index, self.aoi_cap)

    def index(self, battery: int, aoi: int) -> int:
        return state_index(battery, aoi, self.aoi_cap)

    def row(self, s: int, a: int) -> dict[int, float]:
        """Next-state distribution of ``(s, a)`` as ``{index: prob}``."""
        m = self.matrices[a]
        lo, hi = m.indptr[s], m.indptr[s + 1]
        return {int(j): float(p) for j, p in zip(m.indices[lo:hi], m.data[lo:hi])}

    def policy_matrix(self, policy) -> sp.csr_matrix:
        """Transition matrix of the chain induced by a deterministic policy."""
        policy = np.asarray(policy)
        return self.stacked[policy * self.n_states + np.arange(self.n_states)]

    def policy_rewards(self, policy) -> np.ndarray:
        policy = np.asarray(policy)
        return self.rewards[policy, np.arange(self.n_states)]

    def check_policy(self, policy) -> np.ndarray:
        policy = np.asarray(policy, dtype=int)
        if policy.shape != (self.n_states,):
            raise ValueError(f"policy must have {self.n_states} entries, got shape {policy.shape}")
        if policy.min() < 0 or policy.max() >= self.n_actions:
            raise ValueError("policy contains unknown actions")
        ok = self.allowed[np.arange(self.n_states), policy]
        if not ok.all():
            bad = self.state(int(np.flatnonzero(~ok)[0]))
            raise ValueError(f"policy chooses an infeasible action in state {bad}")
        return policy


def build_transition_model(config: ScenarioConfig, infeasible_action: str | None = None) -> TransitionModel:
    mode = infeasible_action or config.infeasible_action
    penalty = mode == "penalty"
    B, D = config.battery_capacity, config.aoi_cap
    S = (B + 1) * D
    costs = np.array([0] + [s.cost for s in config.sources])
    ages = np.arange(1, D + 1, dtype=float)
    battery_levels = np.repeat(np.arange(B + 1), D)

    matrices, rewards = [], []
    feasible = battery_levels[:, None] >= costs[None, :]
    for a, cost in enumerate(costs):
        pmf = None if a == IDLE else config.sources[a - 1].age_pmf
        A = age_matrix(pmf, D)
        P = sp.kron(sp.csr_matrix(battery_matrix(cost, config)), sp.csr_matrix(A), format="csr")
        r = np.tile(A @ ages, B + 1)
        if a != IDLE:
            blocked = ~feasible[:, a]
            if penalty and blocked.any():
                trap = state_index(0, D, D)
                pen = sp.csr_matrix((np.ones(blocked.sum()), (np.flatnonzero(blocked), np.full(blocked.sum(), trap))),
                                    shape=(S, S))
                P = (P + pen).tocsr()
                r[blocked] = D
            elif blocked.any():
                r[blocked] = np.nan
        P.eliminate_zeros()
        P.sort_indices()
        matrices.append(P)
        rewards.append(r)

    return TransitionModel(B, D, costs, feasible, tuple(matrices), np.array(rewards), penalty)


def dump_model_csv(model: TransitionModel, path) -> int:
    """Write every transition as ``b, aoi, action, next_b, next_aoi, prob``."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "aoi", "action", "next_b", "next_aoi", "prob"])
        for a in range(model.n_actions):
            m = model.matrices[a].tocoo()
            order = np.lexsort((m.col, m.row))
            for s, t, p in zip(m.row[order], m.col[order], m.data[order]):
                st, nx = model.state(s), model.state(t)
                w.writerow([st.battery, st.aoi, a, nx.battery, nx.aoi, repr(float(p))])
                n += 1
    return n
