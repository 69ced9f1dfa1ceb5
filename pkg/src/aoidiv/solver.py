"""Average-AoI optimal policies by relative value iteration, plus exact
stationary evaluation of any deterministic stationary policy."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError
from .mdp import IDLE, TransitionModel

log = logging.getLogger(__name__)

# actions whose Q-value is within this of the minimum count as ties
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EvaluationResult:
    gain: float
    stationary_distribution: np.ndarray = field(repr=False)
    avg_energy_per_slot: float
    source_usage: np.ndarray  # stationary frequency of each action
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class PolicySolution:
    policy: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    gain: float
    vi_gain: float
    iterations: int
    span_trace: list = field(repr=False)
    gain_bounds: tuple
    battery_capacity: int
    aoi_cap: int
    evaluation: EvaluationResult | None = field(default=None, repr=False)

    @property
    def policy_map(self) -> np.ndarray:
        """Policy as a ``(B + 1, aoi_cap)`` array indexed ``[b, aoi - 1]``."""
        return self.policy.reshape(self.battery_capacity + 1, self.aoi_cap)

    def action(self, battery: int, aoi: int) -> int:
        return int(self.policy[battery * self.aoi_cap + aoi - 1])


def _q_values(model: TransitionModel, V: np.ndarray) -> np.ndarray:
    Q = model.rewards + (model.stacked @ V).reshape(model.n_actions, model.n_states)
    Q[~model.allowed.T] = np.inf
    return Q


def greedy_policy(model: TransitionModel, V: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Greedy actions w.r.t. ``V``; ties go to idle, then the lowest source index."""
    Q = _q_values(model, V)
    best = Q.min(axis=0)
    # argmax returns the first True, i.e. the lowest action index
    return np.argmax(Q <= best + tie_tol, axis=0)


def relative_value_iteration(
    model: TransitionModel,
    epsilon: float = 1e-6,
    max_iter: int = 10**6,
    reference_state: int = 0,
    exact_gain: bool = True,
) -> PolicySolution:
    """Relative value iteration for the average-AoI criterion.

    Iterates ``v = min_a r(s, a) + P_a V`` and renormalizes
    ``V = v - v[reference_state]`` until the span of ``v - V_prev`` drops
    below ``epsilon``. The span's end points bracket the optimal gain.
    With ``exact_gain`` the reported gain comes from exact evaluation of the
    extracted policy; otherwise it is the midpoint of the bracket.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    S, A = model.n_states, model.n_actions
    allowed_t = ~model.allowed.T
    P, r = model.stacked, model.rewards
    V = np.zeros(S)
    trace = []
    lo = hi = np.nan
    it = 0
    while True:
        it += 1
        Q = r + (P @ V).reshape(A, S)
        Q[allowed_t] = np.inf
        v = Q.min(axis=0)
        diff = v - V
        lo, hi = float(diff.min()), float(diff.max())
        span = hi - lo
        trace.append(span)
        V = v - v[reference_state]
        if span < epsilon:
            break
        if it >= max_iter:
            raise NonConvergenceError(
                f"relative value iteration did not reach span < {epsilon} in {max_iter} iterations "
                f"(last span {span:.3e})", span_trace=trace, residual=span)

    policy = greedy_policy(model, V)
    vi_gain = 0.5 * (lo + hi)
    evaluation = None
    gain = vi_gain
    if exact_gain:
        evaluation = evaluate_policy_exact(policy, model)
        gain = evaluation.gain
    log.debug("RVI converged in %d iterations, gain %.9f in [%.9f, %.9f]", it, gain, lo, hi)
    return PolicySolution(policy, V, float(gain), float(vi_gain), it, trace, (lo, hi),
                          model.battery_capacity, model.aoi_cap, evaluation)


def iterate_distribution(P, initial: np.ndarray, tol: float = 1e-12, max_iter: int = 10**6,
                         patience: int = 200):
    """Push a distribution through ``P`` until successive iterates agree.

    Switches to the lazy chain ``(I + P) / 2`` (same stationary law, always
    aperiodic) once the L1 residual stops improving for ``patience`` steps,
    which is what a periodic chain does.
    """
    PT = P.T.tocsr()
    pi = np.asarray(initial, dtype=float).copy()
    damped = False
    best, stale = np.inf, 0
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = PT @ pi
        if damped:
            nxt = 0.5 * (nxt + pi)
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < tol:
            return pi, it, residual
        if residual < best * 0.999:
            best, stale = residual, 0
        else:
            stale += 1
            if not damped and stale >= patience:
                damped, best, stale = True, np.inf, 0
    raise NonConvergenceError(
        f"stationary distribution did not converge in {max_iter} iterations (residual {residual:.3e})",
        residual=residual)


def evaluate_policy_exact(policy, model: TransitionModel, initial_state: int | None = None,
                          tol: float = 1e-12, max_iter: int = 10**6) -> EvaluationResult:
    """Long-run average AoI, energy and action mix of a stationary policy.

    The stationary law is the one reached from ``initial_state``, by default
    the empty-battery, maximally stale state ``(0, aoi_cap)``.
    """
    policy = model.check_policy(policy)
    if initial_state is None:
        initial_state = model.index(0, model.aoi_cap)
    P = model.policy_matrix(policy)
    start = np.zeros(model.n_states)
    start[initial_state] = 1.0
    pi, it, residual = iterate_distribution(P, start, tol=tol, max_iter=max_iter)
    gain = float(pi @ model.policy_rewards(policy))
    spent = model.action_costs[policy].astype(float)
    if model.penalty:
        # an unaffordable query spends nothing: the battery drains to 0 anyway
        battery = np.repeat(np.arange(model.battery_capacity + 1), model.aoi_cap)
        spent = np.where(model.feasible[np.arange(model.n_states), policy], spent, battery)
    usage = np.bincount(policy, weights=pi, minlength=model.n_actions)
    return EvaluationResult(gain, pi, float(pi @ spent), usage, it, residual)


@dataclass(frozen=True)
class ThresholdReport:
    thresholds: np.ndarray  # delta_u(b) per battery level
    structured: np.ndarray  # idle exactly on a prefix of ages


def extract_thresholds(policy_map) -> ThresholdReport:
    """Per-battery energy-saving thresholds of a ``(B + 1, aoi_cap)`` policy map.

    ``thresholds[b]`` is the largest age ``d`` such that the policy idles at
    every age ``<= d`` (0 when it queries already at age 1). A column is
    threshold-structured when every age above its threshold is a query.
    """
    pm = np.asarray(policy_map)
    idle = pm == IDLE
    D = pm.shape[1]
    # first non-idle position per row, D if none
    first_active = np.where(idle.all(axis=1), D, np.argmin(idle, axis=1))
    thresholds = first_active
    structured = np.array([not idle[b, first_active[b]:].any() for b in range(pm.shape[0])])
    return ThresholdReport(thresholds.astype(int), structured)
