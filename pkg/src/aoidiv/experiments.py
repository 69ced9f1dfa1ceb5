"""Experiment drivers: shape grids, harvest-rate sweeps, cost scaling,
single-source and network-size studies.

Every driver returns plain row dicts (one per table line) that carry the
fingerprint of the resolved scenario they were computed on; the ``write_*``
helpers turn them into CSV or JSON files.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidScenarioError
from .mdp import build_transition_model
from .policies import AggressivePolicy, TabularPolicy
from .scenario import (SHAPES, ScenarioConfig, calibrate_reliability, generate_cost_vector, reliability_basis,
                       round_half_up)
from .simulator import SimulationMetrics, simulate
from .solver import EvaluationResult, PolicySolution, evaluate_policy_exact, relative_value_iteration

DEFAULT_LAMBDAS = tuple(round(0.1 * i, 1) for i in range(1, 10))


def solve(config: ScenarioConfig) -> PolicySolution:
    model = build_transition_model(config)
    return relative_value_iteration(model, config.vi_epsilon, config.vi_max_iter)


def aggressive_exact(config: ScenarioConfig, model=None) -> EvaluationResult:
    model = model or build_transition_model(config)
    return evaluate_policy_exact(AggressivePolicy(config.source_costs).table(config), model)


# -- policy comparison ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolicyComparison:
    optimal: SimulationMetrics
    aggressive: SimulationMetrics
    efficiency: float
    solution: PolicySolution
    optimal_exact: EvaluationResult
    aggressive_exact: EvaluationResult

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.optimal.fingerprint,
            "efficiency": self.efficiency,
            "efficiency_exact": self.optimal_exact.gain / self.aggressive_exact.gain,
            "optimal": {**self.optimal.to_dict(), "exact_aoi": self.optimal_exact.gain,
                        "exact_energy": self.optimal_exact.avg_energy_per_slot},
            "aggressive": {**self.aggressive.to_dict(), "exact_aoi": self.aggressive_exact.gain,
                           "exact_energy": self.aggressive_exact.avg_energy_per_slot},
        }


def compare_policies(config: ScenarioConfig, T=None, M=None, seed=None,
                     independent_streams: bool = False) -> PolicyComparison:
    """Solve, then simulate the optimal and aggressive rules.

    Both rules see the same per-replication random streams unless
    ``independent_streams`` is set.
    """
    model = build_transition_model(config)
    sol = relative_value_iteration(model, config.vi_epsilon, config.vi_max_iter)
    agg = AggressivePolicy(config.source_costs)
    opt = TabularPolicy(sol, config.source_costs)
    m_opt = simulate(opt, config, T, M, seed)
    m_agg = simulate(agg, config, T, M, seed, stream=1 if independent_streams else None)
    return PolicyComparison(m_opt, m_agg, m_opt.avg_aoi / m_agg.avg_aoi, sol, sol.evaluation,
                            evaluate_policy_exact(agg.table(config), model))


# -- shape grid ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShapeGridCell:
    harvest_prob: float
    cost_shape: str
    age_shape: str
    config: ScenarioConfig
    solution: PolicySolution

    @property
    def sources_used(self) -> list[int]:
        return sorted(int(a) for a in set(self.solution.policy.tolist()) if a != 0)


def run_shape_grid(config: ScenarioConfig, lambdas=(0.2, 0.6)) -> list[ShapeGridCell]:
    """Optimal policy maps for every (cost shape, age shape) pair and harvest rate."""
    cells = []
    base = config.replace(costs=None, reliabilities=None)
    for lam in lambdas:
        for cs, ag in itertools.product(SHAPES, SHAPES):
            cfg = base.replace(harvest_prob=float(lam), cost_shape=cs, age_shape=ag)
            cells.append(ShapeGridCell(float(lam), cs, ag, cfg, solve(cfg)))
    return cells


# -- harvest-rate sweep --------------------------------------------------


def sweep_lambda(config: ScenarioConfig, lambdas=DEFAULT_LAMBDAS, T=None, M=None, seed=None,
                 monte_carlo: bool = True) -> list[dict]:
    """Exact optimal vs aggressive performance per harvest rate.

    Exact columns come from the stationary evaluator; with ``monte_carlo``
    both rules are also simulated on common random numbers.
    """
    rows = []
    for lam in lambdas:
        if not 0.0 < lam <= 1.0:
            raise InvalidScenarioError(f"harvest rate {lam} outside (0, 1]")
        cfg = config.replace(harvest_prob=float(lam))
        model = build_transition_model(cfg)
        sol = relative_value_iteration(model, cfg.vi_epsilon, cfg.vi_max_iter)
        agg = aggressive_exact(cfg, model)
        row = {
            "fingerprint": cfg.fingerprint(),
            "lambda": float(lam),
            "cost_shape": cfg.cost_shape,
            "age_shape": cfg.age_shape,
            "optimal_aoi": sol.gain,
            "aggressive_aoi": agg.gain,
            "efficiency": sol.gain / agg.gain,
            "optimal_energy": sol.evaluation.avg_energy_per_slot,
            "aggressive_energy": agg.avg_energy_per_slot,
        }
        if monte_carlo:
            mo = simulate(TabularPolicy(sol), cfg, T, M, seed)
            ma = simulate(AggressivePolicy(cfg.source_costs), cfg, T, M, seed)
            row.update({
                "optimal_mc_aoi": mo.avg_aoi, "optimal_mc_stderr": mo.stderr_aoi,
                "optimal_mc_energy": mo.avg_energy_per_slot,
                "aggressive_mc_aoi": ma.avg_aoi, "aggressive_mc_stderr": ma.stderr_aoi,
                "aggressive_mc_energy": ma.avg_energy_per_slot,
                "efficiency_mc": mo.avg_aoi / ma.avg_aoi,
                "seed": mo.seed, "T": mo.horizon, "M": mo.replications,
            })
        rows.append(row)
    return rows


def sweep_lambda_shapes(config: ScenarioConfig, combos=None, lambdas=DEFAULT_LAMBDAS, **sweep_kw) -> list[dict]:
    """:func:`sweep_lambda` for several ``(cost_shape, age_shape)`` pairs.

    ``combos=None`` runs all nine pairs; costs and reliabilities are
    regenerated from each pair's shapes.
    """
    combos = list(itertools.product(SHAPES, SHAPES)) if combos is None else [tuple(c) for c in combos]
    if not combos:
        raise InvalidScenarioError("no shape combinations requested")
    base = config.replace(costs=None, reliabilities=None)
    rows = []
    for cs, ag in combos:
        rows += sweep_lambda(base.replace(cost_shape=cs, age_shape=ag), lambdas, **sweep_kw)
    return rows


LONG_FIELDS = ("fingerprint", "policy", "method", "avg_aoi", "stderr", "energy", "seed", "T", "M")


def long_rows(rows, keys=("lambda",)) -> list[dict]:
    """Reshape wide harvest-rate rows into one line per (policy, method).

    ``method`` is ``exact`` (stationary evaluator, no stderr or seed) or
    ``mc``; ``keys`` are the swept columns copied onto every line.
    """
    out = []
    for r in rows:
        head = {k: r[k] for k in ("fingerprint", *keys, "cost_shape", "age_shape") if k in r}
        for pol in ("optimal", "aggressive"):
            out.append({**head, "policy": pol, "method": "exact", "avg_aoi": r[f"{pol}_aoi"], "stderr": None,
                        "energy": r[f"{pol}_energy"], "seed": None, "T": None, "M": None,
                        "efficiency": r["efficiency"]})
            if f"{pol}_mc_aoi" in r:
                out.append({**head, "policy": pol, "method": "mc", "avg_aoi": r[f"{pol}_mc_aoi"],
                            "stderr": r[f"{pol}_mc_stderr"], "energy": r[f"{pol}_mc_energy"],
                            "seed": r["seed"], "T": r["T"], "M": r["M"], "efficiency": r["efficiency_mc"]})
    return out


# -- cost scaling --------------------------------------------------------


def scale_costs(costs, factor: float, battery_capacity: int, overflow: str = "error"):
    """Multiply costs, round half-up (floor 1) and repair to strictly increasing.

    Returns ``(scaled_costs, kept_indices)`` (0-based indices into ``costs``).
    With ``overflow="drop"`` sources whose scaled cost exceeds the battery are
    removed, since they could never be afforded; ``"error"`` rejects them.
    """
    if not factor > 0:
        raise InvalidScenarioError(f"scale factor must be positive, got {factor}")
    scaled = [max(1, round_half_up(factor * c)) for c in costs]
    for i in range(1, len(scaled)):
        if scaled[i] <= scaled[i - 1]:
            scaled[i] = scaled[i - 1] + 1
    kept = [i for i, c in enumerate(scaled) if c <= battery_capacity]
    if len(kept) < len(scaled):
        if overflow == "error":
            raise InvalidScenarioError(
                f"scaled cost {scaled[-1]} exceeds battery capacity {battery_capacity}")
        if overflow != "drop":
            raise ValueError(f"unknown overflow mode {overflow!r}")
        if not kept:
            raise InvalidScenarioError("no source remains affordable after scaling")
    return [scaled[i] for i in kept], kept


def sweep_cost_scale(config: ScenarioConfig, factor: float = 1.5, lambdas=DEFAULT_LAMBDAS,
                     overflow: str = "error", keep_reliabilities: bool = False, **sweep_kw) -> dict:
    """Harvest-rate sweeps for the base costs C and for ``factor * C``.

    By default the scaled system is rebuilt through the configured
    cost-to-reliability mapping (same ``age_shape`` and ``target_mean_p``);
    with ``keep_reliabilities`` every source keeps its original ``p`` and
    only its price changes.
    """
    costs, rel = config.source_costs, config.source_reliabilities
    scaled, kept = scale_costs(costs, factor, config.battery_capacity, overflow)
    base_cfg = config.with_sources(costs, rel)
    if keep_reliabilities:
        scaled_cfg = config.with_sources(scaled, [rel[i] for i in kept])
    else:
        scaled_cfg = config.with_sources(scaled)
    return {
        "factor": float(factor),
        "base_costs": list(costs),
        "scaled_costs": scaled,
        "dropped_sources": [i + 1 for i in range(len(costs)) if i not in kept],
        "scaled_reliabilities": list(scaled_cfg.source_reliabilities),
        "base": sweep_lambda(base_cfg, lambdas, **sweep_kw),
        "scaled": sweep_lambda(scaled_cfg, lambdas, **sweep_kw),
    }


# -- single source -------------------------------------------------------


def single_source_reliability(cost: int, age_shape: str, k: float = 0.1) -> float:
    return float(min(k * reliability_basis(age_shape, [cost])[0], 1.0))


def sweep_single_source(config: ScenarioConfig, costs=None, lambdas=(0.2, 0.4, 0.6, 0.8),
                        k: float = 0.1) -> list[dict]:
    """Optimal average AoI of a one-source system per (cost, harvest rate).

    Reliability follows the configured age shape with scale ``k``
    (``k = 0.1`` puts ``p = 0.1`` at ``c = 1`` for the linear shape).
    """
    if costs is None:
        costs = range(1, config.cost_max + 1)
    rows = []
    for c in costs:
        if not 1 <= c <= config.battery_capacity:
            raise InvalidScenarioError(f"single-source cost {c} outside [1, {config.battery_capacity}]")
        p = single_source_reliability(c, config.age_shape, k)
        for lam in lambdas:
            cfg = config.with_sources([c], [p]).replace(harvest_prob=float(lam))
            sol = solve(cfg)
            rows.append({"fingerprint": cfg.fingerprint(), "cost": int(c), "p": p, "lambda": float(lam),
                         "policy": "optimal", "method": "exact", "avg_aoi": sol.gain, "stderr": None,
                         "energy": sol.evaluation.avg_energy_per_slot, "seed": None})
    return rows


# -- network size --------------------------------------------------------


def halve(indices):
    """Keep half of the sources, spread evenly, always keeping both ends."""
    m = len(indices)
    keep = np.unique(np.floor(np.linspace(0, m - 1, max(m // 2, 2)) + 0.5).astype(int))
    return [indices[i] for i in keep]


def network_source_sets(config: ScenarioConfig, n_max: int = 16, sizes=(2, 4, 8, 12, 16)) -> dict:
    """Nested source sets for the network-size study.

    The ``n_max`` vector uses the configured cost shape over
    ``[cost_min, cost_max]`` and is calibrated once; smaller sets are
    obtained by repeated halving (ends kept) and the 12-source set removes
    four interior sources drawn with ``rng_seed``. Returns
    ``{n: (costs, reliabilities)}``.
    """
    costs = generate_cost_vector(config.cost_shape, n_max, config.cost_min, config.cost_max)
    rel = calibrate_reliability(config.age_shape, costs, config.target_mean_p).p
    sets = {}
    idx = list(range(n_max))
    while len(idx) >= 2:
        sets[len(idx)] = idx
        if len(idx) == 2:
            break
        idx = halve(idx)
    if n_max >= 6:
        rng = np.random.default_rng(config.rng_seed)
        drop = set(rng.choice(np.arange(1, n_max - 1), size=4, replace=False).tolist())
        sets[n_max - 4] = [i for i in range(n_max) if i not in drop]
    out = {}
    for n in sizes:
        if n not in sets:
            raise InvalidScenarioError(f"network size {n} is not derivable from the {n_max}-source vector")
        out[n] = ([costs[i] for i in sets[n]], [rel[i] for i in sets[n]])
    return out


def _size_cell(cfg: ScenarioConfig, policy: str):
    model = build_transition_model(cfg)
    if policy == "optimal":
        ev = relative_value_iteration(model, cfg.vi_epsilon, cfg.vi_max_iter).evaluation
    elif policy == "aggressive":
        ev = aggressive_exact(cfg, model)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return ev


def sweep_network_size(config: ScenarioConfig, sizes=(1, 2, 4, 8, 12, 16), lambdas=(0.2, 0.4, 0.6, 0.8),
                       policy: str = "optimal", n_max: int = 16) -> list[dict]:
    """Exact average AoI of ``policy`` per (network size, harvest rate).

    ``n = 1`` is the better of the two single-source systems built from the
    ends of the 2-source set.
    """
    multi = [n for n in sizes if n != 1]
    sets = network_source_sets(config, n_max, sorted(set(multi) | {2}))
    rows = []
    for lam in lambdas:
        for n in sizes:
            if n == 1:
                pair = sets[2]
                cands = []
                for c, p in zip(*pair):
                    cfg = config.with_sources([c], [p]).replace(harvest_prob=float(lam))
                    cands.append((_size_cell(cfg, policy).gain, cfg))
                gain, cfg = min(cands, key=lambda x: x[0])
                ev = _size_cell(cfg, policy)
            else:
                cfg = config.with_sources(*sets[n]).replace(harvest_prob=float(lam))
                ev = _size_cell(cfg, policy)
            rows.append({"fingerprint": cfg.fingerprint(), "n": n, "lambda": float(lam), "policy": policy,
                         "method": "exact", "avg_aoi": ev.gain, "stderr": None, "energy": ev.avg_energy_per_slot,
                         "seed": None, "costs": " ".join(map(str, cfg.source_costs))})
    return rows


# -- output --------------------------------------------------------------


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    names = list(rows[0])
    for r in rows[1:]:
        names += [k for k in r if k not in names]
    w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else "" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def write_rows(rows, path, fmt: str = "csv"):
    path = Path(path)
    if fmt == "json":
        _atomic_write(path, json.dumps(rows, indent=1, sort_keys=True) + "\n")
    else:
        _atomic_write(path, rows_to_csv(rows))
    return path


def policy_map_rows(solution: PolicySolution) -> list[dict]:
    pm = solution.policy_map
    return [{"battery": b, "aoi": d + 1, "action": int(pm[b, d])}
            for b in range(pm.shape[0]) for d in range(pm.shape[1])]


def write_policy_map(solution: PolicySolution, path, fmt: str = "csv"):
    return write_rows(policy_map_rows(solution), path, fmt)
