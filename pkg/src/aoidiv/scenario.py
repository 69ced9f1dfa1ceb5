"""Scenario descriptions: cost vectors, reliability calibration and age pmfs.

A :class:`ScenarioConfig` is a frozen description of one monitoring system.
Its derived quantities (source costs, reliabilities and truncated geometric
age pmfs) are materialized on construction, so an instance that exists is
always valid.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import ConfigError, InvalidScenarioError

log = logging.getLogger(__name__)

SHAPES = ("superlinear", "linear", "sublinear")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_shape(shape, name="shape"):
    if shape not in SHAPES:
        raise InvalidScenarioError(f"{name} must be one of {SHAPES}, got {shape!r}")


def repair_increasing(values: Sequence[int], lo: int, hi: int) -> list[int]:
    """Make an integer sequence strictly increasing inside ``[lo, hi]``.

    Duplicates are bumped upward first; anything pushed past ``hi`` is then
    resolved by bumping predecessors downward.
    """
    out = [min(max(int(v), lo), hi) for v in values]
    if len(out) > hi - lo + 1:
        raise InvalidScenarioError(
            f"cannot fit {len(out)} strictly increasing integers in [{lo}, {hi}]")
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + 1
    if out and out[-1] > hi:
        out[-1] = hi
        for i in range(len(out) - 2, -1, -1):
            if out[i] >= out[i + 1]:
                out[i] = out[i + 1] - 1
    return out


def generate_cost_vector(shape: str, n: int, c_min: int, c_max: int) -> list[int]:
    """Integer source costs ordered by rank.

    ``linear`` interpolates affinely in the normalized rank ``x = (i-1)/(n-1)``,
    ``superlinear`` uses ``x**2`` and ``sublinear`` uses ``sqrt(x)``. Values are
    rounded half-up and repaired to be strictly increasing.

    >>> generate_cost_vector("linear", 8, 1, 19)
    [1, 4, 6, 9, 11, 14, 16, 19]
    """
    _check_shape(shape)
    if n < 1 or c_min < 1 or c_max < c_min:
        raise InvalidScenarioError(
            f"need n >= 1 and 1 <= c_min <= c_max, got n={n}, c_min={c_min}, c_max={c_max}")
    if n > c_max - c_min + 1:
        raise InvalidScenarioError(
            f"{n} strictly increasing integer costs do not fit in [{c_min}, {c_max}]")
    if n == 1:
        return [c_min]
    curve = {"linear": lambda x: x, "superlinear": lambda x: x * x, "sublinear": math.sqrt}[shape]
    raw = [round_half_up(c_min + (c_max - c_min) * curve(i / (n - 1))) for i in range(n)]
    raw[0], raw[-1] = c_min, c_max
    return repair_increasing(raw, c_min, c_max)


def reliability_basis(shape: str, costs) -> np.ndarray:
    """Unscaled reliability ``f(c)`` such that ``p = k * f(c)``."""
    _check_shape(shape)
    c = np.asarray(costs, dtype=float)
    if shape == "sublinear":
        return c ** 2
    if shape == "linear":
        return c.copy()
    # log2(1 + c) instead of log2(c): keeps the c = 1 source usable
    return np.log2(1.0 + c)


@dataclass(frozen=True)
class CalibrationResult:
    shape: str
    k: float
    achieved_mean_p: float
    clamped_indices: frozenset
    p: tuple

    @property
    def all_clamped(self) -> bool:
        return len(self.clamped_indices) == len(self.p)


def calibrate_reliability(shape: str, costs, target_mean_p: float) -> CalibrationResult:
    """Find the scale ``k`` whose clamped reliabilities average to the target.

    The mean of ``min(k * f(c_i), 1)`` is continuous and non-decreasing in
    ``k``. Bisection locates the set of clamped sources; ``k`` is then solved
    in closed form on that set, which removes the bisection error.
    """
    _check_shape(shape)
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0 or not np.all(np.isfinite(costs)) or np.any(costs < 1):
        raise InvalidScenarioError(f"costs must be finite and >= 1, got {costs.tolist()}")
    if not (math.isfinite(target_mean_p) and 0.0 < target_mean_p <= 1.0):
        raise InvalidScenarioError(f"target_mean_p must lie in (0, 1], got {target_mean_p}")

    base = reliability_basis(shape, costs)
    n = base.size

    def mean_p(k):
        return float(np.minimum(k * base, 1.0).mean())

    k_hi = 1.0 / base.min()
    if target_mean_p >= 1.0:
        k = k_hi
    else:
        lo, hi = 0.0, k_hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mean_p(mid) < target_mean_p:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        k = 0.5 * (lo + hi)
        clamped = k * base >= 1.0
        free = ~clamped
        if free.any():
            k_exact = (target_mean_p * n - clamped.sum()) / base[free].sum()
            if abs(mean_p(k_exact) - target_mean_p) <= abs(mean_p(k) - target_mean_p):
                k = float(k_exact)

    p = np.minimum(k * base, 1.0)
    clamped_idx = frozenset(int(i) + 1 for i in np.flatnonzero(k * base >= 1.0))
    result = CalibrationResult(shape, float(k), float(p.mean()), clamped_idx, tuple(float(x) for x in p))
    if result.all_clamped:
        log.warning("every reliability clamped to 1 (target_mean_p=%s)", target_mean_p)
    return result


def truncated_geometric_pmf(p: float, alpha: int = 1, beta: int = 20) -> np.ndarray:
    """Age pmf over ``alpha..beta``; entry ``j - alpha`` is ``Pr(age = j)``.

    Ages below ``beta`` follow the geometric law ``(1-p)**(j-1) * p`` and the
    last entry holds the remaining tail mass.
    """
    if not (0.0 < p <= 1.0):
        raise InvalidScenarioError(f"reliability p must lie in (0, 1], got {p}")
    if alpha != 1:
        raise InvalidScenarioError(f"only age_min = 1 is supported, got {alpha}")
    if beta < 2:
        raise InvalidScenarioError(f"age_max must be >= 2, got {beta}")
    j = np.arange(1, beta)
    head = (1.0 - p) ** (j - 1) * p
    tail = max(1.0 - head.sum(), 0.0)
    pmf = np.append(head, tail)
    return pmf / pmf.sum()


@dataclass(frozen=True)
class SourceSpec:
    index: int
    cost: int
    reliability: float
    age_pmf: np.ndarray = field(repr=False, compare=False)

    @property
    def age_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.age_pmf)
        cdf[-1] = 1.0
        return cdf


# (name, default) in file order; also the set of keys accepted by load_config
PARAMETERS = (
    ("battery_capacity", 20),
    ("harvest_amount", 3),
    ("harvest_prob", 0.2),
    ("age_min", 1),
    ("age_max", 20),
    ("aoi_cap", 30),
    ("n_sources", 8),
    ("cost_min", 1),
    ("cost_max", 19),
    ("cost_shape", "linear"),
    ("age_shape", "linear"),
    ("target_mean_p", 0.5),
    ("costs", None),
    ("reliabilities", None),
    ("infeasible_action", "mask"),
    ("vi_epsilon", 1e-6),
    ("vi_max_iter", 10**6),
    ("sim_horizon", 5000),
    ("sim_replications", 1000),
    ("rng_seed", 0),
)


def _is_int(x):
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_real(x):
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


@dataclass(frozen=True)
class ScenarioConfig:
    """One monitoring system plus solver and simulation settings.

    ``costs`` and ``reliabilities`` may be given verbatim; otherwise they are
    generated from ``cost_shape`` over ``[cost_min, cost_max]`` and calibrated
    from ``age_shape`` to ``target_mean_p``. Defaults reproduce the standard
    8-source system (B=20, e=3, ages in [1, 20], AoI cap 30).
    """

    battery_capacity: int = 20
    harvest_amount: int = 3
    harvest_prob: float = 0.2
    age_min: int = 1
    age_max: int = 20
    aoi_cap: int = 30
    n_sources: int | None = None  # 8, or len(costs) when costs are given
    cost_min: int = 1
    cost_max: int = 19
    cost_shape: str = "linear"
    age_shape: str = "linear"
    target_mean_p: float = 0.5
    costs: tuple | None = None
    reliabilities: tuple | None = None
    infeasible_action: str = "mask"
    vi_epsilon: float = 1e-6
    vi_max_iter: int = 10**6
    sim_horizon: int = 5000
    sim_replications: int = 1000
    rng_seed: int = 0

    sources: tuple = field(init=False, repr=False, compare=False)
    calibration: CalibrationResult | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.costs is not None:
            object.__setattr__(self, "costs", tuple(self.costs))
        if self.reliabilities is not None:
            object.__setattr__(self, "reliabilities", tuple(float(p) for p in self.reliabilities))
        if self.n_sources is None:
            object.__setattr__(self, "n_sources", 8 if self.costs is None else len(self.costs))
        self._validate_scalars()
        costs = self._resolve_costs()
        calibration = None
        if self.reliabilities is not None:
            if len(self.reliabilities) != len(costs):
                raise ConfigError("reliabilities", f"expected {len(costs)} values, got {len(self.reliabilities)}")
            for p in self.reliabilities:
                if not (_is_real(p) and 0.0 < p <= 1.0):
                    raise ConfigError("reliabilities", f"every value must lie in (0, 1], got {p}")
            ps = self.reliabilities
        else:
            calibration = calibrate_reliability(self.age_shape, costs, self.target_mean_p)
            ps = calibration.p
        sources = tuple(
            SourceSpec(i + 1, int(c), float(p), truncated_geometric_pmf(p, self.age_min, self.age_max))
            for i, (c, p) in enumerate(zip(costs, ps)))
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "calibration", calibration)

    def _validate_scalars(self):
        def need(name, ok, what):
            if not ok:
                raise ConfigError(name, f"{what}, got {getattr(self, name)!r}")

        need("battery_capacity", _is_int(self.battery_capacity) and self.battery_capacity >= 0, "must be a non-negative integer")
        need("harvest_amount", _is_int(self.harvest_amount) and self.harvest_amount >= 1, "must be a positive integer")
        need("harvest_prob", _is_real(self.harvest_prob) and 0.0 <= self.harvest_prob <= 1.0, "must be a probability in [0, 1]")
        need("age_min", _is_int(self.age_min) and self.age_min == 1, "only age_min = 1 is supported")
        need("age_max", _is_int(self.age_max) and self.age_max > self.age_min, "must be an integer > age_min")
        need("aoi_cap", _is_int(self.aoi_cap) and self.aoi_cap >= self.age_max, "must be an integer >= age_max")
        need("n_sources", _is_int(self.n_sources) and self.n_sources >= 1, "must be a positive integer")
        need("cost_min", _is_int(self.cost_min) and self.cost_min >= 1, "must be an integer >= 1")
        need("cost_max", _is_int(self.cost_max) and self.cost_max >= self.cost_min, "must be an integer >= cost_min")
        need("cost_shape", self.cost_shape in SHAPES, f"must be one of {SHAPES}")
        need("age_shape", self.age_shape in SHAPES, f"must be one of {SHAPES}")
        need("target_mean_p", _is_real(self.target_mean_p) and 0.0 < self.target_mean_p <= 1.0, "must lie in (0, 1]")
        need("infeasible_action", self.infeasible_action in ("mask", "penalty"), "must be 'mask' or 'penalty'")
        need("vi_epsilon", _is_real(self.vi_epsilon) and math.isfinite(self.vi_epsilon) and self.vi_epsilon > 0, "must be a positive real")
        need("vi_max_iter", _is_int(self.vi_max_iter) and self.vi_max_iter >= 1, "must be a positive integer")
        need("sim_horizon", _is_int(self.sim_horizon) and self.sim_horizon >= 1, "must be a positive integer")
        need("sim_replications", _is_int(self.sim_replications) and self.sim_replications >= 1, "must be a positive integer")
        need("rng_seed", _is_int(self.rng_seed) and 0 <= self.rng_seed < 2**64, "must be a 64-bit unsigned integer")

    def _resolve_costs(self):
        if self.costs is None:
            if self.cost_max > self.battery_capacity:
                raise ConfigError("cost_max", f"exceeds battery_capacity={self.battery_capacity}")
            try:
                return generate_cost_vector(self.cost_shape, self.n_sources, self.cost_min, self.cost_max)
            except InvalidScenarioError as exc:
                raise ConfigError("n_sources", str(exc)) from None
        costs = self.costs
        if len(costs) != self.n_sources:
            raise ConfigError("costs", f"length {len(costs)} does not match n_sources={self.n_sources}")
        if not all(_is_int(c) for c in costs):
            raise ConfigError("costs", "must be integers")
        if any(b <= a for a, b in zip(costs, costs[1:])):
            raise ConfigError("costs", f"must be strictly increasing, got {list(costs)}")
        if costs[0] < 1 or costs[-1] > self.battery_capacity:
            raise ConfigError("costs", f"must lie in [1, battery_capacity={self.battery_capacity}]")
        return [int(c) for c in costs]

    # -- convenience -----------------------------------------------------

    @property
    def source_costs(self) -> tuple:
        return tuple(s.cost for s in self.sources)

    @property
    def source_reliabilities(self) -> tuple:
        return tuple(s.reliability for s in self.sources)

    @property
    def n_states(self) -> int:
        return (self.battery_capacity + 1) * self.aoi_cap

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_sources(self, costs, reliabilities=None) -> "ScenarioConfig":
        """Copy with a verbatim source set (reliabilities recalibrated if omitted)."""
        return self.replace(costs=tuple(int(c) for c in costs), n_sources=len(costs),
                            reliabilities=None if reliabilities is None else tuple(reliabilities))

    def to_dict(self) -> dict:
        out = {}
        for name, _ in PARAMETERS:
            v = getattr(self, name)
            out[name] = list(v) if isinstance(v, tuple) else v
        return out

    def resolved_dict(self) -> dict:
        """Parameters plus the materialized source set."""
        d = self.to_dict()
        d["costs"] = list(self.source_costs)
        d["reliabilities"] = list(self.source_reliabilities)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.resolved_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_scenario(**overrides) -> ScenarioConfig:
    return ScenarioConfig(**overrides)


def config_from_mapping(mapping) -> ScenarioConfig:
    mapping = dict(mapping or {})
    known = {name for name, _ in PARAMETERS}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    # YAML 1.1 reads exponent floats without a dot ("1e-6") as strings
    for name, default in PARAMETERS:
        if isinstance(default, float) and isinstance(mapping.get(name), str):
            try:
                mapping[name] = float(mapping[name])
            except ValueError:
                pass
    for key in ("costs", "reliabilities"):
        if mapping.get(key) is not None:
            if not isinstance(mapping[key], (list, tuple)):
                raise ConfigError(key, "must be a list")
            mapping[key] = tuple(mapping[key])
    if mapping.get("costs") is not None and "n_sources" not in mapping:
        mapping["n_sources"] = len(mapping["costs"])
    try:
        return ScenarioConfig(**mapping)
    except ConfigError:
        raise
    except InvalidScenarioError as exc:
        raise ConfigError("sources", str(exc)) from None


def load_config(path) -> ScenarioConfig:
    """Read a flat ``key: value`` YAML file; missing keys take the defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("path", f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("path", f"{path} must hold a mapping of keys to values")
    return config_from_mapping(data)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
