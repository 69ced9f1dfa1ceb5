"""Command-line entry point: ``aoidiv <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import experiments as ex
from .errors import ConfigError, InvalidScenarioError, NonConvergenceError
from .mdp import build_transition_model, dump_model_csv
from .policies import AggressivePolicy, AlwaysIdle, FixedSource, TabularPolicy
from .scenario import ScenarioConfig, config_from_mapping, load_config
from .simulator import simulate
from .solver import evaluate_policy_exact, relative_value_iteration

EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _resolve_config(args) -> ScenarioConfig:
    if args.config in (None, "default"):
        cfg = config_from_mapping({})
    else:
        cfg = load_config(args.config)
    if args.set:
        data = cfg.to_dict()
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(key, "--set expects key=value")
            data[key.strip()] = yaml.safe_load(value)
        if "costs" in {i.partition("=")[0].strip() for i in args.set} and data.get("costs") is not None:
            data["n_sources"] = len(data["costs"])
        cfg = config_from_mapping(data)
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    return cfg


def _rule(name: str, cfg: ScenarioConfig, solution=None):
    if name == "optimal":
        return TabularPolicy(solution, cfg.source_costs)
    if name == "aggressive":
        return AggressivePolicy(cfg.source_costs)
    if name == "idle":
        return AlwaysIdle()
    if name.startswith("source-"):
        return FixedSource(int(name.split("-", 1)[1]), cfg.source_costs)
    raise ConfigError("policy", f"unknown policy {name!r}")


def _out(args, stem, default_fmt="csv"):
    fmt = args.format or default_fmt
    return Path(args.out) / f"{stem}.{fmt}", fmt


def _write_json(obj, path):
    ex._atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def cmd_solve(args, cfg):
    sol = ex.solve(cfg)
    path, fmt = _out(args, "policy_map")
    ex.write_policy_map(sol, path, fmt)
    return f"solve: gain={sol.gain:.6f} iterations={sol.iterations} -> {path}"


def cmd_evaluate(args, cfg):
    model = build_transition_model(cfg)
    sol = relative_value_iteration(model, cfg.vi_epsilon, cfg.vi_max_iter) if args.policy == "optimal" else None
    rule = _rule(args.policy, cfg, sol)
    ev = evaluate_policy_exact(rule.table(cfg), model)
    row = {"fingerprint": cfg.fingerprint(), "policy": rule.name, "avg_aoi": ev.gain,
           "energy": ev.avg_energy_per_slot, "usage": [float(u) for u in ev.source_usage]}
    path, fmt = _out(args, "evaluation", "json")
    if fmt == "json":
        _write_json(row, path)
    else:
        ex.write_rows([{**row, "usage": " ".join(map(repr, row["usage"]))}], path)
    return f"evaluate: {rule.name} avg_aoi={ev.gain:.6f} energy={ev.avg_energy_per_slot:.6f} -> {path}"


def cmd_simulate(args, cfg):
    sol = ex.solve(cfg) if args.policy == "optimal" else None
    m = simulate(_rule(args.policy, cfg, sol), cfg, args.T, args.M)
    path, fmt = _out(args, "metrics", "json")
    if fmt == "json":
        _write_json(m.to_dict(), path)
    else:
        d = m.to_dict()
        d["usage"] = " ".join(map(str, d["usage"]))
        ex.write_rows([d], path)
    return f"simulate: {m.policy} avg_aoi={m.avg_aoi:.6f} stderr={m.stderr_aoi:.6f} -> {path}"


def cmd_compare(args, cfg):
    cmp = ex.compare_policies(cfg, args.T, args.M, independent_streams=args.independent_streams)
    path, fmt = _out(args, "comparison", "json")
    d = cmp.to_dict()
    if fmt == "json":
        _write_json(d, path)
    else:
        rows = [{"fingerprint": d["fingerprint"], **{k: v for k, v in d[p].items() if k != "usage"},
                 "efficiency": d["efficiency"]} for p in ("optimal", "aggressive")]
        ex.write_rows(rows, path)
    return f"compare: efficiency={cmp.efficiency:.6f} -> {path}"


def cmd_shape_grid(args, cfg):
    cells = ex.run_shape_grid(cfg, args.lambdas or (0.2, 0.6))
    fmt = args.format or "csv"
    index = []
    for c in cells:
        path = Path(args.out) / "shape_grid" / f"policy_lambda{c.harvest_prob:g}_{c.cost_shape}_{c.age_shape}.{fmt}"
        ex.write_policy_map(c.solution, path, fmt)
        index.append({"fingerprint": c.config.fingerprint(), "lambda": c.harvest_prob, "cost_shape": c.cost_shape,
                      "age_shape": c.age_shape, "optimal_aoi": c.solution.gain,
                      "sources_used": " ".join(map(str, c.sources_used)), "file": path.name})
    path = ex.write_rows(index, Path(args.out) / f"shape_grid.{fmt}", fmt)
    return f"shape-grid: {len(cells)} policy maps -> {path}"


def _shapes(text):
    if text == "all":
        return None
    combos = [tuple(item.split(":")) for item in text.split(",") if item.strip()]
    if any(len(c) != 2 for c in combos):
        raise argparse.ArgumentTypeError("expected COST:AGE pairs or 'all'")
    return combos


def cmd_sweep_lambda(args, cfg):
    lambdas = args.lambdas or ex.DEFAULT_LAMBDAS
    if args.shapes is False:
        rows = ex.sweep_lambda(cfg, lambdas, args.T, args.M, monte_carlo=not args.exact_only)
    else:
        rows = ex.sweep_lambda_shapes(cfg, args.shapes, lambdas, T=args.T, M=args.M,
                                      monte_carlo=not args.exact_only)
    path = ex.write_rows(ex.long_rows(rows), *_out(args, "sweep_lambda"))
    return f"sweep-lambda: {len(rows)} rows -> {path}"


def cmd_sweep_cost(args, cfg):
    res = ex.sweep_cost_scale(cfg, args.factor, args.lambdas or ex.DEFAULT_LAMBDAS, overflow=args.overflow,
                              keep_reliabilities=args.keep_reliabilities, T=args.T, M=args.M,
                              monte_carlo=not args.exact_only)
    rows = []
    for label, scale in (("base", 1.0), ("scaled", res["factor"])):
        rows += ex.long_rows([{"scale": scale, **r} for r in res[label]], keys=("scale", "lambda"))
    path = ex.write_rows(rows, *_out(args, "sweep_cost"))
    return (f"sweep-cost: factor={res['factor']:g} scaled costs={res['scaled_costs']} "
            f"dropped={res['dropped_sources']} -> {path}")


def cmd_sweep_single(args, cfg):
    rows = ex.sweep_single_source(cfg, args.costs, args.lambdas or (0.2, 0.4, 0.6, 0.8))
    path = ex.write_rows(rows, *_out(args, "sweep_single"))
    return f"sweep-single: {len(rows)} rows -> {path}"


def cmd_sweep_size(args, cfg):
    rows = []
    for pol in args.policies.split(","):
        rows += ex.sweep_network_size(cfg, args.sizes or (1, 2, 4, 8, 12, 16),
                                      args.lambdas or (0.2, 0.4, 0.6, 0.8), pol.strip())
    path = ex.write_rows(rows, *_out(args, "sweep_size"))
    return f"sweep-size: {len(rows)} rows -> {path}"


def cmd_dump_model(args, cfg):
    model = build_transition_model(cfg)
    path = Path(args.out) / "model.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    n = dump_model_csv(model, path)
    return f"dump-model: {n} transitions over {model.n_states} states -> {path}"


COMMANDS = {
    "solve": cmd_solve, "evaluate": cmd_evaluate, "simulate": cmd_simulate, "compare": cmd_compare,
    "shape-grid": cmd_shape_grid, "sweep-lambda": cmd_sweep_lambda, "sweep-cost": cmd_sweep_cost,
    "sweep-single": cmd_sweep_single, "sweep-size": cmd_sweep_size, "dump-model": cmd_dump_model,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML config file, or 'default'")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("-T", type=int, help="simulation horizon (default: sim_horizon)")
    common.add_argument("-M", type=int, help="replications (default: sim_replications)")
    common.add_argument("--lambdas", type=_floats, help="comma-separated harvest rates")

    parser = _Parser(prog="aoidiv", description="Plan and evaluate which source an energy-harvesting monitor queries each slot.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("evaluate", "simulate"):
            p.add_argument("--policy", default="optimal", help="optimal, aggressive, idle or source-K")
        if name == "compare":
            p.add_argument("--independent-streams", action="store_true")
        if name in ("sweep-lambda", "sweep-cost"):
            p.add_argument("--exact-only", action="store_true", help="skip Monte Carlo rows")
        if name == "sweep-lambda":
            p.add_argument("--shapes", type=_shapes, default=False,
                           help="COST:AGE pairs (comma-separated) or 'all'; default: the config's shapes")
        if name == "sweep-cost":
            p.add_argument("--factor", type=float, default=1.5)
            p.add_argument("--overflow", choices=("error", "drop"), default="error")
            p.add_argument("--keep-reliabilities", action="store_true")
        if name == "sweep-single":
            p.add_argument("--costs", type=_ints)
        if name == "sweep-size":
            p.add_argument("--sizes", type=_ints)
            p.add_argument("--policies", default="optimal,aggressive")
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        print(COMMANDS[args.command](args, cfg))
    except (ConfigError, InvalidScenarioError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
