"""Command-line front end: check properties, sweep a constant, evaluate
strategies.

    csgames check --model aloha2.csg --props aloha2.props --const D=4
    csgames sweep --model aloha2.csg --prop '<<usr1>> Pmax=? [ F ("sent1" & t<=D) ]' \
        --sweep D=0:8:1 --format csv --plot deadline.png
    csgames eval --model aloha2.csg --prop '...' --import-strategy s.json --runs 10000

Exit codes: 0 success, 1 property or certification failure, 2 input
error, 3 solver error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation
from .checker import check_property
from .csg import export_game, import_game, validate_csg
from .elaborator import elaborate, resolve_constants
from .errors import InputError, ParseError, SolverError
from .modlang import parse_model
from .proplang import parse_properties_file, parse_property, typecheck

EXIT_OK = 0
EXIT_PROPERTY_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_ERROR = 3


@dataclass
class RunConfig:
    model: str
    props: str | None = None
    inline_props: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    epsilon: float = 1e-6
    max_iters: int = 10**6
    export_strategy: str | None = None
    import_strategy: str | None = None
    export_game: str | None = None
    format: str = "text"
    sweep: tuple | None = None  # (name, values)
    plot: str | None = None
    seed: int = 0
    runs: int = 10_000
    threads: int = 1
    cert_eps: float = 1e-4
    timing: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InputError("epsilon must be positive")


def _add_common(parser):
    parser.add_argument("--model", required=True, help="model file (.csg or explicit .json)")
    parser.add_argument("--props", help="property file, one property per line")
    parser.add_argument(
        "--prop", action="append", default=[], help="inline property (repeatable)"
    )
    parser.add_argument(
        "--const",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="constant binding (repeatable)",
    )
    parser.add_argument("--epsilon", type=float, default=1e-6)
    parser.add_argument("--max-iters", type=int, default=10**6)
    parser.add_argument("--format", choices=["text", "json", "csv"], default="text")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--timing", action="store_true", help="include wall times in reports")
    parser.add_argument("--export-game", help="write the elaborated game as interchange JSON")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="csgames",
        description="Model checking and strategy synthesis for concurrent stochastic games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="check properties and synthesise strategies")
    _add_common(p_check)
    p_check.add_argument("--export-strategy", help="write synthesised strategies to this path")

    p_sweep = sub.add_parser("sweep", help="check one property over a constant grid")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--sweep", required=True, metavar="NAME=LO:HI:STEP", help="swept constant"
    )
    p_sweep.add_argument("--plot", help="render the sweep curves to this image file")

    p_eval = sub.add_parser("eval", help="evaluate and certify an imported strategy")
    _add_common(p_eval)
    p_eval.add_argument("--import-strategy", required=True)
    p_eval.add_argument("--runs", type=int, default=10_000, help="simulation runs")
    p_eval.add_argument(
        "--cert-eps", type=float, default=1e-4, help="certification tolerance"
    )
    return parser


def _parse_const_bindings(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise InputError(f"bad --const {item!r}, expected NAME=VALUE")
        name, value = item.split("=", 1)
        out[name.strip()] = value.strip()
    return out


def _parse_sweep(text):
    if "=" not in text or ":" not in text:
        raise InputError("sweep spec must look like NAME=LO:HI:STEP")
    name, grid = text.split("=", 1)
    parts = grid.split(":")
    if len(parts) != 3:
        raise InputError("sweep spec must look like NAME=LO:HI:STEP")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise InputError(f"bad sweep grid {grid!r}") from None
    if step <= 0 or not np.isfinite([lo, hi, step]).all():
        raise InputError("sweep ranges must be finite with a positive step")
    values = []
    v = lo
    while v <= hi + 1e-12:
        values.append(int(round(v)) if float(v).is_integer() else v)
        v += step
    return name.strip(), values


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        model=args.model,
        props=args.props,
        inline_props=list(args.prop),
        constants=_parse_const_bindings(args.const),
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        format=args.format,
        seed=args.seed,
        threads=args.threads,
        timing=args.timing,
        export_game=args.export_game,
    )
    if hasattr(args, "export_strategy"):
        cfg.export_strategy = args.export_strategy
    if getattr(args, "sweep", None):
        cfg.sweep = _parse_sweep(args.sweep)
        cfg.plot = args.plot
    if getattr(args, "import_strategy", None):
        cfg.import_strategy = args.import_strategy
        cfg.runs = args.runs
        cfg.cert_eps = args.cert_eps
    return cfg


def _load_model(cfg: RunConfig, bindings=None):
    path = Path(cfg.model)
    if not path.exists():
        raise InputError(f"model file {cfg.model!r} not found")
    text = path.read_text()
    bindings = cfg.constants if bindings is None else bindings
    if path.suffix == ".json":
        game = import_game(text)
        constants = {k: _parse_scalar(v) for k, v in bindings.items()}
    else:
        ast = parse_model(text)
        constants = resolve_constants(ast, bindings)
        game = elaborate(ast, bindings)
    problems = validate_csg(game)
    if problems:
        raise InputError("model failed validation:\n  " + "\n  ".join(problems))
    return game, constants


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except (TypeError, ValueError):
            continue
    if text in ("true", "false"):
        return text == "true"
    return text


def _load_properties(cfg: RunConfig, game, constants):
    entries = []
    if cfg.props:
        path = Path(cfg.props)
        if not path.exists():
            raise InputError(f"property file {cfg.props!r} not found")
        entries.extend(parse_properties_file(path.read_text()))
    for text in cfg.inline_props:
        entries.append((text, parse_property(text)))
    if not entries:
        raise InputError("no properties given (use --props or --prop)")
    for source, ast in entries:
        diags = typecheck(ast, game, constants)
        if diags:
            raise InputError(f"property {source!r}:\n  " + "\n  ".join(diags))
    return entries


def _json_value(value):
    if isinstance(value, bool):
        return value
    if value is None:
        return None
    if isinstance(value, (int, float, np.floating)):
        v = float(value)
        if np.isfinite(v):
            return v
        return "inf" if v > 0 else "-inf"
    return str(value)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    v = float(value)
    if np.isfinite(v):
        return format(v, ".10g")
    return "inf" if v > 0 else "-inf"


# --- check -----------------------------------------------------------------------


def cmd_check(cfg: RunConfig) -> int:
    game, constants = _load_model(cfg)
    if cfg.export_game:
        Path(cfg.export_game).write_text(export_game(game))
    entries = _load_properties(cfg, game, constants)

    reports = []
    failures = 0
    for idx, (source, formula) in enumerate(entries):
        t0 = time.perf_counter()
        result = check_property(
            game, formula, constants, epsilon=cfg.epsilon, max_iters=cfg.max_iters
        )
        wall = time.perf_counter() - t0
        report = {
            "property": source,
            "value": _json_value(result.value),
            "iterations": result.iterations,
            "residual": _json_value(result.residual),
        }
        if result.value is False:
            failures += 1
        if isinstance(result.value, bool) and result.numeric_value is not None:
            report["numeric_value"] = _json_value(result.numeric_value)
        if cfg.timing:
            report["wall_time"] = round(wall, 6)
        reports.append(report)
        if cfg.export_strategy and result.strategy is not None:
            path = Path(cfg.export_strategy)
            if len(entries) > 1:
                path = path.with_name(f"{path.stem}.{idx}{path.suffix}")
            path.write_text(
                evaluation.export_strategy(result.strategy, result.coalition_game)
            )

    if cfg.format == "json":
        print(json.dumps({"model": cfg.model, "results": reports}, indent=2))
    elif cfg.format == "csv":
        print("property,value")
        for r in reports:
            print(f"\"{r['property']}\",{_format_value(r['value'])}")
    else:
        for r in reports:
            suffix = f"  [{r['wall_time']}s]" if cfg.timing else ""
            print(f"{r['property']}")
            print(f"  = {_format_value(r['value'])}{suffix}")
    return EXIT_PROPERTY_FAILED if failures else EXIT_OK


# --- sweep -----------------------------------------------------------------------


def cmd_sweep(cfg: RunConfig) -> int:
    name, values = cfg.sweep
    if cfg.props:
        raise InputError("sweeps take inline --prop properties")
    if not cfg.inline_props:
        raise InputError("no properties given (use --prop)")

    rows = []  # (constant value, property, value string, error)
    series: dict[str, list] = {p: [] for p in cfg.inline_props}
    for v in values:
        bindings = dict(cfg.constants)
        bindings[name] = str(v)
        try:
            game, constants = _load_model(cfg, bindings)
            entries = _load_properties(cfg, game, constants)
        except (InputError, ParseError) as exc:
            for prop in cfg.inline_props:
                rows.append((v, prop, None, str(exc).replace("\n", " ")))
            continue
        for source, formula in entries:
            try:
                result = check_property(
                    game, formula, constants, epsilon=cfg.epsilon, max_iters=cfg.max_iters
                )
                rows.append((v, source, result.value, None))
                series[source].append((v, result.value))
            except (InputError, SolverError) as exc:
                rows.append((v, source, None, str(exc).replace("\n", " ")))

    lines = ["constant,property,value"]
    for v, prop, value, error in rows:
        base = f"{v},\"{prop}\",{_format_value(value)}"
        lines.append(base + (f",\"{error}\"" if error else ""))
    output = "\n".join(lines)
    print(output)

    if cfg.plot:
        _render_sweep_plot(cfg.plot, name, series)
    return EXIT_OK


def _render_sweep_plot(path, constant_name, series):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for prop, points in series.items():
        numeric = [(x, y) for x, y in points if not isinstance(y, bool) and y is not None]
        if not numeric:
            continue
        xs = [x for x, _ in numeric]
        ys = [float(y) for _, y in numeric]
        label = prop if len(prop) <= 48 else prop[:45] + "..."
        ax.plot(xs, ys, marker="o", markersize=3.5, label=label)
    ax.set_xlabel(constant_name)
    ax.set_ylabel("value")
    ax.grid(True, linestyle="--", alpha=0.5)
    if series:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# --- eval ------------------------------------------------------------------------


def cmd_eval(cfg: RunConfig) -> int:
    if cfg.runs < 1:
        raise InputError("--runs must be at least 1")
    game, constants = _load_model(cfg)
    entries = _load_properties(cfg, game, constants)
    if len(entries) != 1:
        raise InputError("eval takes exactly one property")
    source, formula = entries[0]

    # Rebuild the coalition game the strategy refers to (no solving).
    from .csg import CoalitionPartition, build_coalition_game
    from .proplang import EquilibriumOp, ZeroSumProb, ZeroSumReward

    if isinstance(formula, (ZeroSumProb, ZeroSumReward)):
        gameC, _ = _two_coalition(game, formula.coalition)
    elif isinstance(formula, EquilibriumOp):
        gameC = build_coalition_game(game, CoalitionPartition(formula.coalitions))
    else:
        raise InputError("eval needs a game-operator property")

    text = Path(cfg.import_strategy).read_text()
    strategy = evaluation.import_strategy(text, gameC)
    flag_targets = evaluation.flag_targets_for(gameC, formula, constants)
    objectives = evaluation.objectives_for(gameC, formula, constants)
    chain = evaluation.induce_chain(gameC, strategy, flag_targets)

    per_coalition = []
    for i, spec in enumerate(objectives):
        exact = float(evaluation.profile_objective_values(chain, spec, i)[0])
        sim = evaluation.simulate(
            gameC,
            strategy,
            _simulation_objective(gameC, spec, i),
            runs=cfg.runs,
            seed=cfg.seed,
            flag_targets=flag_targets,
            jobs=cfg.threads,
        )
        per_coalition.append((exact, sim))

    report = evaluation.best_response_check(
        gameC, strategy, objectives, eps=cfg.cert_eps, flag_targets=flag_targets
    )

    doc = {
        "property": source,
        "coalitions": list(gameC.players),
        "exact": [_json_value(e) for e, _ in per_coalition],
        "simulation": [
            {
                "estimate": _json_value(s.estimate),
                "half_width": _json_value(s.half_width),
                "runs": s.runs,
                "seed": s.seed,
                "truncated": s.truncated,
            }
            for _, s in per_coalition
        ],
        "certified": report.certified,
        "max_gains": [_json_value(g) for g in report.gains],
        "epsilon": cfg.cert_eps,
    }
    if cfg.format == "json":
        print(json.dumps(doc, indent=2))
    else:
        print(f"{source}")
        for i, (exact, sim) in enumerate(per_coalition):
            print(
                f"  {gameC.players[i]}: exact {_format_value(exact)}, "
                f"simulated {_format_value(sim.estimate)} ± {_format_value(sim.half_width)} "
                f"({sim.runs} runs, seed {sim.seed})"
            )
        if report.certified:
            print(f"  verdict: epsilon-equilibrium (epsilon <= {cfg.cert_eps:g})")
        else:
            worst = max(report.gains)
            print(f"  verdict: violated (best deviation gain {worst:.6g})")
    return EXIT_OK if report.certified else EXIT_PROPERTY_FAILED


def _two_coalition(game, coalition):
    from .csg import CoalitionPartition, build_coalition_game

    partition = CoalitionPartition((tuple(coalition),))
    return build_coalition_game(game, partition), partition


def _simulation_objective(gameC, spec, coalition):
    kind, params, target_states = spec[0], spec[1], spec[2]

    def predicate(s, m):
        if isinstance(m, tuple) and len(m) > coalition:
            return bool(m[coalition]) or s in target_states
        return s in target_states

    if kind in ("prob_reach", "prob_next"):
        bound = params[1] if kind == "prob_reach" and params else None
        if kind == "prob_next":
            bound = 1
        return ("reach", predicate, bound)
    if kind == "reward_reach":
        return ("reach_reward", params[0], predicate)
    if kind in ("reward_cumulative", "reward_instant"):
        # bounded accumulations have no reach target; cap at the horizon
        reward, k = params
        return ("reach_reward", reward, lambda s, m: isinstance(m, int) and m == 0)
    raise InputError(f"unsupported objective for simulation: {kind}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_eval(cfg)
    except (ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ERROR


if __name__ == "__main__":
    sys.exit(main())
