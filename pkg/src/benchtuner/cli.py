"""Command-line interface.

Four commands: tune (run the search loop), generate (emit a dataset for
a fixed configuration), evaluate (score a dataset against a target), and
report (fold evaluation results and run logs into CSV/JSON tables plus
figures). Options come from a JSON config file; double-dash flags with
the same names override individual fields.

Exit codes: 0 success, 2 configuration problem, 3 backend failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gateway as gw
from .envs import env_names, get_env
from .metrics import UnknownLevel, level_of
from .paramspace import UnprojectableConfig, validate
from .search import CorruptLog, new_run, run_evaluation, run_search
from .targets import BackendError, NoSolutionFound, evaluate, make_target
from .util import canonical_json

_BACKEND_ERRORS = (gw.AuthMissing, gw.RateLimited, gw.TransportError,
                   gw.MalformedResponse, gw.ReplayMiss, BackendError,
                   NoSolutionFound)


class ConfigError(Exception):
    """Unusable run configuration."""


def _load_json(path, *, kind: str):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read {kind} file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {kind} file {path}: {err}") from err


_OVERRIDE_FIELDS = ("env", "level", "rho", "I", "n_s", "eval_size", "seeds",
                    "seed", "out_dir")


def _merged_config(args) -> dict:
    config = _load_json(args.config, kind="config")
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object")
    overrides = {name: getattr(args, name, None) for name in _OVERRIDE_FIELDS}
    if overrides.get("level") is not None and overrides.get("rho") is not None:
        raise ConfigError("pass either --level or --rho, not both")
    # an explicit flag replaces the file's choice of level vs rho
    if overrides.get("level") is not None:
        config.pop("rho", None)
    if overrides.get("rho") is not None:
        config.pop("level", None)
    for name, value in overrides.items():
        if value is not None:
            config[name] = value
    return config


def _resolve_rho(config) -> tuple[float, str | None]:
    has_level = config.get("level") is not None
    has_rho = config.get("rho") is not None
    if has_level == has_rho:
        raise ConfigError("config needs exactly one of 'level' or 'rho'")
    if has_level:
        level = level_of(str(config["level"]))
        return level.rho, level.name
    rho = float(config["rho"])
    if not 0.0 < rho < 1.0:
        raise ConfigError("rho must lie strictly between 0 and 1")
    return rho, None


def _get_env(config):
    name = config.get("env")
    if not name:
        raise ConfigError(f"config needs 'env' (one of: {', '.join(env_names())})")
    try:
        return get_env(str(name))
    except KeyError as err:
        raise ConfigError(str(err)) from err


def _needs_gateway(config) -> bool:
    designer = config.get("designer") or {}
    target = config.get("target") or {}
    return designer.get("strategy") == "llm" or target.get("backend") == "llm"


def _make_gateway(config):
    section = config.get("gateway") or {}
    return gw.make_gateway(mode=section.get("mode", "live"),
                           store_path=section.get("store"),
                           base_url=section.get("base_url"),
                           api_key=section.get("api_key"))


def _target_spec(config) -> dict:
    target = config.get("target")
    if not isinstance(target, dict) or "backend" not in target:
        raise ConfigError("config needs a 'target' object with a 'backend'")
    return target


def cmd_tune(args) -> int:
    config = _merged_config(args)
    env = _get_env(config)
    rho, level = _resolve_rho(config)
    designer_spec = config.get("designer")
    if not isinstance(designer_spec, dict) or "strategy" not in designer_spec:
        raise ConfigError("config needs a 'designer' object with a 'strategy'")
    gateway = _make_gateway(config) if _needs_gateway(config) else None
    out_dir = Path(config.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    run = new_run(env.name, designer_spec, _target_spec(config), rho,
                  iterations=int(config.get("I", 10)),
                  rollout_size=config.get("n_s"),
                  seed=int(config.get("seed", 0)))
    log_path = out_dir / "run_log.jsonl"
    if log_path.exists():
        log_path.unlink()  # tune always starts fresh; resume is a library op
    run = run_search(run, gateway=gateway, log_path=log_path)

    best = {"env": env.name, "level": level, "rho": rho,
            "best_index": run.best_index,
            "best_gap": None if run.best_index is None else run.best_gap,
            "config": run.best_config()}
    best_path = out_dir / "best_config.json"
    best_path.write_text(canonical_json(best) + "\n", encoding="utf-8")
    if run.best_index is None:
        print(f"no iteration succeeded; see {log_path}")
    else:
        print(f"best iteration {run.best_index} gap {run.best_gap:.4f}; "
              f"wrote {best_path} and {log_path}")
    return 0


def cmd_generate(args) -> int:
    config = _merged_config(args)
    env = _get_env(config)
    params = _load_json(args.params, kind="params")
    if not isinstance(params, dict):
        raise ConfigError("params file must hold a JSON object")
    violations = validate(env.space, params)
    if violations:
        details = "; ".join(f"{v.param}: {v.rule} ({v.detail})"
                            for v in violations)
        raise ConfigError(f"params out of domain: {details}")
    if args.n < 0:
        raise ConfigError("n must be non-negative")
    seed = int(config.get("seed", 0))
    problems = env.generate_dataset(params, args.n, seed)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        for problem in problems:
            handle.write(canonical_json(env.problem_to_dict(problem)) + "\n")
    print(f"wrote {len(problems)} problems to {out_path}")
    return 0


def cmd_evaluate(args) -> int:
    config = _merged_config(args)
    env = _get_env(config)
    rho, level = _resolve_rho(config)
    gateway = _make_gateway(config) if _needs_gateway(config) else None
    target = make_target(_target_spec(config), env=env, gateway=gateway)

    params = None
    if args.params is not None:
        params = _load_json(args.params, kind="params")
    problems = []
    with open(args.dataset, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                problems.append(env.problem_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise ConfigError(
                    f"{args.dataset}:{number}: bad problem record: {err}") from err
    if not problems:
        raise ConfigError(f"dataset {args.dataset} holds no problems")

    result = evaluate(target, problems, config=params)
    payload = {"level": level, "rho": rho, "rho_hat": result.rho_hat,
               "n": result.n,
               "per_item": [dict(item) for item in result.per_item]}
    Path(args.out).write_text(canonical_json(payload) + "\n", encoding="utf-8")
    print(f"rho_hat {result.rho_hat:.4f} over {result.n} problems; "
          f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    if not args.eval and not args.log:
        raise ConfigError("report needs at least one --eval or --log input")
    records = []
    for path in args.eval:
        record = _load_json(path, kind="evaluation")
        if not isinstance(record, dict):
            raise ConfigError(f"evaluation file {path} must hold a JSON object")
        records.append(record)

    from .reporting import write_report  # defer matplotlib import
    try:
        rows, warnings = write_report(records, args.out_dir,
                                      log_paths=list(args.log))
    except (ValueError, CorruptLog) as err:
        raise ConfigError(str(err)) from err
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    wrote = ["report.csv", "report.json"]
    if rows:
        wrote.append("gap_by_level.png")
    if args.log:
        wrote.append("convergence.png")
    print(f"wrote {', '.join(wrote)} to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="benchtuner",
        description="Tune benchmark generator parameters to a target "
                    "difficulty and evaluate the result.")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_overrides(sub):
        sub.add_argument("--env", help="environment id")
        sub.add_argument("--level", help="difficulty name")
        sub.add_argument("--rho", type=float, help="explicit target rate")
        sub.add_argument("--I", type=int, help="search iterations")
        sub.add_argument("--n_s", type=int, help="rollout size per iteration")
        sub.add_argument("--eval_size", type=int, help="evaluation dataset size")
        sub.add_argument("--seeds", type=_seed_list,
                         help="comma-separated evaluation seeds")
        sub.add_argument("--seed", type=int, help="run seed")
        sub.add_argument("--out_dir", help="output directory")

    tune = commands.add_parser("tune", help="run the parameter search")
    tune.add_argument("--config", required=True, help="JSON run config")
    add_overrides(tune)
    tune.set_defaults(func=cmd_tune)

    generate = commands.add_parser("generate",
                                   help="emit a dataset for fixed params")
    generate.add_argument("--config", required=True, help="JSON run config")
    generate.add_argument("--params", required=True,
                          help="JSON parameter configuration")
    generate.add_argument("--n", required=True, type=int,
                          help="number of problems")
    generate.add_argument("--out", required=True, help="output JSON-lines path")
    add_overrides(generate)
    generate.set_defaults(func=cmd_generate)

    evaluate_cmd = commands.add_parser("evaluate",
                                       help="score a dataset against a target")
    evaluate_cmd.add_argument("--config", required=True, help="JSON run config")
    evaluate_cmd.add_argument("--dataset", required=True,
                              help="JSON-lines dataset path")
    evaluate_cmd.add_argument("--params", help="generating params (JSON), "
                                               "needed by the synthetic backend")
    evaluate_cmd.add_argument("--out", required=True, help="output JSON path")
    add_overrides(evaluate_cmd)
    evaluate_cmd.set_defaults(func=cmd_evaluate)

    report = commands.add_parser("report",
                                 help="aggregate results into tables and figures")
    report.add_argument("--eval", action="append", default=[],
                        help="evaluation JSON (repeatable)")
    report.add_argument("--log", action="append", default=[],
                        help="run log JSON-lines (repeatable)")
    report.add_argument("--out_dir", required=True, help="output directory")
    report.set_defaults(func=cmd_report)
    return parser


def _seed_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from err


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _BACKEND_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigError, UnknownLevel, UnprojectableConfig, CorruptLog) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
