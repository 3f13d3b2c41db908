"""Search loop, evaluation phase, and resumable run logs.

A search run repeats: propose a configuration, project it into the
domain, generate a rollout of problems, measure the target's success
rate, and track the configuration whose observed rate landed closest to
the requested level. Everything is logged as JSON-lines before the next
iteration starts, so an interrupted run can be resumed and will produce
the exact record stream the uninterrupted run would have.

Timestamps honor SOURCE_DATE_EPOCH: when set, the header timestamp is
derived from it and durations are recorded as 0, which makes logs
byte-reproducible for tests and packaging.
"""

from __future__ import annotations

import json
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import gateway as gw
from .designers import HistoryEntry, UnparseableResponse, make_designer, propose
from .envs import get_env
from .metrics import InsufficientData, aggregate_ci, gap
from .paramspace import (ParamConfig, ParameterSpec, UnprojectableConfig,
                         project, spec_from_dict, spec_to_dict)
from .targets import BackendError, evaluate, make_target
from .util import canonical_json, derive_seed

DEFAULT_ITERATIONS = 10
DEFAULT_EVAL_SEEDS = (0, 1, 2)

# errors worth one retry before the iteration is skipped
DESIGNER_ERRORS = (UnparseableResponse, UnprojectableConfig, gw.RateLimited,
                   gw.TransportError, gw.MalformedResponse, gw.ReplayMiss)


class CorruptLog(Exception):
    """A run log that cannot be replayed safely."""


@dataclass
class SearchRun:
    """State of one parameter search: inputs plus everything recorded."""

    env_name: str
    space: ParameterSpec
    designer_spec: dict
    target_spec: dict
    rho: float
    iterations: int
    rollout_size: int
    seed: int
    history: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    best_index: int | None = None
    best_gap: float = math.inf
    next_iteration: int = 1
    complete: bool = False

    def best_config(self) -> ParamConfig | None:
        for entry in self.history:
            if entry.iteration == self.best_index:
                return entry.config
        return None

    def header_record(self) -> dict:
        return {"spec": spec_to_dict(self.space),
                "designer": self.designer_spec,
                "target": self.target_spec,
                "rho": self.rho,
                "I": self.iterations,
                "n_s": self.rollout_size,
                "seed": self.seed,
                "started_at": _timestamp(),
                "env": self.env_name}


def new_run(env_name: str, designer_spec: dict, target_spec: dict, rho: float,
            *, iterations: int = DEFAULT_ITERATIONS,
            rollout_size: int | None = None, seed: int = 0) -> SearchRun:
    """SearchRun with environment defaults filled in."""
    if iterations < 1:
        raise ValueError("need at least one iteration")
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly between 0 and 1")
    env = get_env(env_name)
    size = rollout_size if rollout_size is not None else env.search_rollout_size
    if size < 1:
        raise ValueError("rollout_size must be positive")
    return SearchRun(env_name=env_name, space=env.space,
                     designer_spec=dict(designer_spec),
                     target_spec=dict(target_spec), rho=rho,
                     iterations=iterations, rollout_size=size, seed=seed)


def _fixed_time() -> bool:
    return "SOURCE_DATE_EPOCH" in os.environ


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.isoformat()


class _RunLog:
    """Append-only JSON-lines writer; a None path writes nothing."""

    def __init__(self, path):
        self.path = Path(path) if path is not None else None
        self.handle = None

    def __enter__(self):
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.handle = open(self.path, "a", encoding="utf-8")
        return self

    def write(self, record: dict) -> None:
        if self.handle is not None:
            self.handle.write(canonical_json(record) + "\n")
            self.handle.flush()

    def __exit__(self, *exc_info):
        if self.handle is not None:
            self.handle.close()
        return False


def run_search(run: SearchRun, *, gateway=None, env=None, target=None,
               designer=None, log_path=None) -> SearchRun:
    """Execute the remaining iterations of a search run.

    env, target, and designer are built from the run's declarative specs
    unless explicit objects are passed. An unrecoverable backend error
    aborts mid-run; the log written so far stays valid and resume() picks
    up from it. Designer errors are gentler: one retry, then the
    iteration is recorded as skipped.
    """
    if env is None:
        env = get_env(run.env_name)
    if target is None:
        target = make_target(run.target_spec, env=env, gateway=gateway)
    if designer is None:
        designer = make_designer(run.designer_spec, env=env, target=target,
                                 gateway=gateway)
    if run.complete:
        return run
    with _RunLog(log_path) as log:
        if run.next_iteration == 1:
            log.write(run.header_record())
        for i in range(run.next_iteration, run.iterations + 1):
            iteration_seed = derive_seed(run.seed, "iteration", i)
            started = time.perf_counter()
            config, error = None, None
            for attempt in range(2):
                attempt_seed = iteration_seed if attempt == 0 \
                    else derive_seed(iteration_seed, "retry")
                try:
                    config = propose(designer, run.space, run.rho, run.history,
                                     attempt_seed)
                    break
                except DESIGNER_ERRORS as err:
                    error = err
            if config is None:
                record = {"i": i, "skipped": True, "error": str(error)}
                run.skipped.append(record)
                run.next_iteration = i + 1
                log.write(record)
                continue
            config = project(run.space, config)
            dataset = env.generate_dataset(config, run.rollout_size,
                                           derive_seed(iteration_seed, "dataset"))
            result = evaluate(target, dataset, config=config)
            gap_value = gap(run.rho, result.rho_hat)
            run.history.append(HistoryEntry(iteration=i, config=config,
                                            rho_hat=result.rho_hat,
                                            gap=gap_value))
            if gap_value < run.best_gap:
                run.best_gap, run.best_index = gap_value, i
            if _fixed_time():
                duration_ms = 0
            else:
                duration_ms = int(round((time.perf_counter() - started) * 1000))
            run.next_iteration = i + 1
            log.write({"i": i, "config": config, "rho_hat": result.rho_hat,
                       "gap": gap_value, "duration_ms": duration_ms})
        log.write({"best_index": run.best_index,
                   "best_gap": None if run.best_index is None else run.best_gap})
        run.complete = True
    return run


_HEADER_KEYS = ("spec", "designer", "target", "rho", "I", "n_s", "seed", "env")


def resume(log_path) -> SearchRun:
    """Rebuild a SearchRun from its log.

    The returned run continues at the first unrecorded iteration; feeding
    it back to run_search with the same log path appends the remaining
    records, and the final file matches an uninterrupted run byte for
    byte. Raises CorruptLog on truncated or inconsistent files.
    """
    try:
        lines = Path(log_path).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise CorruptLog(f"cannot read log: {err}") from err
    if not lines:
        raise CorruptLog("empty log")
    records = []
    for number, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as err:
            raise CorruptLog(f"line {number}: {err}") from err
    header = records[0]
    if not isinstance(header, dict) or any(k not in header for k in _HEADER_KEYS):
        raise CorruptLog("first record is not a valid header")
    try:
        space = spec_from_dict(header["spec"])
    except (KeyError, TypeError, ValueError) as err:
        raise CorruptLog(f"bad parameter space in header: {err}") from err
    run = SearchRun(env_name=header["env"], space=space,
                    designer_spec=header["designer"],
                    target_spec=header["target"], rho=header["rho"],
                    iterations=header["I"], rollout_size=header["n_s"],
                    seed=header["seed"])
    for number, record in enumerate(records[1:], start=2):
        if run.complete:
            raise CorruptLog(f"line {number}: record after footer")
        if not isinstance(record, dict):
            raise CorruptLog(f"line {number}: not an object")
        if "best_index" in record:
            want_gap = None if run.best_index is None else run.best_gap
            have_gap = record.get("best_gap")
            agree = record.get("best_index") == run.best_index and (
                (want_gap is None and have_gap is None)
                or (want_gap is not None and have_gap is not None
                    and abs(want_gap - have_gap) <= 1e-12))
            if not agree:
                raise CorruptLog(f"line {number}: footer disagrees with records")
            run.complete = True
            continue
        if record.get("skipped"):
            if "i" not in record:
                raise CorruptLog(f"line {number}: skipped record without index")
            run.skipped.append(record)
            run.next_iteration = record["i"] + 1
            continue
        try:
            entry = HistoryEntry(iteration=record["i"], config=record["config"],
                                 rho_hat=record["rho_hat"], gap=record["gap"])
        except KeyError as err:
            raise CorruptLog(f"line {number}: missing field {err}") from err
        if abs(entry.gap - abs(entry.rho_hat - run.rho)) > 1e-9:
            raise CorruptLog(f"line {number}: gap inconsistent with rho_hat")
        run.history.append(entry)
        if entry.gap < run.best_gap:
            run.best_gap, run.best_index = entry.gap, entry.iteration
        run.next_iteration = entry.iteration + 1
    return run


@dataclass(frozen=True)
class EvalReport:
    """Evaluation of one configuration across seeds."""

    config: ParamConfig
    rho: float
    eval_size: int
    per_seed: tuple
    mean_rho_hat: float
    mean_gap: float
    ci_half_width: float | None
    n_seeds: int

    def to_dict(self) -> dict:
        return {"config": dict(self.config), "rho": self.rho,
                "eval_size": self.eval_size,
                "per_seed": [dict(rec) for rec in self.per_seed],
                "mean_rho_hat": self.mean_rho_hat, "mean_gap": self.mean_gap,
                "ci_half_width": self.ci_half_width, "n_seeds": self.n_seeds}


def run_evaluation(config: ParamConfig, env, target, rho: float,
                   eval_size: int | None = None,
                   seeds=DEFAULT_EVAL_SEEDS) -> EvalReport:
    """Score a configuration on fresh, larger datasets, one per seed.

    The reported gap is the mean of per-seed gaps (not the gap of the
    mean), and the interval half-width aggregates those per-seed gaps.
    With a single seed the half-width is None.
    """
    size = eval_size if eval_size is not None else env.eval_size
    if size < 1:
        raise ValueError("eval_size must be positive")
    seed_list = list(seeds)
    if not seed_list:
        raise ValueError("need at least one seed")
    per_seed = []
    for index, seed in enumerate(seed_list):
        dataset = env.generate_dataset(config, size, seed)
        try:
            result = evaluate(target, dataset, config=config)
        except BackendError as err:
            raise BackendError(f"eval seed {seed} (#{index}): {err}",
                               index=err.index) from err
        per_seed.append({"seed": seed, "rho_hat": result.rho_hat,
                         "gap": gap(rho, result.rho_hat)})
    gaps = [rec["gap"] for rec in per_seed]
    try:
        _, half_width = aggregate_ci(gaps)
    except InsufficientData:
        half_width = None
    return EvalReport(config=dict(config), rho=rho, eval_size=size,
                      per_seed=tuple(per_seed),
                      mean_rho_hat=statistics.fmean(
                          rec["rho_hat"] for rec in per_seed),
                      mean_gap=statistics.fmean(gaps),
                      ci_half_width=half_width, n_seeds=len(seed_list))
