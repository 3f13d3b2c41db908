"""Environment registry: one binding per task family.

A binding packages everything the search loop, the targets and the CLI need
to stay environment-agnostic: the parameter space, dataset generation,
response scoring, a perfect solver with a matching corruptor for the noisy
oracle, and the designer-prompt wiring.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from typing import Callable

from . import arith, paramspace, spatial, synthetic

_NEXT_LABEL = {"EAST": "NORTH", "NORTH": "WEST", "WEST": "SOUTH", "SOUTH": "EAST"}


@dataclass(frozen=True)
class Environment:
    name: str
    space: paramspace.ParameterSpec
    search_rollout_size: int
    eval_size: int
    generate_dataset: Callable
    score_response: Callable
    problem_to_dict: Callable
    problem_from_dict: Callable
    solve: Callable | None = None
    corrupt: Callable | None = None
    execute_call: Callable | None = None
    answer_mode: str = "none"  # "tool-loop" | "single-turn" | "none"
    designer_template: str | None = None
    designer_placeholders: Callable | None = None
    payload_to_config: Callable | None = None


def template_text(name: str) -> str:
    return resources.files("benchtuner.prompts").joinpath(name).read_text("utf-8")


# -- arithmetic ---------------------------------------------------------------

def _arith_solve(problem: arith.ArithProblem) -> str | None:
    """Shortest verifying sequence over the problem's own operators,
    alphabetical on ties; None when the enumeration budget finds nothing."""
    ops = sorted(set(problem.ground_truth))
    max_len = min(len(problem.ground_truth), arith.MAX_ACCEPTED_LEN)
    hit = next(arith.iter_solutions(problem, ops, max_len), None)
    if hit is None:
        return None
    return arith.format_final(hit)


def _arith_corrupt(problem: arith.ArithProblem, answer: str, rng: random.Random) -> str:
    """Replace the answer with a sequence that fails verification."""
    length = max(1, len(problem.ground_truth))
    for _ in range(20):
        seq = [rng.choice(arith.OPERATOR_NAMES) for _ in range(length)]
        if not arith.verify(problem, seq):
            return arith.format_final(seq)
    return "FINAL noop"  # unknown operator always scores false


def _arith_placeholders(rho: float) -> dict:
    regret = round(1.0 - rho, 6)
    return {
        "target_regret": f"{regret:g}",
        "operators": ", ".join(arith.OPERATOR_NAMES),
    }


def _arith_payload_to_config(payload: dict) -> dict:
    config = {}
    for key in ("max_range_of_nums", "N", "K", "type_of_nums"):
        if key in payload:
            config[key] = payload[key]
    seq = payload.get("operator_sequence")
    if isinstance(seq, (list, tuple)):
        names = {str(op).strip().lower() for op in seq}
        config["operators"] = [op for op in arith.OPERATOR_NAMES if op in names]
    return config


def _execute_arith_call(op: str, number) -> str:
    try:
        result = arith.apply_op(op, number)
    except arith.DomainError as err:
        return f"ERROR: {err}"
    except ValueError:
        return f"ERROR: unknown operator {op!r}"
    return repr(result) if isinstance(result, float) else str(result)


# -- spatial ------------------------------------------------------------------

def _spatial_solve(problem: spatial.SpatialProblem) -> str:
    return json.dumps(problem.ground_truth, sort_keys=True)


def _spatial_corrupt(problem: spatial.SpatialProblem, answer: str,
                     rng: random.Random) -> str:
    """Nudge one answer field off: numbers move by +1, orientation labels
    shift to the next cardinal."""
    payload = dict(problem.ground_truth)
    key = rng.choice(sorted(payload))
    value = payload[key]
    if isinstance(value, str):
        payload[key] = _NEXT_LABEL[value]
    else:
        payload[key] = value + 1
    return json.dumps(payload, sort_keys=True)


def _spatial_placeholders(rho: float) -> dict:
    return {"accuracy": f"{rho:g}"}


_SPATIAL_KEYS = (
    "width", "wrap_around",
    "board_moves", "board_allowed_moves",
    "board_rotates", "board_allowed_rotations",
    "particle_moves", "particle_allowed_moves",
    "particle_rotates", "particle_allowed_rotations",
    "number_of_board_rotation_actions", "number_of_particle_rotation_actions",
    "number_of_board_movement_actions", "number_of_particle_movement_actions",
)


def _spatial_payload_to_config(payload: dict) -> dict:
    return {key: payload[key] for key in _SPATIAL_KEYS if key in payload}


# -- synthetic ----------------------------------------------------------------

def _synthetic_solve(problem: dict) -> str:
    return ""


def _synthetic_corrupt(problem: dict, answer: str, rng: random.Random) -> str:
    return answer


def _build_registry() -> dict[str, Environment]:
    envs = {}
    envs["arith"] = Environment(
        name="arith",
        space=arith.parameter_space(),
        search_rollout_size=10,
        eval_size=75,
        generate_dataset=arith.generate_dataset,
        score_response=arith.score_response,
        problem_to_dict=arith.problem_to_dict,
        problem_from_dict=arith.problem_from_dict,
        solve=_arith_solve,
        corrupt=_arith_corrupt,
        execute_call=_execute_arith_call,
        answer_mode="tool-loop",
        designer_template="arith_designer.txt",
        designer_placeholders=_arith_placeholders,
        payload_to_config=_arith_payload_to_config,
    )
    envs["spatial"] = Environment(
        name="spatial",
        space=spatial.parameter_space(),
        search_rollout_size=250,
        eval_size=500,
        generate_dataset=spatial.generate_dataset,
        score_response=spatial.score_response,
        problem_to_dict=spatial.problem_to_dict,
        problem_from_dict=spatial.problem_from_dict,
        solve=_spatial_solve,
        corrupt=_spatial_corrupt,
        answer_mode="single-turn",
        designer_template="spatial_designer.txt",
        designer_placeholders=_spatial_placeholders,
        payload_to_config=_spatial_payload_to_config,
    )
    envs["synthetic"] = Environment(
        name="synthetic",
        space=synthetic.parameter_space(),
        search_rollout_size=100,
        eval_size=200,
        generate_dataset=synthetic.generate_dataset,
        score_response=synthetic.score_response,
        problem_to_dict=synthetic.problem_to_dict,
        problem_from_dict=synthetic.problem_from_dict,
        solve=_synthetic_solve,
        corrupt=_synthetic_corrupt,
    )
    return envs


_REGISTRY = _build_registry()


def get_env(name: str) -> Environment:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise KeyError(f"unknown environment {name!r} (known: {known})")
    return _REGISTRY[name]


def env_names() -> list[str]:
    return sorted(_REGISTRY)
