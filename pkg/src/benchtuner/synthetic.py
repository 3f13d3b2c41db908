"""Placeholder environment for exercising the search loop offline.

Problems carry no content: a synthetic-logistic target scores them from the
generating configuration alone. That makes whole tuning runs cheap, fully
offline and exactly reproducible, which is what the loop and CLI tests need.
"""

from __future__ import annotations

from . import paramspace as ps
from .util import derive_seed


def parameter_space() -> ps.ParameterSpec:
    return ps.ParameterSpec(
        name="synthetic",
        params={
            "level": ps.ParamDomain(ps.INT_RANGE, low=0, high=100),
        },
    )


def generate_dataset(config: ps.ParamConfig, n: int, seed: int) -> list[dict]:
    # The nonce keeps items distinct across dataset seeds so content-keyed
    # target randomness stays independent between rollouts.
    return [{"index": j, "nonce": derive_seed(seed, "item", j)} for j in range(n)]


def score_response(problem: dict, text: str) -> bool:
    return False


def problem_to_dict(problem: dict) -> dict:
    return dict(problem)


def problem_from_dict(data: dict) -> dict:
    return dict(data)
