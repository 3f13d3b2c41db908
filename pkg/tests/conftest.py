"""Shared fixtures and scripted stand-ins for the test suite."""

import pytest

from benchtuner import gateway as gw
from benchtuner.envs import get_env


class FakeGateway:
    """Gateway double that replays canned texts in order.

    The final entry repeats once the script runs out. Entries that are
    exceptions are raised instead of returned. Every request is kept so
    tests can assert on prompts and call counts.
    """

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def chat(self, request):
        self.requests.append(request)
        index = min(len(self.requests) - 1, len(self.replies) - 1)
        reply = self.replies[index]
        if isinstance(reply, Exception):
            raise reply
        return gw.ChatResponse(content=reply)


def small_spatial_config(**overrides):
    """A fully enabled but quick-to-simulate spatial configuration."""
    config = {
        "width": 6,
        "wrap_around": True,
        "board_moves": True,
        "board_allowed_moves": ["LEFT", "RIGHT", "FORWARD", "BACKWARD"],
        "board_rotates": True,
        "board_allowed_rotations": [90, 180, 270],
        "particle_moves": True,
        "particle_allowed_moves": ["LEFT", "RIGHT", "FORWARD", "BACKWARD"],
        "particle_rotates": True,
        "particle_allowed_rotations": [90, 180, 270],
        "number_of_board_rotation_actions": 1,
        "number_of_particle_rotation_actions": 1,
        "number_of_board_movement_actions": 1,
        "number_of_particle_movement_actions": 2,
    }
    config.update(overrides)
    return config


def small_arith_config(**overrides):
    config = {
        "max_range_of_nums": 20,
        "N": 5,
        "K": 3,
        "type_of_nums": "int",
        "operators": ["add", "mul", "sub"],
    }
    config.update(overrides)
    return config


@pytest.fixture(scope="session")
def arith_env():
    return get_env("arith")


@pytest.fixture(scope="session")
def spatial_env():
    return get_env("spatial")


@pytest.fixture(scope="session")
def synthetic_env():
    return get_env("synthetic")
