"""Target-model backends and rollout evaluation.

A target scores one problem at a time and a rollout aggregates the scores
into an observed success rate. Besides a real model behind the gateway,
two desk-scale stand-ins are provided: a noisy oracle that answers
perfectly except for a configured corruption rate, and a synthetic-logistic
target whose success probability is a fixed function of the generating
configuration.

Per-item randomness is keyed on the problem content (not its position), so
evaluation is deterministic, safe to fan out to worker threads, and
equivariant under dataset shuffling.
"""

from __future__ import annotations

import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import gateway as gw
from .paramspace import ParamConfig, ParameterSpec, feature_length, featurize
from .util import derive_seed, fingerprint


class BackendError(Exception):
    """A backend failed while scoring an item; carries the item index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NoSolutionFound(Exception):
    """The oracle's enumeration budget produced no verifying answer."""


class HorizonExceeded(Exception):
    """A tool-loop conversation ran out of exchanges without a FINAL line."""


_GATEWAY_ERRORS = (gw.AuthMissing, gw.RateLimited, gw.TransportError,
                   gw.MalformedResponse, gw.ReplayMiss)


@dataclass(frozen=True)
class RolloutResult:
    rho_hat: float
    per_item: tuple
    n: int

    def to_dict(self) -> dict:
        return {"rho_hat": self.rho_hat, "n": self.n,
                "per_item": [dict(item) for item in self.per_item]}


def _item_key(env, problem) -> str:
    record = env.problem_to_dict(problem)
    record.pop("prompt", None)
    return fingerprint(record)


def evaluate(target, dataset: list, *, config: ParamConfig | None = None,
             max_workers: int | None = None) -> RolloutResult:
    """Score every problem and return the observed success rate.

    config is the configuration that generated the dataset; the synthetic
    backend requires it. Worker fan-out never changes results because each
    item's randomness is derived from its own content.
    """
    if not dataset:
        raise ValueError("cannot evaluate an empty dataset")
    workers = max_workers if max_workers is not None else target.default_workers
    workers = max(1, min(workers, len(dataset)))

    def score_one(idx: int):
        problem = dataset[idx]
        try:
            correct, raw = target.score(problem, config)
        except _GATEWAY_ERRORS as err:
            raise BackendError(f"item {idx}: {err}", index=idx) from err
        return {"id": _item_key(target.env, problem), "correct": bool(correct),
                "raw": raw}

    if workers == 1:
        items = [score_one(i) for i in range(len(dataset))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(score_one, range(len(dataset))))
    hits = sum(1 for item in items if item["correct"])
    return RolloutResult(rho_hat=hits / len(items), per_item=tuple(items),
                         n=len(items))


def oracle_answer(env, problem) -> str:
    """Perfect raw answer text for a problem, found by the environment's
    solver."""
    text = env.solve(problem)
    if text is None:
        raise NoSolutionFound(f"no verifying answer within budget ({env.name})")
    return text


class OracleTarget:
    """Answers perfectly, then corrupts each answer with probability
    error_rate, so the expected success rate is 1 - error_rate."""

    default_workers = 1

    def __init__(self, env, error_rate: float = 0.0, seed: int = 0):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error_rate must lie in [0, 1]")
        self.env = env
        self.error_rate = error_rate
        self.seed = seed

    def score(self, problem, config):
        answer = oracle_answer(self.env, problem)
        rng = random.Random(derive_seed(self.seed, "noise",
                                        _item_key(self.env, problem)))
        if rng.random() < self.error_rate:
            answer = self.env.corrupt(problem, answer, rng)
            # the synthetic env has nothing to corrupt; force a miss there
            if self.env.name == "synthetic":
                return False, answer
        return self.env.score_response(problem, answer), answer


def synthetic_success_prob(weights: list[float], slope: float, offset: float,
                           spec: ParameterSpec, config: ParamConfig) -> float:
    """sigmoid(offset - slope * <weights, features(config)>); strictly
    inside (0, 1) for finite inputs."""
    feats = featurize(spec, config)
    if len(weights) != len(feats):
        raise ValueError(f"want {len(feats)} weights, got {len(weights)}")
    z = offset - slope * sum(w * f for w, f in zip(weights, feats))
    return 1.0 / (1.0 + math.exp(-z))


class SyntheticTarget:
    """Bernoulli responder whose success probability depends only on the
    generating configuration."""

    default_workers = 1

    def __init__(self, env, weights: list[float], slope: float = 1.0,
                 offset: float = 0.0, seed: int = 0):
        if len(weights) != feature_length(env.space):
            raise ValueError("one weight per feature slot required")
        self.env = env
        self.weights = list(weights)
        self.slope = slope
        self.offset = offset
        self.seed = seed

    def success_prob(self, config: ParamConfig) -> float:
        return synthetic_success_prob(self.weights, self.slope, self.offset,
                                      self.env.space, config)

    def score(self, problem, config):
        if config is None:
            raise ValueError("synthetic backend needs the generating config")
        p = self.success_prob(config)
        rng = random.Random(derive_seed(self.seed, "draw",
                                        _item_key(self.env, problem)))
        return rng.random() < p, ""


_CALL_LINE = re.compile(r"^\s*CALL\s+(\S+)\s+(-?[\d][\d_.eE+-]*)\s*$")


def _parse_number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def llm_answer(env, problem, gateway, *, model: str, temperature: float = 0.0,
               max_tokens: int = 1024, reasoning_budget: int = 1024,
               horizon: int = 16) -> str:
    """Ask a model to answer one problem.

    Single-turn environments get one completion. Tool-loop environments run
    a conversation: each model turn either issues `CALL <op> <number>`,
    whose exact result comes back as the next user message, or a FINAL line
    that ends the exchange. More than `horizon` turns without a FINAL line
    raises HorizonExceeded.
    """
    prompt = problem.prompt
    extra = {"max_reasoning_tokens": reasoning_budget}
    if env.answer_mode == "single-turn":
        request = gw.ChatRequest(model=model,
                                 messages=({"role": "user", "content": prompt},),
                                 temperature=temperature, max_tokens=max_tokens,
                                 extra=extra)
        return gateway.chat(request).content

    if env.answer_mode != "tool-loop":
        raise ValueError(f"environment {env.name!r} has no model answer mode")

    messages = [{"role": "user", "content": prompt}]
    for _ in range(horizon):
        request = gw.ChatRequest(model=model, messages=tuple(messages),
                                 temperature=temperature, max_tokens=max_tokens,
                                 extra=extra)
        text = gateway.chat(request).content
        messages.append({"role": "assistant", "content": text})
        if any(line.strip().upper().startswith("FINAL")
               for line in text.splitlines()):
            return text
        call = None
        for line in text.splitlines():
            hit = _CALL_LINE.match(line)
            if hit:
                call = hit
        if call is None:
            reply = "Respond with CALL <operator> <number> or a FINAL line."
        else:
            op = call.group(1).strip().lower()
            try:
                number = _parse_number(call.group(2))
            except ValueError:
                reply = f"ERROR: cannot read number {call.group(2)!r}"
            else:
                reply = env.execute_call(op, number)
        messages.append({"role": "user", "content": reply})
    raise HorizonExceeded(f"no FINAL line within {horizon} exchanges")


class LlmTarget:
    """Scores problems by asking a real model through the gateway."""

    default_workers = 8

    def __init__(self, env, gateway, model: str, temperature: float = 0.0,
                 max_tokens: int = 1024, reasoning_budget: int = 1024,
                 horizon: int = 16):
        self.env = env
        self.gateway = gateway
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.reasoning_budget = reasoning_budget
        self.horizon = horizon

    def score(self, problem, config):
        try:
            text = llm_answer(self.env, problem, self.gateway, model=self.model,
                              temperature=self.temperature,
                              max_tokens=self.max_tokens,
                              reasoning_budget=self.reasoning_budget,
                              horizon=self.horizon)
        except HorizonExceeded as err:
            return False, f"[{err}]"
        return self.env.score_response(problem, text), text


def make_target(spec: dict, *, env, gateway=None):
    """Build a target from its declarative description.

    Backends: "oracle-noisy" (error_rate, seed), "synthetic-logistic"
    (weights, slope, offset, seed), "llm" (model, temperature, max_tokens,
    reasoning_budget, horizon).
    """
    backend = spec.get("backend")
    if backend == "oracle-noisy":
        return OracleTarget(env, error_rate=spec.get("error_rate", 0.0),
                            seed=spec.get("seed", 0))
    if backend == "synthetic-logistic":
        return SyntheticTarget(env, weights=spec["weights"],
                               slope=spec.get("slope", 1.0),
                               offset=spec.get("offset", 0.0),
                               seed=spec.get("seed", 0))
    if backend == "llm":
        if gateway is None:
            raise ValueError("llm backend needs a gateway")
        return LlmTarget(env, gateway, model=spec["model"],
                         temperature=spec.get("temperature", 0.0),
                         max_tokens=spec.get("max_tokens", 1024),
                         reasoning_budget=spec.get("reasoning_budget", 1024),
                         horizon=spec.get("horizon", 16))
    raise ValueError(f"unknown target backend {backend!r}")
