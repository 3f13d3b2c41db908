"""Proposal strategies for the next benchmark configuration.

Every designer answers one question: given the search history so far,
which configuration should the next iteration try? Strategies:

- random: uniform sampling, the floor every other strategy must beat
- rs-ppr: random search plus a replay buffer of near-target configs
  that get resampled with small perturbations
- bon-tm: best-of-N where each candidate is probed with a small rollout
  against the live target model
- bon-ml: best-of-N ranked by a ridge-regression surrogate fitted on the
  history
- llm: ask a designer model for the next configuration via a prompt
  template, with validation, re-prompting, and projection fallbacks
- scripted-bisection: deterministic bracket search over a single integer
  knob, assuming difficulty grows with the knob

Designers rebuild whatever state they need from the history on every
call, so a resumed run proposes exactly what the uninterrupted run
would have.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from . import gateway as gw
from .envs import template_text
from .metrics import gap
from .paramspace import (INT_RANGE, ParamConfig, ParameterSpec, featurize,
                         project, sample_uniform, perturb, validate)
from .targets import evaluate
from .util import canonical_json, derive_seed, extract_last_json, render_template

PARSE_RETRIES = 3
BUFFER_CAPACITY = 32
LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
CV_FOLDS = 5
MIN_SURROGATE_SAMPLES = 10


class UnparseableResponse(Exception):
    """The designer model never produced a JSON object."""


class DegenerateDesign(Exception):
    """All training configurations featurize identically."""


@dataclass(frozen=True)
class HistoryEntry:
    """One completed search iteration: what was tried and how it scored."""

    iteration: int
    config: ParamConfig
    rho_hat: float
    gap: float


def summarize_feedback(history: list[HistoryEntry], rho: float) -> str:
    """Natural-language digest of past iterations, oldest first."""
    lines = []
    for entry in history:
        lines.append(
            f"Iteration {entry.iteration}: params={canonical_json(entry.config)}; "
            f"observed_accuracy={entry.rho_hat:.4f}; target={rho}; "
            f"gap={entry.gap:.4f}")
    return "\n".join(lines)


class PPRBuffer:
    """FIFO buffer of (config, gap) pairs that scored at or under the
    replay threshold."""

    def __init__(self, capacity: int = BUFFER_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.entries: list[tuple[ParamConfig, float]] = []

    def add(self, config: ParamConfig, gap_value: float) -> None:
        self.entries.append((dict(config), gap_value))
        while len(self.entries) > self.capacity:
            self.entries.pop(0)

    def __len__(self) -> int:
        return len(self.entries)


def rs_ppr_step(buffer: PPRBuffer, p: float, delta: float,
                spec: ParameterSpec, last: HistoryEntry | None,
                seed: int) -> tuple[ParamConfig, PPRBuffer]:
    """One replay-buffer step: absorb the last result, then explore with
    probability p or perturb a stored config otherwise.

    The threshold is inclusive: a gap exactly equal to delta is kept.
    Returns the (possibly mutated) buffer alongside the proposal.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    if last is not None and last.gap <= delta:
        buffer.add(last.config, last.gap)
    coin = random.Random(derive_seed(seed, "coin")).random()
    if coin < p or len(buffer) == 0:
        return sample_uniform(spec, derive_seed(seed, "sample")), buffer
    pick = random.Random(derive_seed(seed, "pick")).randrange(len(buffer))
    base = buffer.entries[pick][0]
    return perturb(spec, base, derive_seed(seed, "perturb")), buffer


def bon_tm_select(candidates: list[ParamConfig], rho: float, probe_size: int,
                  target, env, seed: int) -> ParamConfig:
    """Probe each candidate with a small rollout against the target and
    return the one with the smallest measured gap (ties: lowest index).

    All candidates share the same probe seed so the comparison is not
    confounded by dataset luck.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if probe_size < 1:
        raise ValueError("probe_size must be positive")
    probe_seed = derive_seed(seed, "probe")
    best_index, best_gap = 0, None
    for index, candidate in enumerate(candidates):
        dataset = env.generate_dataset(candidate, probe_size, probe_seed)
        result = evaluate(target, dataset, config=candidate)
        measured = gap(rho, result.rho_hat)
        if best_gap is None or measured < best_gap:
            best_index, best_gap = index, measured
    return candidates[best_index]


@dataclass(frozen=True)
class SurrogateModel:
    """Ridge regressor over featurize() outputs predicting the gap."""

    spec: ParameterSpec
    coefficients: tuple  # intercept first
    ridge_lambda: float
    fold_scores: tuple  # held-out R^2 per fold at the chosen lambda

    def predict(self, config: ParamConfig) -> float:
        row = [1.0] + featurize(self.spec, config)
        return float(np.dot(np.asarray(row), np.asarray(self.coefficients)))


def _ridge_fit(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    # intercept column is not penalized
    ones = np.ones((x.shape[0], 1))
    design = np.hstack([ones, x])
    penalty = lam * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    return np.linalg.solve(design.T @ design + penalty, design.T @ y)


def _predict_rows(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    ones = np.ones((x.shape[0], 1))
    return np.hstack([ones, x]) @ theta


def train_surrogate(samples: list[tuple[ParamConfig, float]],
                    spec: ParameterSpec,
                    lambda_grid: tuple = LAMBDA_GRID) -> SurrogateModel:
    """Fit the gap surrogate with the regularization strength chosen by
    5-fold cross-validated mean squared error.

    Samples are canonicalized (sorted by config content) before folding,
    so the fit does not depend on the order they arrive in.
    """
    if len(samples) < MIN_SURROGATE_SAMPLES:
        raise ValueError(
            f"need at least {MIN_SURROGATE_SAMPLES} samples, got {len(samples)}")
    ordered = sorted(samples, key=lambda s: (canonical_json(s[0]), s[1]))
    x = np.asarray([featurize(spec, config) for config, _ in ordered])
    y = np.asarray([gap_value for _, gap_value in ordered], dtype=float)
    if np.all(np.all(x == x[0], axis=1)):
        raise DegenerateDesign("all sample configurations featurize identically")

    folds = [np.arange(len(ordered)) % CV_FOLDS == k for k in range(CV_FOLDS)]
    folds = [mask for mask in folds if mask.any() and (~mask).any()]
    best_lambda, best_mse = None, None
    for lam in lambda_grid:
        errors = []
        for mask in folds:
            theta = _ridge_fit(x[~mask], y[~mask], lam)
            residual = _predict_rows(x[mask], theta) - y[mask]
            errors.append(float(np.mean(residual ** 2)))
        mse = float(np.mean(errors))
        if best_mse is None or mse < best_mse:
            best_lambda, best_mse = lam, mse

    scores = []
    for mask in folds:
        theta = _ridge_fit(x[~mask], y[~mask], best_lambda)
        predicted = _predict_rows(x[mask], theta)
        ss_res = float(np.sum((predicted - y[mask]) ** 2))
        ss_tot = float(np.sum((y[mask] - np.mean(y[mask])) ** 2))
        if ss_tot < 1e-18:
            scores.append(1.0 if ss_res <= 1e-9 else 0.0)
        else:
            scores.append(1.0 - ss_res / ss_tot)
    theta = _ridge_fit(x, y, best_lambda)
    return SurrogateModel(spec=spec, coefficients=tuple(float(c) for c in theta),
                          ridge_lambda=best_lambda, fold_scores=tuple(scores))


def bon_ml_select(model: SurrogateModel,
                  candidates: list[ParamConfig]) -> ParamConfig:
    """Candidate with the smallest predicted gap (ties: lowest index)."""
    if not candidates:
        raise ValueError("need at least one candidate")
    best_index, best_pred = 0, None
    for index, candidate in enumerate(candidates):
        predicted = model.predict(candidate)
        if best_pred is None or predicted < best_pred:
            best_index, best_pred = index, predicted
    return candidates[best_index]


def llm_propose(template: str, spec: ParameterSpec, rho: float,
                history: list[HistoryEntry], gateway, *, env,
                model: str = "designer", retries: int = PARSE_RETRIES,
                temperature: float = 0.5, max_tokens: int = 2048,
                reasoning_budget: int = 4096) -> ParamConfig:
    """Ask the designer model for the next configuration.

    The rendered prompt is sent up to retries+1 times; every attempt uses
    the identical prompt so recorded transcripts replay cleanly. The last
    JSON object in each reply is mapped onto the parameter space. A valid
    mapping is returned as-is; once attempts are exhausted the last parsed
    payload is projected into the domain. UnparseableResponse is raised
    only when no attempt produced any JSON object at all.
    """
    values = dict(env.designer_placeholders(rho))
    values["feedback"] = summarize_feedback(history, rho)
    prompt = render_template(template, values)
    request = gw.ChatRequest(
        model=model,
        messages=({"role": "user", "content": prompt},),
        temperature=temperature,
        max_tokens=max_tokens,
        extra={"max_reasoning_tokens": reasoning_budget})
    last_raw = None
    for _ in range(retries + 1):
        text = gateway.chat(request).content
        payload = extract_last_json(text)
        if payload is None:
            continue
        last_raw = env.payload_to_config(payload)
        if not validate(spec, last_raw):
            return last_raw
    if last_raw is None:
        raise UnparseableResponse(
            f"no JSON object in {retries + 1} designer replies")
    return project(spec, last_raw)


class RandomDesigner:
    strategy = "random"

    def propose(self, spec, rho, history, seed):
        return sample_uniform(spec, seed)


class RsPprDesigner:
    strategy = "rs-ppr"

    def __init__(self, p: float = 0.5, delta: float = 0.1,
                 capacity: int = BUFFER_CAPACITY):
        self.p = p
        self.delta = delta
        self.capacity = capacity

    def propose(self, spec, rho, history, seed):
        # replay the buffer from history so resumed runs match
        buffer = PPRBuffer(self.capacity)
        for entry in history[:-1]:
            if entry.gap <= self.delta:
                buffer.add(entry.config, entry.gap)
        last = history[-1] if history else None
        config, _ = rs_ppr_step(buffer, self.p, self.delta, spec, last, seed)
        return config


class BonTmDesigner:
    strategy = "bon-tm"

    def __init__(self, env, target, n_candidates: int = 4,
                 probe_size: int | None = None):
        if n_candidates < 1:
            raise ValueError("n_candidates must be positive")
        self.env = env
        self.target = target
        self.n_candidates = n_candidates
        self.probe_size = probe_size if probe_size is not None \
            else env.search_rollout_size

    def propose(self, spec, rho, history, seed):
        candidates = [sample_uniform(spec, derive_seed(seed, "candidate", k))
                      for k in range(self.n_candidates)]
        return bon_tm_select(candidates, rho, self.probe_size, self.target,
                             self.env, seed)


class BonMlDesigner:
    strategy = "bon-ml"

    def __init__(self, n_candidates: int = 16):
        if n_candidates < 1:
            raise ValueError("n_candidates must be positive")
        self.n_candidates = n_candidates

    def propose(self, spec, rho, history, seed):
        # explore uniformly until the surrogate has enough to learn from,
        # or when the history cannot support a fit
        if len(history) < MIN_SURROGATE_SAMPLES:
            return sample_uniform(spec, seed)
        samples = [(entry.config, entry.gap) for entry in history]
        try:
            model = train_surrogate(samples, spec)
        except DegenerateDesign:
            return sample_uniform(spec, seed)
        candidates = [sample_uniform(spec, derive_seed(seed, "candidate", k))
                      for k in range(self.n_candidates)]
        return bon_ml_select(model, candidates)


class LlmDesigner:
    strategy = "llm"

    def __init__(self, env, gateway, template: str, model: str = "designer",
                 retries: int = PARSE_RETRIES, temperature: float = 0.5,
                 max_tokens: int = 2048, reasoning_budget: int = 4096):
        self.env = env
        self.gateway = gateway
        self.template = template
        self.model = model
        self.retries = retries
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.reasoning_budget = reasoning_budget

    def propose(self, spec, rho, history, seed):
        del seed  # sampling lives on the model side
        return llm_propose(self.template, spec, rho, history, self.gateway,
                           env=self.env, model=self.model,
                           retries=self.retries, temperature=self.temperature,
                           max_tokens=self.max_tokens,
                           reasoning_budget=self.reasoning_budget)


class BisectionDesigner:
    """Bracket search over one integer knob.

    Assumes observed accuracy is non-increasing in the knob, so a rollout
    that came back too easy (rho_hat > rho) moves the lower edge up and
    anything else moves the upper edge down. The bracket is replayed from
    history, making the designer stateless across calls.
    """

    strategy = "scripted-bisection"

    def __init__(self, knob: str):
        self.knob = knob

    def propose(self, spec, rho, history, seed):
        del seed  # fully deterministic
        if self.knob not in spec.params:
            raise ValueError(f"unknown knob {self.knob!r}")
        domain = spec.params[self.knob]
        if domain.kind != INT_RANGE:
            raise ValueError(f"knob {self.knob!r} must be an integer range")
        low, high = domain.low, domain.high
        for entry in history:
            mid = (low + high) // 2
            if entry.rho_hat > rho:
                low = mid
            else:
                high = mid
        mid = (low + high) // 2
        config = dict(sample_uniform(spec, 0))
        config[self.knob] = mid
        return project(spec, config)


def propose(designer, spec: ParameterSpec, rho: float,
            history: list[HistoryEntry], seed: int) -> ParamConfig:
    """Single entry point the search loop drives every strategy through."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly between 0 and 1")
    return designer.propose(spec, rho, history, seed)


def make_designer(spec: dict, *, env=None, target=None, gateway=None):
    """Build a designer from its declarative description.

    Strategies and their options:
    - "random": none
    - "rs-ppr": p, delta, capacity
    - "bon-tm": n_candidates, probe_size (needs env and target)
    - "bon-ml": n_candidates
    - "llm": model, template_path, retries, temperature (needs env and
      gateway; the template defaults to the environment's packaged one)
    - "scripted-bisection": knob
    """
    strategy = spec.get("strategy")
    if strategy == "random":
        return RandomDesigner()
    if strategy == "rs-ppr":
        return RsPprDesigner(p=spec.get("p", 0.5), delta=spec.get("delta", 0.1),
                             capacity=spec.get("capacity", BUFFER_CAPACITY))
    if strategy == "bon-tm":
        if env is None or target is None:
            raise ValueError("bon-tm needs an environment and a target")
        return BonTmDesigner(env, target,
                             n_candidates=spec.get("n_candidates", 4),
                             probe_size=spec.get("probe_size"))
    if strategy == "bon-ml":
        return BonMlDesigner(n_candidates=spec.get("n_candidates", 16))
    if strategy == "llm":
        if env is None or gateway is None:
            raise ValueError("llm designer needs an environment and a gateway")
        if "template_path" in spec:
            with open(spec["template_path"], encoding="utf-8") as handle:
                template = handle.read()
        else:
            if env.designer_template is None:
                raise ValueError(f"no designer template for {env.name!r}")
            template = template_text(env.designer_template)
        return LlmDesigner(env, gateway, template,
                           model=spec.get("model", "designer"),
                           retries=spec.get("retries", PARSE_RETRIES),
                           temperature=spec.get("temperature", 0.5),
                           max_tokens=spec.get("max_tokens", 2048),
                           reasoning_budget=spec.get("reasoning_budget", 4096))
    if strategy == "scripted-bisection":
        if "knob" not in spec:
            raise ValueError("scripted-bisection needs a knob name")
        return BisectionDesigner(knob=spec["knob"])
    raise ValueError(f"unknown designer strategy {strategy!r}")
