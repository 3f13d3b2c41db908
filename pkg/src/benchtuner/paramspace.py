"""Declarative parameter spaces: validation, projection, sampling, features.

A space is an ordered collection of named domains (integer ranges, booleans,
categorical choices, subsets of choices) plus cross-parameter constraints.
Configurations are plain dicts mapping parameter names to values, so they
serialize to flat JSON objects.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

from .util import canonical_json

INT_RANGE = "int-range"
BOOL = "bool"
CHOICE = "choice"
SUBSET = "subset-of-choices"

KINDS = (INT_RANGE, BOOL, CHOICE, SUBSET)

IMPLIES_NONEMPTY = "implies-nonempty"
IMPLIES_ZERO = "implies-zero"
FEASIBILITY = "feasibility"

# A configuration is a flat mapping: name -> int | bool | label | label list.
ParamConfig = dict


class UnprojectableConfig(Exception):
    """No deterministic repair exists for the given configuration."""


@dataclass(frozen=True)
class ParamDomain:
    """Domain of a single parameter.

    kind selects which of the other fields matter: int ranges use low/high,
    choices and subsets use choices, subsets additionally bound their size.
    default, when set, fills the parameter during projection if absent.
    """

    kind: str
    low: int | None = None
    high: int | None = None
    choices: tuple = ()
    min_subset_size: int = 0
    max_subset_size: int | None = None
    default: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind: {self.kind!r}")
        if self.kind == INT_RANGE:
            if self.low is None or self.high is None or self.low > self.high:
                raise ValueError("int-range needs low <= high")
        if self.kind in (CHOICE, SUBSET):
            if not self.choices:
                raise ValueError(f"{self.kind} needs at least one choice")
            if len(set(self.choices)) != len(self.choices):
                raise ValueError("choices must be unique")
            object.__setattr__(self, "choices", tuple(self.choices))
        if self.kind == SUBSET:
            cap = len(self.choices) if self.max_subset_size is None else self.max_subset_size
            object.__setattr__(self, "max_subset_size", cap)
            if not 0 <= self.min_subset_size <= cap <= len(self.choices):
                raise ValueError("subset size bounds out of order")


@dataclass(frozen=True)
class CrossConstraint:
    """Relation between parameters, checked by validate and repaired by project.

    implies-nonempty couples a bool flag to a subset: the flag on means the
    subset is non-empty, the flag off means it is empty. implies-zero forces
    a count parameter to 0 while its flag is off. feasibility requires
    factor * value(param) >= value(bound) over two int parameters.
    """

    kind: str
    flag: str | None = None
    subset: str | None = None
    count: str | None = None
    factor: int = 1
    param: str | None = None
    bound: str | None = None

    def operands(self) -> tuple:
        if self.kind == IMPLIES_NONEMPTY:
            return (self.flag, self.subset)
        if self.kind == IMPLIES_ZERO:
            return (self.flag, self.count)
        if self.kind == FEASIBILITY:
            return (self.param, self.bound)
        raise ValueError(f"unknown constraint kind: {self.kind!r}")


@dataclass(frozen=True)
class ParameterSpec:
    """Named, ordered parameter space. Declaration order fixes feature order."""

    name: str
    params: dict[str, ParamDomain]
    constraints: tuple[CrossConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for con in self.constraints:
            for op in con.operands():
                if op not in self.params:
                    raise ValueError(f"constraint references unknown param {op!r}")


@dataclass(frozen=True)
class Violation:
    param: str
    rule: str
    detail: str = ""


def _check_value(name: str, dom: ParamDomain, value) -> list[Violation]:
    out = []
    if dom.kind == INT_RANGE:
        if isinstance(value, bool) or not isinstance(value, int):
            out.append(Violation(name, "wrong-type", f"expected int, got {type(value).__name__}"))
        elif value < dom.low:
            out.append(Violation(name, "below-low", f"{value} < {dom.low}"))
        elif value > dom.high:
            out.append(Violation(name, "above-high", f"{value} > {dom.high}"))
    elif dom.kind == BOOL:
        if not isinstance(value, bool):
            out.append(Violation(name, "wrong-type", f"expected bool, got {type(value).__name__}"))
    elif dom.kind == CHOICE:
        if value not in dom.choices:
            out.append(Violation(name, "not-a-choice", repr(value)))
    elif dom.kind == SUBSET:
        if not isinstance(value, (list, tuple)):
            out.append(Violation(name, "wrong-type", f"expected list, got {type(value).__name__}"))
            return out
        members = list(value)
        if len(set(members)) != len(members):
            out.append(Violation(name, "duplicate-members"))
        unknown = [m for m in members if m not in dom.choices]
        if unknown:
            out.append(Violation(name, "unknown-member", repr(unknown)))
        size = len(set(m for m in members if m in dom.choices))
        if size < dom.min_subset_size:
            out.append(Violation(name, "subset-too-small", f"{size} < {dom.min_subset_size}"))
        if size > dom.max_subset_size:
            out.append(Violation(name, "subset-too-large", f"{size} > {dom.max_subset_size}"))
    return out


def _check_constraint(spec: ParameterSpec, con: CrossConstraint, config: ParamConfig) -> list[Violation]:
    # Constraints are only judged once their operands individually validate;
    # per-value violations already cover the rest.
    for op in con.operands():
        if op not in config or _check_value(op, spec.params[op], config[op]):
            return []
    if con.kind == IMPLIES_NONEMPTY:
        flag, members = config[con.flag], config[con.subset]
        if flag and not members:
            return [Violation(con.subset, "set-must-be-nonempty", f"{con.flag} is on")]
        if not flag and members:
            return [Violation(con.subset, "set-must-be-empty", f"{con.flag} is off")]
    elif con.kind == IMPLIES_ZERO:
        if not config[con.flag] and config[con.count] != 0:
            return [Violation(con.count, "count-must-be-zero", f"{con.flag} is off")]
    elif con.kind == FEASIBILITY:
        lhs = con.factor * config[con.param]
        rhs = config[con.bound]
        if lhs < rhs:
            return [Violation(con.param, "feasibility",
                              f"{con.factor}*{con.param} = {lhs} < {con.bound} = {rhs}")]
    return []


def validate(spec: ParameterSpec, config: ParamConfig) -> list[Violation]:
    """Return all violations; an empty list means the config is in-domain."""
    out = []
    for name in config:
        if name not in spec.params:
            out.append(Violation(name, "unknown-param"))
    for name, dom in spec.params.items():
        if name not in config:
            out.append(Violation(name, "missing"))
        else:
            out.extend(_check_value(name, dom, config[name]))
    for con in spec.constraints:
        out.extend(_check_constraint(spec, con, config))
    return out


def _coerce_int(dom: ParamDomain, value) -> int:
    try:
        num = float(value)
    except (TypeError, ValueError):
        num = float(dom.low if dom.default is None else dom.default)
    if math.isnan(num) or math.isinf(num):
        num = float(dom.low)
    return max(dom.low, min(dom.high, round(num)))


def _coerce_bool(dom: ParamDomain, value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        if value.strip().lower() in ("true", "yes", "1"):
            return True
        if value.strip().lower() in ("false", "no", "0"):
            return False
    if isinstance(value, int):
        return bool(value)
    return bool(dom.default) if dom.default is not None else False


def _match_choice(dom: ParamDomain, value):
    if value in dom.choices:
        return value
    # JSON often turns integer labels into strings and vice versa.
    for label in dom.choices:
        if str(label) == str(value).strip():
            return label
    return None


def _coerce_choice(dom: ParamDomain, value):
    hit = _match_choice(dom, value)
    if hit is not None:
        return hit
    if dom.default is not None and dom.default in dom.choices:
        return dom.default
    return dom.choices[0]


def _coerce_subset(dom: ParamDomain, value) -> list:
    if isinstance(value, (list, tuple, set, frozenset)):
        raw = list(value)
    elif value is None:
        raw = []
    else:
        raw = [value]
    kept = set()
    for item in raw:
        hit = _match_choice(dom, item)
        if hit is not None:
            kept.add(hit)
    members = [c for c in dom.choices if c in kept]
    # Grow and shrink by declaration order of the choices.
    if len(members) > dom.max_subset_size:
        members = members[: dom.max_subset_size]
    for c in dom.choices:
        if len(members) >= dom.min_subset_size:
            break
        if c not in members:
            members.append(c)
    return [c for c in dom.choices if c in members]


def _canonical_subsets(spec: ParameterSpec, config: ParamConfig) -> ParamConfig:
    out = dict(config)
    for name, dom in spec.params.items():
        if dom.kind == SUBSET and name in out:
            members = set(out[name])
            out[name] = [c for c in dom.choices if c in members]
    return out


def project(spec: ParameterSpec, config: ParamConfig) -> ParamConfig:
    """Deterministically repair a partially valid config into the domain.

    Out-of-range ints clamp to the nearest bound, unknown subset members are
    dropped and sizes repaired in choice declaration order, flags dominate
    their coupled subsets and counts, and feasibility is restored by
    minimally raising the constrained parameter. In-domain configs are
    returned unchanged. Raises UnprojectableConfig when a parameter is
    missing and its domain declares no default.
    """
    if not validate(spec, config):
        return dict(config)
    values = {}
    for name, dom in spec.params.items():
        if name not in config:
            if dom.default is None:
                raise UnprojectableConfig(f"missing param {name!r} with no default")
            value = dom.default
        else:
            value = config[name]
        if dom.kind == INT_RANGE:
            values[name] = _coerce_int(dom, value)
        elif dom.kind == BOOL:
            values[name] = _coerce_bool(dom, value)
        elif dom.kind == CHOICE:
            values[name] = _coerce_choice(dom, value)
        else:
            values[name] = _coerce_subset(dom, value)

    for con in spec.constraints:
        if con.kind == IMPLIES_NONEMPTY:
            dom = spec.params[con.subset]
            if values[con.flag] and not values[con.subset]:
                values[con.subset] = [dom.choices[0]]
            elif not values[con.flag]:
                values[con.subset] = []
        elif con.kind == IMPLIES_ZERO:
            if not values[con.flag]:
                values[con.count] = 0
        elif con.kind == FEASIBILITY:
            pdom = spec.params[con.param]
            bdom = spec.params[con.bound]
            if con.factor * values[con.param] < values[con.bound]:
                values[con.param] = min(pdom.high, math.ceil(values[con.bound] / con.factor))
            if con.factor * values[con.param] < values[con.bound]:
                # param saturated at its bound; lower the other side instead
                values[con.bound] = max(bdom.low, con.factor * values[con.param])
            if con.factor * values[con.param] < values[con.bound]:
                raise UnprojectableConfig(
                    f"feasibility {con.factor}*{con.param} >= {con.bound} unsatisfiable")

    leftover = validate(spec, values)
    if leftover:
        raise UnprojectableConfig(f"projection left violations: {leftover}")
    return values


def sample_uniform(spec: ParameterSpec, seed: int) -> ParamConfig:
    """Draw each parameter uniformly from its domain, then project.

    Projection makes the sample respect cross constraints, at the cost of
    uniformity on the constrained parameters.
    """
    rng = random.Random(seed)
    values = {}
    for name, dom in spec.params.items():
        if dom.kind == INT_RANGE:
            values[name] = rng.randint(dom.low, dom.high)
        elif dom.kind == BOOL:
            values[name] = rng.random() < 0.5
        elif dom.kind == CHOICE:
            values[name] = rng.choice(dom.choices)
        else:
            size = rng.randint(dom.min_subset_size, dom.max_subset_size)
            picked = set(rng.sample(dom.choices, size))
            values[name] = [c for c in dom.choices if c in picked]
    return project(spec, values)


def perturb(spec: ParameterSpec, base: ParamConfig, seed: int) -> ParamConfig:
    """Local move around base: ints step by uniform{-1,0,+1} * ceil(range/20),
    bools flip with prob 0.1, subsets toggle one member with prob 0.2,
    choices stay put. The result is projected back into the domain.
    """
    rng = random.Random(seed)
    values = dict(base)
    for name, dom in spec.params.items():
        if name not in values:
            continue
        if dom.kind == INT_RANGE:
            unit = math.ceil((dom.high - dom.low) / 20) if dom.high > dom.low else 0
            values[name] = values[name] + rng.choice((-1, 0, 1)) * unit
        elif dom.kind == BOOL:
            if rng.random() < 0.1:
                values[name] = not values[name]
        elif dom.kind == SUBSET:
            if rng.random() < 0.2:
                toggle = rng.choice(dom.choices)
                members = set(values[name])
                members.symmetric_difference_update({toggle})
                values[name] = [c for c in dom.choices if c in members]
    return project(spec, values)


def featurize(spec: ParameterSpec, config: ParamConfig) -> list[float]:
    """Fixed-length numeric encoding in declaration order.

    Ints min-max scale to [0, 1], bools map to 0/1, choices one-hot encode,
    subsets emit one membership indicator per choice.
    """
    bad = validate(spec, config)
    if bad:
        raise ValueError(f"cannot featurize invalid config: {bad}")
    feats: list[float] = []
    for name, dom in spec.params.items():
        value = config[name]
        if dom.kind == INT_RANGE:
            span = dom.high - dom.low
            feats.append((value - dom.low) / span if span else 0.0)
        elif dom.kind == BOOL:
            feats.append(1.0 if value else 0.0)
        elif dom.kind == CHOICE:
            feats.extend(1.0 if value == c else 0.0 for c in dom.choices)
        else:
            members = set(value)
            feats.extend(1.0 if c in members else 0.0 for c in dom.choices)
    return feats


def feature_length(spec: ParameterSpec) -> int:
    n = 0
    for dom in spec.params.values():
        n += len(dom.choices) if dom.kind in (CHOICE, SUBSET) else 1
    return n


# -- serialization ----------------------------------------------------------

def _domain_to_dict(dom: ParamDomain) -> dict:
    out = {"kind": dom.kind}
    if dom.kind == INT_RANGE:
        out["low"] = dom.low
        out["high"] = dom.high
    if dom.kind in (CHOICE, SUBSET):
        out["choices"] = list(dom.choices)
    if dom.kind == SUBSET:
        out["min_subset_size"] = dom.min_subset_size
        out["max_subset_size"] = dom.max_subset_size
    if dom.default is not None:
        out["default"] = dom.default
    return out


def _constraint_to_dict(con: CrossConstraint) -> dict:
    out = {"kind": con.kind}
    for key in ("flag", "subset", "count", "param", "bound"):
        value = getattr(con, key)
        if value is not None:
            out[key] = value
    if con.kind == FEASIBILITY:
        out["factor"] = con.factor
    return out


def spec_to_dict(spec: ParameterSpec) -> dict:
    return {
        "name": spec.name,
        "params": {name: _domain_to_dict(d) for name, d in spec.params.items()},
        "constraints": [_constraint_to_dict(c) for c in spec.constraints],
    }


def spec_from_dict(data: dict) -> ParameterSpec:
    params = {}
    for name, dd in data["params"].items():
        kwargs = dict(dd)
        kind = kwargs.pop("kind")
        if "choices" in kwargs:
            kwargs["choices"] = tuple(kwargs["choices"])
        params[name] = ParamDomain(kind=kind, **kwargs)
    constraints = tuple(CrossConstraint(**cd) for cd in data.get("constraints", []))
    return ParameterSpec(name=data["name"], params=params, constraints=constraints)


def dumps_spec(spec: ParameterSpec) -> str:
    """Byte-stable JSON text; params stay in declaration order."""
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def loads_spec(text: str) -> ParameterSpec:
    return spec_from_dict(json.loads(text))


def dumps_config(spec: ParameterSpec, config: ParamConfig) -> str:
    """Canonical single-line JSON for a config: sorted keys, subsets in
    choice declaration order."""
    return canonical_json(_canonical_subsets(spec, config))
