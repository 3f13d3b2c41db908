"""Operator-sequence arithmetic tasks.

Six unary operators fold an input number into a final answer; the task for
a model is to recover an operator sequence that reproduces the answer from
the input. Integer mode runs on exact big integers, float mode on binary
floating point.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from itertools import product

from . import paramspace as ps
from .util import derive_seed

# Alphabet of operator symbols; each maps x to a function of x alone.
OPERATOR_NAMES = ("add", "sub", "mul", "div", "sqrt", "pow")

REL_TOL = Fraction(1, 10**9)
MAX_ACCEPTED_LEN = 16  # longest predicted sequence a verifier will consider
_GENERATION_TRIES = 100


class DomainError(Exception):
    """An operator was applied outside its domain (sqrt of a negative,
    div at zero). Carries the failing sequence index when raised by
    eval_sequence."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class GenerationExhausted(Exception):
    """No valid input was found within the resampling budget."""


def _sqrt_int(x: int):
    root = math.isqrt(x)
    if root * root == x:
        return root
    # 53-bit approximation that never overflows float conversion for any
    # x whose square root is representable: isqrt(x << 106) == sqrt(x) * 2^53.
    return math.ldexp(float(math.isqrt(x << 106)), -53)


def apply_op(op: str, x):
    """Apply one operator. Result type follows the operand where possible."""
    if op == "add":
        return x + x
    if op == "sub":
        return x - x
    if op == "mul":
        return x * x
    if op == "div":
        if x == 0:
            raise DomainError("div at zero")
        if isinstance(x, int):
            return 1
        return x / x
    if op == "sqrt":
        if x < 0:
            raise DomainError("sqrt of a negative")
        if isinstance(x, int):
            return _sqrt_int(x)
        return math.sqrt(x)
    if op == "pow":
        return x * x
    raise ValueError(f"unknown operator: {op!r}")


def eval_sequence(ops: list[str], x):
    """Left fold of the operators over x. DomainError carries the index of
    the failing step."""
    value = x
    for i, op in enumerate(ops):
        try:
            value = apply_op(op, value)
        except DomainError as err:
            raise DomainError(str(err), index=i) from None
    return value


@dataclass(frozen=True)
class ArithParams:
    """Generation knobs for one dataset: input range and type, sequence
    length and per-operator repetition cap, plus the sequence itself."""

    max_range_of_nums: int
    length: int
    max_repeats: int
    number_type: str  # "int" | "float"
    operator_sequence: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "operator_sequence", tuple(self.operator_sequence))
        if self.number_type not in ("int", "float"):
            raise ValueError(f"bad number type {self.number_type!r}")
        unknown = [op for op in self.operator_sequence if op not in OPERATOR_NAMES]
        if unknown:
            raise ValueError(f"unknown operators {unknown}")
        if len(self.operator_sequence) != self.length:
            raise ValueError("sequence length disagrees with declared length")
        if len(set(self.operator_sequence)) > 3:
            raise ValueError("sequence uses more than 3 distinct operators")
        for op in set(self.operator_sequence):
            if self.operator_sequence.count(op) > self.max_repeats:
                raise ValueError(f"{op} repeated more than {self.max_repeats} times")


@dataclass(frozen=True)
class ArithProblem:
    x: object  # int | float
    y: object
    ground_truth: tuple[str, ...]
    prompt: str


def _is_finite(value) -> bool:
    if isinstance(value, int):
        return True
    return isinstance(value, float) and math.isfinite(value)


def generate_problem(params: ArithParams, seed: int) -> ArithProblem:
    """Sample an input for the params' operator sequence and fold it.

    The input is drawn from (1, max_range_of_nums): integers land in
    {2..max_range_of_nums}, floats anywhere in the open interval. Inputs
    whose fold leaves the operator domain (or blows up to a non-finite
    float) are resampled, up to a fixed budget.
    """
    rng = random.Random(seed)
    ops = list(params.operator_sequence)
    for _ in range(_GENERATION_TRIES):
        if params.number_type == "int":
            x = rng.randint(2, params.max_range_of_nums)
        else:
            x = rng.uniform(1.0, float(params.max_range_of_nums))
        try:
            y = eval_sequence(ops, x)
        except DomainError:
            continue
        if not _is_finite(y):
            continue
        return ArithProblem(x=x, y=y, ground_truth=tuple(ops),
                            prompt=render_prompt(x, y))
    raise GenerationExhausted(
        f"no valid input after {_GENERATION_TRIES} tries for {ops}")


def _values_close(predicted, expected) -> bool:
    # |predicted - expected| <= 1e-9 * max(1, |expected|), evaluated exactly.
    if isinstance(predicted, int) and isinstance(expected, int):
        return abs(predicted - expected) * 10**9 <= max(1, abs(expected))
    try:
        diff = abs(Fraction(predicted) - Fraction(expected))
        tol = REL_TOL * max(Fraction(1), abs(Fraction(expected)))
    except (ValueError, OverflowError):  # nan or inf involved
        return False
    return diff <= tol


def verify(problem: ArithProblem, predicted: list[str]) -> bool:
    """True when the predicted sequence folds the input to the answer
    within relative tolerance 1e-9. Domain errors mean false."""
    for op in predicted:
        if op not in OPERATOR_NAMES:
            return False
    try:
        result = eval_sequence(list(predicted), problem.x)
    except DomainError:
        return False
    return _values_close(result, problem.y)


def iter_solutions(problem: ArithProblem, allowed_ops: list[str], max_len: int):
    """Yield verifying sequences, shortest first, alphabetical within a
    length."""
    ops = sorted(allowed_ops)
    for length in range(1, max_len + 1):
        for seq in product(ops, repeat=length):
            if verify(problem, list(seq)):
                yield list(seq)


def enumerate_solutions(problem: ArithProblem, allowed_ops: list[str],
                        max_len: int, cap: int = 1000) -> list[list[str]]:
    """All verifying sequences up to max_len, in (length, alphabetical)
    order, truncated at cap results."""
    out = []
    for seq in iter_solutions(problem, allowed_ops, max_len):
        out.append(seq)
        if len(out) >= cap:
            break
    return out


def _render_number(value) -> str:
    # repr round-trips floats at full precision; ints print exactly.
    return repr(value) if isinstance(value, float) else str(value)


def _template() -> str:
    return resources.files("benchtuner.prompts").joinpath("arith_task.txt").read_text("utf-8")


def render_prompt(x, y) -> str:
    from .util import render_template

    return render_template(_template(), {
        "x": _render_number(x),
        "y": _render_number(y),
        "operators": ", ".join(OPERATOR_NAMES),
    })


# -- search space and dataset glue -------------------------------------------

def parameter_space() -> ps.ParameterSpec:
    """Searchable knobs: input range/type, sequence length N, repetition
    cap K, and the 3 distinct operators the sequence draws from. 3*K >= N
    keeps a length-N sequence constructible."""
    return ps.ParameterSpec(
        name="arith-seq",
        params={
            "max_range_of_nums": ps.ParamDomain(ps.INT_RANGE, low=5, high=50),
            "N": ps.ParamDomain(ps.INT_RANGE, low=5, high=10),
            "K": ps.ParamDomain(ps.INT_RANGE, low=1, high=5),
            "type_of_nums": ps.ParamDomain(ps.CHOICE, choices=("int", "float")),
            "operators": ps.ParamDomain(ps.SUBSET, choices=OPERATOR_NAMES,
                                        min_subset_size=3, max_subset_size=3),
        },
        constraints=(
            ps.CrossConstraint(ps.FEASIBILITY, factor=3, param="K", bound="N"),
        ),
    )


def build_sequence(operators: list[str], length: int, max_repeats: int,
                   seed: int) -> tuple[str, ...]:
    """Uniform random length-N sequence over the chosen operators with each
    appearing at most K times (a random N-subset of the K copies of each)."""
    pool = [op for op in operators for _ in range(max_repeats)]
    if len(pool) < length:
        raise ValueError("operators * max_repeats cannot fill the sequence")
    rng = random.Random(seed)
    return tuple(rng.sample(pool, length))


def params_from_config(config: ps.ParamConfig, seed: int) -> ArithParams:
    sequence = build_sequence(list(config["operators"]), config["N"],
                              config["K"], derive_seed(seed, "sequence"))
    return ArithParams(
        max_range_of_nums=config["max_range_of_nums"],
        length=config["N"],
        max_repeats=config["K"],
        number_type=config["type_of_nums"],
        operator_sequence=sequence,
    )


def generate_dataset(config: ps.ParamConfig, n: int, seed: int) -> list[ArithProblem]:
    """n problems sharing one sequence drawn from the config, each with its
    own input."""
    params = params_from_config(config, seed)
    return [generate_problem(params, derive_seed(seed, "item", j)) for j in range(n)]


def parse_final_line(text: str) -> list[str] | None:
    """Operator list from the last FINAL line of a response, or None."""
    final = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith("FINAL"):
            final = stripped[len("FINAL"):].strip(" :")
    if final is None:
        return None
    return [tok.strip().lower() for tok in final.split(",") if tok.strip()]


def score_response(problem: ArithProblem, text: str) -> bool:
    """Parse the FINAL line and verify it. Unparseable text, unknown
    operators, or sequences longer than the agent horizon score false."""
    ops = parse_final_line(text)
    if ops is None or len(ops) > MAX_ACCEPTED_LEN:
        return False
    if any(op not in OPERATOR_NAMES for op in ops):
        return False
    return verify(problem, ops)


def format_final(ops: list[str]) -> str:
    return "FINAL " + ", ".join(ops)


# -- JSON-lines serialization -------------------------------------------------

_BIG = 2**53


def _num_to_json(value):
    if isinstance(value, int) and abs(value) >= _BIG:
        return str(value)
    return value


def _num_from_json(value):
    return int(value) if isinstance(value, str) else value


def problem_to_dict(problem: ArithProblem) -> dict:
    return {
        "x": _num_to_json(problem.x),
        "y": _num_to_json(problem.y),
        "ground_truth": list(problem.ground_truth),
        "prompt": problem.prompt,
    }


def problem_from_dict(data: dict) -> ArithProblem:
    return ArithProblem(
        x=_num_from_json(data["x"]),
        y=_num_from_json(data["y"]),
        ground_truth=tuple(data["ground_truth"]),
        prompt=data["prompt"],
    )
