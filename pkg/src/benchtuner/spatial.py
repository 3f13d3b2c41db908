"""Grid-world spatial reasoning tasks.

A square board of numbered tiles sits on an unbounded 2D plane with two
particles on it. Actions rotate or translate the board (carrying the
particles) or move individual particles; a question about the final state
is answered as a small JSON object. All geometry runs on exact half-integer
coordinates, so state transitions are reversible without float drift.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction

from . import paramspace as ps
from .util import derive_seed, extract_last_json

# Orientations are counterclockwise degrees; 0 points along +x.
ORIENTATION_NAMES = {0: "EAST", 90: "NORTH", 180: "WEST", 270: "SOUTH"}
ORIENTATION_DEGREES = {name: deg for deg, name in ORIENTATION_NAMES.items()}
_UNIT = {0: (1.0, 0.0), 90: (0.0, 1.0), 180: (-1.0, 0.0), 270: (0.0, -1.0)}

MOVE_DIRECTIONS = ("LEFT", "RIGHT", "FORWARD", "BACKWARD")
_MOVE_OFFSETS = {"FORWARD": 0, "LEFT": 90, "BACKWARD": 180, "RIGHT": 270}
ROTATION_AMOUNTS = (0, 90, 180, 270, 360)

QUERY_KINDS = ("absolute-location", "tile-number", "orientation", "relative-location")

COORD_TOL = 1e-6


class OffBoard(Exception):
    """A position that should be a tile centroid is not on the board."""


def rotate_point(point: tuple, center: tuple, degrees: int) -> tuple:
    """Rotate counterclockwise about center by a multiple of 90 degrees.

    Quarter turns are coordinate swaps and negations, so the result is exact
    on half-integer grids.
    """
    turns = (degrees // 90) % 4
    dx = point[0] - center[0]
    dy = point[1] - center[1]
    for _ in range(turns):
        dx, dy = -dy, dx
    return (center[0] + dx, center[1] + dy)


@dataclass(frozen=True)
class BoardState:
    width: int
    center: tuple
    orientation: int  # degrees, starts at 90 (NORTH)
    wrap_around: bool


@dataclass(frozen=True)
class ParticleState:
    name: str
    position: tuple  # tile centroid in world coordinates
    orientation: int


@dataclass(frozen=True)
class SpatialAction:
    kind: str  # board-rotate | board-move | particle-rotate | particle-move
    amount: object  # rotation degrees or a move direction
    subject: str | None = None  # particle name for particle actions


@dataclass(frozen=True)
class SpatialQuery:
    kind: str
    subject: str
    reference: str | None = None


def _row_col(width: int, position: tuple) -> tuple[int, int]:
    # Column/row of a centroid on an unrotated board centered at the origin.
    col_f = position[0] + (width - 1) / 2.0
    row_f = position[1] + (width - 1) / 2.0
    col, row = round(col_f), round(row_f)
    if abs(col_f - col) > COORD_TOL or abs(row_f - row) > COORD_TOL:
        raise ValueError(f"{position} is not a tile centroid for width {width}")
    if not (0 <= col < width and 0 <= row < width):
        raise OffBoard(f"{position} lies outside a width-{width} board")
    return row, col


def tile_number(width: int, row: int, col: int) -> int:
    """Tile label for a 0-based (row from bottom, col from left) cell.

    Numbering starts at the bottom-left corner: the bottom row counts left
    to right, every row above it counts right to left.
    """
    if row == 0:
        return col + 1
    return row * width + (width - col)


def tile_of(width: int, position: tuple) -> int:
    """Tile label at a centroid of an unrotated board centered at the origin."""
    row, col = _row_col(width, position)
    return tile_number(width, row, col)


def tile_grid(width: int) -> list[list[int]]:
    """Tile labels as displayed, top row first."""
    return [[tile_number(width, row, col) for col in range(width)]
            for row in range(width - 1, -1, -1)]


def centroid(width: int, center: tuple, row: int, col: int) -> tuple:
    return (center[0] + col - (width - 1) / 2.0,
            center[1] + row - (width - 1) / 2.0)


def _step_vector(orientation: int, direction: str) -> tuple:
    if direction not in _MOVE_OFFSETS:
        raise ValueError(f"unknown move direction {direction!r}")
    return _UNIT[(orientation + _MOVE_OFFSETS[direction]) % 360]


def wrap_or_stay(board: BoardState, frm: tuple, to: tuple) -> tuple:
    """Resolve a unit move landing at `to`.

    On the board: the move stands. Off the board with wrapping on: the
    coordinate that left the footprint re-enters from the opposite side on
    the same lane. Wrapping off: the particle stays at `frm`.
    """
    half = (board.width - 1) / 2.0
    cx, cy = board.center
    x, y = to
    inside = abs(x - cx) <= half and abs(y - cy) <= half
    if inside:
        return to
    if not board.wrap_around:
        return frm
    if x > cx + half:
        x = cx - half
    elif x < cx - half:
        x = cx + half
    if y > cy + half:
        y = cy - half
    elif y < cy - half:
        y = cy + half
    return (x, y)


def apply_action(board: BoardState, particles: tuple, action: SpatialAction):
    """One state transition; returns the new (board, particles) pair."""
    if action.kind == "board-rotate":
        theta = action.amount
        new_board = replace(board, orientation=(board.orientation + theta) % 360)
        moved = tuple(
            replace(p,
                    position=rotate_point(p.position, board.center, theta),
                    orientation=(p.orientation + theta) % 360)
            for p in particles)
        return new_board, moved
    if action.kind == "board-move":
        vx, vy = _step_vector(board.orientation, action.amount)
        new_board = replace(board, center=(board.center[0] + vx, board.center[1] + vy))
        moved = tuple(
            replace(p, position=(p.position[0] + vx, p.position[1] + vy))
            for p in particles)
        return new_board, moved
    if action.kind == "particle-rotate":
        moved = tuple(
            replace(p, orientation=(p.orientation + action.amount) % 360)
            if p.name == action.subject else p
            for p in particles)
        return board, moved
    if action.kind == "particle-move":
        out = []
        for p in particles:
            if p.name != action.subject:
                out.append(p)
                continue
            vx, vy = _step_vector(p.orientation, action.amount)
            target = (p.position[0] + vx, p.position[1] + vy)
            out.append(replace(p, position=wrap_or_stay(board, p.position, target)))
        return board, tuple(out)
    raise ValueError(f"unknown action kind {action.kind!r}")


@dataclass(frozen=True)
class SpatialParams:
    width: int
    wrap_around: bool
    board_moves: bool
    board_allowed_moves: tuple
    board_rotates: bool
    board_allowed_rotations: tuple
    particle_moves: bool
    particle_allowed_moves: tuple
    particle_rotates: bool
    particle_allowed_rotations: tuple
    number_of_board_rotation_actions: int
    number_of_particle_rotation_actions: int
    number_of_board_movement_actions: int
    number_of_particle_movement_actions: int


@dataclass(frozen=True)
class SpatialProblem:
    params: SpatialParams
    board: BoardState
    particles: tuple
    actions: tuple
    query: SpatialQuery
    answer_schema: dict  # response key -> "float" | "int" | "orientation"
    ground_truth: dict  # response key -> expected value
    prompt: str


def _entity_prefix(name: str) -> str:
    return f"board_{name}" if name.startswith("B") else f"particle_{name}"


def _query_schema(query: SpatialQuery) -> dict:
    prefix = _entity_prefix(query.subject)
    if query.kind == "absolute-location":
        return {f"{prefix}_x": "float", f"{prefix}_y": "float"}
    if query.kind == "tile-number":
        return {f"{prefix}_tile": "int"}
    if query.kind == "orientation":
        return {f"{prefix}_orientation": "orientation"}
    if query.kind == "relative-location":
        pair = f"relative_{query.subject}_{query.reference}"
        return {f"{pair}_dx": "float", f"{pair}_dy": "float"}
    raise ValueError(f"unknown query kind {query.kind!r}")


def run_actions(problem: SpatialProblem):
    board, particles = problem.board, problem.particles
    for action in problem.actions:
        board, particles = apply_action(board, particles, action)
    return board, particles


def _board_frame_position(board: BoardState, position: tuple) -> tuple:
    # Undo the board's accumulated rotation (labels rotate with the board)
    # and recenter, so the original numbering applies.
    net = (board.orientation - 90) % 360
    rel = (position[0] - board.center[0], position[1] - board.center[1])
    return rotate_point(rel, (0.0, 0.0), (360 - net) % 360)


def compute_ground_truth(problem: SpatialProblem) -> dict:
    """Replay the actions and answer the query as a schema-keyed record."""
    board, particles = run_actions(problem)
    by_name = {p.name: p for p in particles}

    def locate(name: str) -> tuple:
        return board.center if name.startswith("B") else by_name[name].position

    query = problem.query
    prefix = _entity_prefix(query.subject)
    if query.kind == "absolute-location":
        x, y = locate(query.subject)
        return {f"{prefix}_x": float(x), f"{prefix}_y": float(y)}
    if query.kind == "tile-number":
        local = _board_frame_position(board, by_name[query.subject].position)
        return {f"{prefix}_tile": tile_of(board.width, local)}
    if query.kind == "orientation":
        deg = by_name[query.subject].orientation
        return {f"{prefix}_orientation": ORIENTATION_NAMES[deg]}
    if query.kind == "relative-location":
        sx, sy = locate(query.subject)
        rx, ry = locate(query.reference)
        pair = f"relative_{query.subject}_{query.reference}"
        return {f"{pair}_dx": float(sx - rx), f"{pair}_dy": float(sy - ry)}
    raise ValueError(f"unknown query kind {query.kind!r}")


def verify_answer(problem: SpatialProblem, response_text: str) -> bool:
    """Score a model response against the ground truth.

    The last JSON object in the text is the answer. Every schema key must be
    present with the right kind of value: reals within 1e-6 absolute, tile
    numbers exact, orientation labels exact.
    """
    payload = extract_last_json(response_text)
    if payload is None:
        return False
    for key, kind in problem.answer_schema.items():
        if key not in payload:
            return False
        value = payload[key]
        expected = problem.ground_truth[key]
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return False
            if abs(float(value) - expected) > COORD_TOL:
                return False
        elif kind == "int":
            if isinstance(value, bool):
                return False
            if isinstance(value, float):
                if not value.is_integer():
                    return False
                value = int(value)
            if not isinstance(value, int) or value != expected:
                return False
        else:  # orientation label
            if not isinstance(value, str) or value.strip() != expected:
                return False
    return True


score_response = verify_answer


# -- generation ---------------------------------------------------------------

def generate_problem(params: SpatialParams, seed: int) -> SpatialProblem:
    """Sample initial particle placements, an action sequence, and a query.

    Particles start on distinct tiles with uniform orientations. Each
    enabled action kind contributes its configured count with uniformly
    chosen amounts (and subjects); the combined sequence is shuffled
    uniformly so kinds interleave.
    """
    rng = random.Random(seed)
    width = params.width
    board = BoardState(width=width, center=(0.0, 0.0), orientation=90,
                       wrap_around=params.wrap_around)
    cells = rng.sample(range(width * width), 2)
    particles = tuple(
        ParticleState(name=f"P{i + 1}",
                      position=centroid(width, board.center, cell // width, cell % width),
                      orientation=rng.choice(tuple(ORIENTATION_NAMES)))
        for i, cell in enumerate(cells))

    actions: list[SpatialAction] = []
    for _ in range(params.number_of_board_rotation_actions):
        actions.append(SpatialAction("board-rotate",
                                     rng.choice(params.board_allowed_rotations)))
    for _ in range(params.number_of_board_movement_actions):
        actions.append(SpatialAction("board-move",
                                     rng.choice(params.board_allowed_moves)))
    for _ in range(params.number_of_particle_rotation_actions):
        actions.append(SpatialAction("particle-rotate",
                                     rng.choice(params.particle_allowed_rotations),
                                     subject=rng.choice(("P1", "P2"))))
    for _ in range(params.number_of_particle_movement_actions):
        actions.append(SpatialAction("particle-move",
                                     rng.choice(params.particle_allowed_moves),
                                     subject=rng.choice(("P1", "P2"))))
    rng.shuffle(actions)

    kind = rng.choice(QUERY_KINDS)
    if kind == "absolute-location":
        query = SpatialQuery(kind, rng.choice(("B1", "P1", "P2")))
    elif kind in ("tile-number", "orientation"):
        query = SpatialQuery(kind, rng.choice(("P1", "P2")))
    else:
        subject, reference = rng.sample(("B1", "P1", "P2"), 2)
        query = SpatialQuery(kind, subject, reference)

    partial = SpatialProblem(params=params, board=board, particles=particles,
                             actions=tuple(actions), query=query,
                             answer_schema=_query_schema(query),
                             ground_truth={}, prompt="")
    truth = compute_ground_truth(partial)
    partial = replace(partial, ground_truth=truth)
    return replace(partial, prompt=render_prompt(partial))


# -- prompt rendering ---------------------------------------------------------

def _fmt_num(value: float) -> str:
    frac = Fraction(value).limit_denominator(2)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{value:.1f}"


def _fmt_point(point: tuple) -> str:
    return f"({_fmt_num(point[0])}, {_fmt_num(point[1])})"


_ENTITY_WORDS = {"B1": "board B1", "P1": "particle P1", "P2": "particle P2"}

_SCHEMA_TYPES = {"float": "Float", "int": "Integer", "orientation": "String"}

_KEY_MEANINGS = {
    "_x": "the x coordinate of {who} after all the actions",
    "_y": "the y coordinate of {who} after all the actions",
    "_tile": "the number of the tile on which {who} rests after all the actions",
    "_orientation": "the orientation of {who} after all the actions,"
                    " one of EAST, NORTH, WEST or SOUTH",
    "_dx": "the x coordinate of {who} minus the x coordinate of {ref}"
           " after all the actions",
    "_dy": "the y coordinate of {who} minus the y coordinate of {ref}"
           " after all the actions",
}


def _move_lines(who: str, allowed: tuple) -> list[str]:
    meaning = {
        "FORWARD": f"{who} moves 1 unit along its orientation.",
        "BACKWARD": f"{who} moves 1 unit against its orientation.",
        "LEFT": f"{who} moves 1 unit along its orientation plus 90 degrees.",
        "RIGHT": f"{who} moves 1 unit along its orientation minus 90 degrees.",
    }
    return [f"{d} - {meaning[d]}" for d in allowed]


def _rotation_lines(who: str, allowed: tuple) -> list[str]:
    return [f"{deg} - {who} rotates by {deg} degrees counterclockwise."
            for deg in allowed]


def _action_sentence(action: SpatialAction) -> str:
    if action.kind == "board-rotate":
        return f"board B1 is rotated by {action.amount} degrees"
    if action.kind == "board-move":
        return f"board B1 is moved {action.amount} by 1 unit"
    if action.kind == "particle-rotate":
        return f"particle {action.subject} is rotated by {action.amount} degrees"
    return f"particle {action.subject} is moved {action.amount} by 1 unit"


def _question_sentence(query: SpatialQuery) -> str:
    who = _ENTITY_WORDS[query.subject]
    if query.kind == "absolute-location":
        return f"What is the location of {who} after all the actions are applied?"
    if query.kind == "tile-number":
        return (f"What is the number of the tile on which {who} rests"
                " after all the actions are applied?")
    if query.kind == "orientation":
        return f"What is the orientation of {who} after all the actions are applied?"
    ref = _ENTITY_WORDS[query.reference]
    return (f"What is the location of {who} relative to {ref}"
            " after all the actions are applied?")


def render_prompt(problem: SpatialProblem) -> str:
    params = problem.params
    board = problem.board
    width = board.width
    lines: list[str] = []
    push = lines.append

    push("Below is the description of a spatial reasoning environment.")
    push("")
    push("# Environment")
    push("")
    push("## Setup")
    push("")
    push("The environment is a flat 2D plane holding one square board with"
         " numbered tiles and the particles resting on it.")
    push("The x coordinate grows to the right and the y coordinate grows upward.")
    push("Orientations are measured in degrees: 0 means East, 90 means North,"
         " 180 means West and 270 means South.")
    push("Rotations are counterclockwise, so rotating by 90 degrees turns East"
         " into North.")
    push("A move covers exactly 1 unit: FORWARD goes along the mover's"
         " orientation, BACKWARD goes against it, LEFT goes along the"
         " orientation plus 90 degrees and RIGHT along the orientation minus"
         " 90 degrees. Moving never changes an orientation.")
    push("When the board rotates, everything on it rotates too: particle"
         " positions turn about the board center and particle orientations"
         " turn by the same angle. When the board moves, the particles"
         " translate with it. The tile numbers are painted on the board, so"
         " they rotate with the board as well.")
    push("")
    push("# Board B1")
    push("")
    push("## Setup")
    push("")
    push(f"The board is {width} units wide and {width} units tall, and carries"
         " 2 particles.")
    push(f"The center of the board is at {_fmt_point(board.center)}.")
    deg = board.orientation
    push(f"The orientation of the board is {ORIENTATION_NAMES[deg]} ({deg} degrees).")
    push("SIDE-1 is the side of the board that currently faces North.")
    push("SIDE-2 is the side of the board that currently faces East.")
    push("SIDE-3 is the side of the board that currently faces South.")
    push("SIDE-4 is the side of the board that currently faces West.")
    push("")
    push("## Boundaries")
    push("")
    if params.wrap_around:
        push("If a particle moves past a side of the board, it reappears on"
             " the opposite side of the board, staying on the same lane.")
    else:
        push("If a particle tries to move past a side of the board, the move"
             " has no effect and the particle stays on its current tile.")
    push("")
    push("## Tiles on the board")
    push("")
    push(f"Tiles are numbered from 1 to {width * width} starting at the"
         " bottom left corner of the board: the bottom row is numbered left"
         " to right, and every row above it is numbered right to left.")
    push("For example, a 3x3 board is numbered like this:")
    for row in tile_grid(3):
        push(" ".join(str(t) for t in row))
    if params.board_moves:
        push("")
        push("## Allowed moves")
        push("")
        lines.extend(_move_lines("the board", params.board_allowed_moves))
    if params.board_rotates:
        push("")
        push("## Allowed rotations")
        push("")
        lines.extend(_rotation_lines("the board", params.board_allowed_rotations))

    for particle in problem.particles:
        push("")
        push(f"# Particle {particle.name}")
        push("")
        push("## Initial state")
        push("")
        push(f"It is located at {_fmt_point(particle.position)}.")
        pdeg = particle.orientation
        push(f"It is facing {ORIENTATION_NAMES[pdeg]} ({pdeg} degrees).")
        local = _board_frame_position(board, particle.position)
        push(f"It is on tile {tile_of(width, local)}.")
        push("It is on board B1.")
        if params.particle_moves:
            push("")
            push("## Allowed moves")
            push("")
            lines.extend(_move_lines("the particle", params.particle_allowed_moves))
        if params.particle_rotates:
            push("")
            push("## Allowed rotations")
            push("")
            lines.extend(_rotation_lines("the particle",
                                         params.particle_allowed_rotations))

    push("")
    push("# Actions")
    push("")
    if not problem.actions:
        push("No actions are applied.")
    else:
        total = len(problem.actions)
        for idx, action in enumerate(problem.actions):
            if idx == 0:
                opener = "First,"
            elif idx == total - 1:
                opener = "Finally,"
            else:
                opener = "Then,"
            push(f"{opener} {_action_sentence(action)}.")
    push("")
    push("# Question")
    push("")
    push(_question_sentence(problem.query))
    push("")
    push("# Response format")
    push("")
    push("Reply with a JSON object containing exactly these keys:")
    push("{")
    keys = list(problem.answer_schema)
    for idx, key in enumerate(keys):
        comma = "," if idx < len(keys) - 1 else ""
        push(f'    "{key}": {_SCHEMA_TYPES[problem.answer_schema[key]]}{comma}')
    push("}")
    who = _ENTITY_WORDS[problem.query.subject]
    ref = _ENTITY_WORDS.get(problem.query.reference or "", "")
    for key in keys:
        suffix = "_" + key.rsplit("_", 1)[1]
        meaning = _KEY_MEANINGS[suffix].format(who=who, ref=ref)
        push(f"{key}: {meaning}.")
    push("The JSON object must be the last thing in your reply.")
    return "\n".join(lines)


# -- search space and dataset glue -------------------------------------------

def parameter_space() -> ps.ParameterSpec:
    """Board geometry plus four action families, each gated by a capability
    flag that controls its allowed-amount set and action count."""
    params = {
        "width": ps.ParamDomain(ps.INT_RANGE, low=5, high=100),
        "wrap_around": ps.ParamDomain(ps.BOOL),
        "board_moves": ps.ParamDomain(ps.BOOL),
        "board_allowed_moves": ps.ParamDomain(ps.SUBSET, choices=MOVE_DIRECTIONS),
        "board_rotates": ps.ParamDomain(ps.BOOL),
        "board_allowed_rotations": ps.ParamDomain(ps.SUBSET, choices=ROTATION_AMOUNTS),
        "particle_moves": ps.ParamDomain(ps.BOOL),
        "particle_allowed_moves": ps.ParamDomain(ps.SUBSET, choices=MOVE_DIRECTIONS),
        "particle_rotates": ps.ParamDomain(ps.BOOL),
        "particle_allowed_rotations": ps.ParamDomain(ps.SUBSET, choices=ROTATION_AMOUNTS),
        "number_of_board_rotation_actions": ps.ParamDomain(ps.INT_RANGE, low=0, high=15),
        "number_of_particle_rotation_actions": ps.ParamDomain(ps.INT_RANGE, low=0, high=15),
        "number_of_board_movement_actions": ps.ParamDomain(ps.INT_RANGE, low=0, high=15),
        "number_of_particle_movement_actions": ps.ParamDomain(ps.INT_RANGE, low=0, high=15),
    }
    constraints = (
        ps.CrossConstraint(ps.IMPLIES_NONEMPTY, flag="board_moves",
                           subset="board_allowed_moves"),
        ps.CrossConstraint(ps.IMPLIES_NONEMPTY, flag="board_rotates",
                           subset="board_allowed_rotations"),
        ps.CrossConstraint(ps.IMPLIES_NONEMPTY, flag="particle_moves",
                           subset="particle_allowed_moves"),
        ps.CrossConstraint(ps.IMPLIES_NONEMPTY, flag="particle_rotates",
                           subset="particle_allowed_rotations"),
        ps.CrossConstraint(ps.IMPLIES_ZERO, flag="board_moves",
                           count="number_of_board_movement_actions"),
        ps.CrossConstraint(ps.IMPLIES_ZERO, flag="board_rotates",
                           count="number_of_board_rotation_actions"),
        ps.CrossConstraint(ps.IMPLIES_ZERO, flag="particle_moves",
                           count="number_of_particle_movement_actions"),
        ps.CrossConstraint(ps.IMPLIES_ZERO, flag="particle_rotates",
                           count="number_of_particle_rotation_actions"),
    )
    return ps.ParameterSpec(name="spatial", params=params, constraints=constraints)


def params_from_config(config: ps.ParamConfig) -> SpatialParams:
    return SpatialParams(
        width=config["width"],
        wrap_around=config["wrap_around"],
        board_moves=config["board_moves"],
        board_allowed_moves=tuple(config["board_allowed_moves"]),
        board_rotates=config["board_rotates"],
        board_allowed_rotations=tuple(config["board_allowed_rotations"]),
        particle_moves=config["particle_moves"],
        particle_allowed_moves=tuple(config["particle_allowed_moves"]),
        particle_rotates=config["particle_rotates"],
        particle_allowed_rotations=tuple(config["particle_allowed_rotations"]),
        number_of_board_rotation_actions=config["number_of_board_rotation_actions"],
        number_of_particle_rotation_actions=config["number_of_particle_rotation_actions"],
        number_of_board_movement_actions=config["number_of_board_movement_actions"],
        number_of_particle_movement_actions=config["number_of_particle_movement_actions"],
    )


def generate_dataset(config: ps.ParamConfig, n: int, seed: int) -> list[SpatialProblem]:
    params = params_from_config(config)
    return [generate_problem(params, derive_seed(seed, "item", j)) for j in range(n)]


# -- JSON-lines serialization -------------------------------------------------

def _params_to_dict(params: SpatialParams) -> dict:
    return {
        "width": params.width,
        "wrap_around": params.wrap_around,
        "board_moves": params.board_moves,
        "board_allowed_moves": list(params.board_allowed_moves),
        "board_rotates": params.board_rotates,
        "board_allowed_rotations": list(params.board_allowed_rotations),
        "particle_moves": params.particle_moves,
        "particle_allowed_moves": list(params.particle_allowed_moves),
        "particle_rotates": params.particle_rotates,
        "particle_allowed_rotations": list(params.particle_allowed_rotations),
        "number_of_board_rotation_actions": params.number_of_board_rotation_actions,
        "number_of_particle_rotation_actions": params.number_of_particle_rotation_actions,
        "number_of_board_movement_actions": params.number_of_board_movement_actions,
        "number_of_particle_movement_actions": params.number_of_particle_movement_actions,
    }


def problem_to_dict(problem: SpatialProblem) -> dict:
    return {
        "params": _params_to_dict(problem.params),
        "initial_state": {
            "board": {
                "width": problem.board.width,
                "center": list(problem.board.center),
                "orientation": ORIENTATION_NAMES[problem.board.orientation],
                "wrap_around": problem.board.wrap_around,
            },
            "particles": [
                {"name": p.name, "position": list(p.position),
                 "orientation": ORIENTATION_NAMES[p.orientation]}
                for p in problem.particles
            ],
        },
        "actions": [
            {"kind": a.kind, "amount": a.amount,
             **({"subject": a.subject} if a.subject else {})}
            for a in problem.actions
        ],
        "query": {
            "kind": problem.query.kind, "subject": problem.query.subject,
            **({"reference": problem.query.reference} if problem.query.reference else {}),
        },
        "answer_schema": dict(problem.answer_schema),
        "ground_truth": dict(problem.ground_truth),
        "prompt": problem.prompt,
    }


def problem_from_dict(data: dict) -> SpatialProblem:
    params = SpatialParams(**{
        key: tuple(val) if isinstance(val, list) else val
        for key, val in data["params"].items()
    })
    board_d = data["initial_state"]["board"]
    board = BoardState(width=board_d["width"], center=tuple(board_d["center"]),
                       orientation=ORIENTATION_DEGREES[board_d["orientation"]],
                       wrap_around=board_d["wrap_around"])
    particles = tuple(
        ParticleState(name=pd["name"], position=tuple(pd["position"]),
                      orientation=ORIENTATION_DEGREES[pd["orientation"]])
        for pd in data["initial_state"]["particles"])
    actions = tuple(
        SpatialAction(kind=ad["kind"], amount=ad["amount"], subject=ad.get("subject"))
        for ad in data["actions"])
    qd = data["query"]
    query = SpatialQuery(kind=qd["kind"], subject=qd["subject"],
                         reference=qd.get("reference"))
    return SpatialProblem(params=params, board=board, particles=particles,
                          actions=actions, query=query,
                          answer_schema=dict(data["answer_schema"]),
                          ground_truth=dict(data["ground_truth"]),
                          prompt=data["prompt"])
