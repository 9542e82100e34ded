"""Stochastic taxi gridworld compiled to an explicit MDP.

A taxi moves on a rectangular grid, picks up passengers at depot cells
and delivers them to depot destinations.  Every movement costs one unit
of fuel; running dry ends the episode as a failure.  After each
delivery the next passenger spawns uniformly over all ordered depot
pairs with distinct pickup and destination, which is the model's only
stochasticity.  Delivering `num_jobs` passengers ends the episode as a
success.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from rashomon_mdp.mdp import ExplicitMdp, FeatureSchema, StateCapError, StateVector

ACTIONS = ("north", "east", "south", "west", "pick_up", "drop")

# movement deltas; north increases y
_MOVES = {
    "north": (0, 1),
    "east": (1, 0),
    "south": (0, -1),
    "west": (-1, 0),
}

FEATURE_NAMES = (
    "x",
    "y",
    "passenger_loc_x",
    "passenger_loc_y",
    "passenger_dest_x",
    "passenger_dest_y",
    "fuel",
    "on_board",
    "jobs_done",
    "done",
)

DEFAULT_STATE_CAP = 2_000_000


def _corner_depots(width: int, height: int) -> tuple[tuple[int, int], ...]:
    return ((0, 0), (width - 1, 0), (0, height - 1), (width - 1, height - 1))


@dataclass(frozen=True)
class TaxiParams:
    """Gridworld parameters.

    `first_passenger` gives depot indices (pickup, destination) of the
    deterministic first job; later jobs spawn uniformly.  The defaults
    describe a 3x3 grid with corner depots and just enough fuel to
    guarantee five deliveries under worst-case spawns (38 moves plus one
    unit so the final drop happens before the tank hits zero), making
    the optimal completion probability at five jobs exactly 1.
    """

    width: int = 3
    height: int = 3
    fuel_capacity: int = 39
    num_jobs: int = 5
    depots: tuple[tuple[int, int], ...] = ()
    taxi_start: tuple[int, int] = (0, 0)
    first_passenger: tuple[int, int] = (1, 2)

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("grid must be at least 2x2")
        if self.fuel_capacity < 1:
            raise ValueError("fuel capacity must be positive")
        if self.num_jobs < 1:
            raise ValueError("need at least one job")
        if not self.depots:
            object.__setattr__(self, "depots", _corner_depots(self.width, self.height))
        if len(self.depots) < 2:
            raise ValueError("need at least two depots")
        if len(set(self.depots)) != len(self.depots):
            raise ValueError("duplicate depot cells")
        for x, y in self.depots:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"depot ({x}, {y}) outside the grid")
        sx, sy = self.taxi_start
        if not (0 <= sx < self.width and 0 <= sy < self.height):
            raise ValueError(f"taxi start ({sx}, {sy}) outside the grid")
        loc, dest = self.first_passenger
        n = len(self.depots)
        if not (0 <= loc < n and 0 <= dest < n):
            raise ValueError("first passenger depot index out of range")
        if loc == dest:
            raise ValueError("first passenger pickup equals destination")

    def spawn_pairs(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        """Ordered (pickup, destination) depot pairs a new job can take."""
        return tuple(
            (loc, dest) for loc in self.depots for dest in self.depots if loc != dest
        )


def taxi_schema(params: TaxiParams) -> FeatureSchema:
    bounds = (
        (0, params.width - 1),
        (0, params.height - 1),
        (0, params.width - 1),
        (0, params.height - 1),
        (0, params.width - 1),
        (0, params.height - 1),
        (0, params.fuel_capacity),
        (0, 1),
        (0, params.num_jobs),
        (0, 1),
    )
    return FeatureSchema(FEATURE_NAMES, bounds)


def initial_state(params: TaxiParams) -> StateVector:
    loc = params.depots[params.first_passenger[0]]
    dest = params.depots[params.first_passenger[1]]
    return (
        params.taxi_start[0],
        params.taxi_start[1],
        loc[0],
        loc[1],
        dest[0],
        dest[1],
        params.fuel_capacity,
        0,
        0,
        0,
    )


def successor_distribution(
    state: StateVector, action: str, params: TaxiParams
) -> list[tuple[StateVector, float]]:
    """Outgoing distribution of one state under one action.

    Terminal states (done=1) self-loop under every action.  Illegal
    pickups and drops are no-ops; movement into a wall stays in place
    but still burns fuel; reaching fuel 0 sets done.  A successful final
    drop sets done with jobs_done at the job target, while intermediate
    drops branch uniformly over the spawn pairs.
    """
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}")
    x, y, loc_x, loc_y, dest_x, dest_y, fuel, on_board, jobs, done = state
    if done:
        return [(state, 1.0)]

    if action in _MOVES:
        dx, dy = _MOVES[action]
        nx, ny = x + dx, y + dy
        if not (0 <= nx < params.width):
            nx = x
        if not (0 <= ny < params.height):
            ny = y
        fuel_left = fuel - 1
        if fuel_left <= 0:
            return [((nx, ny, loc_x, loc_y, dest_x, dest_y, 0, on_board, jobs, 1), 1.0)]
        return [
            ((nx, ny, loc_x, loc_y, dest_x, dest_y, fuel_left, on_board, jobs, 0), 1.0)
        ]

    if action == "pick_up":
        if on_board == 0 and (x, y) == (loc_x, loc_y):
            return [((x, y, loc_x, loc_y, dest_x, dest_y, fuel, 1, jobs, 0), 1.0)]
        return [(state, 1.0)]

    # drop
    if on_board == 1 and (x, y) == (dest_x, dest_y):
        jobs_after = jobs + 1
        if jobs_after >= params.num_jobs:
            return [
                ((x, y, loc_x, loc_y, dest_x, dest_y, fuel, 0, jobs_after, 1), 1.0)
            ]
        pairs = params.spawn_pairs()
        prob = 1.0 / len(pairs)
        return [
            ((x, y, nl[0], nl[1], nd[0], nd[1], fuel, 0, jobs_after, 0), prob)
            for nl, nd in pairs
        ]
    return [(state, 1.0)]


def build_taxi(params: TaxiParams, cap: int = DEFAULT_STATE_CAP) -> ExplicitMdp:
    """Explore the reachable state space breadth-first into an ExplicitMdp.

    State 0 is the initial state; discovery order (FIFO over actions in
    declared order) fixes all indices, so equal parameters always give
    the identical model.  Raises :class:`StateCapError` beyond `cap`
    states.
    """
    start = initial_state(params)
    index: dict[StateVector, int] = {start: 0}
    order: list[StateVector] = [start]
    rows: list[tuple[tuple[tuple[int, float], ...], ...]] = []
    queue = deque((0,))
    while queue:
        i = queue.popleft()
        state = order[i]
        per_state = []
        for action in ACTIONS:
            row = []
            for succ, prob in successor_distribution(state, action, params):
                j = index.get(succ)
                if j is None:
                    j = len(order)
                    if j >= cap:
                        raise StateCapError(
                            f"state space exceeds cap of {cap} states"
                        )
                    index[succ] = j
                    order.append(succ)
                    queue.append(j)
                row.append((j, prob))
            per_state.append(tuple(row))
        rows.append(tuple(per_state))
    return ExplicitMdp(
        schema=taxi_schema(params),
        states=tuple(order),
        actions=ACTIONS,
        transitions=tuple(rows),
        initial=0,
    )
