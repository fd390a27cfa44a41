"""Grid-world monitoring MDP.

Coordinates are ``(x, y)`` with ``Up`` incrementing ``y``. Rewards depend on
the joint state only: zone ``m`` pays 1 at time ``t`` when at least one agent
stands inside it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from gossipdual.errors import ConfigError, ContractViolation

Cell = tuple[int, int]


class Action(enum.IntEnum):
    STAY = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4

    @property
    def delta(self) -> Cell:
        return _DELTAS[self]


_DELTAS = {
    Action.STAY: (0, 0),
    Action.UP: (0, 1),
    Action.DOWN: (0, -1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    slip_prob: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ConfigError(f"slip_prob must be in [0, 1), got {self.slip_prob}")

    def contains(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def cells(self) -> Iterable[Cell]:
        for x in range(self.width):
            for y in range(self.height):
                yield (x, y)


@dataclass(frozen=True)
class ZoneSpec:
    zone_id: int
    cells: frozenset[Cell]
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset(tuple(c) for c in self.cells))
        if not self.cells:
            raise ConfigError(f"zone {self.zone_id} has no cells")
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"zone {self.zone_id}: threshold must be < 1 (and >= 0), got {self.threshold}")

    @classmethod
    def rect(cls, zone_id: int, x0: int, y0: int, x1: int, y1: int, threshold: float) -> "ZoneSpec":
        """Axis-aligned rectangle with inclusive corners."""
        cells = {(x, y) for x in range(min(x0, x1), max(x0, x1) + 1)
                 for y in range(min(y0, y1), max(y0, y1) + 1)}
        return cls(zone_id, frozenset(cells), threshold)


@dataclass(frozen=True)
class WorldState:
    positions: tuple[Cell, ...]
    time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(tuple(p) for p in self.positions))
        if self.time < 0:
            raise ContractViolation("time must be non-negative")

    @property
    def n_agents(self) -> int:
        return len(self.positions)


def validate_zones(grid: GridSpec, zones: Sequence[ZoneSpec]) -> None:
    for z in zones:
        bad = sorted(c for c in z.cells if not grid.contains(c))
        if bad:
            raise ConfigError(f"zone {z.zone_id}: cell {bad[0]} outside {grid.width}x{grid.height} grid")


def validate_state(grid: GridSpec, state: WorldState) -> None:
    for n, p in enumerate(state.positions):
        if not grid.contains(p):
            raise ContractViolation(f"agent {n} at {p} is outside the grid")


def feasible_moves(grid: GridSpec, cell: Cell) -> list[Action]:
    """Moves that keep an agent inside the grid, in enum order (Stay first)."""
    x, y = cell
    return [a for a in Action if grid.contains((x + a.delta[0], y + a.delta[1]))]


def resolve_moves(grid: GridSpec, positions: Sequence[Cell], moves: Sequence[Action],
                  rng: np.random.Generator) -> tuple[list[Action], list[bool]]:
    """Apply slip noise and boundary clamping; returns executed moves and slip flags.

    One uniform draw per agent is consumed only when ``slip_prob > 0``, so noiseless
    grids never touch the stream.
    """
    executed, slipped = [], []
    for pos, move in zip(positions, moves):
        move = Action(move)
        did_slip = False
        if grid.slip_prob > 0.0 and rng.random() < grid.slip_prob:
            options = feasible_moves(grid, pos)
            move = options[int(rng.integers(len(options)))]
            did_slip = True
        dx, dy = move.delta
        if not grid.contains((pos[0] + dx, pos[1] + dy)):
            move = Action.STAY
        executed.append(move)
        slipped.append(did_slip)
    return executed, slipped


def step(grid: GridSpec, state: WorldState, action: Sequence[Action],
         rng: np.random.Generator) -> WorldState:
    if len(action) != state.n_agents:
        raise ContractViolation(f"joint action has {len(action)} moves for {state.n_agents} agents")
    executed, _ = resolve_moves(grid, state.positions, action, rng)
    positions = tuple((x + a.delta[0], y + a.delta[1])
                      for (x, y), a in zip(state.positions, executed))
    return WorldState(positions, state.time + 1)


def local_occupancy(position: Cell, zones: Sequence[ZoneSpec]) -> np.ndarray:
    position = tuple(position)
    return np.array([position in z.cells for z in zones], dtype=np.uint8)


def occupancy(state: WorldState, zones: Sequence[ZoneSpec]) -> np.ndarray:
    """Global zone rewards: max over agents of the local indicators."""
    out = np.zeros(len(zones), dtype=np.uint8)
    for p in state.positions:
        np.maximum(out, local_occupancy(p, zones), out=out)
    return out


@dataclass(frozen=True)
class OccupancyTable:
    """Precomputed ``(x, y) -> indicator vector`` lookup for the simulation loop."""

    grid: GridSpec
    zones: tuple[ZoneSpec, ...]
    table: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        validate_zones(self.grid, self.zones)
        table = np.zeros((self.grid.width, self.grid.height, len(self.zones)), dtype=np.uint8)
        for m, z in enumerate(self.zones):
            for x, y in z.cells:
                table[x, y, m] = 1
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def local(self, position: Cell) -> np.ndarray:
        return self.table[position[0], position[1]]

    def joint(self, positions: Sequence[Cell]) -> np.ndarray:
        xs = [p[0] for p in positions]
        ys = [p[1] for p in positions]
        return self.table[xs, ys].max(axis=0)
