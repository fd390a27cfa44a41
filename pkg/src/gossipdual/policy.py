"""Multiplier-conditioned policies.

The built-in ``LagrangianGreedy`` policy stations agents on the zones with the
largest multipliers. Zones are ranked by (multiplier descending, index
ascending) and agent ``n`` takes rank ``n mod min(N, M)``; agents that hold the
same multiplier copy therefore cover the top zones without talking to each
other about positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from gossipdual.env import Action, Cell, ZoneSpec
from gossipdual.errors import ConfigError

LAGRANGIAN_GREEDY = "lagrangian_greedy"
UNIFORM = "uniform"
EXTERNAL = "external"
POLICY_KINDS = (LAGRANGIAN_GREEDY, UNIFORM, EXTERNAL)

ExternalPolicy = Callable[[Cell, np.ndarray, int], Action]


@dataclass(frozen=True)
class PolicyParams:
    kind: str = LAGRANGIAN_GREEDY
    external: ExternalPolicy | None = None
    theta: Any = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.kind == EXTERNAL and self.external is None:
            raise ConfigError("external policy needs a callable")


def zone_ranking(lam: Sequence[float]) -> list[int]:
    return sorted(range(len(lam)), key=lambda m: (-float(lam[m]), m))


def rank_assignment(lam: Sequence[float], agent_id: int, n_zones: int, n_agents: int) -> int:
    """0-based index of the zone agent ``agent_id`` should hold."""
    ranking = zone_ranking(lam)
    return ranking[agent_id % min(n_agents, n_zones)]


def greedy_stationing(lam: Sequence[float], n_agents: int) -> np.ndarray:
    """Occupancy vector when every agent sits in its ranked zone."""
    v = np.zeros(len(lam), dtype=np.uint8)
    for n in range(n_agents):
        v[rank_assignment(lam, n, len(lam), n_agents)] = 1
    return v


def nearest_cell(position: Cell, zone: ZoneSpec) -> Cell:
    x, y = position
    return min(zone.cells, key=lambda c: (abs(c[0] - x) + abs(c[1] - y), c))


def navigate(position: Cell, target: Cell) -> Action:
    """One step along a shortest grid path; the larger gap closes first, x on ties."""
    dx = target[0] - position[0]
    dy = target[1] - position[1]
    if dx == 0 and dy == 0:
        return Action.STAY
    if abs(dx) >= abs(dy):
        return Action.RIGHT if dx > 0 else Action.LEFT
    return Action.UP if dy > 0 else Action.DOWN


def act(position: Cell, lam: Sequence[float], agent_id: int, params: PolicyParams,
        zones: Sequence[ZoneSpec], n_agents: int, rng: np.random.Generator | None = None) -> Action:
    position = tuple(position)
    if params.kind == LAGRANGIAN_GREEDY:
        zone = zones[rank_assignment(lam, agent_id, len(zones), n_agents)]
        if position in zone.cells:
            return Action.STAY
        return navigate(position, nearest_cell(position, zone))
    if params.kind == UNIFORM:
        if rng is None:
            raise ConfigError("uniform policy needs a random stream")
        return Action(int(rng.integers(len(Action))))
    return Action(params.external(position, np.asarray(lam), agent_id))


def lagrangian_value(lam: Sequence[float], occupancy: Sequence[int], thresholds: Sequence[float]) -> float:
    lam = np.asarray(lam, dtype=np.float64)
    return float(np.dot(lam, np.asarray(occupancy, dtype=np.float64) - np.asarray(thresholds)))


def feasibility_margin(thresholds: Sequence[float]) -> float:
    """``(1 - c_max) / sqrt(M)``."""
    return (1.0 - max(thresholds)) / math.sqrt(len(thresholds))
