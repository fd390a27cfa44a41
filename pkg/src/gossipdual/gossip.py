"""Max-consensus gossip over a sliding window of reward estimates.

Each agent holds binary estimates of the global zone rewards for the last
``d + 1`` time steps. At tick ``t`` the agent opens a slot for ``tau = t``
from its own position, then every slot with ``t - d <= tau <= t - 1`` takes the
max over the agent and its usable neighbours of their previous-tick values.
A slot that leaves the window is final: once ``d`` rounds have passed it
equals the true reward on a graph of diameter at most ``d``, so it is folded
into a per-rollout running sum and dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from gossipdual.env import Cell, WorldState, ZoneSpec, local_occupancy, occupancy
from gossipdual.errors import ContractViolation

Edge = tuple[int, int]


@dataclass
class EstimateTable:
    agent_id: int
    n_zones: int
    d: int
    t_zero: int
    t: int = -1
    values: np.ndarray = field(default=None, repr=False)
    finalized_sums: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    finalized_counts: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.d < 0:
            raise ContractViolation("retention horizon d must be >= 0")
        if self.t_zero < 1:
            raise ContractViolation("rollout horizon must be >= 1")
        if self.values is None:
            self.values = np.zeros((0, self.n_zones), dtype=np.uint8)

    @property
    def window_start(self) -> int:
        """Oldest ``tau`` still held in the window."""
        return self.t - len(self.values) + 1

    def taus(self) -> range:
        return range(self.window_start, self.t + 1)

    def estimate(self, tau: int) -> np.ndarray | None:
        i = tau - self.window_start
        if 0 <= i < len(self.values) and tau <= self.t:
            return self.values[i]
        return None

    def push(self, t: int, local: np.ndarray) -> tuple[int, np.ndarray] | None:
        """Open the slot ``tau = t``; returns the ``(tau, values)`` pair evicted, if any."""
        if t <= self.t:
            raise ContractViolation(f"agent {self.agent_id}: slot for t={t} already initialized")
        if self.t >= 0 and t != self.t + 1:
            raise ContractViolation(f"agent {self.agent_id}: clock jumped from {self.t} to {t}")
        local = np.asarray(local, dtype=np.uint8).reshape(1, self.n_zones)
        evicted = None
        if len(self.values) == self.d + 1:
            tau = self.window_start
            old = self.values[0].copy()
            self._finalize(tau, old)
            evicted = (tau, old)
            self.values = np.concatenate([self.values[1:], local])
        else:
            self.values = np.concatenate([self.values, local])
        self.t = t
        return evicted

    def _finalize(self, tau: int, vals: np.ndarray) -> None:
        k = tau // self.t_zero
        acc = self.finalized_sums.get(k)
        if acc is None:
            acc = self.finalized_sums[k] = np.zeros(self.n_zones, dtype=np.int64)
            self.finalized_counts[k] = 0
        acc += vals
        self.finalized_counts[k] += 1

    def discard_rollout(self, k: int) -> None:
        self.finalized_sums.pop(k, None)
        self.finalized_counts.pop(k, None)


def new_tables(n_agents: int, n_zones: int, d: int, t_zero: int) -> list[EstimateTable]:
    return [EstimateTable(n, n_zones, d, t_zero) for n in range(n_agents)]


def init_slot(table: EstimateTable, t: int, position: Cell, zones: Sequence[ZoneSpec]):
    """Seed slot ``tau = t`` with the agent's own zone indicators."""
    table.push(t, local_occupancy(position, zones))
    return table


def gossip_round(tables: Sequence[EstimateTable], usable_edges: Iterable[Edge]) -> Sequence[EstimateTable]:
    """One synchronous max-consensus exchange.

    Reads a snapshot of every window taken before any write, so the result does
    not depend on the order agents are visited. The newest slot (``tau = t``)
    only ever holds the agent's own observation at this tick.
    """
    if not tables:
        return tables
    t = tables[0].t
    length = len(tables[0].values)
    for tb in tables:
        if tb.t != t or len(tb.values) != length:
            raise ContractViolation("gossip_round needs all tables on the same clock")
    if length < 2:
        return tables
    snapshot = [tb.values[:-1].copy() for tb in tables]
    for a, b in usable_edges:
        np.maximum(tables[a].values[:-1], snapshot[b], out=tables[a].values[:-1])
        np.maximum(tables[b].values[:-1], snapshot[a], out=tables[b].values[:-1])
    return tables


def consensus_oracle(history: Sequence[WorldState], zones: Sequence[ZoneSpec]) -> np.ndarray:
    """Ground-truth rewards ``r[tau, m]`` for a logged trajectory (centralized, test use)."""
    if not history:
        return np.zeros((0, len(zones)), dtype=np.uint8)
    return np.stack([occupancy(s, zones) for s in history])
