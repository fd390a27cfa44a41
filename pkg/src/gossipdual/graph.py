"""Communication graph between agents and the per-step link model."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from gossipdual.errors import ConfigError

Edge = tuple[int, int]


def _norm_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def bfs_distances(adjacency: Sequence[Iterable[int]], source: int) -> list[int]:
    """Hop distance from ``source`` to every node; -1 marks unreachable nodes."""
    dist = [-1] * len(adjacency)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True)
class Topology:
    n_agents: int
    edges: frozenset[Edge]
    adjacency: tuple[frozenset[int], ...]

    @classmethod
    def from_edges(cls, n_agents: int, edges: Iterable[Sequence[int]]) -> "Topology":
        if n_agents < 1:
            raise ConfigError("graph needs at least one node")
        normed = set()
        for e in edges:
            a, b = (int(v) for v in e)
            if a == b:
                raise ConfigError(f"self-loop on node {a}")
            for v in (a, b):
                if not 0 <= v < n_agents:
                    raise ConfigError(f"edge ({a}, {b}) references node {v} outside 0..{n_agents - 1}")
            normed.add(_norm_edge(a, b))
        adj = [set() for _ in range(n_agents)]
        for a, b in normed:
            adj[a].add(b)
            adj[b].add(a)
        topo = cls(n_agents, frozenset(normed), tuple(frozenset(s) for s in adj))
        dist = bfs_distances(topo.adjacency, 0)
        if -1 in dist:
            raise ConfigError(f"graph not connected: no path 0↔{dist.index(-1)}")
        return topo

    def neighbors(self, n: int) -> frozenset[int]:
        return self.adjacency[n]

    def distances(self, source: int) -> list[int]:
        return bfs_distances(self.adjacency, source)

    def distance(self, a: int, b: int) -> int:
        return self.distances(a)[b]

    def diameter(self) -> int:
        return max(max(self.distances(s)) for s in range(self.n_agents))


def diameter(topology: Topology) -> int:
    return topology.diameter()


def path_graph(n: int) -> Topology:
    return Topology.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def ring_graph(n: int) -> Topology:
    if n < 3:
        return path_graph(n)
    return Topology.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star_graph(n: int) -> Topology:
    return Topology.from_edges(n, [(0, i) for i in range(1, n)])


def complete_graph(n: int) -> Topology:
    return Topology.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def proximity_graph(positions: Sequence[Sequence[int]], radius: float) -> Topology:
    """Link agents whose (start) positions are within Euclidean ``radius``."""
    n = len(positions)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if math.dist(positions[i], positions[j]) <= radius]
    return Topology.from_edges(n, edges)


@dataclass(frozen=True)
class LinkModel:
    kind: str = "static"
    p_up: float = 1.0

    def __post_init__(self):
        if self.kind not in ("static", "bernoulli"):
            raise ConfigError(f"unknown link model {self.kind!r}")
        if self.kind == "bernoulli" and not 0.0 < self.p_up <= 1.0:
            raise ConfigError(f"p_up must be in (0, 1], got {self.p_up}")

    @property
    def is_static(self) -> bool:
        return self.kind == "static" or self.p_up == 1.0


def sample_links(topology: Topology, model: LinkModel, rng: np.random.Generator) -> frozenset[Edge]:
    """Edges usable during one gossip round.

    Bernoulli links draw one uniform per edge in sorted edge order, so the
    outcome depends only on the seed.
    """
    if model.kind == "static" or model.p_up == 1.0:
        return topology.edges
    ordered = sorted(topology.edges)
    up = rng.random(len(ordered)) < model.p_up
    return frozenset(e for e, keep in zip(ordered, up) if keep)


def lattice_graph(rows: int, cols: int) -> Topology:
    """Agents on a ``rows x cols`` lattice, node ``r * cols + c``, 4-neighbour links."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Topology.from_edges(rows * cols, edges)
