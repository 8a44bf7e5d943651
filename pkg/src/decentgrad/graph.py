"""Undirected communication graphs for the agent network.

Agents are 0-indexed. Edges are stored as unordered pairs (i, j) with i < j;
self-loops and duplicates are rejected at construction. The builders always
return connected graphs; `Topology` itself may represent a disconnected graph
(checked with :func:`is_connected`).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

Edge = tuple[int, int]


def _normalize_edge(i: int, j: int) -> Edge:
    if i == j:
        raise ValueError(f"self-loop ({i},{j}) is not a valid edge")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Topology:
    """An undirected graph on `num_agents` vertices, immutable once built."""

    num_agents: int
    edges: frozenset[Edge]

    def __post_init__(self) -> None:
        if self.num_agents < 1:
            raise ValueError(f"need at least one agent, got {self.num_agents}")
        normalized = frozenset(_normalize_edge(i, j) for i, j in self.edges)
        object.__setattr__(self, "edges", normalized)
        for i, j in normalized:
            if not (0 <= i < self.num_agents and 0 <= j < self.num_agents):
                raise ValueError(f"edge ({i},{j}) out of range for {self.num_agents} agents")

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i in (a, b))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_agents, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_agents, self.num_agents))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def laplacian(self) -> np.ndarray:
        return np.diag(self.degrees().astype(float)) - self.adjacency()

    def to_config(self) -> dict[str, Any]:
        return {
            "kind": "explicit",
            "d": self.num_agents,
            "edges": sorted([list(e) for e in self.edges]),
        }


def build_ring(d: int) -> Topology:
    """Cycle on d agents; d=2 degenerates to a single edge."""
    if d < 2:
        raise ValueError(f"ring needs at least 2 agents, got {d}")
    edges = {_normalize_edge(i, (i + 1) % d) for i in range(d)}
    return Topology(d, frozenset(edges))


def build_complete(d: int) -> Topology:
    """Complete graph on d agents."""
    if d < 2:
        raise ValueError(f"complete graph needs at least 2 agents, got {d}")
    edges = {(i, j) for i in range(d) for j in range(i + 1, d)}
    return Topology(d, frozenset(edges))


def _random_spanning_tree(d: int, rng: np.random.Generator) -> set[Edge]:
    # Prüfer decode: a uniform sequence gives a uniform labeled tree.
    if d == 2:
        return {(0, 1)}
    seq = rng.integers(0, d, size=d - 2)
    degree = np.ones(d, dtype=int)
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(d) if degree[i] == 1]
    heapq.heapify(leaves)
    edges: set[Edge] = set()
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.add(_normalize_edge(leaf, int(v)))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.add(_normalize_edge(u, w))
    return edges


def build_random_connected(d: int, edge_prob: float, seed: int) -> Topology:
    """Erdős–Rényi draw unioned with a uniformly random spanning tree.

    The tree guarantees connectivity without rejection sampling; the result is
    deterministic for a fixed (d, edge_prob, seed).
    """
    if d < 2:
        raise ValueError(f"random graph needs at least 2 agents, got {d}")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge_prob must lie in [0,1], got {edge_prob}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    edges = _random_spanning_tree(d, rng)
    for i in range(d):
        for j in range(i + 1, d):
            if rng.random() < edge_prob:
                edges.add((i, j))
    return Topology(d, frozenset(edges))


def is_connected(t: Topology) -> bool:
    """Breadth-first traversal from vertex 0 reaches every vertex."""
    if t.num_agents == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(t.num_agents)]
    for a, b in t.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == t.num_agents


def topology_from_config(cfg: dict[str, Any]) -> Topology:
    """Build a topology from a config block.

    Accepted kinds: ring, complete, random (with edge_prob and seed), and
    explicit (with an edge list). Agent indices in explicit edge lists are
    0-indexed.
    """
    kind = cfg.get("kind")
    if kind == "ring":
        return build_ring(int(cfg["d"]))
    if kind == "complete":
        return build_complete(int(cfg["d"]))
    if kind == "random":
        return build_random_connected(int(cfg["d"]), float(cfg["edge_prob"]), int(cfg["seed"]))
    if kind == "explicit":
        edges: Iterable[Iterable[int]] = cfg["edges"]
        return Topology(int(cfg["d"]), frozenset(tuple(int(v) for v in e) for e in edges))
    raise ValueError(f"unknown topology kind: {kind!r}")
