"""Social graphs, per-agent Laplacians and confidence-bound filtering.

Agents are indexed from 0.  A :class:`SocialGraph` stores one neighbour
set per agent; graphs read from edge lists are undirected and connected,
while graphs returned by :func:`confidence_filter` may be directional
(``j`` in agent ``i``'s set but not the converse) and disconnected.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DisconnectedError, EmptyNeighborhoodError, ParseError, SelfLoopError

__all__ = [
    "FilterMode",
    "SocialGraph",
    "load_edge_list",
    "zachary",
    "agent_laplacian",
    "dynamics_matrix",
    "confidence_filter",
]

# Zachary's karate club, 78 friendship ties among 34 members (0-based;
# member k here is member k+1 in Zachary's 1977 labelling).
ZACHARY_EDGES = (
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10),
    (0, 11), (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2),
    (1, 3), (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30), (2, 3),
    (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28), (2, 32), (3, 7),
    (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
    (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33),
    (22, 32), (22, 33), (23, 25), (23, 27), (23, 29), (23, 32), (23, 33),
    (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33),
    (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
)

# Slack on the bound test so that gaps such as 0.26 - (-0.94), which
# evaluate to 1.2000000000000002, still count as "within 1.2".
_EPS_SLACK = 1e-12


class FilterMode(str, enum.Enum):
    FIXED = "fixed"
    COMPLETE = "complete"
    SECOND = "second"

    @classmethod
    def parse(cls, value: "str | FilterMode") -> "FilterMode":
        if isinstance(value, cls):
            return value
        aliases = {
            "fixed": cls.FIXED,
            "complete": cls.COMPLETE,
            "second": cls.SECOND,
            "secondneighborhood": cls.SECOND,
            "second-neighborhood": cls.SECOND,
            "second_neighborhood": cls.SECOND,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown filter mode {value!r}") from None


@dataclass(frozen=True)
class SocialGraph:
    """Agent count plus one neighbour set per agent.

    Use :meth:`from_edges` for undirected input graphs; the plain
    constructor accepts arbitrary (possibly directional) neighbour sets.
    """

    n: int
    neighbor_sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a social graph needs at least two agents")
        if len(self.neighbor_sets) != self.n:
            raise ValueError("one neighbour set per agent is required")
        for i, nbrs in enumerate(self.neighbor_sets):
            if i in nbrs:
                raise SelfLoopError(f"agent {i} lists itself as a neighbour")
            if any(j < 0 or j >= self.n for j in nbrs):
                raise IndexError(f"neighbour index out of range for agent {i}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "SocialGraph":
        """Undirected graph on ``n`` agents; verifies connectivity."""
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for i, j in edges:
            if i == j:
                raise SelfLoopError(f"self-loop at agent {i}")
            nbrs[i].add(j)
            nbrs[j].add(i)
        g = cls(n, tuple(frozenset(s) for s in nbrs))
        if not g.is_connected():
            raise DisconnectedError("social graph is not connected")
        return g

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        """Unordered pairs ``(min, max)`` present in either direction."""
        return frozenset(
            (min(i, j), max(i, j)) for i, nb in enumerate(self.neighbor_sets) for j in nb
        )

    def degree(self, i: int) -> int:
        return len(self.neighbor_sets[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(s) for s in self.neighbor_sets], dtype=int)

    def is_symmetric(self) -> bool:
        return all(i in self.neighbor_sets[j] for i, nb in enumerate(self.neighbor_sets) for j in nb)

    def is_connected(self) -> bool:
        """Connectivity of the underlying undirected graph."""
        und: list[set[int]] = [set(s) for s in self.neighbor_sets]
        for i, nb in enumerate(self.neighbor_sets):
            for j in nb:
                und[j].add(i)
        seen = {0}
        queue = deque([0])
        while queue:
            k = queue.popleft()
            for j in und[k]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return len(seen) == self.n

    def components(self) -> list[list[int]]:
        """Connected components of the underlying undirected graph."""
        und: list[set[int]] = [set(s) for s in self.neighbor_sets]
        for i, nb in enumerate(self.neighbor_sets):
            for j in nb:
                und[j].add(i)
        label = [-1] * self.n
        comps = []
        for start in range(self.n):
            if label[start] >= 0:
                continue
            label[start] = len(comps)
            comp = [start]
            queue = deque([start])
            while queue:
                k = queue.popleft()
                for j in und[k]:
                    if label[j] < 0:
                        label[j] = label[start]
                        comp.append(j)
                        queue.append(j)
            comps.append(sorted(comp))
        return comps

    def to_edge_list(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in sorted(self.edges))


def load_edge_list(text: str) -> SocialGraph:
    """Parse whitespace-separated ``i j`` lines (``#`` comments allowed)."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"line {lineno}: expected two agent indices, got {raw!r}")
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer agent index in {raw!r}") from None
        if i < 0 or j < 0:
            raise ParseError(f"line {lineno}: agent indices must be non-negative")
        if i == j:
            raise SelfLoopError(f"line {lineno}: self-loop at agent {i}")
        pairs.append((i, j))
    if not pairs:
        raise ParseError("edge list is empty")
    n = 1 + max(max(p) for p in pairs)
    return SocialGraph.from_edges(n, pairs)


def zachary() -> SocialGraph:
    return SocialGraph.from_edges(34, ZACHARY_EDGES)


def agent_laplacian(g: SocialGraph, i: int) -> np.ndarray:
    """Star-subgraph Laplacian of agent ``i``.

    ``x @ L @ x`` equals ``sum((x[i] - x[j])**2 for j in N_i)``; nonzero
    entries sit only on rows/columns ``i`` and ``N_i``.
    """
    if not 0 <= i < g.n:
        raise IndexError(f"agent index {i} out of range for n={g.n}")
    L = np.zeros((g.n, g.n))
    for j in g.neighbor_sets[i]:
        L[i, i] += 1.0
        L[j, j] += 1.0
        L[i, j] -= 1.0
        L[j, i] -= 1.0
    return L


def dynamics_matrix(g: SocialGraph) -> np.ndarray:
    """Drift of the continuous HK model: ``D^{-1} A - I`` row by row."""
    lam = -np.eye(g.n)
    for i, nbrs in enumerate(g.neighbor_sets):
        if not nbrs:
            raise EmptyNeighborhoodError(i)
        w = 1.0 / len(nbrs)
        for j in nbrs:
            lam[i, j] = w
    return lam


def _candidates(g: SocialGraph, i: int, mode: FilterMode) -> set[int]:
    if mode is FilterMode.FIXED:
        return set(g.neighbor_sets[i])
    if mode is FilterMode.COMPLETE:
        return set(range(g.n)) - {i}
    cand = set(g.neighbor_sets[i])
    for j in g.neighbor_sets[i]:
        cand.update(g.neighbor_sets[j])
    cand.discard(i)
    return cand


def confidence_filter(
    g: SocialGraph,
    x: Sequence[float],
    eps: "float | Sequence[float]",
    mode: "str | FilterMode" = FilterMode.FIXED,
) -> SocialGraph:
    """Keep candidate ``j`` for agent ``i`` iff ``|x_i - x_j| <= eps_i``.

    The returned neighbour sets are directional when ``eps`` differs per
    agent.  Raises :class:`EmptyNeighborhoodError` for the first agent
    left without neighbours.
    """
    mode = FilterMode.parse(mode)
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"opinion vector must have length {g.n}")
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (g.n,))
    if np.any(eps <= 0):
        raise ValueError("confidence bounds must be positive")
    sets = []
    for i in range(g.n):
        kept = frozenset(
            j for j in _candidates(g, i, mode) if abs(x[i] - x[j]) <= eps[i] + _EPS_SLACK
        )
        if not kept:
            raise EmptyNeighborhoodError(i)
        sets.append(kept)
    return SocialGraph(g.n, tuple(sets))
