"""Network topologies and consensus weight matrices.

Random geometric graphs are drawn on the unit torus, so distances wrap
around the edges of the unit square.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected graph on vertices ``0..m-1``.

    ``edges`` holds sorted pairs ``(i, j)`` with ``i < j``. ``coords`` is an
    ``(m, 2)`` array for geometric graphs and ``None`` otherwise.
    """

    m: int
    edges: tuple[tuple[int, int], ...]
    coords: np.ndarray | None = field(default=None, compare=False)
    rho_c: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"node count must be positive, got {self.m}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"edge ({i}, {j}) out of range for m={self.m}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=np.float64)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.m, self.m), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        return A

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "rho_c": self.rho_c,
            "coords": None if self.coords is None else self.coords.tolist(),
            "edges": [list(e) for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Graph":
        coords = data.get("coords")
        return cls(
            m=int(data["m"]),
            edges=tuple(tuple(e) for e in data["edges"]),
            coords=None if coords is None else np.asarray(coords, dtype=np.float64),
            rho_c=data.get("rho_c"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def torus_sq_distances(coords: np.ndarray) -> np.ndarray:
    """Pairwise squared wraparound distances on the unit torus."""
    delta = np.abs(coords[:, None, :] - coords[None, :, :])
    delta = np.minimum(delta, 1.0 - delta)
    return np.sum(delta**2, axis=-1)


def rgg_edges(coords: np.ndarray, rho_c: float) -> tuple[tuple[int, int], ...]:
    # squared comparison avoids sqrt rounding right at the radius
    close = torus_sq_distances(coords) <= rho_c * rho_c
    iu, ju = np.nonzero(np.triu(close, k=1))
    return tuple(zip(iu.tolist(), ju.tolist()))


def generate_rgg(m: int, rho_c: float, seed) -> Graph:
    """Random geometric graph with ``m`` uniform points on the unit torus.

    Vertices ``i`` and ``j`` are joined when their wraparound distance is at
    most ``rho_c``. The result may be disconnected.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not rho_c > 0:
        raise ValueError("rho_c must be positive")
    rng = np.random.default_rng(seed)
    coords = rng.random((m, 2))
    return Graph(m=m, edges=rgg_edges(coords, rho_c), coords=coords, rho_c=float(rho_c))


def generate_connected_rgg(m: int, rho_c: float, seed: int, retries: int = 100) -> tuple[Graph, int]:
    """Draw RGGs until one is connected.

    Attempt ``k`` uses the derived seed ``[seed, k]``. Returns the graph and
    the attempt index that produced it.
    """
    for attempt in range(retries + 1):
        g = generate_rgg(m, rho_c, [seed, attempt])
        if is_connected(g):
            return g, attempt
    raise DisconnectedGraphError(
        f"no connected RGG (m={m}, rho_c={rho_c}, seed={seed}) after {retries} retries"
    )


def complete_graph(m: int) -> Graph:
    return Graph(m=m, edges=tuple((i, j) for i in range(m) for j in range(i + 1, m)))


def path_graph(m: int) -> Graph:
    return Graph(m=m, edges=tuple((i, i + 1) for i in range(m - 1)))


def cycle_graph(m: int) -> Graph:
    if m < 3:
        raise ValueError("cycle needs at least 3 vertices")
    return Graph(m=m, edges=tuple((i, (i + 1) % m) for i in range(m)))


def is_connected(g: Graph) -> bool:
    if g.m <= 1:
        return True
    n, _ = connected_components(csr_matrix(g.adjacency()), directed=False)
    return n == 1


def metropolis_weights(g: Graph) -> np.ndarray:
    """Metropolis-Hastings consensus weights.

    ``W[i, j] = 1 / (1 + max(deg_i, deg_j))`` on edges, the diagonal takes up
    the slack so rows sum to one. The result is symmetric, doubly stochastic
    and elementwise nonnegative.
    """
    if not is_connected(g):
        raise DisconnectedGraphError("Metropolis weights need a connected graph")
    deg = g.degrees()
    W = np.zeros((g.m, g.m))
    for i, j in g.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(g.m)] = 1.0 - W.sum(axis=1)
    return W


def second_eigenvalue(W: np.ndarray) -> float:
    """Largest eigenvalue magnitude of ``W`` on the complement of ``1``."""
    m = W.shape[0]
    if m == 1:
        return 0.0
    J = np.full((m, m), 1.0 / m)
    return float(np.max(np.abs(np.linalg.eigvalsh(W - J))))
