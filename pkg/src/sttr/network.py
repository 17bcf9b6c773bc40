"""Nearest-neighbour communication graph and synchronous exchange rounds."""

from dataclasses import dataclass

import numpy as np


class TopologyError(ValueError):
    pass


@dataclass
class Topology:
    """Directed in-neighbourhoods: ``neighbors[i]`` lists the ids observer ``i`` hears from."""

    n: int
    m: int
    neighbors: np.ndarray

    def adjacency(self):
        adj = np.zeros((self.n, self.n), dtype=bool)
        if self.m:
            rows = np.repeat(np.arange(self.n), self.m)
            adj[rows, self.neighbors.ravel()] = True
        return adj


def neighbor_indices(positions, m):
    """Indices of the ``m`` nearest other observers, ties to the lower index.

    Broadcasts over leading batch axes: ``positions`` is (..., n, 3) and the
    result is (..., n, m).
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[-2]
    if m < 0 or (m > 0 and n <= m):
        raise TopologyError(f"need more than {m} observers for {m} neighbours, have {n}")
    if m == 0:
        return np.zeros(positions.shape[:-1] + (0,), dtype=int)
    diff = positions[..., :, None, :] - positions[..., None, :, :]
    d2 = np.einsum("...k,...k->...", diff, diff)
    d2[..., np.arange(n), np.arange(n)] = np.inf
    # stable sort keeps index order among equal distances
    return np.argsort(d2, axis=-1, kind="stable")[..., :m]


def nearest_neighbors(positions, m):
    positions = np.asarray(positions, dtype=float)
    return Topology(positions.shape[0], m, neighbor_indices(positions, m))


def adjacency_from_indices(idx, n):
    """Boolean (..., n, n) adjacency from (..., n, m) neighbour indices."""
    adj = np.zeros(idx.shape[:-1] + (n,), dtype=bool)
    np.put_along_axis(adj, idx, True, axis=-1)
    return adj


def exchange_round(topology, packets):
    """Deliver packets along the graph.

    ``packets`` maps sender id to its packet (a sequence indexed by id also
    works). Returns one inbox per observer holding the packets of its
    neighbours in neighbour order. All packets must exist before any inbox is
    built, which is the step barrier.
    """
    if not isinstance(packets, dict):
        packets = dict(enumerate(packets))
    missing = [i for i in range(topology.n) if i not in packets]
    if missing:
        raise TopologyError(f"missing packets from observers {missing}")
    return [[packets[int(j)] for j in topology.neighbors[i]] for i in range(topology.n)]


def topology_rows(step, topology):
    """Rows ``(step, observer, neighbor1..m)`` for the topology dump."""
    return [[step, i, *map(int, topology.neighbors[i])] for i in range(topology.n)]
