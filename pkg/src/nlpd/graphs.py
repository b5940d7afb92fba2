"""Undirected graphs with indexed edges and a deterministic shortest path."""
from __future__ import annotations

import heapq
from collections import deque


class Graph:
    def __init__(self, num_nodes: int, edges):
        self.num_nodes = num_nodes
        self.edges = [tuple(map(int, e)) for e in edges]
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(num_nodes)]
        for k, (u, v) in enumerate(self.edges):
            self.adj[u].append((v, k))
            self.adj[v].append((u, k))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def connected(self, s: int, t: int) -> bool:
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if u == t:
                return True
            for v, _ in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return False


def shortest_path(graph: Graph, weights, s: int, t: int) -> tuple[float, tuple[int, ...]]:
    """Dijkstra on nonnegative edge weights.

    Returns (length, edge ids). Among equal-length paths the lexicographically
    smallest edge sequence wins, which keeps runs reproducible.
    """
    heap = [(0.0, (), s)]
    done = set()
    while heap:
        d, path, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == t:
            return d, path
        done.add(u)
        for v, k in graph.adj[u]:
            if v not in done:
                heapq.heappush(heap, (d + weights[k], path + (k,), v))
    raise ValueError(f"no path between {s} and {t}")
