"""Shortest action sequences between saved screens."""

from __future__ import annotations

from collections import deque
from typing import Collection, Optional

from uitasker.graph.model import AppGraph, GraphError, TransitionEdge, UnknownNode


class NoPath(GraphError):
    pass


def _distances(graph: AppGraph, start: int, edges: list[TransitionEdge], reverse: bool = False) -> dict[int, int]:
    adjacency: dict[int, list[int]] = {}
    for e in edges:
        a, b = (e.dest, e.source) if reverse else (e.source, e.dest)
        adjacency.setdefault(a, []).append(b)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adjacency.get(node, ()):
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


def shortest_path(
    graph: AppGraph,
    source: int,
    dest: int,
    excluded: Collection[tuple] = (),
) -> list[TransitionEdge]:
    """Fewest-edge path from ``source`` to ``dest``.

    Among equally short paths the one with the larger summed traversal_count
    wins, then the lexicographically smallest sequence of visited node ids.
    ``excluded`` holds edge keys that must not be used.
    """
    for node_id in (source, dest):
        if node_id not in graph.nodes:
            raise UnknownNode(f"no node {node_id}")
    if source == dest:
        return []
    edges = [e for e in graph.edges.values() if e.key not in excluded]
    from_source = _distances(graph, source, edges)
    if dest not in from_source:
        raise NoPath(f"no path from {source} to {dest}")
    to_dest = _distances(graph, dest, edges, reverse=True)
    length = from_source[dest]
    useful = [
        e
        for e in edges
        if e.source in from_source
        and e.dest in to_dest
        and from_source[e.source] + 1 + to_dest[e.dest] == length
    ]

    # best[n] = (traversal total, node sequence after n, edges) for the best n -> dest suffix
    best: dict[int, tuple[int, tuple[int, ...], tuple[TransitionEdge, ...]]] = {dest: (0, (), ())}
    layers: dict[int, list[TransitionEdge]] = {}
    for e in useful:
        layers.setdefault(to_dest[e.source], []).append(e)
    for remaining in range(1, length + 1):
        for e in sorted(layers.get(remaining, ()), key=TransitionEdge.sort_key):
            total, seq, path = best[e.dest]
            candidate = (total + e.traversal_count, (e.dest,) + seq, (e,) + path)
            current: Optional[tuple] = best.get(e.source)
            if current is None or (-candidate[0], candidate[1]) < (-current[0], current[1]):
                best[e.source] = candidate
    return list(best[source][2])
