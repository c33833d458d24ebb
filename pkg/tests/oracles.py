"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the library's code paths: classic deque BFS
instead of vectorized level BFS, dense truncated matrix powers instead of
fixed-point iteration, and direct triple-loop summation for the
contrastive loss.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def undirected_adjacency(n: int, edges) -> list[set[int]]:
    """Neighbor sets over node indices; self-loops dropped (inert in BFS)."""
    adj = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return adj


def degree_oracle(n: int, edges) -> list[float]:
    """Count distinct undirected partners per node by scanning the edge list."""
    partners = [set() for _ in range(n)]
    for u, v in edges:
        if u != v:
            partners[u].add(v)
            partners[v].add(u)
    if n <= 1:
        return [0.0] * n
    return [len(p) / (n - 1) for p in partners]


def bfs_distances(adj: list[set[int]], source: int) -> dict[int, int]:
    """Classic FIFO BFS."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def closeness_oracle(n: int, edges) -> list[float]:
    adj = undirected_adjacency(n, edges)
    out = []
    for i in range(n):
        dist = bfs_distances(adj, i)
        reach = len(dist) - 1
        if reach == 0 or n <= 1:
            out.append(0.0)
            continue
        total = sum(d for node, d in dist.items() if node != i)
        out.append((reach / (n - 1)) * (reach / total))
    return out


def harmonic_oracle(n: int, edges) -> list[float]:
    adj = undirected_adjacency(n, edges)
    out = []
    for i in range(n):
        if n <= 1:
            out.append(0.0)
            continue
        dist = bfs_distances(adj, i)
        out.append(sum(1.0 / d for node, d in dist.items() if node != i) / (n - 1))
    return out


def katz_oracle(n: int, edges, alpha: float, terms: int = 200) -> list[float]:
    """Truncated series sum_{k=1..terms} alpha^k A^k 1, then unit norm.

    Self-loops are legitimate walk steps, so they stay in A.
    """
    a = np.zeros((n, n))
    for u, v in edges:
        if u == v:
            a[u, u] = 1.0
        else:
            a[u, v] = 1.0
            a[v, u] = 1.0
    x = np.ones(n)
    acc = np.zeros(n)
    for _ in range(terms):
        x = alpha * (a @ x)
        acc += x
    norm = np.linalg.norm(acc)
    if norm == 0:
        return [0.0] * n
    return list(acc / norm)


def katz_effective_alpha(n: int, edges, alpha: float) -> float:
    """Mirror the implementation's fallback rule with the row-sum bound."""
    wdeg = [0] * n
    seen = set()
    for u, v in edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        if u == v:
            wdeg[u] += 1
        else:
            wdeg[u] += 1
            wdeg[v] += 1
    bound = max(wdeg) if wdeg else 0
    if bound > 0 and alpha * bound >= 0.95:
        return 0.85 / bound
    return alpha


def supcon_oracle(embeddings: np.ndarray, labels, temperature: float) -> float:
    """Direct summation of the supervised contrastive loss."""
    m = embeddings.shape[0]
    total = 0.0
    for i in range(m):
        others = [a for a in range(m) if a != i]
        positives = [p for p in others if labels[p] == labels[i]]
        if not positives:
            continue
        denom = sum(
            math.exp(float(embeddings[i] @ embeddings[a]) / temperature) for a in others
        )
        inner = 0.0
        for p in positives:
            num = math.exp(float(embeddings[i] @ embeddings[p]) / temperature)
            inner += math.log(num / denom)
        total += -inner / len(positives)
    return total


def pairwise_mean_ssim(heatmaps_a, heatmaps_b, ssim_fn, same_group: bool) -> float:
    """Mean SSIM over all cross pairs (self-pairs excluded within a group)."""
    vals = []
    for i, a in enumerate(heatmaps_a):
        for j, b in enumerate(heatmaps_b):
            if same_group and i == j:
                continue
            vals.append(ssim_fn(a, b))
    return sum(vals) / len(vals)
