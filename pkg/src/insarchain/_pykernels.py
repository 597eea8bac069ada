"""Pure-Python reference kernels; ``_ckernels.pyx`` mirrors these operation for operation."""

import heapq
import math

import numpy as np

TWO_PI = 2.0 * math.pi


def ssp_min_cost_flow(left, right, cost, supply, adj_ptr, adj_edge):
    """Integer min-cost flow on an undirected, uncapacitated graph.

    Edge ``e`` joins ``right[e]`` and ``left[e]``; ``k[e]`` counts net units
    moved from ``right[e]`` to ``left[e]`` and costs ``cost[e] * |k[e]|``.
    Node ``v`` must emit net ``supply[v]`` units (sum of supplies is zero).

    Successive shortest paths with node potentials, one unit per augmentation,
    always from the lowest-index node with remaining excess. Returns ``k``
    (int64) or raises ``RuntimeError`` if some excess cannot reach a deficit.
    """
    left = [int(v) for v in left]
    right = [int(v) for v in right]
    cost = [float(c) for c in cost]
    adj_ptr = [int(v) for v in adj_ptr]
    adj_edge = [int(v) for v in adj_edge]
    n = len(supply)
    excess = [int(s) for s in supply]
    k = [0] * len(left)
    pi = [0.0] * n
    inf = math.inf
    src = 0
    while True:
        while src < n and excess[src] <= 0:
            src += 1
        if src == n:
            break
        dist = [inf] * n
        done = [False] * n
        pred = [-1] * n
        settled = []
        dist[src] = 0.0
        heap = [(0.0, src)]
        sink = -1
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            settled.append(u)
            if excess[u] < 0:
                sink = u
                break
            pu = pi[u]
            for idx in range(adj_ptr[u], adj_ptr[u + 1]):
                e = adj_edge[idx]
                if right[e] == u:
                    v = left[e]
                    c = cost[e] if k[e] >= 0 else -cost[e]
                else:
                    v = right[e]
                    c = cost[e] if k[e] <= 0 else -cost[e]
                if done[v]:
                    continue
                rc = c + pu - pi[v]
                if rc < 0.0:
                    rc = 0.0
                nd = d + rc
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = e
                    heapq.heappush(heap, (nd, v))
        if sink < 0:
            raise RuntimeError(f"node {src} has excess but no reachable deficit")
        dmax = dist[sink]
        for v in settled:
            pi[v] += dist[v] - dmax
        v = sink
        while v != src:
            e = pred[v]
            if left[e] == v:
                k[e] += 1
                v = right[e]
            else:
                k[e] -= 1
                v = left[e]
        excess[src] -= 1
        excess[sink] += 1
    return np.array(k, dtype=np.int64)


def integrate_tree(order, parent, parent_edge, parent_sign, grad, k, ref_values):
    """Accumulate corrected edge gradients along a spanning tree.

    ``grad`` and ``k`` are (n_ifg, n_edges); returns (n_ifg, n_nodes) with
    ``out[:, order[0]] = ref_values``.
    """
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    k = np.ascontiguousarray(k, dtype=np.int64)
    n_ifg = grad.shape[0]
    out = np.empty((n_ifg, len(order)), dtype=np.float64)
    out[:, order[0]] = ref_values
    for v in order[1:]:
        e = parent_edge[v]
        step = grad[:, e] + TWO_PI * k[:, e]
        if parent_sign[v] > 0:
            out[:, v] = out[:, parent[v]] + step
        else:
            out[:, v] = out[:, parent[v]] - step
    return out
