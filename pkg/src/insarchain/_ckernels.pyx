# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same algorithms and arithmetic order as ``_pykernels``."""

import numpy as np

from libc.math cimport INFINITY, M_PI
from libc.stdlib cimport free, malloc

ctypedef long long i64


cdef struct HeapItem:
    double key
    i64 node


cdef inline bint _less(HeapItem a, HeapItem b) noexcept nogil:
    return a.key < b.key or (a.key == b.key and a.node < b.node)


cdef inline void _push(HeapItem* heap, i64* size, double key, i64 node) noexcept nogil:
    cdef i64 i = size[0]
    cdef i64 p
    cdef HeapItem item
    item.key = key
    item.node = node
    size[0] += 1
    while i > 0:
        p = (i - 1) >> 1
        if _less(item, heap[p]):
            heap[i] = heap[p]
            i = p
        else:
            break
    heap[i] = item


cdef inline HeapItem _pop(HeapItem* heap, i64* size) noexcept nogil:
    cdef HeapItem top = heap[0]
    cdef HeapItem last
    cdef i64 n, i, c
    size[0] -= 1
    n = size[0]
    if n > 0:
        last = heap[n]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= n:
                break
            if c + 1 < n and _less(heap[c + 1], heap[c]):
                c += 1
            if _less(heap[c], last):
                heap[i] = heap[c]
                i = c
            else:
                break
        heap[i] = last
    return top


def ssp_min_cost_flow(left_in, right_in, cost_in, supply_in, adj_ptr_in, adj_edge_in):
    cdef const i64[::1] left = np.ascontiguousarray(left_in, dtype=np.int64)
    cdef const i64[::1] right = np.ascontiguousarray(right_in, dtype=np.int64)
    cdef const double[::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef const i64[::1] adj_ptr = np.ascontiguousarray(adj_ptr_in, dtype=np.int64)
    cdef const i64[::1] adj_edge = np.ascontiguousarray(adj_edge_in, dtype=np.int64)
    cdef i64[::1] excess = np.array(supply_in, dtype=np.int64)
    cdef i64 n = excess.shape[0]
    cdef i64 n_edges = left.shape[0]
    k_arr = np.zeros(n_edges, dtype=np.int64)
    cdef i64[::1] k = k_arr
    pi_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] pi = pi_arr
    dist_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] dist = dist_arr
    done_arr = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] done = done_arr
    pred_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] pred = pred_arr
    settled_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] settled = settled_arr

    cdef i64 cap = 2 * n_edges + n + 1
    cdef HeapItem* heap = <HeapItem*> malloc(cap * sizeof(HeapItem))
    if heap == NULL:
        raise MemoryError()
    cdef i64 hsize, n_settled, src = 0, sink, u, v, e, idx, i
    cdef double d, c, rc, nd, pu, dmax
    cdef HeapItem top
    try:
        with nogil:
            while True:
                while src < n and excess[src] <= 0:
                    src += 1
                if src == n:
                    break
                for i in range(n):
                    dist[i] = INFINITY
                    done[i] = 0
                    pred[i] = -1
                n_settled = 0
                dist[src] = 0.0
                hsize = 0
                _push(heap, &hsize, 0.0, src)
                sink = -1
                while hsize > 0:
                    top = _pop(heap, &hsize)
                    d = top.key
                    u = top.node
                    if done[u]:
                        continue
                    done[u] = 1
                    settled[n_settled] = u
                    n_settled += 1
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
                            _push(heap, &hsize, nd, v)
                if sink < 0:
                    break
                dmax = dist[sink]
                for i in range(n_settled):
                    v = settled[i]
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
    finally:
        free(heap)
    if src < n:
        raise RuntimeError(f"node {src} has excess but no reachable deficit")
    return k_arr


def integrate_tree(order_in, parent_in, parent_edge_in, parent_sign_in, grad_in, k_in, ref_values):
    cdef const i64[::1] order = np.ascontiguousarray(order_in, dtype=np.int64)
    cdef const i64[::1] parent = np.ascontiguousarray(parent_in, dtype=np.int64)
    cdef const i64[::1] parent_edge = np.ascontiguousarray(parent_edge_in, dtype=np.int64)
    cdef const i64[::1] parent_sign = np.ascontiguousarray(parent_sign_in, dtype=np.int64)
    cdef const double[:, ::1] grad = np.ascontiguousarray(grad_in, dtype=np.float64)
    cdef const i64[:, ::1] k = np.ascontiguousarray(k_in, dtype=np.int64)
    cdef i64 n_ifg = grad.shape[0]
    cdef i64 n_nodes = order.shape[0]
    out_arr = np.empty((n_ifg, n_nodes), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] ref = np.array(np.broadcast_to(ref_values, (n_ifg,)), dtype=np.float64)
    cdef double two_pi = 2.0 * M_PI
    cdef double step
    cdef i64 q, j, v, p, e, root = order[0]
    with nogil:
        for q in range(n_ifg):
            out[q, root] = ref[q]
        for j in range(1, n_nodes):
            v = order[j]
            p = parent[v]
            e = parent_edge[v]
            if parent_sign[v] > 0:
                for q in range(n_ifg):
                    step = grad[q, e] + two_pi * <double> k[q, e]
                    out[q, v] = out[q, p] + step
            else:
                for q in range(n_ifg):
                    step = grad[q, e] + two_pi * <double> k[q, e]
                    out[q, v] = out[q, p] - step
    return out_arr
