"""Minimum-cost-flow phase unwrapping of sparse pixels on a Delaunay network.

Edge ``e = (u, v)`` with ``u < v`` carries the wrapped gradient
``wrap(phi[v] - phi[u])``. A triangle's residue is the oriented sum of its
wrapped gradients over 2 pi. Unwrapping picks integer cycle counts ``k_e``
so every triangle sums to zero, minimising ``sum(cost_e * |k_e|)``; this is
a min-cost flow on the dual graph (triangles plus one ground node standing
for everything outside the convex hull).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from . import kernels
from .errors import DegenerateInput, InfeasibleNetwork
from .synthstack import wrap

TWO_PI = 2.0 * math.pi


@dataclass
class TriNetwork:
    points: np.ndarray       # (n, 2)
    triangles: np.ndarray    # (T, 3), counterclockwise
    edges: np.ndarray        # (E, 2), u < v, lexicographically sorted
    tri_edges: np.ndarray    # (T, 3) edge index of (a,b), (b,c), (c,a)
    tri_signs: np.ndarray    # (T, 3) +1 where the traversal runs u -> v
    edge_tris: np.ndarray    # (E, 2) [left, right]; -1 outside the hull
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self):
        return len(self.points)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.points[self.edges[:, 1]] - self.points[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def dual_graph(self):
        """(left, right, adj_ptr, adj_edge) of the dual graph; ground is node T."""
        if "dual" not in self._cache:
            T = self.n_triangles
            left = np.where(self.edge_tris[:, 0] >= 0, self.edge_tris[:, 0], T)
            right = np.where(self.edge_tris[:, 1] >= 0, self.edge_tris[:, 1], T)
            adj_ptr, adj_edge = _csr(T + 1, left, right)
            self._cache["dual"] = (left, right, adj_ptr, adj_edge)
        return self._cache["dual"]

    def spanning_tree(self, root: int):
        """BFS tree over the pixels: (order, parent, parent_edge, parent_sign)."""
        key = ("tree", int(root))
        if key not in self._cache:
            n = self.n_nodes
            adj_ptr, adj_edge = _csr(n, self.edges[:, 0], self.edges[:, 1])
            parent = np.full(n, -1, dtype=np.int64)
            parent_edge = np.full(n, -1, dtype=np.int64)
            parent_sign = np.zeros(n, dtype=np.int64)
            seen = np.zeros(n, dtype=bool)
            seen[root] = True
            order = [root]
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for e in adj_edge[adj_ptr[u]:adj_ptr[u + 1]]:
                    a, b = self.edges[e]
                    v = b if a == u else a
                    if not seen[v]:
                        seen[v] = True
                        parent[v] = u
                        parent_edge[v] = e
                        parent_sign[v] = 1 if a == u else -1
                        order.append(v)
                        queue.append(v)
            if len(order) != n:
                raise DegenerateInput("network is not connected")
            self._cache[key] = (np.array(order, dtype=np.int64), parent, parent_edge, parent_sign)
        return self._cache[key]

    def boundary_cycle(self):
        """Hull edges with the sign they carry in their only triangle (counterclockwise)."""
        idx = np.flatnonzero((self.edge_tris < 0).any(axis=1))
        signs = np.where(self.edge_tris[idx, 0] >= 0, 1, -1)
        return idx, signs


def _csr(n, a, b):
    """Node -> incident edges (ascending edge index) for edges joining a[e] and b[e]."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    eid = np.arange(len(a), dtype=np.int64)
    nodes = np.concatenate([a, b])
    edges = np.concatenate([eid, eid])
    order = np.lexsort((edges, nodes))
    adj_edge = edges[order]
    counts = np.bincount(nodes, minlength=n)
    adj_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return adj_ptr, adj_edge


@dataclass(frozen=True)
class FlowSolution:
    k: np.ndarray          # (E,) integer cycle corrections
    objective: float


# -- triangulation -----------------------------------------------------------

def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _incircle_sign(a, b, c, d):
    """Sign of the in-circle determinant (positive: d inside circle abc, abc CCW)."""
    rows = []
    perm = 0.0
    for p in (a, b, c):
        dx, dy = p[0] - d[0], p[1] - d[1]
        rows.append((dx, dy, dx * dx + dy * dy))
        perm = max(perm, abs(dx) + abs(dy))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    det = a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0)
    if abs(det) > 1e-10 * perm ** 4:
        return 1 if det > 0 else -1
    fa, fb, fc, fd = ([Fraction(x) for x in p] for p in (a, b, c, d))
    rows = []
    for p in (fa, fb, fc):
        dx, dy = p[0] - fd[0], p[1] - fd[1]
        rows.append((dx, dy, dx * dx + dy * dy))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    det = a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0)
    return (det > 0) - (det < 0)


def _normalize_cocircular(points, tris):
    """Flip cocircular diagonals to the lexicographically smaller one.

    A diagonal's key is its pair of endpoint coordinates sorted by (x, y).
    Each flip strictly lowers the sorted multiset of diagonal keys, so the
    loop terminates; only cocircular quadrilaterals are touched, so the
    result is still Delaunay.
    """
    pts = [tuple(map(float, p)) for p in points]
    tris = [list(t) for t in tris]
    edge_map = {}
    for ti, t in enumerate(tris):
        for j in range(3):
            edge_map.setdefault(frozenset((t[j], t[(j + 1) % 3])), set()).add(ti)

    def key(a, b):
        return tuple(sorted((pts[a], pts[b])))

    stack = sorted((tuple(sorted(e)) for e, ts in edge_map.items() if len(ts) == 2), reverse=True)
    while stack:
        p, q = stack.pop()
        ts = edge_map.get(frozenset((p, q)))
        if not ts or len(ts) != 2:
            continue
        t1, t2 = sorted(ts)
        # orient so that t1 = (p, q, r) and t2 = (q, p, s)
        a = tris[t1]
        j = a.index(p)
        if a[(j + 1) % 3] != q:
            p, q = q, p
            j = a.index(p)
        r = a[(j + 2) % 3]
        s = next(v for v in tris[t2] if v != p and v != q)
        if _incircle_sign(pts[p], pts[q], pts[r], pts[s]) != 0:
            continue
        if key(r, s) >= key(p, q):
            continue
        for e in ((p, q), (q, r), (r, p)):
            edge_map[frozenset(e)].discard(t1)
        for e in ((q, p), (p, s), (s, q)):
            edge_map[frozenset(e)].discard(t2)
        del edge_map[frozenset((p, q))]
        tris[t1] = [p, s, r]
        tris[t2] = [s, q, r]
        for ti in (t1, t2):
            t = tris[ti]
            for jj in range(3):
                edge_map.setdefault(frozenset((t[jj], t[(jj + 1) % 3])), set()).add(ti)
        for e in ((p, s), (s, q), (q, r), (r, p)):
            stack.append(tuple(sorted(e)))
    return tris


def triangulate(points) -> TriNetwork:
    """Delaunay network over planar points.

    Cocircular ties are resolved by preferring the diagonal whose sorted
    endpoint coordinates are lexicographically smallest (x, then y).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput("points must be an (n, 2) array")
    n = len(pts)
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInput("non-finite coordinates")
    if len(np.unique(pts, axis=0)) != n:
        raise DegenerateInput("duplicate points")
    centered = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-12 * max(1.0, np.abs(centered).max())) < 2:
        raise DegenerateInput("all points are collinear")
    try:
        dl = Delaunay(pts)
    except Exception as exc:  # qhull errors are not a public exception type
        raise DegenerateInput(f"triangulation failed: {exc}") from exc
    if len(dl.coplanar):
        raise DegenerateInput(f"{len(dl.coplanar)} points left out of the triangulation")

    tris = []
    for a, b, c in dl.simplices.tolist():
        o = _orient(pts[a], pts[b], pts[c])
        if o == 0:
            continue
        tris.append([a, b, c] if o > 0 else [a, c, b])
    tris = _normalize_cocircular(pts, tris)
    canon = []
    for t in tris:
        j = t.index(min(t))
        canon.append(t[j:] + t[:j])
    triangles = np.array(sorted(canon), dtype=np.int64)
    return _build_network(pts, triangles)


def _build_network(pts, triangles) -> TriNetwork:
    oriented = np.stack(
        [triangles, np.roll(triangles, -1, axis=1)], axis=-1
    ).reshape(-1, 2)
    undirected = np.sort(oriented, axis=1)
    edges, inverse = np.unique(undirected, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    T = len(triangles)
    tri_edges = inverse.reshape(T, 3)
    tri_signs = np.where(oriented[:, 0] < oriented[:, 1], 1, -1).astype(np.int8).reshape(T, 3)
    edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
    tri_ids = np.repeat(np.arange(T), 3)
    for e, t, s in zip(inverse, tri_ids, tri_signs.reshape(-1)):
        slot = 0 if s > 0 else 1
        if edge_tris[e, slot] >= 0:
            raise DegenerateInput(f"edge {tuple(edges[e])} is used twice with the same orientation")
        edge_tris[e, slot] = t
    return TriNetwork(pts, triangles, edges.astype(np.int64), tri_edges.astype(np.int64),
                      tri_signs, edge_tris)


# -- residues, flow, integration ---------------------------------------------

def wrapped_gradients(net: TriNetwork, wrapped_phase) -> np.ndarray:
    phi = np.asarray(wrapped_phase, dtype=float)
    return wrap(phi[..., net.edges[:, 1]] - phi[..., net.edges[:, 0]])


def compute_residues(net: TriNetwork, wrapped_phase) -> np.ndarray:
    """Integer residue per triangle; accepts (n_nodes,) or (n_ifg, n_nodes) phases."""
    g = wrapped_gradients(net, wrapped_phase)
    loop = (g[..., net.tri_edges] * net.tri_signs).sum(axis=-1)
    return np.rint(loop / TWO_PI).astype(np.int64)


def edge_costs(net: TriNetwork, mode="inverse_length", node_quality=None) -> np.ndarray:
    """Per-edge cost of a 2 pi correction.

    ``inverse_length`` makes long arcs cheap to cut; ``unit`` is uniform.
    ``node_quality`` (values in (0, 1]) scales each cost by the mean quality
    of the edge's endpoints.
    """
    if mode == "inverse_length":
        cost = 1.0 / net.edge_lengths
    elif mode == "unit":
        cost = np.ones(net.n_edges)
    else:
        raise ValueError(f"unknown cost mode {mode!r}")
    if node_quality is not None:
        q = np.asarray(node_quality, dtype=float)
        cost = cost * 0.5 * (q[net.edges[:, 0]] + q[net.edges[:, 1]])
    return cost


def solve_mcf(net: TriNetwork, residues, costs) -> FlowSolution:
    costs = np.asarray(costs, dtype=np.float64)
    if costs.shape != (net.n_edges,) or not np.all(costs > 0):
        raise ValueError("edge costs must be positive, one per edge")
    residues = np.asarray(residues, dtype=np.int64)
    if not residues.any():
        return FlowSolution(np.zeros(net.n_edges, dtype=np.int64), 0.0)
    left, right, adj_ptr, adj_edge = net.dual_graph()
    supply = np.append(residues, -residues.sum())
    try:
        k = kernels.ssp_min_cost_flow(left, right, costs, supply, adj_ptr, adj_edge)
    except RuntimeError as exc:
        raise InfeasibleNetwork(str(exc)) from exc
    return FlowSolution(k, float(np.sum(costs * np.abs(k))))


def check_feasible(net: TriNetwork, residues, k) -> bool:
    return bool(np.all((np.asarray(k)[net.tri_edges] * net.tri_signs).sum(axis=1) + residues == 0))


def integrate_unwrapped(net: TriNetwork, wrapped_phase, flow, ref_node=0) -> np.ndarray:
    """Unwrapped phase per node; equal to the wrapped value at ``ref_node``.

    Accepts a single field with a FlowSolution / k vector, or a stack of
    fields (n_ifg, n_nodes) with a k matrix (n_ifg, n_edges).
    """
    phi = np.asarray(wrapped_phase, dtype=float)
    k = flow.k if isinstance(flow, FlowSolution) else np.asarray(flow)
    single = phi.ndim == 1
    phi2 = np.atleast_2d(phi)
    k2 = np.atleast_2d(k).astype(np.int64)
    grad = wrapped_gradients(net, phi2)
    order, parent, parent_edge, parent_sign = net.spanning_tree(ref_node)
    out = kernels.integrate_tree(order, parent, parent_edge, parent_sign, grad, k2, phi2[:, ref_node])
    return out[0] if single else out


def unwrap_stack(net: TriNetwork, wrapped, cost_mode="inverse_length", quality=None, ref_node=0):
    """Unwrap every row of ``wrapped`` (n_ifg, n_nodes) independently.

    ``quality`` is one value per node, shared by all interferograms, or one
    row per interferogram. Returns (unwrapped, residue_counts) where
    residue_counts[q] is the number of nonzero residues in interferogram ``q``.
    """
    wrapped = np.atleast_2d(np.asarray(wrapped, dtype=float))
    residues = compute_residues(net, wrapped)
    if quality is not None:
        quality = np.asarray(quality, dtype=float)
        if quality.ndim == 1:
            quality = np.broadcast_to(quality, wrapped.shape)
    base_cost = edge_costs(net, cost_mode)
    k = np.zeros((wrapped.shape[0], net.n_edges), dtype=np.int64)
    for q in np.flatnonzero(residues.any(axis=1)):
        cost = base_cost if quality is None else edge_costs(net, cost_mode, quality[q])
        k[q] = solve_mcf(net, residues[q], cost).k
    unwrapped = integrate_unwrapped(net, wrapped, k, ref_node)
    return unwrapped, np.count_nonzero(residues, axis=1)


def write_debug_dump(net: TriNetwork, path, residues=None) -> None:
    """Plain-text dump of nodes, edges and triangles (with residues if given)."""
    lines = ["# insarchain-trinet v1", f"nodes {net.n_nodes}"]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(net.points.tolist())]
    lines.append(f"edges {net.n_edges}")
    lines += [f"{e} {u} {v}" for e, (u, v) in enumerate(net.edges.tolist())]
    lines.append(f"triangles {net.n_triangles}")
    res = np.zeros(net.n_triangles, dtype=np.int64) if residues is None else np.asarray(residues)
    lines += [f"{t} {a} {b} {c} {int(r)}" for t, ((a, b, c), r) in enumerate(zip(net.triangles.tolist(), res))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_debug_dump(path):
    """Parse a dump written by :func:`write_debug_dump` into (net, residues)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    pos = 0

    def block(name):
        nonlocal pos
        tag, count = lines[pos].split()
        if tag != name:
            raise ValueError(f"expected section {name!r}, found {tag!r}")
        rows = [ln.split()[1:] for ln in lines[pos + 1:pos + 1 + int(count)]]
        pos += 1 + int(count)
        return rows

    pts = np.array(block("nodes"), dtype=float).reshape(-1, 2)
    block("edges")
    tri = np.array(block("triangles"), dtype=np.int64).reshape(-1, 4)
    return _build_network(pts, tri[:, :3]), tri[:, 3]
