import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insarchain import mcfunwrap as mu
from insarchain.errors import DegenerateInput
from insarchain.synthstack import wrap
from oracles import circumcircle_contains, constraint_matrix, exhaustive_mcf, smooth_field


def random_points(rng, n, scale=10.0):
    return rng.uniform(0, scale, size=(n, 2))


def small_network(rng, max_tris=8):
    while True:
        net = mu.triangulate(random_points(rng, int(rng.integers(3, 8))))
        if net.n_triangles <= max_tris:
            return net


# -- triangulation -----------------------------------------------------------

def test_empty_circumcircle_property():
    rng = np.random.default_rng(0)
    for _ in range(30):
        pts = random_points(rng, int(rng.integers(3, 25)))
        net = mu.triangulate(pts)
        for a, b, c in net.triangles:
            others = set(range(len(pts))) - {a, b, c}
            assert not any(circumcircle_contains(pts[a], pts[b], pts[c], pts[d]) for d in others)


def test_triangles_counterclockwise_and_euler():
    rng = np.random.default_rng(1)
    pts = random_points(rng, 60)
    net = mu.triangulate(pts)
    p = net.points[net.triangles]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    assert np.all(cross > 0)
    assert net.n_edges == net.n_nodes + net.n_triangles - 1


def test_cocircular_grid_is_order_independent():
    grid = np.array([(x, y) for x in range(5) for y in range(4)], dtype=float)
    base = mu.triangulate(grid)
    key = lambda net: sorted(tuple(sorted(map(tuple, net.points[t].tolist()))) for t in net.triangles)
    rng = np.random.default_rng(2)
    for _ in range(5):
        perm = rng.permutation(len(grid))
        assert key(mu.triangulate(grid[perm])) == key(base)
    # every unit square is split along its lexicographically smaller diagonal: (x,y)-(x+1,y+1)
    edges = {tuple(sorted(map(tuple, base.points[e].tolist()))) for e in base.edges}
    assert ((0.0, 0.0), (1.0, 1.0)) in edges and ((0.0, 1.0), (1.0, 0.0)) not in edges


@pytest.mark.parametrize("pts", [
    [[0, 0], [1, 1]],
    [[0, 0], [1, 1], [2, 2], [3, 3]],
    [[0, 0], [1, 0], [0, 1], [1, 0]],
    [[0, 0], [1, 0], [np.nan, 1]],
])
def test_degenerate_inputs(pts):
    with pytest.raises(DegenerateInput):
        mu.triangulate(np.array(pts, dtype=float))


def test_debug_dump_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    net = mu.triangulate(random_points(rng, 20))
    res = rng.integers(-1, 2, size=net.n_triangles)
    mu.write_debug_dump(net, tmp_path / "net.txt", res)
    back, r2 = mu.read_debug_dump(tmp_path / "net.txt")
    assert np.array_equal(back.points, net.points) and np.array_equal(back.triangles, net.triangles)
    assert np.array_equal(back.edges, net.edges) and np.array_equal(r2, res)


# -- residues ------------------------------------------------------------------

def test_residue_sum_equals_boundary_winding():
    rng = np.random.default_rng(4)
    net = mu.triangulate(random_points(rng, 40))
    for _ in range(20):
        phi = rng.uniform(-np.pi, np.pi, net.n_nodes)
        res = mu.compute_residues(net, phi)
        idx, signs = net.boundary_cycle()
        g = mu.wrapped_gradients(net, phi)
        assert res.sum() == round(float((g[idx] * signs).sum() / (2 * np.pi)))


def test_single_triangle_residue():
    net = mu.triangulate(np.array([[0, 0], [1, 0], [0, 1]], dtype=float))
    phi = np.array([0.0, 2.5, -2.5])       # CCW gradients 2.5, -5 -> wraps to 1.28, 2.5: loop 2 pi
    assert mu.compute_residues(net, phi).tolist() == [1]
    assert mu.compute_residues(net, -phi).tolist() == [-1]


# -- min-cost flow -------------------------------------------------------------

def test_flow_is_feasible_and_zero_without_residues():
    rng = np.random.default_rng(5)
    net = mu.triangulate(random_points(rng, 50))
    cost = mu.edge_costs(net)
    assert mu.solve_mcf(net, np.zeros(net.n_triangles, int), cost).objective == 0.0
    for _ in range(10):
        res = rng.integers(-1, 2, size=net.n_triangles)
        sol = mu.solve_mcf(net, res, cost)
        assert mu.check_feasible(net, res, sol.k)
        assert np.allclose(constraint_matrix(net) @ sol.k, -res)


def test_objective_matches_exhaustive_enumeration():
    rng = np.random.default_rng(6)
    for _ in range(60):
        net = small_network(rng)
        res = rng.integers(-1, 2, size=net.n_triangles)
        cost = rng.uniform(0.2, 2.0, net.n_edges) if rng.random() < 0.5 else mu.edge_costs(net)
        sol = mu.solve_mcf(net, res, cost)
        assert sol.objective == pytest.approx(exhaustive_mcf(net, res, cost), rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100.0))
def test_cost_scaling_preserves_optimum(seed, scale):
    rng = np.random.default_rng(seed)
    net = mu.triangulate(random_points(rng, 25))
    res = rng.integers(-1, 2, size=net.n_triangles)
    cost = mu.edge_costs(net)
    a = mu.solve_mcf(net, res, cost)
    b = mu.solve_mcf(net, res, cost * scale)
    assert b.objective == pytest.approx(a.objective * scale, rel=1e-9)


def test_unit_and_quality_costs():
    rng = np.random.default_rng(7)
    net = mu.triangulate(random_points(rng, 10))
    assert np.all(mu.edge_costs(net, "unit") == 1.0)
    q = np.full(net.n_nodes, 0.5)
    assert np.allclose(mu.edge_costs(net, "unit", q), 0.5)
    assert np.allclose(mu.edge_costs(net), 1.0 / net.edge_lengths)
    with pytest.raises(ValueError):
        mu.edge_costs(net, "bogus")
    with pytest.raises(ValueError):
        mu.solve_mcf(net, np.zeros(net.n_triangles, int), -np.ones(net.n_edges))


# -- unwrapping ------------------------------------------------------------------

def residue_free_case(rng, side=25):
    """Random smooth field on a jittered grid, scaled so the largest arc difference is 0.9 pi."""
    g = np.array([(x, y) for x in range(side) for y in range(side)], dtype=float)
    inner = ((g > 0) & (g < side - 1)).all(axis=1)
    pts = g + inner[:, None] * rng.uniform(-0.3, 0.3, size=g.shape)  # straight hull, no slivers
    net = mu.triangulate(pts)
    a = rng.normal(size=4)
    truth = a[0] * pts[:, 0] + a[1] * pts[:, 1] + a[2] * np.sin(pts[:, 0] / 6.0) + a[3] * np.cos(pts[:, 1] / 8.0)
    d = truth[net.edges[:, 1]] - truth[net.edges[:, 0]]
    truth = truth * (0.9 * np.pi / np.max(np.abs(d))) + rng.uniform(-50, 50)
    assert np.ptp(truth) > 3 * np.pi
    return net, truth


def test_residue_free_field_recovered_up_to_global_cycle():
    rng = np.random.default_rng(8)
    for _ in range(10):
        net, truth = residue_free_case(rng)
        w = wrap(truth)
        assert not mu.compute_residues(net, w).any()
        unw, counts = mu.unwrap_stack(net, w[None, :])
        offset = unw[0] - truth
        cycles = offset[0] / (2 * np.pi)
        assert abs(cycles - round(cycles)) < 1e-9
        assert np.max(np.abs(offset - offset[0])) < 1e-9 and counts[0] == 0


def test_unwrapped_is_congruent_and_loop_consistent():
    rng = np.random.default_rng(9)
    net = mu.triangulate(random_points(rng, 200, 20.0))
    w = wrap(smooth_field(net.points, rng, 30.0) + rng.normal(0, 1.0, net.n_nodes))
    unw, counts = mu.unwrap_stack(net, w[None, :])
    assert counts[0] > 0
    assert np.max(np.abs(wrap(unw[0] - w))) < 1e-9
    grad = unw[0][net.edges[:, 1]] - unw[0][net.edges[:, 0]]
    loops = (grad[net.tri_edges] * net.tri_signs).sum(axis=1)
    assert np.max(np.abs(loops)) < 1e-9


def test_reference_node_keeps_wrapped_value():
    rng = np.random.default_rng(10)
    net = mu.triangulate(random_points(rng, 30))
    w = rng.uniform(-np.pi, np.pi, net.n_nodes)
    for ref in (0, 7, 29):
        out = mu.integrate_unwrapped(net, w, mu.solve_mcf(net, mu.compute_residues(net, w), mu.edge_costs(net)), ref)
        assert out[ref] == w[ref]


def test_stack_rows_independent():
    rng = np.random.default_rng(11)
    net = mu.triangulate(random_points(rng, 80))
    w = rng.uniform(-np.pi, np.pi, (4, net.n_nodes))
    batch, _ = mu.unwrap_stack(net, w)
    for q in range(4):
        single, _ = mu.unwrap_stack(net, w[q:q + 1])
        assert np.array_equal(single[0], batch[q])


def test_per_pixel_quality_broadcasts():
    rng = np.random.default_rng(12)
    net = mu.triangulate(random_points(rng, 40))
    w = rng.uniform(-np.pi, np.pi, (3, net.n_nodes))
    q = rng.uniform(0.5, 1.0, net.n_nodes)
    a, _ = mu.unwrap_stack(net, w, quality=q)
    b, _ = mu.unwrap_stack(net, w, quality=np.tile(q, (3, 1)))
    assert np.array_equal(a, b)
