"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--nodes 2000] [--ifgs 20] [--repeat 3]

Both backends solve the same min-cost-flow problems and integrate the same
fields; the script checks that their outputs agree bit for bit, then prints
the best-of-N wall time per kernel.
"""

import argparse
import time

import numpy as np

from insarchain import kernels, mcfunwrap as mu
from insarchain.synthstack import wrap


def problem(n_nodes, n_ifgs, seed):
    rng = np.random.default_rng(seed)
    net = mu.triangulate(rng.uniform(0, np.sqrt(n_nodes) * 2, size=(n_nodes, 2)))
    x, y = net.points.T
    smooth = 6.0 * np.sin(x / 7.0) * np.cos(y / 9.0)
    wrapped = wrap(smooth[None, :] + rng.normal(0, 1.2, size=(n_ifgs, net.n_nodes)))
    return net, wrapped


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(backend, net, wrapped, repeat):
    mod = kernels.load_backend(backend)
    cost = mu.edge_costs(net)
    left, right, adj_ptr, adj_edge = net.dual_graph()
    residues = [mu.compute_residues(net, w) for w in wrapped]

    def flows():
        return np.array([mod.ssp_min_cost_flow(left, right, cost, np.append(r, -r.sum()), adj_ptr, adj_edge)
                         for r in residues])

    t_mcf, k = best_of(flows, repeat)
    order, parent, parent_edge, parent_sign = net.spanning_tree(0)
    grad = mu.wrapped_gradients(net, wrapped)
    t_int, unw = best_of(lambda: mod.integrate_tree(order, parent, parent_edge, parent_sign, grad,
                                                    k.astype(np.int64), wrapped[:, 0]), repeat)
    return {"mcf": t_mcf, "integrate": t_int}, k, unw, int(sum(np.abs(r).sum() for r in residues))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--ifgs", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    net, wrapped = problem(args.nodes, args.ifgs, args.seed)
    backends = kernels.available_backends()
    print(f"network: {net.n_nodes} nodes, {net.n_triangles} triangles, {net.n_edges} arcs; "
          f"{args.ifgs} interferograms")
    results = {}
    for name in backends:
        results[name] = run(name, net, wrapped, args.repeat)
    print(f"residues per stack: {results[backends[0]][3]}")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for kernel in ("mcf", "integrate"):
        times = [results[b][0][kernel] for b in backends]
        row = f"{kernel:<12}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)
    if len(backends) > 1:
        a, b = results[backends[0]], results[backends[1]]
        same = np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
        print("outputs identical:", same)
        return 0 if same else 1
    print("compiled backend not built; only the pure-Python timings are shown")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
