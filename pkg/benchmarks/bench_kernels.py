"""Benchmark the hot kernels: pure NumPy vs Numba.

Both implementations of every kernel are timed on the same inputs. With
``--end-to-end`` a full simulation is also timed in two subprocesses, one with
``TUMORFEM_NUMBA=0`` and one with the default backend.

    python benchmarks/bench_kernels.py --nodes 64 --end-to-end
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from tumorfem import build_mesh, isotropic_tensor, kernels
from tumorfem.assembly import assemble_stiffness

IMPL = kernels.IMPLEMENTATIONS


def best_of(fn, repeat):
    fn()  # warmup, triggers compilation
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_cases(mesh, rng):
    coords = np.ascontiguousarray(mesh.nodes, dtype=float)
    elements = np.ascontiguousarray(mesh.elements, dtype=np.int64)
    meas, grads = IMPL["simplex_geometry"][0](coords, elements)
    tensors = np.ascontiguousarray(np.broadcast_to(isotropic_tensor(mesh.dim, 1.0, 0.5),
                                                   (mesh.n_elements,) + (mesh.dim,) * 4))
    K = assemble_stiffness(mesh).add_diagonal(np.full(mesh.n_nodes, 1.0))
    csr = (K.row_offsets, K.col_indices, K.values)
    x = rng.normal(size=mesh.n_nodes)
    b = K @ x
    pos = rng.integers(0, mesh.n_nodes, 9 * mesh.n_elements).astype(np.int64)
    vals = rng.normal(size=pos.size)
    inv_diag = 1.0 / K.diagonal()
    return {
        "simplex_geometry": (coords, elements),
        "stiffness_elements": (meas, grads),
        "elasticity_elements": (meas, grads, tensors),
        "scatter": (pos, vals, mesh.n_nodes),
        "csr_matvec": (*csr, x),
        "pcg": (*csr, b, np.zeros_like(b), inv_diag, 1e-12, 10 * mesh.n_nodes),
    }


def bench_kernels(nodes, repeat):
    mesh = build_mesh("rectangle(0,1,0,1)", nodes)
    print(f"mesh {nodes}x{nodes}: {mesh.n_nodes} nodes, {mesh.n_elements} elements")
    print(f"{'kernel':<22}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, args in kernel_cases(mesh, np.random.default_rng(0)).items():
        np_fn, jit_fn = IMPL[name]
        t_np = best_of(lambda: np_fn(*args), repeat)
        t_jit = best_of(lambda: jit_fn(*args), repeat)
        print(f"{name:<22}{t_np * 1e3:>12.3f}{t_jit * 1e3:>12.3f}{t_np / t_jit:>9.1f}x")


RUN = """
import time
from tumorfem import build_mesh, preset, run_simulation, backend_name
mesh = build_mesh("rectangle(0,1,0,1)", {nodes})
c = preset("isotropic_baseline", T=0.2)
run_simulation(c, mesh, 0.01)  # warmup
start = time.perf_counter()
run_simulation(c, mesh, 0.01)
print(backend_name(), time.perf_counter() - start)
"""


def bench_end_to_end(nodes):
    print(f"\nsimulation, 20 steps on {nodes}x{nodes}:")
    for flag in ("0", "1"):
        env = dict(os.environ, TUMORFEM_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", RUN.format(nodes=nodes)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<8}{float(out[1]):.3f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=64, help="nodes per axis of the square mesh")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args()
    bench_kernels(args.nodes, args.repeat)
    if args.end_to_end:
        bench_end_to_end(args.nodes)


if __name__ == "__main__":
    main()
