"""Each numba kernel against its numpy twin."""
import numpy as np
import pytest

from tumorfem import build_mesh, isotropic_tensor, kernels
from tumorfem.assembly import _scalar_pattern, assemble_stiffness

IMPL = kernels.IMPLEMENTATIONS


def _geometry(mesh):
    coords = np.ascontiguousarray(mesh.nodes, dtype=float)
    elements = np.ascontiguousarray(mesh.elements, dtype=np.int64)
    return coords, elements


@pytest.fixture(params=["interval(0,2)", "rectangle(0,1,-1,2)"])
def mesh(request):
    return build_mesh(request.param, 7)


def test_geometry_agrees(mesh):
    np_fn, jit_fn = IMPL["simplex_geometry"]
    m1, g1 = np_fn(*_geometry(mesh))
    m2, g2 = jit_fn(*_geometry(mesh))
    np.testing.assert_allclose(m1, m2, rtol=1e-14)
    np.testing.assert_allclose(g1, g2, rtol=1e-13, atol=1e-13)
    # barycentric gradients sum to zero
    np.testing.assert_allclose(g1.sum(axis=1), 0.0, atol=1e-12)


def test_stiffness_and_elasticity_agree(mesh, rng):
    meas, grads = IMPL["simplex_geometry"][0](*_geometry(mesh))
    a, b = (fn(meas, grads) for fn in IMPL["stiffness_elements"])
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    d = mesh.dim
    t = np.ascontiguousarray(isotropic_tensor(d, 1.3, 0.4)[None] * rng.uniform(0.5, 2.0, (mesh.n_elements, 1, 1, 1, 1)))
    a, b = (fn(meas, grads, t) for fn in IMPL["elasticity_elements"])
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_scatter_agrees(rng):
    pos = rng.integers(0, 10, 200).astype(np.int64)
    vals = rng.normal(size=200)
    a, b = (fn(pos, vals, 10) for fn in IMPL["scatter"])
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_matvec_and_pcg_agree(mesh, rng):
    K = assemble_stiffness(mesh).add_diagonal(np.full(mesh.n_nodes, 3.0))
    x = rng.normal(size=mesh.n_nodes)
    args = (K.row_offsets, K.col_indices, K.values)
    y1, y2 = (fn(*args, x) for fn in IMPL["csr_matvec"])
    np.testing.assert_allclose(y1, y2, rtol=1e-14, atol=1e-14)
    inv_diag = 1.0 / K.diagonal()
    out = [fn(*args, y1, np.zeros_like(x), inv_diag, 1e-13, 500) for fn in IMPL["pcg"]]
    for sol, it, res, status in out:
        assert status == kernels.PCG_OK
        np.testing.assert_allclose(sol, x, rtol=1e-9, atol=1e-10)
    assert out[0][1] == out[1][1]


def test_pcg_flags_indefinite():
    indptr = np.array([0, 1, 2], dtype=np.int64)
    indices = np.array([0, 1], dtype=np.int64)
    data = np.array([1.0, -1.0])
    b = np.array([0.0, 1.0])
    for fn in IMPL["pcg"]:
        _, _, _, status = fn(indptr, indices, data, b, np.zeros(2), np.array([1.0, 1.0]), 1e-12, 10)
        assert status == kernels.PCG_INDEFINITE


def test_pattern_positions_cover_all_triplets():
    mesh = build_mesh("rectangle(0,1,0,1)", 4)
    p = _scalar_pattern(mesh)
    assert p.positions.min() == 0 and p.positions.max() == p.nnz - 1


_RUN = """
import sys
import numpy as np
from tumorfem import backend_name, build_mesh, preset, run_simulation
state, _ = run_simulation(preset("isotropic_baseline", T=0.05), build_mesh("rectangle(0,1,0,1)", 6), 0.01)
np.save(sys.argv[1], np.concatenate([state.phi, state.sigma, state.u.ravel(), state.z]))
print(backend_name())
"""


def test_numpy_fallback_flag_gives_same_run(tmp_path):
    import os
    import subprocess
    import sys

    results = {}
    for flag in ("0", "1"):
        out = tmp_path / f"run{flag}.npy"
        env = dict(os.environ, TUMORFEM_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", _RUN, str(out)], env=env, capture_output=True, text=True, check=True)
        results[proc.stdout.strip()] = np.load(out)
    assert set(results) == {"numpy", "numba"}
    np.testing.assert_allclose(results["numpy"], results["numba"], rtol=1e-10, atol=1e-12)
