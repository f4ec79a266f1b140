"""Hot numeric kernels, each in two flavours.

``*_jit`` functions are explicit loops compiled by numba; ``*_np`` functions
are vectorised numpy equivalents. The module-level names without suffix are
bound to one or the other according to :data:`tumorfem._accel.USE_NUMBA`.
Both flavours must agree to rounding; ``tests/test_kernels.py`` checks that and
``benchmarks/bench_kernels.py`` times them.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# PCG exit status codes
PCG_OK = 0
PCG_NONFINITE = 1
PCG_INDEFINITE = 2


# --------------------------------------------------------------------------
# element geometry


def _simplex_geometry_np(coords, elements):
    """Return (measure[ne], grads[ne, nloc, dim]) of the P1 basis on each simplex."""
    dim = coords.shape[1]
    verts = coords[elements]
    if dim == 1:
        h = verts[:, 1, 0] - verts[:, 0, 0]
        grads = np.empty((len(elements), 2, 1))
        grads[:, 0, 0] = -1.0 / h
        grads[:, 1, 0] = 1.0 / h
        return h, grads
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    grads = np.empty((len(elements), 3, 2))
    # rows of the inverse Jacobian transpose
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return 0.5 * det, grads


@njit
def _simplex_geometry_jit(coords, elements):
    ne = elements.shape[0]
    nloc = elements.shape[1]
    dim = coords.shape[1]
    meas = np.empty(ne)
    grads = np.empty((ne, nloc, dim))
    for e in range(ne):
        if dim == 1:
            h = coords[elements[e, 1], 0] - coords[elements[e, 0], 0]
            meas[e] = h
            grads[e, 0, 0] = -1.0 / h
            grads[e, 1, 0] = 1.0 / h
        else:
            a = elements[e, 0]
            b = elements[e, 1]
            c = elements[e, 2]
            e1x = coords[b, 0] - coords[a, 0]
            e1y = coords[b, 1] - coords[a, 1]
            e2x = coords[c, 0] - coords[a, 0]
            e2y = coords[c, 1] - coords[a, 1]
            det = e1x * e2y - e1y * e2x
            meas[e] = 0.5 * det
            grads[e, 1, 0] = e2y / det
            grads[e, 1, 1] = -e2x / det
            grads[e, 2, 0] = -e1y / det
            grads[e, 2, 1] = e1x / det
            grads[e, 0, 0] = -grads[e, 1, 0] - grads[e, 2, 0]
            grads[e, 0, 1] = -grads[e, 1, 1] - grads[e, 2, 1]
    return meas, grads


# --------------------------------------------------------------------------
# element matrices


def _stiffness_elements_np(meas, grads):
    return meas[:, None, None] * np.einsum("eak,ebk->eab", grads, grads)


@njit
def _stiffness_elements_jit(meas, grads):
    ne, nloc, dim = grads.shape
    out = np.empty((ne, nloc, nloc))
    for e in range(ne):
        for a in range(nloc):
            for b in range(nloc):
                s = 0.0
                for k in range(dim):
                    s += grads[e, a, k] * grads[e, b, k]
                out[e, a, b] = meas[e] * s
    return out


def _elasticity_elements_np(meas, grads, tensors):
    # K[(a,i),(b,j)] = |e| C_iljn g_al g_bn  (minor symmetries of C assumed)
    ne, nloc, dim = grads.shape
    ke = np.einsum("eiljn,eal,ebn->eaibj", tensors, grads, grads)
    return meas[:, None, None] * ke.reshape(ne, nloc * dim, nloc * dim)


@njit
def _elasticity_elements_jit(meas, grads, tensors):
    ne, nloc, dim = grads.shape
    nd = nloc * dim
    out = np.zeros((ne, nd, nd))
    for e in range(ne):
        for a in range(nloc):
            for i in range(dim):
                for b in range(nloc):
                    for j in range(dim):
                        s = 0.0
                        for l in range(dim):
                            for n in range(dim):
                                s += tensors[e, i, l, j, n] * grads[e, a, l] * grads[e, b, n]
                        out[e, a * dim + i, b * dim + j] = meas[e] * s
    return out


# --------------------------------------------------------------------------
# scatter-add into a fixed CSR pattern


def _scatter_np(positions, values, nnz):
    return np.bincount(positions, weights=values, minlength=nnz)


@njit
def _scatter_jit(positions, values, nnz):
    out = np.zeros(nnz)
    for k in range(positions.size):
        p = positions[k]
        if p >= 0:
            out[p] += values[k]
    return out


# --------------------------------------------------------------------------
# CSR matrix-vector product


def _csr_matvec_np(indptr, indices, data, x):
    n = indptr.size - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n)


@njit
def _csr_matvec_jit(indptr, indices, data, x):
    n = indptr.size - 1
    y = np.zeros(n)
    for i in range(n):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        y[i] = s
    return y


# --------------------------------------------------------------------------
# Jacobi-preconditioned conjugate gradients


def _pcg_np(indptr, indices, data, b, x, inv_diag, tol, maxiter):
    x = x.copy()
    bnorm = np.sqrt(b @ b)
    r = b - _csr_matvec_np(indptr, indices, data, x)
    res = np.sqrt(r @ r) / bnorm
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    it = 0
    while res > tol and it < maxiter:
        ap = _csr_matvec_np(indptr, indices, data, p)
        pap = p @ ap
        if not np.isfinite(pap):
            return x, it, res, PCG_NONFINITE
        if pap <= 0.0:
            return x, it, res, PCG_INDEFINITE
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        res = np.sqrt(r @ r) / bnorm
        if not np.isfinite(res):
            return x, it, res, PCG_NONFINITE
        if res <= tol:
            break
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it, res, PCG_OK


@njit
def _pcg_jit(indptr, indices, data, b, x, inv_diag, tol, maxiter):
    n = b.size
    x = x.copy()
    bnorm = np.sqrt(np.dot(b, b))
    r = b - _csr_matvec_jit(indptr, indices, data, x)
    res = np.sqrt(np.dot(r, r)) / bnorm
    z = inv_diag * r
    p = z.copy()
    rz = np.dot(r, z)
    it = 0
    while res > tol and it < maxiter:
        ap = _csr_matvec_jit(indptr, indices, data, p)
        pap = np.dot(p, ap)
        if not np.isfinite(pap):
            return x, it, res, PCG_NONFINITE
        if pap <= 0.0:
            return x, it, res, PCG_INDEFINITE
        alpha = rz / pap
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
        it += 1
        res = np.sqrt(np.dot(r, r)) / bnorm
        if not np.isfinite(res):
            return x, it, res, PCG_NONFINITE
        if res <= tol:
            break
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
        rz_new = np.dot(r, z)
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return x, it, res, PCG_OK


IMPLEMENTATIONS = {
    "simplex_geometry": (_simplex_geometry_np, _simplex_geometry_jit),
    "stiffness_elements": (_stiffness_elements_np, _stiffness_elements_jit),
    "elasticity_elements": (_elasticity_elements_np, _elasticity_elements_jit),
    "scatter": (_scatter_np, _scatter_jit),
    "csr_matvec": (_csr_matvec_np, _csr_matvec_jit),
    "pcg": (_pcg_np, _pcg_jit),
}

_pick = 1 if USE_NUMBA else 0
simplex_geometry = IMPLEMENTATIONS["simplex_geometry"][_pick]
stiffness_elements = IMPLEMENTATIONS["stiffness_elements"][_pick]
elasticity_elements = IMPLEMENTATIONS["elasticity_elements"][_pick]
scatter = IMPLEMENTATIONS["scatter"][_pick]
csr_matvec = IMPLEMENTATIONS["csr_matvec"][_pick]
pcg = IMPLEMENTATIONS["pcg"][_pick]
