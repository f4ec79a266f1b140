"""Compressed-sparse-row matrices and a Jacobi-preconditioned CG solver."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidOperator, NumericalBreakdown, ShapeError


@dataclass
class SparseMatrix:
    """CSR matrix. Column indices are sorted within each row."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return self.values.size

    def __matmul__(self, x):
        return matvec(self, x)

    def with_values(self, values):
        return SparseMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices,
                            np.asarray(values, dtype=float))

    def row_ids(self):
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    def diagonal(self):
        d = np.zeros(min(self.n_rows, self.n_cols))
        rows = self.row_ids()
        on_diag = rows == self.col_indices
        d[rows[on_diag]] = self.values[on_diag]
        return d

    def diagonal_positions(self):
        """Index into ``values`` of each diagonal entry (-1 if structurally absent)."""
        pos = np.full(self.n_rows, -1, dtype=np.int64)
        rows = self.row_ids()
        on_diag = np.flatnonzero(rows == self.col_indices)
        pos[rows[on_diag]] = on_diag
        return pos

    def add_diagonal(self, d):
        """Return ``self + diag(d)``; the diagonal must be structurally present."""
        pos = self.diagonal_positions()
        if np.any(pos < 0):
            raise ShapeError("diagonal entry missing from sparsity pattern")
        vals = self.values.copy()
        vals[pos] += d
        return self.with_values(vals)

    def __add__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        if (np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)):
            return self.with_values(self.values + other.values)
        rows = np.concatenate([self.row_ids(), other.row_ids()])
        cols = np.concatenate([self.col_indices, other.col_indices])
        vals = np.concatenate([self.values, other.values])
        return from_triplets(rows, cols, vals, self.shape)

    def __mul__(self, s):
        return self.with_values(self.values * float(s))

    __rmul__ = __mul__

    def to_dense(self):
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_ids(), self.col_indices), self.values)
        return out

    def submatrix(self, keep):
        """Principal submatrix on the index array ``keep`` (rows and columns)."""
        new_index = np.full(self.n_cols, -1, dtype=np.int64)
        new_index[keep] = np.arange(len(keep))
        rows = new_index[self.row_ids()]
        cols = new_index[self.col_indices]
        mask = (rows >= 0) & (cols >= 0)
        return from_triplets(rows[mask], cols[mask], self.values[mask], (len(keep), len(keep)))

    def asymmetry(self):
        """max |A - A^T| over stored entries, relative to max |A|."""
        if self.n_rows != self.n_cols:
            return np.inf
        scale = np.max(np.abs(self.values)) if self.nnz else 0.0
        if scale == 0.0:
            return 0.0
        rows = self.row_ids()
        t = from_triplets(self.col_indices, rows, self.values, self.shape)
        if not (np.array_equal(t.row_offsets, self.row_offsets)
                and np.array_equal(t.col_indices, self.col_indices)):
            diff = (self + t * -1.0).values
        else:
            diff = self.values - t.values
        return np.max(np.abs(diff)) / scale

    def is_symmetric(self, rtol=1e-12):
        return self.asymmetry() <= rtol


def from_triplets(rows, cols, values, shape):
    """Build a CSR matrix summing duplicate (row, col) entries."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    pattern = Pattern(rows, cols, shape)
    return pattern.assemble(values)


def identity(n):
    idx = np.arange(n)
    return from_triplets(idx, idx, np.ones(n), (n, n))


def diags(d):
    d = np.asarray(d, dtype=float)
    idx = np.arange(d.size)
    return from_triplets(idx, idx, d, (d.size, d.size))


class Pattern:
    """Fixed sparsity pattern for repeated scatter-add assembly.

    The map from triplet index to CSR slot is computed once; later assemblies
    are one scatter-add, summing duplicates in triplet order (deterministic).
    """

    def __init__(self, rows, cols, shape):
        n_rows, n_cols = shape
        order = np.lexsort((cols, rows))
        r, c = rows[order], cols[order]
        first = np.ones(r.size, dtype=bool)
        first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        slot_sorted = np.cumsum(first) - 1
        self.positions = np.empty(r.size, dtype=np.int64)
        self.positions[order] = slot_sorted
        self.shape = (int(n_rows), int(n_cols))
        self.col_indices = c[first]
        counts = np.bincount(r[first], minlength=n_rows)
        self.row_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.nnz = int(first.sum())

    def assemble(self, values):
        vals = kernels.scatter(self.positions, np.ascontiguousarray(values, dtype=float), self.nnz)
        return SparseMatrix(self.shape[0], self.shape[1], self.row_offsets, self.col_indices, vals)


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    label: str = ""


def matvec(A, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != A.n_cols:
        raise ShapeError(f"matvec: matrix has {A.n_cols} columns, vector has shape {x.shape}")
    return kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, np.ascontiguousarray(x))


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None, check_symmetry=True, label=""):
    """Solve ``A x = b`` for SPD ``A`` with Jacobi-preconditioned CG.

    Returns ``(x, SolveReport)``. ``final_residual`` is recomputed from scratch
    after the iteration, so it reflects the returned ``x`` rather than the
    recursively updated residual.
    """
    b = np.asarray(b, dtype=float)
    if A.n_rows != A.n_cols or b.ndim != 1 or b.size != A.n_rows:
        raise ShapeError(f"cg_solve: matrix {A.shape}, rhs {b.shape}")
    if check_symmetry and not A.is_symmetric(1e-12):
        raise InvalidOperator(f"cg_solve: matrix is not symmetric (asymmetry {A.asymmetry():.3e})")
    if not np.all(np.isfinite(b)) or not np.all(np.isfinite(A.values)):
        raise NumericalBreakdown("cg_solve: NaN or inf in system")
    n = A.n_rows
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, label)
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise InvalidOperator("cg_solve: non-positive diagonal entry, matrix is not SPD")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    inv_diag = 1.0 / diag
    total = 0
    # restart while the recursive residual has drifted from the true one
    for _ in range(4):
        x, iters, _, status = kernels.pcg(A.row_offsets, A.col_indices, A.values, b, x,
                                          inv_diag, float(tol), int(max_iter - total))
        total += iters
        if status == kernels.PCG_NONFINITE:
            raise NumericalBreakdown("cg_solve: NaN encountered during iteration")
        if status == kernels.PCG_INDEFINITE:
            raise InvalidOperator("cg_solve: non-positive curvature, matrix is not SPD")
        res = np.linalg.norm(b - matvec(A, x)) / bnorm
        if res <= tol or total >= max_iter:
            break
    return x, SolveReport(int(total), float(res), bool(res <= tol), label)
