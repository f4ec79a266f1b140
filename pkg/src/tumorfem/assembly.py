"""P1 finite-element operators: mass, stiffness, boundary terms, elasticity."""
import numpy as np

from . import kernels
from .errors import HypothesisViolation, InvalidTensor, KindMismatch, ShapeError
from .mesh import Field
from .sparse import Pattern, diags

TENSOR_SYMMETRY_TOL = 1e-10


def element_geometry(mesh):
    """Cached (measure, basis gradients) per element."""
    def build():
        meas, grads = kernels.simplex_geometry(np.ascontiguousarray(mesh.nodes, dtype=float),
                                               np.ascontiguousarray(mesh.elements, dtype=np.int64))
        if np.any(meas <= 0.0):
            raise ShapeError("mesh has an element with non-positive measure")
        return meas, grads
    return mesh.cached("geometry", build)


def _scalar_pattern(mesh):
    def build():
        el = mesh.elements
        nloc = el.shape[1]
        rows = np.repeat(el, nloc, axis=1).ravel()
        cols = np.tile(el, (1, nloc)).ravel()
        return Pattern(rows, cols, (mesh.n_nodes, mesh.n_nodes))
    return mesh.cached("scalar_pattern", build)


def _mass_elements(mesh):
    meas, _ = element_geometry(mesh)
    nloc = mesh.elements.shape[1]
    # int_e l_a l_b = |e| (1 + delta_ab) d! / (d + 2)!
    ref = (np.ones((nloc, nloc)) + np.eye(nloc)) / ((mesh.dim + 1) * (mesh.dim + 2))
    return meas[:, None, None] * ref


def assemble_mass(mesh, lumped=False):
    """Consistent P1 mass matrix, or its row-sum lumped diagonal."""
    if lumped:
        return diags(lumped_mass(mesh))
    return _scalar_pattern(mesh).assemble(_mass_elements(mesh).ravel())


def lumped_mass(mesh):
    """Row sums of the consistent mass matrix, as a vector."""
    def build():
        m = np.zeros(mesh.n_nodes)
        np.add.at(m, mesh.elements.ravel(), _mass_elements(mesh).sum(axis=2).ravel())
        return m
    return mesh.cached("lumped_mass", build)


def assemble_stiffness(mesh):
    def build():
        meas, grads = element_geometry(mesh)
        return _scalar_pattern(mesh).assemble(kernels.stiffness_elements(meas, grads).ravel())
    return mesh.cached("stiffness", build)


def _facet_lengths(mesh):
    if mesh.dim == 1:
        return np.ones(len(mesh.boundary_facets))
    p = mesh.nodes[mesh.boundary_facets]
    return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)


def assemble_boundary_mass(mesh):
    """Matrix of the boundary integral of u*v (counting measure in 1D)."""
    def build():
        f = mesh.boundary_facets
        k = f.shape[1]
        if mesh.dim == 1:
            local = np.ones((len(f), 1, 1))
        else:
            local = _facet_lengths(mesh)[:, None, None] * (np.ones((2, 2)) + np.eye(2)) / 6.0
        rows = np.repeat(f, k, axis=1).ravel()
        cols = np.tile(f, (1, k)).ravel()
        # include the full diagonal so the pattern is additive with the volume terms
        n = mesh.n_nodes
        rows = np.concatenate([rows, np.arange(n)])
        cols = np.concatenate([cols, np.arange(n)])
        vals = np.concatenate([local.ravel(), np.zeros(n)])
        return Pattern(rows, cols, (n, n)).assemble(vals)
    return mesh.cached("boundary_mass", build)


def _evaluate_boundary(mesh, sigma_gamma, t):
    x = mesh.nodes
    if callable(sigma_gamma):
        vals = np.broadcast_to(np.asarray(sigma_gamma(x, t), dtype=float), (mesh.n_nodes,))
    else:
        vals = np.broadcast_to(np.asarray(sigma_gamma, dtype=float), (mesh.n_nodes,))
    out = np.zeros(mesh.n_nodes)
    b = mesh.boundary_nodes
    out[b] = vals[b]
    return out


def boundary_values(mesh, sigma_gamma, t=0.0, M0=None):
    """Nodal interpolant of boundary data (zero at interior nodes), range-checked."""
    s = _evaluate_boundary(mesh, sigma_gamma, t)
    if M0 is not None:
        b = s[mesh.boundary_nodes]
        if np.any(b < 0.0) or np.any(b > M0):
            raise HypothesisViolation(
                f"boundary data outside [0, M0={M0}]: range [{b.min()}, {b.max()}]")
    return s


def assemble_boundary_load(mesh, sigma_gamma, M0=None, t=0.0):
    """Load vector of the boundary integral of sigma_gamma * v."""
    s = boundary_values(mesh, sigma_gamma, t, M0)
    return assemble_boundary_mass(mesh) @ s


# --------------------------------------------------------------------------
# elasticity


def tensor_asymmetry(tensors):
    """Largest violation of a_hijk = a_ihjk = a_jkhi, relative to max |a|."""
    t = np.asarray(tensors, dtype=float)
    scale = max(1.0, float(np.max(np.abs(t)))) if t.size else 1.0
    minor = np.abs(t - np.swapaxes(t, -4, -3))
    major = np.abs(t - np.moveaxis(t, (-4, -3, -2, -1), (-2, -1, -4, -3)))
    return float(max(minor.max(initial=0.0), major.max(initial=0.0))) / scale


def _check_tensors(mesh, tensor):
    t = np.asarray(tensor, dtype=float)
    d = mesh.dim
    if t.shape == (d, d, d, d):
        t = np.broadcast_to(t, (mesh.n_elements, d, d, d, d))
    if t.shape != (mesh.n_elements, d, d, d, d):
        raise ShapeError(f"tensor shape {t.shape} does not match mesh ({mesh.n_elements} elements, dim {d})")
    if tensor_asymmetry(t) > TENSOR_SYMMETRY_TOL:
        raise InvalidTensor(f"tensor violates symmetry by {tensor_asymmetry(t):.3e}")
    return np.ascontiguousarray(t)


def _elasticity_pattern(mesh):
    """Pattern over interior displacement dofs; boundary triplets are dropped."""
    def build():
        d = mesh.dim
        el = mesh.elements
        nloc = el.shape[1]
        dofs = (el[:, :, None] * d + np.arange(d)).reshape(len(el), nloc * d)
        new_index = np.full(mesh.n_nodes * d, -1, dtype=np.int64)
        interior = mesh.interior_dofs()
        new_index[interior] = np.arange(interior.size)
        local = new_index[dofs]
        nd = nloc * d
        rows = np.repeat(local, nd, axis=1).ravel()
        cols = np.tile(local, (1, nd)).ravel()
        keep = np.flatnonzero((rows >= 0) & (cols >= 0))
        return Pattern(rows[keep], cols[keep], (interior.size, interior.size)), keep
    return mesh.cached("elasticity_pattern", build)


def elasticity_element_matrices(mesh, tensor):
    t = _check_tensors(mesh, tensor)
    meas, grads = element_geometry(mesh)
    return kernels.elasticity_elements(meas, grads, t)


def assemble_elasticity(mesh, tensor):
    """Matrix of the integral of T eps(u) : eps(v) on interior dofs.

    ``tensor`` is one (d,d,d,d) tensor or one per element. Rows and columns of
    boundary dofs are eliminated (homogeneous Dirichlet data).
    """
    ke = elasticity_element_matrices(mesh, tensor)
    pattern, keep = _elasticity_pattern(mesh)
    return pattern.assemble(ke.ravel()[keep])


def identity_tensor(dim):
    """Fourth-order tensor with T eps = eps on symmetric eps."""
    eye = np.eye(dim)
    return 0.5 * (np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye))


def isotropic_tensor(dim, mu, lam):
    """2 mu eps + lam tr(eps) I."""
    eye = np.eye(dim)
    return 2.0 * mu * identity_tensor(dim) + lam * np.einsum("ij,kl->ijkl", eye, eye)


def strain_at_quadrature(mesh, u):
    """Symmetrised gradient of a P1 displacement, one (d,d) matrix per element."""
    if isinstance(u, Field):
        if u.kind != "displacement":
            raise KindMismatch("strain needs a displacement field")
        u = u.values
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape != (mesh.n_nodes, mesh.dim):
        raise KindMismatch(f"strain needs a displacement array of shape {(mesh.n_nodes, mesh.dim)}")
    _, grads = element_geometry(mesh)
    gu = np.einsum("eai,eak->eik", u[mesh.elements], grads)
    return 0.5 * (gu + np.swapaxes(gu, 1, 2))


def element_average(mesh, nodal):
    return np.asarray(nodal)[mesh.elements].mean(axis=1)


def element_to_nodes(mesh, values):
    """Measure-weighted average of element values onto the nodes."""
    meas, _ = element_geometry(mesh)
    values = np.asarray(values, dtype=float)
    tail = values.shape[1:]
    acc = np.zeros((mesh.n_nodes,) + tail)
    wsum = np.zeros(mesh.n_nodes)
    weighted = meas.reshape((-1,) + (1,) * len(tail)) * values
    for k in range(mesh.elements.shape[1]):
        np.add.at(acc, mesh.elements[:, k], weighted)
        np.add.at(wsum, mesh.elements[:, k], meas)
    return acc / wsum.reshape((-1,) + (1,) * len(tail))


def displacement_load(mesh, f_nodal):
    """Lumped load vector of int f . v on interior dofs."""
    f_nodal = np.asarray(f_nodal, dtype=float).reshape(mesh.n_nodes, mesh.dim)
    full = (lumped_mass(mesh)[:, None] * f_nodal).ravel()
    return full[mesh.interior_dofs()]


def expand_displacement(mesh, interior_values):
    """Interior dof vector -> (n_nodes, dim) array with zero boundary rows."""
    full = np.zeros(mesh.n_nodes * mesh.dim)
    full[mesh.interior_dofs()] = interior_values
    return full.reshape(mesh.n_nodes, mesh.dim)
