"""Dense reference solvers and convergence studies.

Everything here is written without the sparse assembly, the kernels module or
CG: element matrices come from explicit per-element loops, and systems are
solved with LU factorisation (numpy.linalg.solve). Coefficient callables and
the nodal nonlinearities are shared with the solver, since they are the input
being replayed rather than code under test.
"""
from dataclasses import dataclass
import csv
from math import factorial

import numpy as np

from .errors import InvalidParameter, OracleFailure
from .mesh import build_mesh, Interval
from .model import IdentityTensor, alpha_eval, preset, yosida_eval

MAX_ORACLE_NODES = 256


# --------------------------------------------------------------------------
# dense assembly


def _element_data(mesh):
    """Yield (element, measure, gradient rows) for each simplex."""
    d = mesh.dim
    for el in mesh.elements:
        v = mesh.nodes[el]
        edges = (v[1:] - v[0]).T  # columns are edge vectors
        det = np.linalg.det(edges)
        inv = np.linalg.inv(edges)
        # barycentric gradients: rows of inv for vertices 1..d, minus their sum for vertex 0
        g = np.vstack([-inv.sum(axis=0), inv])
        yield el, abs(det) / factorial(d), g


def dense_lumped_mass(mesh):
    m = np.zeros(mesh.n_nodes)
    for el, vol, _ in _element_data(mesh):
        m[el] += vol / len(el)
    return m


def dense_stiffness(mesh):
    K = np.zeros((mesh.n_nodes, mesh.n_nodes))
    for el, vol, g in _element_data(mesh):
        for a, na in enumerate(el):
            for b, nb in enumerate(el):
                K[na, nb] += vol * (g[a] @ g[b])
    return K


def dense_boundary_mass(mesh):
    n = mesh.n_nodes
    MG = np.zeros((n, n))
    if mesh.dim == 1:
        for (i,) in mesh.boundary_facets:
            MG[i, i] += 1.0
        return MG
    for i, j in mesh.boundary_facets:
        length = np.linalg.norm(mesh.nodes[i] - mesh.nodes[j])
        MG[i, i] += length / 3.0
        MG[j, j] += length / 3.0
        MG[i, j] += length / 6.0
        MG[j, i] += length / 6.0
    return MG


def _unit_strain(g_a, i, d):
    """Symmetric gradient of the vector basis function lambda_a e_i."""
    e = np.zeros((d, d))
    e[i] = g_a
    return 0.5 * (e + e.T)


def dense_elasticity(mesh, tensors):
    """Full (n*d, n*d) matrix of int T eps(u):eps(v), boundary dofs not removed."""
    d = mesh.dim
    nd = mesh.n_nodes * d
    E = np.zeros((nd, nd))
    tensors = np.asarray(tensors, dtype=float)
    for e, (el, vol, g) in enumerate(_element_data(mesh)):
        C = tensors[e]
        strains = [(na * d + i, _unit_strain(g[a], i, d)) for a, na in enumerate(el) for i in range(d)]
        for r, er in strains:
            for c, ec in strains:
                E[r, c] += vol * np.sum(np.einsum("ijkl,kl->ij", C, ec) * er)
    return E


def _element_means(mesh, nodal):
    return np.array([np.mean(nodal[el]) for el in mesh.elements])


def _nodal_strain(mesh, u):
    """Element strains averaged onto nodes with element measures as weights."""
    d = mesh.dim
    acc = np.zeros((mesh.n_nodes, d, d))
    wsum = np.zeros(mesh.n_nodes)
    for el, vol, g in _element_data(mesh):
        grad = sum(np.outer(u[na], g[a]) for a, na in enumerate(el))
        eps = 0.5 * (grad + grad.T)
        for na in el:
            acc[na] += vol * eps
            wsum[na] += vol
    return acc / wsum[:, None, None]


def _lu_solve(A, b, label):
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise OracleFailure(f"{label}: non-finite dense system")
    if A.shape[0] and np.linalg.cond(A) > 1e14:
        raise OracleFailure(f"{label}: dense system is singular to working precision")
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise OracleFailure(f"{label}: {exc}") from exc


# --------------------------------------------------------------------------
# replay of the four sub-steps


def dense_replay_step(kind, mesh, coeffs, state, tau, *, sigma_bar=None, z_bar=None, phi=None,
                      u=None, lam=None, t_next=None):
    """Re-assemble one sub-step densely and solve it by LU.

    ``kind`` is ``"phi"`` (needs sigma_bar, z_bar), ``"sigma"`` (phi, z_bar,
    sigma_bar), ``"u"`` (phi, z_bar) or ``"z"`` (phi, u, lam). Returns nodal
    values, shaped (n_nodes, dim) for ``"u"``.
    """
    if mesh.n_nodes > MAX_ORACLE_NODES:
        raise InvalidParameter(f"dense replay limited to {MAX_ORACLE_NODES} nodes")
    if t_next is None:
        t_next = state.t + tau
    x = mesh.nodes
    m = dense_lumped_mass(mesh)
    if kind == "phi":
        A = np.diag(m / tau + m * coeffs.g(sigma_bar, z_bar)) + dense_stiffness(mesh)
        b = m * (state.phi / tau + coeffs.p(sigma_bar, z_bar) * alpha_eval(state.phi, coeffs.N))
        return _lu_solve(A, b, "phi")
    if kind == "sigma":
        uptake = coeffs.k1(phi, z_bar) / (coeffs.k2(phi, z_bar) + np.abs(sigma_bar))
        MG = dense_boundary_mass(mesh)
        A = np.diag(m / tau + m * uptake) + dense_stiffness(mesh) + MG
        sg = np.broadcast_to(np.asarray(coeffs.sigma_gamma(x, t_next), dtype=float), (mesh.n_nodes,)).copy()
        sg[~mesh.node_boundary_flags] = 0.0
        b = m * (state.sigma / tau + coeffs.J(phi, z_bar)) + MG @ sg
        return _lu_solve(A, b, "sigma")
    if kind == "u":
        d = mesh.dim
        pe, ze = _element_means(mesh, phi), _element_means(mesh, z_bar)
        EA = dense_elasticity(mesh, coeffs.A_tensor(pe, ze, d))
        EB = dense_elasticity(mesh, coeffs.B_tensor(pe, ze, d))
        f = np.asarray(coeffs.f(x, t_next), dtype=float).reshape(mesh.n_nodes, d)
        load = (m[:, None] * f).ravel()
        free = np.repeat(~mesh.node_boundary_flags, d)
        S = (EA + tau * EB)[np.ix_(free, free)]
        b = tau * load[free] + EA[np.ix_(free, free)] @ state.u.ravel()[free]
        out = np.zeros(mesh.n_nodes * d)
        if free.any():
            out[free] = _lu_solve(S, b, "u")
        return out.reshape(mesh.n_nodes, d)
    if kind == "z":
        if lam is None:
            raise InvalidParameter("z replay needs lam")
        w = np.broadcast_to(np.asarray(coeffs.w(x, t_next), dtype=float), (mesh.n_nodes,))
        psi = np.asarray(coeffs.psi(x, phi, _nodal_strain(mesh, u)), dtype=float)
        A = np.diag(m / tau) + dense_stiffness(mesh)
        b = m * (state.z / tau - yosida_eval(state.z, lam) - coeffs.pi(state.z) + w - psi)
        return _lu_solve(A, b, "z")
    raise InvalidParameter(f"unknown step kind {kind!r}")


# --------------------------------------------------------------------------
# convergence tables


@dataclass
class ConvergenceRow:
    h: float
    tau: float
    error_L2: float
    order: float = float("nan")


@dataclass
class ConvergenceTable:
    rows: list

    @classmethod
    def from_errors(cls, hs, taus, errors):
        """Orders are log2 of successive error ratios (the refinement halves h or tau)."""
        rows = [ConvergenceRow(float(h), float(t), float(e)) for h, t, e in zip(hs, taus, errors)]
        for prev, cur in zip(rows[:-1], rows[1:]):
            if prev.error_L2 > 0 and cur.error_L2 > 0:
                cur.order = float(np.log2(prev.error_L2 / cur.error_L2))
        return cls(rows)

    @property
    def orders(self):
        return [r.order for r in self.rows[1:]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "tau", "error_L2", "order"])
            for r in self.rows:
                w.writerow([repr(r.h), repr(r.tau), repr(r.error_L2), repr(r.order)])

    def __str__(self):
        lines = [f"{'h':>12} {'tau':>12} {'error_L2':>14} {'order':>7}"]
        for r in self.rows:
            lines.append(f"{r.h:12.5e} {r.tau:12.5e} {r.error_L2:14.6e} {r.order:7.3f}")
        return "\n".join(lines)


def _gauss_l2_error_1d(mesh, nodal, exact):
    """L2 error of a P1 function against a callable, 3-point Gauss per element."""
    pts = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    wts = np.array([5.0, 8.0, 5.0]) / 9.0
    x = mesh.nodes[:, 0]
    total = 0.0
    for i, j in mesh.elements:
        half = 0.5 * (x[j] - x[i])
        s = 0.5 * (pts + 1.0)
        xq = x[i] + s * (x[j] - x[i])
        uh = (1 - s) * nodal[i] + s * nodal[j]
        total += half * np.sum(wts * (uh - exact(xq)) ** 2)
    return float(np.sqrt(total))


def heat_convergence_study(levels=3, start_nodes=16, T=0.1, base_steps=25, amplitude=0.5, mean=0.5):
    """Refine h and tau together (tau ~ h^2) on the Neumann heat equation on (0, 1).

    Runs the full stepper on the ``decoupled_heat`` preset with
    phi0 = mean + amplitude cos(pi x), whose exact solution is
    mean + amplitude exp(-pi^2 t) cos(pi x), and reports L2 errors at T.
    """
    from .stepper import run_simulation

    if levels < 1:
        raise InvalidParameter("levels must be >= 1")
    hs, taus, errs = [], [], []
    for k in range(levels):
        n = (start_nodes - 1) * 2 ** k + 1
        steps = base_steps * 4 ** k
        tau = T / steps
        mesh = build_mesh(Interval(0.0, 1.0), n)
        coeffs = preset("decoupled_heat", phi0_mean=mean, phi0_amplitude=amplitude, T=T,
                        lam=max(tau, 0.05))
        # with T = 0 no step is taken; any positive step length will do
        state, _ = run_simulation(coeffs, mesh, tau if tau > 0 else 1.0, validate=False)

        def exact(xq):
            return mean + amplitude * np.exp(-np.pi ** 2 * T) * np.cos(np.pi * xq)

        hs.append(1.0 / (n - 1))
        taus.append(tau)
        errs.append(_gauss_l2_error_1d(mesh, state.phi, exact))
    return ConvergenceTable.from_errors(hs, taus, errs)


def generalized_decay_factors(EA, EB, tau):
    """Per-mode backward-Euler factors 1/(1 + tau mu) for E_B v = mu E_A v."""
    L = np.linalg.cholesky(EA)
    Linv = np.linalg.inv(L)
    mu = np.linalg.eigvalsh(Linv @ EB @ Linv.T)
    return 1.0 / (1.0 + tau * mu), mu


def viscoelastic_relaxation_check(levels=4, nodes=17, a=1.0, b=1.0, force=1.0, T=1.0, base_steps=10,
                                  mode_amplitude=0.1):
    """Temporal convergence of the displacement step towards exponential relaxation.

    1D, A = a, B = b, constant body force. In space-discrete form
    a E u' + b E u = F relaxes as u_inf + (u0 - u_inf) exp(-b t / a) with
    u_inf = E^{-1} F / b; the table compares the stepped u(T) against that.
    Each level halves tau on a fixed mesh, so the table's h column is constant.
    """
    from .stepper import SimState, step_u

    if a <= 0 or b < 0:
        raise InvalidParameter("need a > 0 and b >= 0")
    mesh = build_mesh(Interval(0.0, 1.0), nodes)
    x = mesh.nodes[:, 0]
    base = preset("decoupled_heat")

    def f(xs, t):
        return np.full((len(xs), 1), force)

    coeffs = base.replace(A_tensor=IdentityTensor(a), B_tensor=IdentityTensor(b), f=f, T=T)
    free = ~mesh.node_boundary_flags
    u0 = np.zeros((mesh.n_nodes, 1))
    u0[:, 0] = mode_amplitude * np.sin(np.pi * x)
    u0[~free] = 0.0

    # space-discrete reference, from the dense assembly
    # in 1D the unit identity tensor reduces elasticity to the Laplacian
    E = dense_stiffness(mesh)[np.ix_(free, free)]
    load = dense_lumped_mass(mesh)[free] * force
    if b > 0:
        u_inf = np.linalg.solve(E, load) / b
        ref = u_inf + (u0[free, 0] - u_inf) * np.exp(-b * T / a)
    else:
        ref = u0[free, 0] + T * np.linalg.solve(E, load) / a
    m = dense_lumped_mass(mesh)[free]

    hs, taus, errs = [], [], []
    zeros = np.zeros(mesh.n_nodes)
    for k in range(levels):
        steps = base_steps * 2 ** k
        tau = T / steps
        state = SimState(0.0, zeros, zeros, u0.copy(), u0.copy(), zeros)
        for _ in range(steps):
            u, _ = step_u(mesh, coeffs, state, zeros, zeros, tau, state.t + tau)
            state = SimState(state.t + tau, zeros, zeros, u, state.u, zeros)
        diff = u[free, 0] - ref
        hs.append(1.0 / (nodes - 1))
        taus.append(tau)
        errs.append(float(np.sqrt(diff @ (m * diff))))
    return ConvergenceTable.from_errors(hs, taus, errs)
