"""Semi-implicit time stepping of the coupled system.

One step is a Picard loop over the frozen pair (sigma_bar, z_bar). Each sweep
solves, in order,

1. phi:   (M/tau + K + M g) phi = M (phi_k/tau + p alpha(phi_k))
2. sigma: (M/tau + K + M_G + M k1/(k2 + |sigma_bar|)) sigma = M (sigma_k/tau + J) + M_G sigma_G
3. u:     (E_A + tau E_B) u = tau F + E_A u_k
4. z:     (M/tau + K) z = M (z_k/tau - beta_lam(z_k) - pi(z_k) + w - Psi)

with lumped mass M, stiffness K and boundary mass M_G. Coefficients take the
frozen pair; diffusion and the linear terms are implicit, the logistic
source, beta_lam and pi explicit. All four systems are SPD and solved by CG.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from .assembly import (
    assemble_boundary_mass,
    assemble_elasticity,
    assemble_stiffness,
    boundary_values,
    displacement_load,
    element_average,
    element_to_nodes,
    expand_displacement,
    lumped_mass,
    strain_at_quadrature,
)
from .errors import HypothesisViolation, InvalidParameter, NumericalError, StabilityViolation, StepFailure
from .model import alpha_eval, validate_hypotheses, yosida_eval
from .sparse import cg_solve

log = logging.getLogger(__name__)

SOLVER_TOL = 1e-12
TOL_FP = 1e-8
MAX_FP = 25
BOUND_TOL = 1e-9


@dataclass
class SimState:
    t: float
    phi: np.ndarray
    sigma: np.ndarray
    u: np.ndarray
    u_prev: np.ndarray
    z: np.ndarray
    step_index: int = 0

    def copy(self):
        return SimState(self.t, self.phi.copy(), self.sigma.copy(), self.u.copy(),
                        self.u_prev.copy(), self.z.copy(), self.step_index)


@dataclass
class StepDiagnostics:
    step_index: int
    t: float
    picard_iterations: int
    picard_sweeps: int
    picard_residual: float
    first_residual: float
    converged: bool
    bound_violations: dict
    z_overshoot: float
    z_source_work: float = 0.0
    solver_reports: list = field(default_factory=list)


def initial_state(coeffs, mesh):
    x = mesh.nodes
    n = mesh.n_nodes
    phi = np.broadcast_to(np.asarray(coeffs.phi0(x), dtype=float), (n,)).copy()
    sigma = np.broadcast_to(np.asarray(coeffs.sigma0(x), dtype=float), (n,)).copy()
    z = np.broadcast_to(np.asarray(coeffs.z0(x), dtype=float), (n,)).copy()
    u = np.asarray(coeffs.u0(x), dtype=float).reshape(n, mesh.dim).copy()
    b = mesh.node_boundary_flags
    if np.max(np.abs(u[b]), initial=0.0) > 1e-12:
        raise HypothesisViolation("initial displacement does not vanish on the boundary")
    u[b] = 0.0
    return SimState(0.0, phi, sigma, u, u.copy(), z, 0)


def bound_overshoots(state, N, M):
    """Largest excursion of phi, sigma, z outside [0,N], [0,M], [0,1]."""
    def over(v, hi):
        return float(max(np.max(-v), np.max(v - hi), 0.0))
    return {"phi": over(state.phi, N), "sigma": over(state.sigma, M), "z": over(state.z, 1.0)}


def _solve(A, rhs, label, tol, observer):
    try:
        x, report = cg_solve(A, rhs, tol=tol, check_symmetry=False, label=label)
    except NumericalError as exc:
        raise StepFailure(f"{label}: {exc}") from exc
    if not report.converged:
        raise StepFailure(f"{label}: CG did not converge ({report.iterations} its, "
                          f"residual {report.final_residual:.2e})", report)
    if observer is not None:
        observer(label, A, rhs, report)
    return x, report


def _stiffness_plus_boundary(mesh):
    return mesh.cached("K_plus_MG", lambda: assemble_stiffness(mesh) + assemble_boundary_mass(mesh))


def _check_tau(tau):
    if not tau > 0:
        raise InvalidParameter(f"time step must be positive, got {tau}")


def phi_system(mesh, coeffs, state, sigma_bar, z_bar, tau):
    _check_tau(tau)
    if tau * coeffs.p_star > 1.0:
        raise StabilityViolation(f"tau * p* = {tau * coeffs.p_star:.3g} > 1: explicit logistic term may overshoot N")
    m = lumped_mass(mesh)
    g = coeffs.g(sigma_bar, z_bar)
    p = coeffs.p(sigma_bar, z_bar)
    A = assemble_stiffness(mesh).add_diagonal(m / tau + m * g)
    rhs = m * (state.phi / tau + p * alpha_eval(state.phi, coeffs.N))
    return A, rhs


def step_phi(mesh, coeffs, state, sigma_bar, z_bar, tau, tol=SOLVER_TOL, observer=None):
    A, rhs = phi_system(mesh, coeffs, state, sigma_bar, z_bar, tau)
    return _solve(A, rhs, "phi", tol, observer)


def sigma_system(mesh, coeffs, state, phi, z_bar, sigma_bar, tau, t_next):
    _check_tau(tau)
    m = lumped_mass(mesh)
    uptake = coeffs.k1(phi, z_bar) / (coeffs.k2(phi, z_bar) + np.abs(sigma_bar))
    A = _stiffness_plus_boundary(mesh).add_diagonal(m / tau + m * uptake)
    s_gamma = boundary_values(mesh, coeffs.sigma_gamma, t_next, coeffs.M0)
    rhs = m * (state.sigma / tau + coeffs.J(phi, z_bar)) + assemble_boundary_mass(mesh) @ s_gamma
    return A, rhs


def step_sigma(mesh, coeffs, state, phi, z_bar, sigma_bar, tau, t_next, tol=SOLVER_TOL, observer=None):
    A, rhs = sigma_system(mesh, coeffs, state, phi, z_bar, sigma_bar, tau, t_next)
    return _solve(A, rhs, "sigma", tol, observer)


def u_system(mesh, coeffs, state, phi, z_bar, tau, t_next):
    """(E_A + tau E_B, tau F + E_A u_k) on interior dofs."""
    _check_tau(tau)
    d = mesh.dim
    phi_e = element_average(mesh, phi)
    z_e = element_average(mesh, z_bar)
    EA = assemble_elasticity(mesh, coeffs.A_tensor(phi_e, z_e, d))
    EB = assemble_elasticity(mesh, coeffs.B_tensor(phi_e, z_e, d))
    S = EA + EB * tau
    f_nodal = np.asarray(coeffs.f(mesh.nodes, t_next), dtype=float).reshape(mesh.n_nodes, d)
    u_int = state.u.reshape(-1)[mesh.interior_dofs()]
    rhs = tau * displacement_load(mesh, f_nodal) + EA @ u_int
    return S, rhs


def step_u(mesh, coeffs, state, phi, z_bar, tau, t_next, tol=SOLVER_TOL, observer=None):
    S, rhs = u_system(mesh, coeffs, state, phi, z_bar, tau, t_next)
    if S.n_rows == 0:
        return np.zeros_like(state.u), None
    x, report = _solve(S, rhs, "u", tol, observer)
    return expand_displacement(mesh, x), report


def psi_nodal(mesh, coeffs, phi, u):
    """Psi at the nodes, with the element strains averaged onto the nodes first."""
    eps_nodes = element_to_nodes(mesh, strain_at_quadrature(mesh, u))
    return np.asarray(coeffs.psi(mesh.nodes, phi, eps_nodes), dtype=float)


def z_system(mesh, coeffs, state, phi, u, tau, lam, t_next):
    """Returns (matrix, rhs, explicit source) where the source excludes beta_lam."""
    _check_tau(tau)
    if tau > lam * (1 + 1e-12):
        raise StabilityViolation(f"tau = {tau} exceeds the Yosida parameter {lam}")
    m = lumped_mass(mesh)
    w = np.broadcast_to(np.asarray(coeffs.w(mesh.nodes, t_next), dtype=float), (mesh.n_nodes,))
    source = -np.asarray(coeffs.pi(state.z), dtype=float) + w - psi_nodal(mesh, coeffs, phi, u)
    A = assemble_stiffness(mesh).add_diagonal(m / tau)
    rhs = m * (state.z / tau - yosida_eval(state.z, lam) + source)
    return A, rhs, source


def step_z(mesh, coeffs, state, phi, u, tau, lam, t_next, tol=SOLVER_TOL, observer=None):
    A, rhs, _ = z_system(mesh, coeffs, state, phi, u, tau, lam, t_next)
    return _solve(A, rhs, "z", tol, observer)


def gamma_picard(mesh, coeffs, state, tau, lam, t_next=None, tol_fp=TOL_FP, max_fp=MAX_FP,
                 solver_tol=SOLVER_TOL, observer=None):
    """One time step: iterate (sigma_bar, z_bar) -> (sigma, z) through the four solves.

    The residual after each sweep is ||sigma - sigma_bar||_L2 + max|z - z_bar|.
    The loop stops once a sweep reproduces its input within ``tol_fp``; that
    confirming sweep is not counted in ``picard_iterations`` (unless it is the
    only one), so a map that is constant in (sigma_bar, z_bar) reports one
    iteration.
    """
    if not tol_fp > 0:
        raise InvalidParameter("tol_fp must be positive")
    if max_fp < 1:
        raise InvalidParameter("max_fp must be >= 1")
    if t_next is None:
        t_next = state.t + tau
    m = lumped_mass(mesh)
    sigma_bar, z_bar = state.sigma, state.z
    reports = []
    first = res = np.inf
    converged = False
    for sweep in range(1, max_fp + 1):
        phi, r1 = step_phi(mesh, coeffs, state, sigma_bar, z_bar, tau, solver_tol, observer)
        sigma, r2 = step_sigma(mesh, coeffs, state, phi, z_bar, sigma_bar, tau, t_next, solver_tol, observer)
        u, r3 = step_u(mesh, coeffs, state, phi, z_bar, tau, t_next, solver_tol, observer)
        A, rhs, source = z_system(mesh, coeffs, state, phi, u, tau, lam, t_next)
        z, r4 = _solve(A, rhs, "z", solver_tol, observer)
        reports.extend(r for r in (r1, r2, r3, r4) if r is not None)
        ds = sigma - sigma_bar
        res = float(np.sqrt(ds @ (m * ds)) + np.max(np.abs(z - z_bar)))
        if sweep == 1:
            first = res
        sigma_bar, z_bar = sigma, z
        if res <= tol_fp:
            converged = True
            break
    iterations = max(1, sweep - 1) if converged else sweep
    if not converged:
        log.warning("Picard loop not converged at t=%.6g after %d sweeps (residual %.3e)",
                    t_next, sweep, res)
    new = SimState(t_next, phi, sigma, u, state.u.copy(), z, state.step_index + 1)
    bounds = bound_overshoots(new, coeffs.N, coeffs.sigma_bound)
    work = float(np.sum(m * source * (z - state.z)))
    diag = StepDiagnostics(
        step_index=new.step_index, t=t_next, picard_iterations=iterations, picard_sweeps=sweep,
        picard_residual=res, first_residual=first, converged=converged, bound_violations=bounds,
        z_overshoot=bounds["z"], z_source_work=work, solver_reports=reports,
    )
    return new, diag


def n_steps_for(T, tau):
    if not tau > 0:
        raise InvalidParameter(f"time step must be positive, got {tau}")
    k = T / tau
    n = int(round(k))
    if abs(k - n) > 1e-9 * max(1.0, k):
        raise InvalidParameter(f"T / tau = {k} is not an integer")
    return n


def run_simulation(coeffs, mesh, tau, lam=None, callback=None, snapshot_stride=1,
                   tol_fp=TOL_FP, max_fp=MAX_FP, solver_tol=SOLVER_TOL, validate=True,
                   validation_samples=2000, observer=None):
    """Run K = T/tau steps from the initial data.

    ``callback(step_index, t, state)`` receives read-only snapshots every
    ``snapshot_stride`` steps and at the final step. On a step failure the
    raised :class:`StepFailure` carries ``state`` and ``diagnostics`` of the
    partial trajectory.
    """
    lam = coeffs.lam if lam is None else lam
    n_steps = n_steps_for(coeffs.T, tau)
    if validate:
        report = validate_hypotheses(coeffs, validation_samples, mesh=mesh, dims=(mesh.dim,))
        if not report.passed:
            raise HypothesisViolation("coefficient hypotheses failed:\n" + report.summary())
    state = initial_state(coeffs, mesh)
    history = []
    _emit(callback, state)
    for k in range(1, n_steps + 1):
        t_next = coeffs.T if k == n_steps else k * tau
        try:
            state, diag = gamma_picard(mesh, coeffs, state, tau, lam, t_next, tol_fp, max_fp,
                                       solver_tol, observer)
        except StepFailure as exc:
            exc.state = state
            exc.diagnostics = history
            raise
        history.append(diag)
        if k % snapshot_stride == 0 or k == n_steps:
            _emit(callback, state)
    return state, history


def _emit(callback, state):
    if callback is None:
        return
    view = state.copy()
    for arr in (view.phi, view.sigma, view.u, view.u_prev, view.z):
        arr.flags.writeable = False
    callback(view.step_index, view.t, view)
