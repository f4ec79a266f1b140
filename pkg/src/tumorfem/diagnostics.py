"""Norms, bound audits and the continuous-dependence experiment."""
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_boundary_mass, assemble_mass, assemble_stiffness, boundary_values, lumped_mass
from .errors import HypothesisViolation, InvalidParameter, ShapeError
from .model import validate_hypotheses, yosida_potential
from .stepper import BOUND_TOL, MAX_FP, TOL_FP, bound_overshoots, n_steps_for, run_simulation


@dataclass
class NormReport:
    linf_H: float
    l2_V: float
    h1_V0: float

    @property
    def linf_H_l2_V(self):
        """Norm of L^inf(H) intersect L^2(V), taken as the sum of the two parts."""
        return self.linf_H + self.l2_V


def _quadratic_forms(mesh):
    return mesh.cached("norm_forms", lambda: (assemble_mass(mesh), assemble_stiffness(mesh)))


def _per_component(values, mesh):
    v = np.asarray(values, dtype=float)
    if v.shape == (mesh.n_nodes,):
        return v[:, None]
    if v.shape == (mesh.n_nodes, mesh.dim):
        return v
    raise ShapeError(f"field of shape {v.shape} does not live on a mesh with {mesh.n_nodes} nodes")


def l2_norm(mesh, values):
    M, _ = _quadratic_forms(mesh)
    v = _per_component(values, mesh)
    return float(np.sqrt(sum(v[:, c] @ (M @ v[:, c]) for c in range(v.shape[1]))))


def h1_norm(mesh, values):
    M, K = _quadratic_forms(mesh)
    v = _per_component(values, mesh)
    return float(np.sqrt(sum(v[:, c] @ (M @ v[:, c]) + v[:, c] @ (K @ v[:, c]) for c in range(v.shape[1]))))


def field_norms(trajectory, mesh, tau):
    """Discrete space-time norms of a trajectory sampled every ``tau``.

    linf_H is the max over snapshots of the L2 norm; l2_V and h1_V0 are
    right-endpoint sums over k = 1..K of the H1 norms of the snapshots and of
    the difference quotients (u_k - u_{k-1}) / tau.
    """
    if len(trajectory) == 0:
        raise InvalidParameter("empty trajectory")
    linf = max(l2_norm(mesh, v) for v in trajectory)
    l2v = np.sqrt(tau * sum(h1_norm(mesh, v) ** 2 for v in trajectory[1:]))
    h1 = np.sqrt(tau * sum(h1_norm(mesh, (np.asarray(b) - np.asarray(a)) / tau) ** 2
                           for a, b in zip(trajectory[:-1], trajectory[1:])))
    return NormReport(float(linf), float(l2v), float(h1))


@dataclass
class BoundAudit:
    phi: float
    sigma: float
    z: float
    tol: float = BOUND_TOL

    @property
    def flagged(self):
        return {k: v > self.tol for k, v in (("phi", self.phi), ("sigma", self.sigma))}

    @property
    def ok(self):
        return not any(self.flagged.values())


def audit_bounds(state, coeffs, tol=BOUND_TOL):
    """Overshoot of phi, sigma, z outside [0, N], [0, M], [0, 1].

    phi and sigma are flagged above ``tol``; z is reported only, since the
    Yosida regularisation lets it leave [0, 1] by O(lambda).
    """
    o = bound_overshoots(state, coeffs.N, coeffs.sigma_bound)
    return BoundAudit(o["phi"], o["sigma"], o["z"], tol)


# --------------------------------------------------------------------------
# energy and velocity bookkeeping


def z_energy(mesh, z, lam):
    """1/2 |grad z|^2 + integral of the Moreau envelope, with lumped quadrature."""
    K = assemble_stiffness(mesh)
    return float(0.5 * z @ (K @ z) + lumped_mass(mesh) @ yosida_potential(z, lam))


def z_energy_ledger(mesh, states, diagnostics, tau, lam):
    """Return (lhs, rhs) arrays of the discrete damage energy inequality.

    lhs_k = sum_j (1 - tau/(2 lam)) tau |dz_j/tau|^2 + E(z_k)
    rhs_k = E(z_0) + sum_j work_j

    where work_j is the lumped product of the explicit source with dz_j.
    The scheme guarantees lhs_k <= rhs_k (up to solver tolerance) when tau <= lam.
    """
    m = lumped_mass(mesh)
    e0 = z_energy(mesh, states[0].z, lam)
    lhs, rhs = [e0], [e0]
    dissipation = work = 0.0
    for prev, cur, d in zip(states[:-1], states[1:], diagnostics):
        dz = cur.z - prev.z
        dissipation += (1.0 - tau / (2.0 * lam)) * float(dz @ (m * dz)) / tau
        work += d.z_source_work
        lhs.append(dissipation + z_energy(mesh, cur.z, lam))
        rhs.append(e0 + work)
    return np.array(lhs), np.array(rhs)


def velocity_constant(mesh, states, tau, f_linf_H):
    """max_k |(u_k - u_{k-1})/tau|_H1 divided by (|f|_Linf(H) + |u_0|_H1)."""
    vmax = max(h1_norm(mesh, (b.u - a.u) / tau) for a, b in zip(states[:-1], states[1:]))
    denom = f_linf_H + h1_norm(mesh, states[0].u)
    return vmax / denom if denom > 0 else (0.0 if vmax == 0 else np.inf)


# --------------------------------------------------------------------------
# continuous dependence


@dataclass
class DependenceResult:
    lhs: float
    rhs_data: float
    ratio: float
    parts: dict = field(default_factory=dict)
    strain_rate_max: float = 0.0


def _collect(coeffs, mesh, tau, lam, tol_fp, max_fp):
    states = []
    run_simulation(coeffs, mesh, tau, lam, callback=lambda k, t, s: states.append(s),
                   snapshot_stride=1, tol_fp=tol_fp, max_fp=max_fp, validate=False)
    return states


def _data_difference(c1, c2, mesh, tau):
    x = mesh.nodes
    n_steps = n_steps_for(c1.T, tau)
    times = [c1.T if k == n_steps else k * tau for k in range(1, n_steps + 1)]
    MG = assemble_boundary_mass(mesh)
    parts = {
        "phi0": l2_norm(mesh, c1.phi0(x) - c2.phi0(x)),
        "sigma0": l2_norm(mesh, c1.sigma0(x) - c2.sigma0(x)),
        "u0": l2_norm(mesh, np.asarray(c1.u0(x)).reshape(-1, mesh.dim) - np.asarray(c2.u0(x)).reshape(-1, mesh.dim)),
        "z0": l2_norm(mesh, c1.z0(x) - c2.z0(x)),
    }
    f_sq = w_sq = g_sq = 0.0
    for t in times:
        df = np.asarray(c1.f(x, t), dtype=float).reshape(-1, mesh.dim) - np.asarray(c2.f(x, t), dtype=float).reshape(-1, mesh.dim)
        f_sq += l2_norm(mesh, df) ** 2
        dw = np.broadcast_to(np.asarray(c1.w(x, t), dtype=float) - np.asarray(c2.w(x, t), dtype=float), (mesh.n_nodes,))
        w_sq += l2_norm(mesh, dw) ** 2
        ds = boundary_values(mesh, c1.sigma_gamma, t) - boundary_values(mesh, c2.sigma_gamma, t)
        g_sq += float(ds @ (MG @ ds))
    parts["f"] = float(np.sqrt(tau * f_sq))
    parts["w"] = float(np.sqrt(tau * w_sq))
    parts["sigma_gamma"] = float(np.sqrt(tau * g_sq))
    return parts


def continuous_dependence_experiment(coeffs1, coeffs2, mesh, tau, lam=None, tol_fp=TOL_FP, max_fp=MAX_FP,
                                     validation_samples=2000):
    """Run both coefficient sets and compare solution differences with data differences.

    lhs sums the L^inf(H) + L^2(V) norms of the phi, sigma and z differences and
    the H^1(0,T; V_0) norm (L^2(V) part + velocity part) of the u difference.
    rhs_data sums the H norms of the initial-data differences and the L^2-in-time
    norms of the f, w and sigma_gamma differences. ratio = lhs / rhs_data, with
    0/0 reported as 0.
    """
    if coeffs1.T != coeffs2.T:
        raise InvalidParameter("both runs need the same final time")
    lam = coeffs1.lam if lam is None else lam
    for c in (coeffs1, coeffs2):
        report = validate_hypotheses(c, validation_samples, mesh=mesh, dims=(mesh.dim,))
        if not report.passed:
            raise HypothesisViolation("coefficient hypotheses failed:\n" + report.summary())
    s1 = _collect(coeffs1, mesh, tau, lam, tol_fp, max_fp)
    s2 = _collect(coeffs2, mesh, tau, lam, tol_fp, max_fp)
    parts = {}
    for name in ("phi", "sigma", "z"):
        diff = [getattr(a, name) - getattr(b, name) for a, b in zip(s1, s2)]
        parts[name] = field_norms(diff, mesh, tau).linf_H_l2_V
    du = [a.u - b.u for a, b in zip(s1, s2)]
    nu = field_norms(du, mesh, tau)
    parts["u"] = nu.l2_V + nu.h1_V0
    lhs = float(sum(parts.values()))
    data = _data_difference(coeffs1, coeffs2, mesh, tau)
    rhs = float(sum(data.values()))
    if rhs == 0.0:
        ratio = 0.0 if lhs == 0.0 else np.inf
    else:
        ratio = lhs / rhs
    rate = max((h1_norm(mesh, (b.u - a.u) / tau) for s in (s1, s2) for a, b in zip(s[:-1], s[1:])),
               default=0.0)
    return DependenceResult(lhs, rhs, ratio, {"solution": parts, "data": data}, rate)
