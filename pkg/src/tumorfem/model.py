"""Coefficients and nonlinearities of the tumour / lactate / displacement / damage system.

All coefficient callables are vectorised over numpy arrays:

* ``p(sigma, z)``, ``g(sigma, z)``: proliferation and necrosis rates
* ``k1(phi, z)``, ``k2(phi, z)``, ``J(phi, z)``: lactate uptake and production
* ``A_tensor(phi, z, dim)``, ``B_tensor(phi, z, dim)``: viscosity and elasticity,
  returning arrays of shape (m, dim, dim, dim, dim)
* ``f(x, t)`` body force (n, dim), ``w(x, t)`` damage source (n,),
  ``sigma_gamma(x, t)`` boundary lactate (n,), ``pi(z)``, ``psi(x, phi, eps)``
* ``phi0, sigma0, z0`` (x) -> (n,), ``u0`` (x) -> (n, dim)
"""
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import identity_tensor, isotropic_tensor, tensor_asymmetry
from .errors import InvalidParameter, UnknownPreset

INDICATOR_01 = "indicator_01"


def alpha_eval(phi, N):
    """Truncated logistic term: phi (1 - phi/N) on [0, N], zero elsewhere."""
    if N <= 0:
        raise InvalidParameter(f"carrying capacity must be positive, got {N}")
    phi = np.asarray(phi, dtype=float)
    out = np.where((phi >= 0.0) & (phi <= N), phi * (1.0 - phi / N), 0.0)
    return out if out.ndim else float(out)


def yosida_eval(r, lam):
    """Yosida approximation of the subdifferential of the indicator of [0, 1]."""
    if lam <= 0:
        raise InvalidParameter(f"Yosida parameter must be positive, got {lam}")
    r = np.asarray(r, dtype=float)
    out = (r - np.clip(r, 0.0, 1.0)) / lam
    return out if out.ndim else float(out)


def yosida_potential(r, lam):
    """Moreau envelope of the indicator of [0, 1]: dist(r, [0,1])^2 / (2 lam)."""
    r = np.asarray(r, dtype=float)
    d = r - np.clip(r, 0.0, 1.0)
    return d * d / (2.0 * lam)


def frobenius(eps):
    eps = np.asarray(eps, dtype=float)
    return np.sqrt(np.sum(eps * eps, axis=(-2, -1)))


@dataclass(frozen=True)
class LinearPsi:
    """Psi(x, phi, eps) = c_phi * phi + c_eps * |eps|_F, so Psi(x, 0, 0) = 0."""

    c_phi: float = 0.0
    c_eps: float = 0.0

    def __call__(self, x, phi, eps):
        return self.c_phi * np.asarray(phi, dtype=float) + self.c_eps * frobenius(eps)

    @property
    def lipschitz(self):
        return max(abs(self.c_phi), abs(self.c_eps))


def psi_eval(x, phi, eps, c_phi=1.0, c_eps=1.0):
    out = LinearPsi(c_phi, c_eps)(x, phi, eps)
    return float(out) if np.ndim(out) == 0 else out


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


@dataclass(frozen=True)
class IsotropicTensor:
    """mu and lam scaled by delta + (1 - delta) clip(z, 0, 1) (delta = 1: no softening)."""

    mu: float
    lam: float
    delta: float = 1.0

    def __call__(self, phi, z, dim):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        scale = self.delta + (1.0 - self.delta) * np.clip(z, 0.0, 1.0)
        return scale[:, None, None, None, None] * isotropic_tensor(dim, self.mu, self.lam)

    @property
    def ellipticity(self):
        # smallest eigenvalue on symmetric matrices is 2 mu (lam >= 0)
        return 2.0 * self.mu * self.delta


@dataclass(frozen=True)
class IdentityTensor:
    scale: float = 1.0

    def __call__(self, phi, z, dim):
        n = np.size(z)
        return np.broadcast_to(self.scale * identity_tensor(dim), (n, dim, dim, dim, dim)).copy()

    @property
    def ellipticity(self):
        return self.scale


def _zero_rate(a, b):
    return np.zeros(np.broadcast(np.asarray(a), np.asarray(b)).shape)


@dataclass(frozen=True)
class ModelCoefficients:
    N: float
    p: Callable
    g: Callable
    k1: Callable
    k2: Callable
    J: Callable
    A_tensor: Callable
    B_tensor: Callable
    f: Callable
    pi: Callable
    w: Callable
    psi: Callable
    sigma_gamma: Callable
    phi0: Callable
    sigma0: Callable
    u0: Callable
    z0: Callable
    T: float = 1.0
    lam: float = 0.05
    # declared bounds and constants
    p_star: float = 1.0
    g_star: float = 1.0
    k1_star: float = 1.0
    k2_lower: float = 1.0
    k2_star: float = 1.0
    J_star: float = 1.0
    M0: float = 1.0
    A_ellipticity: float = 1.0
    pi_lipschitz: float = 0.0
    psi_lipschitz: float = 0.0
    beta_kind: str = INDICATOR_01
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for key in ("N", "k2_lower", "M0", "A_ellipticity", "lam"):
            if not getattr(self, key) > 0:
                raise InvalidParameter(f"{key} must be positive, got {getattr(self, key)}")
        for key in ("p_star", "g_star", "k1_star", "J_star", "pi_lipschitz", "psi_lipschitz", "T"):
            if not getattr(self, key) >= 0:
                raise InvalidParameter(f"{key} must be non-negative, got {getattr(self, key)}")
        if self.k2_star < self.k2_lower:
            raise InvalidParameter("k2_star must be >= k2_lower")
        if self.beta_kind != INDICATOR_01:
            raise InvalidParameter(f"unsupported beta graph {self.beta_kind!r}")

    @property
    def sigma_bound(self):
        """max(M0, J*) e^T, the a priori upper bound for the lactate."""
        return max(self.M0, self.J_star) * np.exp(self.T)

    def replace(self, **changes):
        return replace(self, **changes)


# --------------------------------------------------------------------------
# hypothesis validation


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    worst: float = 0.0
    witness: object = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def summary(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"{status} {c.name}"
            if not c.passed:
                line += f" worst={c.worst:.3e} witness={c.witness} {c.detail}"
            lines.append(line)
        return "\n".join(lines)


def _sym_basis(dim):
    """Orthonormal basis of symmetric dim x dim matrices (Frobenius product)."""
    basis = []
    for i in range(dim):
        for j in range(i, dim):
            e = np.zeros((dim, dim))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(e)
    return np.array(basis)


def tensor_min_eigenvalue(tensors):
    """Smallest eigenvalue of each tensor acting on symmetric matrices."""
    tensors = np.asarray(tensors, dtype=float)
    dim = tensors.shape[-1]
    basis = _sym_basis(dim)
    gram = np.einsum("aij,mijkl,bkl->mab", basis, tensors, basis)
    gram = 0.5 * (gram + np.swapaxes(gram, 1, 2))
    return np.linalg.eigvalsh(gram)[:, 0]


def _bound_check(name, values, lo, hi, witnesses):
    values = np.asarray(values, dtype=float)
    viol = np.maximum(lo - values, values - hi)
    viol = np.where(np.isfinite(values), viol, np.inf)
    k = int(np.argmax(viol))
    worst = float(max(viol[k], 0.0))
    return HypothesisCheck(name, worst == 0.0, worst, witnesses[k] if worst > 0 else None,
                           f"expected [{lo}, {hi}]")


def validate_hypotheses(coeffs, samples=1000, mesh=None, seed=0, dims=(1, 2)):
    """Monte-Carlo check of the coefficient hypotheses over the physical box.

    Samples (phi, sigma, z) in [0, N] x [0, M] x [0, 1] with M the lactate bound.
    Failures are reported, never raised. With a ``mesh`` the initial data are
    also checked nodally.
    """
    if samples < 1:
        raise InvalidParameter("samples must be >= 1")
    rng = np.random.default_rng(seed)
    c = coeffs
    M = c.sigma_bound
    phi = rng.uniform(0.0, c.N, samples)
    sig = rng.uniform(0.0, M, samples)
    z = rng.uniform(0.0, 1.0, samples)
    # include box corners, where bounds are most often attained
    corners = np.array(np.meshgrid([0.0, c.N], [0.0, M], [0.0, 1.0])).reshape(3, -1)
    phi, sig, z = (np.concatenate([a, b]) for a, b in zip((phi, sig, z), corners))
    pts_sz = list(zip(sig, z))
    pts_pz = list(zip(phi, z))
    checks = [
        _bound_check("rates.p", c.p(sig, z), 0.0, c.p_star, pts_sz),
        _bound_check("rates.g", c.g(sig, z), 0.0, c.g_star, pts_sz),
        _bound_check("lactate.k1", c.k1(phi, z), 0.0, c.k1_star, pts_pz),
        _bound_check("lactate.k2", c.k2(phi, z), c.k2_lower, c.k2_star, pts_pz),
        _bound_check("lactate.J", c.J(phi, z), 0.0, c.J_star, pts_pz),
    ]

    for dim in dims:
        A = np.asarray(c.A_tensor(phi, z, dim), dtype=float)
        B = np.asarray(c.B_tensor(phi, z, dim), dtype=float)
        for label, T in (("A", A), ("B", B)):
            asym = tensor_asymmetry(T)
            checks.append(HypothesisCheck(f"tensor.{label}_symmetry.d{dim}", asym <= 1e-10, asym,
                                          None, "a_hijk = a_ihjk = a_jkhi"))
        lam_a = tensor_min_eigenvalue(A)
        k = int(np.argmin(lam_a - c.A_ellipticity))
        short = c.A_ellipticity - lam_a[k]
        checks.append(HypothesisCheck(f"tensor.A_ellipticity.d{dim}", short <= 1e-10 * max(1, c.A_ellipticity),
                                      max(short, 0.0), pts_pz[k], f"A eps:eps >= {c.A_ellipticity}|eps|^2"))
        lam_b = tensor_min_eigenvalue(B)
        k = int(np.argmin(lam_b))
        checks.append(HypothesisCheck(f"tensor.B_nonnegative.d{dim}", lam_b[k] >= -1e-12, max(-lam_b[k], 0.0),
                                      pts_pz[k], "B eps:eps >= 0"))

    # pi nonincreasing (concave primitive) and Lipschitz
    r = np.sort(rng.uniform(-0.5, 1.5, samples))
    pr = np.asarray(c.pi(r), dtype=float)
    inc = np.diff(pr)
    k = int(np.argmax(inc)) if inc.size else 0
    worst = float(max(inc.max(initial=0.0), 0.0))
    checks.append(HypothesisCheck("damage.pi_nonincreasing", worst <= 1e-12, worst,
                                  float(r[k]) if worst > 0 else None, "primitive of pi concave"))
    slope = np.abs(inc) / np.maximum(np.diff(r), 1e-300)
    excess = float(max(slope.max(initial=0.0) - c.pi_lipschitz * (1 + 1e-9), 0.0))
    checks.append(HypothesisCheck("damage.pi_lipschitz", excess <= 1e-9, excess, None,
                                  f"Lipschitz constant {c.pi_lipschitz}"))

    # Psi Lipschitz in (phi, eps) with the declared constant, and Psi(x,0,0) finite
    for dim in dims:
        x = rng.uniform(0.0, 1.0, (samples, dim))
        p1, p2 = rng.uniform(-c.N, 2 * c.N, (2, samples))
        e1, e2 = rng.normal(size=(2, samples, dim, dim))
        e1 = 0.5 * (e1 + np.swapaxes(e1, 1, 2))
        e2 = 0.5 * (e2 + np.swapaxes(e2, 1, 2))
        lhs = np.abs(np.asarray(c.psi(x, p1, e1)) - np.asarray(c.psi(x, p2, e2)))
        rhs = c.psi_lipschitz * (np.abs(p1 - p2) + frobenius(e1 - e2))
        excess = lhs - rhs * (1 + 1e-9) - 1e-12
        k = int(np.argmax(excess))
        worst = float(max(excess[k], 0.0))
        checks.append(HypothesisCheck(f"psi.psi_lipschitz.d{dim}", worst == 0.0, worst,
                                      (float(p1[k]), float(p2[k])) if worst else None,
                                      f"C_psi = {c.psi_lipschitz}"))
        psi_hat = np.asarray(c.psi(x, np.zeros(samples), np.zeros((samples, dim, dim))))
        checks.append(HypothesisCheck(f"psi.psi_hat_finite.d{dim}", bool(np.all(np.isfinite(psi_hat)))))

        ts = rng.uniform(0.0, max(c.T, 0.0), samples)
        wv = np.asarray(c.w(x, ts[0]), dtype=float)
        fv = np.asarray(c.f(x, ts[0]), dtype=float)
        checks.append(HypothesisCheck(f"data.w_finite.d{dim}", bool(np.all(np.isfinite(wv)))))
        checks.append(HypothesisCheck(f"data.f_finite.d{dim}", bool(np.all(np.isfinite(fv)))))
        sg = np.concatenate([np.asarray(c.sigma_gamma(x, t), dtype=float).ravel()
                             for t in (0.0, c.T, ts[1] if samples > 1 else 0.0)])
        checks.append(_bound_check(f"data.sigma_gamma.d{dim}", sg, 0.0, c.M0,
                                   list(np.repeat(np.arange(3), samples))))

    if mesh is not None:
        checks.extend(_check_initial_data(c, mesh))
    return ValidationReport(checks)


def _check_initial_data(c, mesh):
    x = mesh.nodes
    nodes = list(range(mesh.n_nodes))
    out = [
        _bound_check("initial.phi0", c.phi0(x), 0.0, c.N, nodes),
        _bound_check("initial.sigma0", c.sigma0(x), 0.0, c.M0, nodes),
        _bound_check("initial.z0", c.z0(x), 0.0, 1.0, nodes),
    ]
    u0 = np.asarray(c.u0(x), dtype=float).reshape(mesh.n_nodes, mesh.dim)
    bmax = float(np.max(np.abs(u0[mesh.node_boundary_flags]), initial=0.0))
    out.append(HypothesisCheck("initial.u0_boundary", bmax <= 1e-12, bmax, None, "u0 = 0 on the boundary"))
    return out


# --------------------------------------------------------------------------
# presets

PRESET_DEFAULTS = {
    "isotropic_baseline": dict(
        N=1.0, M0=1.0, T=1.0, lam=0.05, sigma_gamma=0.5, w=0.1, f=0.0,
        p_scale=1.0, g_scale=0.2, k1_scale=1.0, J_scale=0.8, A_scale=1.0, B_scale=0.5,
        psi_c_phi=0.1, psi_c_eps=1.0, pi_slope=0.1,
        phi0_amplitude=0.8, phi0_width=0.05, phi0_center=0.5, sigma0=0.3, z0=0.9, u0_amplitude=0.01,
    ),
    "damage_softening": dict(
        N=1.0, M0=1.0, T=1.0, lam=0.05, sigma_gamma=0.5, w=0.1, f=0.0,
        p_scale=1.0, g_scale=0.2, k1_scale=1.0, J_scale=0.8, A_scale=1.0, B_scale=0.5,
        psi_c_phi=0.1, psi_c_eps=1.0, pi_slope=0.1, delta=0.2,
        phi0_amplitude=0.8, phi0_width=0.05, phi0_center=0.5, sigma0=0.3, z0=0.9, u0_amplitude=0.01,
    ),
    "decoupled_heat": dict(
        N=1.0, M0=1.0, T=1.0, lam=0.05, A_scale=1.0, phi0_mean=0.5, phi0_amplitude=0.5, z0=0.5,
    ),
}


def _bump(amplitude, center, width):
    def phi0(x):
        r2 = np.sum((np.asarray(x, dtype=float) - center) ** 2, axis=1)
        return amplitude * np.exp(-r2 / width)
    return phi0


def _sine_bubble(amplitude, dim_offsets=(1.0, -0.5)):
    def u0(x):
        x = np.asarray(x, dtype=float)
        bubble = np.prod(np.sin(np.pi * x), axis=1)
        bubble[np.abs(bubble) < 1e-14] = 0.0
        out = np.empty_like(x)
        for k in range(x.shape[1]):
            out[:, k] = amplitude * dim_offsets[k] * bubble
        return out
    return u0


def _const_vector(value):
    def f(x, t):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[:, 0] = value
        return out
    return f


def _const_field(value):
    def fn(x, t=None):
        return np.full(len(x), float(value))
    return fn


def preset(name, **overrides):
    """Named, hypothesis-conforming coefficient set; keyword overrides tune its constants."""
    if name not in PRESET_DEFAULTS:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(PRESET_DEFAULTS)}")
    unknown = set(overrides) - set(PRESET_DEFAULTS[name])
    if unknown:
        raise InvalidParameter(f"preset {name!r} has no parameter(s) {sorted(unknown)}")
    q = dict(PRESET_DEFAULTS[name], **overrides)
    if name == "decoupled_heat":
        return _decoupled_heat(q)
    return _coupled(name, q)


def _coupled(name, q):
    N, M0 = q["N"], q["M0"]
    ps, gs, k1s, Js = q["p_scale"], q["g_scale"], q["k1_scale"], q["J_scale"]

    def p(sigma, z):
        return ps * _sigmoid(4.0 * (np.asarray(sigma) / M0 - 0.5)) * (0.5 + 0.5 * np.clip(z, 0.0, 1.0))

    def g(sigma, z):
        return gs * _sigmoid(4.0 * (0.5 - np.asarray(sigma) / M0)) * np.ones_like(np.asarray(z, dtype=float))

    def k1(phi, z):
        return k1s * (0.5 + 0.5 * _sigmoid(4.0 * (np.asarray(phi) / N - 0.5))) * np.ones_like(np.asarray(z, dtype=float))

    def k2(phi, z):
        return np.ones(np.broadcast(np.asarray(phi), np.asarray(z)).shape)

    def J(phi, z):
        return Js * _sigmoid(4.0 * (np.asarray(phi) / N - 0.3)) * np.ones_like(np.asarray(z, dtype=float))

    slope = q["pi_slope"]

    def pi(z):
        return slope * (0.5 - np.asarray(z, dtype=float))

    delta = q.get("delta", 1.0)
    A = IsotropicTensor(q["A_scale"], q["A_scale"], delta)
    B = IsotropicTensor(q["B_scale"], q["B_scale"], delta)
    psi = LinearPsi(q["psi_c_phi"], q["psi_c_eps"])
    sg = q["sigma_gamma"]
    return ModelCoefficients(
        N=N, p=p, g=g, k1=k1, k2=k2, J=J, A_tensor=A, B_tensor=B,
        f=_const_vector(q["f"]), pi=pi, w=_const_field(q["w"]), psi=psi,
        sigma_gamma=sg if callable(sg) else _const_field(sg),
        phi0=_bump(q["phi0_amplitude"] * N, q["phi0_center"], q["phi0_width"]),
        sigma0=_const_field(q["sigma0"] * M0), u0=_sine_bubble(q["u0_amplitude"]),
        z0=_const_field(q["z0"]),
        T=q["T"], lam=q["lam"],
        p_star=ps, g_star=gs, k1_star=k1s, k2_lower=1.0, k2_star=1.0, J_star=Js, M0=M0,
        A_ellipticity=A.ellipticity, pi_lipschitz=slope, psi_lipschitz=psi.lipschitz,
        name=name, params=q,
    )


def _decoupled_heat(q):
    mean, amp = q["phi0_mean"], q["phi0_amplitude"]

    def phi0(x):
        return mean + amp * np.cos(np.pi * np.asarray(x, dtype=float)[:, 0])

    def u0(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def pi(z):
        return np.zeros_like(np.asarray(z, dtype=float))

    A = IdentityTensor(q["A_scale"])
    return ModelCoefficients(
        N=q["N"], p=_zero_rate, g=_zero_rate, k1=_zero_rate,
        k2=lambda phi, z: np.ones(np.broadcast(np.asarray(phi), np.asarray(z)).shape),
        J=_zero_rate, A_tensor=A, B_tensor=IdentityTensor(0.0),
        f=_const_vector(0.0), pi=pi, w=_const_field(0.0), psi=LinearPsi(0.0, 0.0),
        sigma_gamma=_const_field(0.0), phi0=phi0, sigma0=_const_field(0.0), u0=u0,
        z0=_const_field(q["z0"]), T=q["T"], lam=q["lam"],
        p_star=0.0, g_star=0.0, k1_star=0.0, k2_lower=1.0, k2_star=1.0, J_star=0.0, M0=q["M0"],
        A_ellipticity=A.ellipticity, pi_lipschitz=0.0, psi_lipschitz=0.0,
        name="decoupled_heat", params=q,
    )


def random_coefficients(rng, name=None):
    """Random hypothesis-conforming variant of a coupled preset (for test batteries)."""
    if name is None:
        name = ("isotropic_baseline", "damage_softening")[int(rng.integers(2))]
    q = dict(
        N=float(rng.uniform(0.5, 2.0)),
        M0=float(rng.uniform(0.5, 2.0)),
        sigma_gamma=0.0,
        w=float(rng.uniform(0.0, 0.3)),
        f=float(rng.uniform(-0.5, 0.5)),
        p_scale=float(rng.uniform(0.2, 3.0)),
        g_scale=float(rng.uniform(0.0, 1.0)),
        k1_scale=float(rng.uniform(0.1, 2.0)),
        J_scale=float(rng.uniform(0.1, 2.0)),
        A_scale=float(rng.uniform(0.5, 2.0)),
        B_scale=float(rng.uniform(0.0, 2.0)),
        psi_c_phi=float(rng.uniform(0.0, 0.3)),
        psi_c_eps=float(rng.uniform(0.0, 2.0)),
        pi_slope=float(rng.uniform(0.0, 0.5)),
        phi0_amplitude=float(rng.uniform(0.3, 1.0)),
        phi0_width=float(rng.uniform(0.02, 0.2)),
        phi0_center=float(rng.uniform(0.3, 0.7)),
        sigma0=float(rng.uniform(0.0, 1.0)),
        z0=float(rng.uniform(0.2, 1.0)),
        u0_amplitude=float(rng.uniform(0.0, 0.05)),
    )
    q["sigma_gamma"] = float(rng.uniform(0.0, 1.0)) * q["M0"]
    return preset(name, **q)
