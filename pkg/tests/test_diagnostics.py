import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tumorfem import audit_bounds, build_mesh, field_norms, preset
from tumorfem.diagnostics import DependenceResult, continuous_dependence_experiment, h1_norm
from tumorfem.errors import HypothesisViolation, InvalidParameter, ShapeError
from tumorfem.output import append_dependence_row
from tumorfem.stepper import SimState


def test_zero_trajectory(square5):
    traj = [np.zeros(square5.n_nodes)] * 3
    r = field_norms(traj, square5, 0.1)
    assert (r.linf_H, r.l2_V, r.h1_V0) == (0.0, 0.0, 0.0)


def test_constant_field_norm():
    mesh = build_mesh("interval(0,1)", 9)
    r = field_norms([np.ones(9)], mesh, 0.1)
    assert r.linf_H == pytest.approx(1.0, rel=1e-12)
    assert r.l2_V == 0.0 and r.h1_V0 == 0.0


def test_two_snapshot_velocity_norm(line16, rng):
    c = rng.normal(size=line16.n_nodes)
    tau = 0.05
    r = field_norms([np.zeros_like(c), c], line16, tau)
    assert r.h1_V0 == pytest.approx(h1_norm(line16, c) * np.sqrt(tau) / tau, rel=1e-12)
    assert r.l2_V == pytest.approx(h1_norm(line16, c) * np.sqrt(tau), rel=1e-12)


def test_displacement_norms_are_componentwise(square5, rng):
    u = rng.normal(size=(square5.n_nodes, 2))
    both = field_norms([u], square5, 1.0).linf_H
    parts = [field_norms([u[:, k]], square5, 1.0).linf_H for k in range(2)]
    assert both == pytest.approx(np.hypot(*parts))


@settings(max_examples=30, deadline=None)
# squared norms underflow below ~1e-150, so tiny nonzero scales are excluded
@given(s=st.floats(-1e3, 1e3).filter(lambda v: v == 0 or abs(v) > 1e-100), seed=st.integers(0, 1000))
def test_norms_absolutely_homogeneous(s, seed):
    mesh = build_mesh("rectangle(0,1,0,1)", 4)
    rng = np.random.default_rng(seed)
    traj = [rng.normal(size=mesh.n_nodes) for _ in range(4)]
    a = field_norms(traj, mesh, 0.1)
    b = field_norms([s * v for v in traj], mesh, 0.1)
    for x, y in ((a.linf_H, b.linf_H), (a.l2_V, b.l2_V), (a.h1_V0, b.h1_V0)):
        assert y == pytest.approx(abs(s) * x, rel=1e-12, abs=1e-300)


def test_norm_errors(square5):
    with pytest.raises(ShapeError):
        field_norms([np.zeros(3)], square5, 0.1)
    with pytest.raises(InvalidParameter):
        field_norms([], square5, 0.1)


def _state(mesh, phi, sigma, z):
    n = mesh.n_nodes
    u = np.zeros((n, mesh.dim))
    return SimState(0.0, np.asarray(phi, float), np.asarray(sigma, float), u, u, np.asarray(z, float))


def test_audit_bounds():
    mesh = build_mesh("interval(0,1)", 3)
    c = preset("isotropic_baseline")
    ok = audit_bounds(_state(mesh, [0, 0.5, 1], [0, 0.1, 0.2], [0, 1, 0.5]), c)
    assert (ok.phi, ok.sigma, ok.z) == (0.0, 0.0, 0.0) and ok.ok
    over = audit_bounds(_state(mesh, [0, 0.5, c.N + 0.01], [0, 0, 0], [0.5] * 3), c)
    assert over.phi == pytest.approx(0.01)
    assert over.flagged["phi"]
    low = audit_bounds(_state(mesh, [0.1] * 3, [-2e-9, 0, 0], [1.05, 0.5, 0.5]), c)
    assert low.flagged["sigma"] and not low.ok
    assert low.z == pytest.approx(0.05)


def _perturbed(base, delta):
    phi0 = base.phi0
    return base.replace(phi0=lambda x: phi0(x) + delta * np.cos(np.pi * x[:, 0]))


@pytest.fixture(scope="module")
def short_base():
    return preset("isotropic_baseline", T=0.3)


def test_identical_runs_give_zero(short_base):
    mesh = build_mesh("interval(0,1)", 16)
    r = continuous_dependence_experiment(short_base, short_base, mesh, 0.01, 0.05, validation_samples=200)
    assert (r.lhs, r.rhs_data, r.ratio) == (0.0, 0.0, 0.0)


def test_dependence_is_linear_for_small_perturbations(short_base):
    mesh = build_mesh("interval(0,1)", 32)
    r1 = continuous_dependence_experiment(short_base, _perturbed(short_base, 4e-3), mesh, 0.01, 0.05,
                                          validation_samples=200)
    r2 = continuous_dependence_experiment(short_base, _perturbed(short_base, 2e-3), mesh, 0.01, 0.05,
                                          validation_samples=200)
    assert 0.4 <= r2.lhs / r1.lhs <= 0.6
    assert np.isfinite(r1.ratio) and r1.ratio > 0
    assert r1.strain_rate_max >= 0


def test_ratio_stable_under_refinement(short_base):
    ratios = []
    for n in (17, 33):
        mesh = build_mesh("interval(0,1)", n)
        r = continuous_dependence_experiment(short_base, _perturbed(short_base, 2e-3), mesh, 0.01, 0.05,
                                             validation_samples=200)
        ratios.append(r.ratio)
    assert 0.5 <= ratios[1] / ratios[0] <= 2.0


def test_refuses_invalid_coefficients(short_base, line16):
    bad = short_base.replace(z0=lambda x: np.full(len(x), 2.0))
    with pytest.raises(HypothesisViolation):
        continuous_dependence_experiment(short_base, bad, line16, 0.01, 0.05)


def test_dependence_csv(tmp_path):
    path = tmp_path / "dep.csv"
    for k in range(2):
        append_dependence_row(path, f"case{k}", 0.1, 0.01, 0.05, DependenceResult(1.0, 2.0, 0.5))
    lines = path.read_text().splitlines()
    assert lines[0] == "perturbation_id,h,tau,lambda,lhs,rhs_data,ratio"
    assert lines[2] == "case1,0.1,0.01,0.05,1.0,2.0,0.5"
