import numpy as np
import pytest

from tumorfem import build_mesh, preset
from tumorfem.assembly import assemble_elasticity, identity_tensor
from tumorfem.errors import InvalidParameter, OracleFailure
from tumorfem.model import IdentityTensor, random_coefficients
from tumorfem.oracle import (
    ConvergenceTable,
    _gauss_l2_error_1d,
    _lu_solve,
    dense_replay_step,
    generalized_decay_factors,
    heat_convergence_study,
    viscoelastic_relaxation_check,
)
from tumorfem.stepper import SimState, initial_state, step_phi, step_sigma, step_u, step_z

TOL = 1e-9


def _close(sparse, dense):
    assert np.abs(sparse - dense).max() <= TOL * (1 + np.abs(dense).max())


@pytest.mark.parametrize("dom, n", [("interval(0,1)", 16), ("rectangle(0,1,0,1)", 4)])
def test_all_kinds_match_sparse(dom, n):
    rng = np.random.default_rng(3)
    mesh = build_mesh(dom, n)
    c = random_coefficients(rng)
    s = initial_state(c, mesh)
    tau, lam = 0.01, 0.05
    sb = np.clip(s.sigma + 0.1 * rng.random(mesh.n_nodes), 0, None)
    phi, _ = step_phi(mesh, c, s, sb, s.z, tau)
    _close(phi, dense_replay_step("phi", mesh, c, s, tau, sigma_bar=sb, z_bar=s.z))
    sigma, _ = step_sigma(mesh, c, s, phi, s.z, sb, tau, tau)
    _close(sigma, dense_replay_step("sigma", mesh, c, s, tau, phi=phi, z_bar=s.z, sigma_bar=sb))
    u, _ = step_u(mesh, c, s, phi, s.z, tau, tau)
    _close(u, dense_replay_step("u", mesh, c, s, tau, phi=phi, z_bar=s.z))
    z, _ = step_z(mesh, c, s, phi, u, tau, lam, tau)
    _close(z, dense_replay_step("z", mesh, c, s, tau, phi=phi, u=u, lam=lam))


def test_zero_rhs_gives_zero(line16):
    c = preset("decoupled_heat")
    n = line16.n_nodes
    s = SimState(0.0, np.zeros(n), np.zeros(n), np.zeros((n, 1)), np.zeros((n, 1)), np.zeros(n))
    for kind, kw in (("phi", dict(sigma_bar=s.sigma, z_bar=s.z)), ("sigma", dict(phi=s.phi, z_bar=s.z, sigma_bar=s.sigma)),
                     ("u", dict(phi=s.phi, z_bar=s.z)), ("z", dict(phi=s.phi, u=s.u, lam=0.05))):
        np.testing.assert_array_equal(dense_replay_step(kind, line16, c, s, 0.01, **kw), 0.0)


def test_tiny_step_keeps_state(line16):
    c = preset("isotropic_baseline")
    s = initial_state(c, line16)
    phi = dense_replay_step("phi", line16, c, s, 1e-10, sigma_bar=s.sigma, z_bar=s.z)
    np.testing.assert_allclose(phi, s.phi, atol=1e-8)


def test_oracle_failures(line16):
    with pytest.raises(OracleFailure):
        _lu_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2), "test")
    with pytest.raises(OracleFailure):
        _lu_solve(np.array([[np.nan]]), np.ones(1), "test")
    with pytest.raises(InvalidParameter):
        dense_replay_step("w", line16, preset("decoupled_heat"), initial_state(preset("decoupled_heat"), line16), 0.1)
    big = build_mesh("rectangle(0,1,0,1)", 17)
    with pytest.raises(InvalidParameter):
        dense_replay_step("phi", big, preset("decoupled_heat"), None, 0.1)


def test_heat_orders():
    table = heat_convergence_study(3)
    assert all(1.8 <= p <= 2.2 for p in table.orders)
    assert table.rows[0].h == pytest.approx(1 / 15)


def test_heat_at_time_zero_is_interpolation_error():
    table = heat_convergence_study(1, T=0.0)
    mesh = build_mesh("interval(0,1)", 16)
    x = mesh.nodes[:, 0]
    interp = _gauss_l2_error_1d(mesh, 0.5 + 0.5 * np.cos(np.pi * x), lambda y: 0.5 + 0.5 * np.cos(np.pi * y))
    assert table.rows[0].error_L2 == pytest.approx(interp, rel=1e-12)


def test_heat_constant_data_exact():
    table = heat_convergence_study(3, amplitude=0.0)
    # zero up to the CG tolerance
    assert max(r.error_L2 for r in table.rows) <= 1e-11


def test_relaxation_orders():
    table = viscoelastic_relaxation_check(4)
    assert all(0.8 <= p <= 1.2 for p in table.orders)
    assert all(abs(a - b) <= 0.5 for a, b in zip(table.orders[:-1], table.orders[1:]))


def test_relaxation_without_elasticity_and_force_is_stationary():
    table = viscoelastic_relaxation_check(2, b=0.0, force=0.0)
    assert max(r.error_L2 for r in table.rows) <= 1e-12


def test_single_step_decay_matches_generalized_eigenvalues():
    mesh = build_mesh("interval(0,1)", 12)
    tau = 0.1
    c = preset("decoupled_heat").replace(A_tensor=IdentityTensor(1.0), B_tensor=IdentityTensor(1.0))
    EA = assemble_elasticity(mesh, identity_tensor(1)).to_dense()
    EB = EA.copy()
    factors, mu = generalized_decay_factors(EA, EB, tau)
    w, V = np.linalg.eigh(EA)
    u0 = np.zeros((mesh.n_nodes, 1))
    u0[mesh.interior_nodes, 0] = V[:, 0]
    n = mesh.n_nodes
    s = SimState(0.0, np.zeros(n), np.zeros(n), u0, u0, np.zeros(n))
    u1, _ = step_u(mesh, c, s, s.phi, s.z, tau, tau)
    np.testing.assert_allclose(u1, factors[0] * u0, atol=1e-10)
    np.testing.assert_allclose(mu, 1.0, rtol=1e-10)


def test_table_csv(tmp_path):
    t = ConvergenceTable.from_errors([0.1, 0.05], [0.01, 0.0025], [4e-3, 1e-3])
    assert t.orders == [pytest.approx(2.0)]
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "h,tau,error_L2,order"
    assert len(lines) == 3
    assert "order" in str(t)
