import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tumorfem import build_mesh, parse_config, serialize
from tumorfem.errors import ConfigError, InvalidResolution, MissingKey, StabilityViolation, UnknownKey, UnknownPreset
from tumorfem.output import (
    TIMESERIES_HEADER,
    read_snapshot,
    state_scalars,
    write_manifest,
    write_snapshot,
    write_timeseries,
)
from tumorfem.stepper import SimState

MINIMAL = """\
mesh.domain = interval(0,1)
mesh.nodes = 64
time.T = 1.0
time.tau = 0.01
model.preset = isotropic_baseline
model.lambda = 0.05
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.nodes == 64 and cfg.tau == 0.01 and cfg.lam == 0.05
    assert (cfg.tol_fp, cfg.max_fp, cfg.snapshot_stride) == (1e-8, 25, 10)
    assert cfg.mode == "simulate" and cfg.seed == 0
    assert cfg.n_steps == 100


def test_comments_and_overrides():
    cfg = parse_config("# baseline with a push\n" + MINIMAL + "model.f = 0.25  # body force\nrun.seed = 7\n")
    assert dict(cfg.overrides) == {"f": 0.25}
    assert cfg.coefficients().params["f"] == 0.25
    assert cfg.seed == 7


def test_stability_violation():
    with pytest.raises(StabilityViolation):
        parse_config(MINIMAL.replace("time.tau = 0.01", "time.tau = 0.1"))


def test_invalid_resolution():
    with pytest.raises(InvalidResolution):
        parse_config(MINIMAL.replace("mesh.nodes = 64", "mesh.nodes = 1"))


def test_unknown_key_is_named():
    with pytest.raises(UnknownKey, match="mesh.refine"):
        parse_config(MINIMAL + "mesh.refine = 2\n")
    with pytest.raises(UnknownKey):
        parse_config(MINIMAL + "model.lam = 0.1\n")


def test_missing_key():
    with pytest.raises(MissingKey, match="time.tau"):
        parse_config(MINIMAL.replace("time.tau = 0.01\n", ""))


@pytest.mark.parametrize("text", ["mesh.nodes 64", "mesh.nodes = ", "mesh.nodes = 6.5"])
def test_malformed(text):
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.replace("mesh.nodes = 64", text))


def test_unknown_preset():
    with pytest.raises(UnknownPreset):
        parse_config(MINIMAL.replace("isotropic_baseline", "nope"))


def test_non_integer_step_count():
    from tumorfem.errors import InvalidParameter
    with pytest.raises(InvalidParameter):
        parse_config(MINIMAL.replace("time.T = 1.0", "time.T = 1.005"))


@settings(max_examples=30, deadline=None)
@given(
    nodes=st.integers(2, 40),
    steps=st.integers(1, 200),
    tau=st.sampled_from([0.001, 0.005, 0.01, 0.02]),
    stride=st.integers(1, 50),
    f=st.floats(-1, 1, allow_nan=False),
    seed=st.integers(0, 2**31),
    two_d=st.booleans(),
)
def test_round_trip_idempotent(nodes, steps, tau, stride, f, seed, two_d):
    domain = "rectangle(0,2,0,1)" if two_d else "interval(-1,1)"
    text = (MINIMAL.replace("interval(0,1)", domain).replace("64", str(min(nodes, 12) if two_d else nodes))
            .replace("time.T = 1.0", f"time.T = {steps * tau!r}").replace("time.tau = 0.01", f"time.tau = {tau!r}")
            + f"output.snapshot_stride = {stride}\nmodel.f = {f!r}\nrun.seed = {seed}\n")
    cfg = parse_config(text)
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)
    assert again.hash() == cfg.hash()


def _state(mesh, step=0, seed=0):
    rng = np.random.default_rng(seed)
    n = mesh.n_nodes
    u = rng.normal(size=(n, mesh.dim))
    u[mesh.node_boundary_flags] = 0.0
    return SimState(0.1 * step, rng.random(n) / 3, rng.random(n), u, u.copy(), rng.random(n), step)


def test_zero_snapshot(tmp_path):
    mesh = build_mesh("interval(0,1)", 3)
    z = np.zeros(3)
    s = SimState(0.0, z, z, np.zeros((3, 1)), np.zeros((3, 1)), z, 0)
    path = write_snapshot(s, mesh, tmp_path)
    assert path.name == "snap_000000.csv"
    lines = path.read_text().splitlines()
    assert lines[0] == "node_id,x,phi,sigma,u_x,z"
    assert len(lines) == 4
    assert all(row.split(",")[2:] == ["0.0"] * 4 for row in lines[1:])


@pytest.mark.parametrize("dom", ["interval(0,1)", "rectangle(0,1,0,1)"])
def test_snapshot_round_trip_exact(tmp_path, dom):
    mesh = build_mesh(dom, 6)
    s = _state(mesh, 12)
    cols = read_snapshot(write_snapshot(s, mesh, tmp_path))
    np.testing.assert_array_equal(cols["phi"], s.phi)
    np.testing.assert_array_equal(cols["sigma"], s.sigma)
    np.testing.assert_array_equal(cols["z"], s.z)
    np.testing.assert_array_equal(cols["u_x"], s.u[:, 0])
    if mesh.dim == 2:
        np.testing.assert_array_equal(cols["u_y"], s.u[:, 1])
        np.testing.assert_array_equal(cols["y"], mesh.nodes[:, 1])


def test_timeseries_zero_steps(tmp_path, line16):
    path = tmp_path / "ts.csv"
    write_timeseries([state_scalars(line16, _state(line16))], [], path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == TIMESERIES_HEADER
    assert lines[0] == "step,t,mass_phi,min_phi,max_phi,min_sigma,max_sigma,z_overshoot,picard_iters,picard_residual"
    assert len(lines) == 2


def test_timeseries_length_mismatch(tmp_path, line16):
    with pytest.raises(ValueError):
        write_timeseries([], [], tmp_path / "ts.csv")


def test_manifest(tmp_path):
    cfg = parse_config(MINIMAL)
    path = write_manifest(tmp_path, cfg, "9.9")
    data = json.loads(path.read_text())
    assert data["config_hash"] == cfg.hash()
    assert data["seed"] == 0 and data["version"] == "9.9"
    assert parse_config(data["config"]) == cfg


def test_shipped_configs_parse():
    from pathlib import Path
    from tumorfem.config import load_config

    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.cfg"))
    assert paths
    for path in paths:
        assert load_config(path).n_steps == 100
