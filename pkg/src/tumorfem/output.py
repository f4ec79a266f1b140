"""CSV and JSON writers for snapshots, time series, studies and run manifests."""
import csv
import json
import os
from pathlib import Path
import platform

import numpy as np

from ._accel import backend_name
from .assembly import lumped_mass
from .config import serialize
from .errors import OutputError

TIMESERIES_HEADER = ["step", "t", "mass_phi", "min_phi", "max_phi", "min_sigma", "max_sigma",
                     "z_overshoot", "picard_iters", "picard_residual"]
DEPENDENCE_HEADER = ["perturbation_id", "h", "tau", "lambda", "lhs", "rhs_data", "ratio"]


def _open(path, mode="w"):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def snapshot_header(dim):
    coords = ["x", "y"][:dim]
    disp = ["u_x", "u_y"][:dim]
    return ["node_id", *coords, "phi", "sigma", *disp, "z"]


def write_snapshot(state, mesh, directory):
    """Write ``snap_{step:06}.csv`` into ``directory`` and return its path.

    Floats use ``repr`` (shortest round-trip form), so reading back is exact.
    """
    path = Path(directory) / f"snap_{state.step_index:06d}.csv"
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(snapshot_header(mesh.dim))
        for i in range(mesh.n_nodes):
            row = [i, *mesh.nodes[i], state.phi[i], state.sigma[i], *state.u[i], state.z[i]]
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return path


def read_snapshot(path):
    """Columns of a snapshot file as a dict of float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    cols = {name: np.array([float(r[k]) for r in data]) for k, name in enumerate(header)}
    cols["node_id"] = cols["node_id"].astype(int)
    return cols


def state_scalars(mesh, state):
    m = lumped_mass(mesh)
    return {
        "step": state.step_index,
        "t": state.t,
        "mass_phi": float(m @ state.phi),
        "min_phi": float(state.phi.min()),
        "max_phi": float(state.phi.max()),
        "min_sigma": float(state.sigma.min()),
        "max_sigma": float(state.sigma.max()),
        "z_overshoot": float(max(np.max(state.z - 1.0), np.max(-state.z), 0.0)),
    }


def write_timeseries(scalars, diagnostics, path):
    """One row per state; ``scalars`` has one entry more than ``diagnostics`` (the initial state)."""
    if len(scalars) != len(diagnostics) + 1:
        raise ValueError("need one scalar record per state, initial state included")
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_HEADER)
        for k, s in enumerate(scalars):
            iters, res = (0, 0.0) if k == 0 else (diagnostics[k - 1].picard_iterations,
                                                   diagnostics[k - 1].picard_residual)
            w.writerow([s["step"], repr(float(s["t"]))]
                       + [repr(float(s[c])) for c in TIMESERIES_HEADER[2:8]]
                       + [iters, repr(float(res))])


def append_dependence_row(path, perturbation_id, h, tau, lam, result):
    new = not Path(path).exists()
    with _open(path, "a") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(DEPENDENCE_HEADER)
        w.writerow([perturbation_id, repr(float(h)), repr(float(tau)), repr(float(lam)),
                    repr(result.lhs), repr(result.rhs_data), repr(result.ratio)])


def write_manifest(directory, config, version, extra=None):
    manifest = {
        "config_hash": config.hash(),
        "seed": config.seed,
        "version": version,
        "backend": backend_name(),
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": serialize(config),
    }
    if extra:
        manifest.update(extra)
    path = Path(directory) / "manifest.json"
    with _open(path) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def output_dir(config, env_var="TUMORFEM_OUTPUT_DIR"):
    return Path(os.environ.get(env_var) or config.output_dir)
