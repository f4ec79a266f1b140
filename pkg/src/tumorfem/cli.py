"""Command line entry point: ``tumorfem simulate|depend|converge|validate``."""
import argparse
import logging
import os
from pathlib import Path
import sys

from . import __version__
from .config import load_config
from .diagnostics import continuous_dependence_experiment
from .errors import NumericalError, OutputError, ValidationError
from .model import validate_hypotheses
from .oracle import heat_convergence_study, viscoelastic_relaxation_check
from .output import (
    append_dependence_row,
    output_dir,
    state_scalars,
    write_manifest,
    write_snapshot,
    write_timeseries,
)
from .stepper import run_simulation

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("tumorfem")


def simulate(cfg, out=None):
    """Run one configuration, writing snapshots, the time series and a manifest."""
    out = Path(out) if out is not None else output_dir(cfg)
    mesh = cfg.mesh()
    coeffs = cfg.coefficients()
    scalars = []
    final_step = cfg.n_steps

    def sink(step, t, state):
        scalars.append(state_scalars(mesh, state))
        if step % cfg.snapshot_stride == 0 or step == final_step:
            write_snapshot(state, mesh, out)

    _, history = run_simulation(coeffs, mesh, cfg.tau, cfg.lam, callback=sink, snapshot_stride=1,
                                tol_fp=cfg.tol_fp, max_fp=cfg.max_fp)
    write_timeseries(scalars, history, out / "timeseries.csv")
    write_manifest(out, cfg, __version__, {"steps": final_step})
    return history


def depend(cfg1, cfg2, out=None, perturbation_id=None):
    out = Path(out) if out is not None else output_dir(cfg1)
    for key in ("domain", "nodes", "tau", "lam", "T"):
        if getattr(cfg1, key) != getattr(cfg2, key):
            raise ValidationError(f"both configurations need the same {key}")
    mesh = cfg1.mesh()
    result = continuous_dependence_experiment(cfg1.coefficients(), cfg2.coefficients(), mesh,
                                              cfg1.tau, cfg1.lam, cfg1.tol_fp, cfg1.max_fp)
    append_dependence_row(out / "dependence.csv", perturbation_id or cfg2.hash()[:12], mesh.h(),
                          cfg1.tau, cfg1.lam, result)
    return result


def converge(levels, out):
    out = Path(out)
    heat = heat_convergence_study(levels)
    relax = viscoelastic_relaxation_check(levels + 1)
    try:
        out.mkdir(parents=True, exist_ok=True)
        heat.to_csv(out / "heat_convergence.csv")
        relax.to_csv(out / "relaxation_convergence.csv")
    except OSError as exc:
        raise OutputError(str(exc)) from exc
    return heat, relax


def _build_parser():
    p = argparse.ArgumentParser(prog="tumorfem", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    s = sub.add_parser("simulate", help="run one configuration")
    s.add_argument("config")
    d = sub.add_parser("depend", help="continuous-dependence experiment between two configurations")
    d.add_argument("config1")
    d.add_argument("config2")
    d.add_argument("--id", dest="perturbation_id")
    c = sub.add_parser("converge", help="heat and relaxation convergence studies")
    c.add_argument("levels", type=int)
    c.add_argument("--out", default=None)
    v = sub.add_parser("validate", help="check coefficient hypotheses and initial data")
    v.add_argument("config")
    v.add_argument("--samples", type=int, default=2000)
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "simulate":
            cfg = load_config(args.config)
            history = simulate(cfg)
            unconverged = sum(not d.converged for d in history)
            print(f"{len(history)} steps written to {output_dir(cfg)} ({unconverged} Picard warnings)")
        elif args.verb == "depend":
            c1, c2 = load_config(args.config1), load_config(args.config2)
            r = depend(c1, c2, perturbation_id=args.perturbation_id)
            print(f"lhs={r.lhs:.6e} rhs_data={r.rhs_data:.6e} ratio={r.ratio:.6e}")
        elif args.verb == "converge":
            out = args.out or os.environ.get("TUMORFEM_OUTPUT_DIR") or "out"
            heat, relax = converge(args.levels, out)
            print("heat equation (h and tau refined together)\n" + str(heat))
            print("viscoelastic relaxation (tau halved)\n" + str(relax))
        elif args.verb == "validate":
            cfg = load_config(args.config)
            mesh = cfg.mesh()
            report = validate_hypotheses(cfg.coefficients(), args.samples, mesh=mesh,
                                         seed=cfg.seed, dims=(mesh.dim,))
            print(report.summary())
            if not report.passed:
                return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
