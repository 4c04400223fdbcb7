"""Command-line front end.

    starkcap spectrum CONFIG [--output-dir DIR]
    starkcap sweep CONFIG [--output-dir DIR]
    starkcap probe CONFIG [--output-dir DIR]
    starkcap verify SUITE

Exit codes: 0 ok, 1 verification failure, 2 config error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import cap, eig, output, verify
from .config import ConfigError, load_config
from .distort import build_field_1d
from .grid import DomainError, SingularJacobianError, assemble_cap_hamiltonian

log = logging.getLogger("starkcap")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _write(outdir, name, text):
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _setup_logging(outdir, prefix):
    """Diagnostics go to stderr; timestamped records go to a sidecar log only."""
    root = logging.getLogger("starkcap")
    root.setLevel(logging.INFO)
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()
    err = logging.StreamHandler(sys.stderr)
    err.setLevel(logging.WARNING)
    err.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(err)
    if outdir is not None:
        side = logging.FileHandler(os.path.join(outdir, f"{prefix}.log"), mode="w", encoding="utf-8")
        side.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(side)


def _residuals(A, values):
    return tuple(eig.inverse_iteration(A, z)[1] for z in values)


def cmd_spectrum(cfg, outdir):
    if cfg.eps is None:
        raise ConfigError("cap.eps", "spectrum needs a single eps")
    A = assemble_cap_hamiltonian(cfg.grid, cfg.potential, cfg.eps, fd_order=cfg.fd_order,
                                 include_stark=cfg.include_stark)
    if cfg.window is not None:
        res = cap.windowed_spectrum(A, cfg.window, cfg.solver)
    elif cfg.solver.method == "arnoldi" or (cfg.solver.method == "auto" and A.n > cfg.solver.dense_cap):
        res = eig.shift_invert_arnoldi(A, cfg.sigma or 0.0, min(cfg.solver.k, A.n), tol=cfg.solver.tol,
                                       max_restarts=cfg.solver.max_restarts)
    else:
        res = eig.dense_eigenvalues(A)
    if res.method == "dense_qr" and len(res):
        res = eig.SpectrumResult(res.eigenvalues, _residuals(A, res.eigenvalues), res.method, res.tol,
                                 res.converged, res.flags)
    if not res.converged:
        log.warning("solver flagged: %s", ", ".join(res.flags))
    h = cfg.sha256
    if "csv" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_spectrum.csv", output.spectrum_csv(res, h))
    if "json" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_spectrum.json", output.run_json(
            cfg.canonical(), {"eigenvalues": list(res.eigenvalues), "method": res.method,
                              "converged": res.converged, "flags": list(res.flags)},
            list(res.residuals), h))
    return EXIT_OK


def _distortion_reference(cfg):
    field = build_field_1d(cfg.cone)
    return cap.resonances_via_distortion(cfg.grid, cfg.potential, cfg.theta, field, cfg.window, cfg.solver)


def cmd_sweep(cfg, outdir):
    if cfg.window is None:
        raise ConfigError("cap.re_min", "sweep needs a window")
    if not cfg.include_stark:
        raise ConfigError("problem.include_stark", "sweep runs the Stark operator")
    trajectories = cap.sweep(cfg.grid, cfg.potential, cfg.schedule, cfg.window, cfg.solver, fd_order=cfg.fd_order)
    estimates, trajectories = cap.estimate_resonances(trajectories, cfg.speed_threshold, cfg.allow_boundary)
    estimates = [e for e in estimates if cfg.window.contains(e.z)]
    clusters = cap.cluster_estimates(estimates, 1e-3)
    extra = {}
    if "distortion" in cfg.raw:
        ref = _distortion_reference(cfg)
        report = cap.compare_with_distortion(estimates, ref, 1e-3)
        extra["distortion"] = {
            "theta": cfg.theta, "reference": list(ref.eigenvalues),
            "pairs": [list(p) for p in report.pairs],
            "unmatched_estimates": list(report.unmatched_estimates),
            "unmatched_references": list(report.unmatched_references),
            "passed": report.passed, "bijective": report.bijective,
        }
    h = cfg.sha256
    if "csv" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_trajectories.csv", output.trajectories_csv(trajectories, h))
    if "json" in cfg.formats:
        results = {
            "estimates": [{"z": e.z, "eps_star": e.eps_star, "uncertainty": e.uncertainty,
                           "trajectory_id": e.trajectory_id, "boundary": e.boundary} for e in estimates],
            "clusters": [{"z": c.z, "count": c.count} for c in clusters],
            "trajectories": [{"id": t.id, "status": t.status, "points": len(t.points)} for t in trajectories],
        }
        _write(outdir, f"{cfg.prefix}_estimates.json",
               output.run_json(cfg.canonical(), results, [e.uncertainty for e in estimates], h, extra))
    if "svg" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_trajectories.svg",
               output.trajectories_svg(trajectories, estimates, cfg.window, h))
    return EXIT_OK


def cmd_probe(cfg, outdir):
    if cfg.window is None:
        raise ConfigError("cap.re_min", "probe samples z on the window")
    w = cfg.window
    if not w.im_min > -cfg.delta:
        raise ConfigError("cap.im_min", f"probe window must lie above Im z = -delta = {-cfg.delta}")
    zs = [complex(a, b) for a in np.linspace(w.re_min, w.re_max, 5) for b in np.linspace(w.im_min, w.im_max, 5)]
    eps = [float(e) for e in cfg.schedule.values]
    table = cap.resolvent_probe(cfg.theta, build_field_1d(cfg.cone), eps, zs, cfg.grid)
    h = cfg.sha256
    rows = [(e, z.real, z.imag, float(table.sigma_min[i, j]))
            for i, e in enumerate(eps) for j, z in enumerate(zs)]
    if "csv" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_probe.csv", output.table_csv(("eps", "re", "im", "sigma_min"), rows, h))
    if "json" in cfg.formats:
        _write(outdir, f"{cfg.prefix}_probe.json", output.run_json(
            cfg.canonical(), {"minimum": table.minimum, "row_minima": [table.row_minimum(i) for i in range(len(eps))],
                              "singular": bool(table.singular.any())}, [], h))
    return EXIT_OK


def cmd_verify(suite):
    rows = verify.SUITES[suite]()
    width = max(len(r.name) for r in rows)
    for r in rows:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name:<{width}}  value={r.value:.6g}  limit={r.limit:.6g}  {r.detail}".rstrip())
    ok = all(r.passed for r in rows)
    print(f"{suite}: {'pass' if ok else 'FAIL'} ({sum(r.passed for r in rows)}/{len(rows)})")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="starkcap", description="CAP resonance computations for 1D Stark operators.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("spectrum", "eigenvalues of the CAP operator at one eps"),
                           ("sweep", "CAP eigenvalue trajectories and resonance estimates"),
                           ("probe", "smallest singular values of the distorted free CAP operator")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="INI configuration file")
        s.add_argument("--output-dir", default=".", help="directory for output files (default: .)")
    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", choices=sorted(verify.SUITES))
    return p


COMMANDS = {"spectrum": cmd_spectrum, "sweep": cmd_sweep, "probe": cmd_probe}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        _setup_logging(None, None)
        return cmd_verify(args.suite)
    try:
        cfg = load_config(args.config)
        os.makedirs(args.output_dir, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: output-dir: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    _setup_logging(args.output_dir, cfg.prefix)
    log.info("config %s sha256 %s", args.config, cfg.sha256)
    try:
        return COMMANDS[args.command](cfg, args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (eig.SolverError, SingularJacobianError, DomainError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    finally:
        for h in list(logging.getLogger("starkcap").handlers):
            h.close()


if __name__ == "__main__":
    sys.exit(main())
