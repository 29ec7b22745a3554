"""Command-line driver.

    splitmaxwell run <config.toml>
    splitmaxwell verify [--trials N] [--seed S] [--check NAME ...]
    splitmaxwell dispersion <config.toml>

Exit codes: 0 success, 2 validation error, 3 solver divergence, 4 verification
failure.  ``SPLITMAXWELL_OUTPUT_DIR`` overrides ``output.dir``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .constitutive import ConstitutiveError, SolverDivergence
from .dispersion import DispersionRow, dispersion_scan
from .dynamics import MaxwellSystem, SimState
from .initial import build_initial_state
from .snapshot import SnapshotError, write_state
from .verification import report, run_checks

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFICATION = 4

OUTPUT_ENV = "SPLITMAXWELL_OUTPUT_DIR"
DIAGNOSTIC_COLUMNS = ("step", "t", "H", "casimir_d", "casimir_b", "iterations")

log = logging.getLogger("splitmaxwell")


def output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output.dir)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def add_noise(system: MaxwellSystem, s: SimState, amplitude: float, seed: int) -> SimState:
    """Add a random perturbation that lies in the images of d1 and dual_d1 (so stays solenoidal)."""
    if amplitude == 0.0:
        return s
    rng = np.random.default_rng(seed)
    cx = system.complex
    grid = system.grid
    a = amplitude * rng.standard_normal(grid.count("primal", 1))
    c = amplitude * rng.standard_normal(grid.count("dual", 1))
    return SimState.from_arrays(grid, s.dtilde.values + cx.dual_d[1] @ c, s.b.values + cx.d[1] @ a, s.t)


def _stepper(system: MaxwellSystem, cfg: RunConfig):
    kind = cfg.integrator.kind
    tol = cfg.integrator.tol
    if kind == "midpoint":
        return lambda s, dt: system.step_midpoint(s, dt, tol)
    if kind == "splitting":
        return system.step_splitting_linear
    return lambda s, dt: system.step_single_complex(s, dt, tol)


def run_simulation(cfg: RunConfig, out: Path) -> dict:
    """Run ``cfg`` writing diagnostics, snapshots and a summary into ``out``."""
    system = MaxwellSystem(cfg.grid, cfg.model, cfg.metric, tol=cfg.integrator.tol,
                           max_iter=cfg.integrator.max_iter)
    s = build_initial_state(cfg.grid, system.complex, cfg.init)
    s = add_noise(system, s, cfg.noise, cfg.seed)
    dt = cfg.integrator.dt if cfg.integrator.dt is not None else system.cfl_dt(cfg.integrator.cfl)
    step = _stepper(system, cfg)
    steps = cfg.integrator.steps
    prefix = cfg.output.prefix
    out.mkdir(parents=True, exist_ok=True)

    summary = {
        "config_hash": cfg.config_hash(),
        "model": cfg.model.variant,
        "integrator": cfg.integrator.kind,
        "dt": dt,
        "steps_requested": steps,
        "t_initial": s.t,
    }
    c0 = system.casimirs(s)
    try:
        H0 = system.hamiltonian(s)
    except (SolverDivergence, ConstitutiveError) as exc:
        summary.update({"status": "solver_divergence", "steps_completed": 0, "error": str(exc),
                        "residual": getattr(exc, "residual", None)})
        _write_json(out / f"{prefix}_summary.json", summary)
        return summary
    summary.update({"H_initial": H0, "casimir_initial": list(c0)})
    log.info("%s/%s: %d steps, dt=%.6g", cfg.model.variant, cfg.integrator.kind, steps, dt)
    max_cas = 0.0
    max_iters = 0
    H = H0
    status = "ok"
    csv_path = out / f"{prefix}_diagnostics.csv"
    with open(csv_path, "w", newline="") as f:
        f.write(f"# config_sha256={summary['config_hash']}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        writer.writerow([0, _fmt(s.t), _fmt(H0), _fmt(c0[0]), _fmt(c0[1]), 0])
        n = 0
        try:
            for n in range(1, steps + 1):
                s = step(s, dt)
                it = system.stats.iterations
                max_iters = max(max_iters, it)
                cas = system.casimirs(s)
                max_cas = max(max_cas, abs(cas[0] - c0[0]), abs(cas[1] - c0[1]))
                if n % cfg.output.diagnostics_every == 0 or n == steps:
                    H = system.hamiltonian(s)
                    writer.writerow([n, _fmt(s.t), _fmt(H), _fmt(cas[0]), _fmt(cas[1]), it])
                if cfg.output.snapshot_every and n % cfg.output.snapshot_every == 0 and n != steps:
                    write_state(out / f"{prefix}_step{n:07d}", s)
        except (SolverDivergence, ConstitutiveError) as exc:
            status = "solver_divergence"
            summary["error"] = str(exc)
            summary["residual"] = getattr(exc, "residual", None)
            n -= 1
    if status == "ok":
        write_state(out / f"{prefix}_final", s)
    summary.update({
        "status": status,
        "steps_completed": n if steps else 0,
        "t_final": s.t,
        "H_final": H,
        "rel_energy_drift": abs(H - H0) / abs(H0) if H0 != 0.0 else abs(H - H0),
        "max_casimir_drift": max_cas,
        "solver": {"total_iterations": system.stats.total_iterations, "max_iterations_per_step": max_iters},
    })
    _write_json(out / f"{prefix}_summary.json", summary)
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = output_dir(cfg)
    summary = run_simulation(cfg, out)
    if summary["status"] != "ok":
        print(f"error: solver divergence: {summary['error']}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(json.dumps({k: summary[k] for k in ("status", "steps_completed", "rel_energy_drift",
                                              "max_casimir_drift")}, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        results = run_checks(args.check, trials=args.trials, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(f"verify: {exc}") from None
    rep = report(results, args.seed, args.trials)
    text = json.dumps(rep, indent=2, sort_keys=True)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n")
    return EXIT_OK if rep["passed"] else EXIT_VERIFICATION


DISPERSION_COLUMNS = ("mode", "k", "omega_measured", "omega_theory", "v_ph_theory", "rel_error",
                      "points_per_wavelength", "resolved")


def write_dispersion_table(path: Path, rows: list[DispersionRow], config_hash: str) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DISPERSION_COLUMNS)
        for r in rows:
            d = r.as_dict()
            writer.writerow([d["mode"], *(_fmt(d[c]) for c in DISPERSION_COLUMNS[1:7]), int(d["resolved"])])


def cmd_dispersion(args) -> int:
    cfg = load_config(args.config)
    if cfg.model.variant not in ("vacuum", "nonlocal_dispersive"):
        raise ConfigError(f"model.variant: dispersion needs vacuum or nonlocal_dispersive, got {cfg.model.variant!r}")
    if cfg.grid.n[1] != 2 or cfg.grid.n[2] != 2:
        raise ConfigError(f"grid.n: dispersion needs an N x 2 x 2 grid, got {list(cfg.grid.n)}")
    if cfg.metric.diag[0] != 1.0:
        raise ConfigError("metric.g: dispersion assumes g_11 = 1")
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    dc = cfg.dispersion
    try:
        rows = dispersion_scan(cfg.model, cfg.grid, dc.modes, steps=dc.steps, dt=cfg.integrator.dt,
                               integrator=cfg.integrator.kind, periods=dc.periods, metric=cfg.metric,
                               tol=cfg.integrator.tol)
    except SolverDivergence as exc:
        print(f"error: solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    write_dispersion_table(out / f"{cfg.output.prefix}_dispersion.csv", rows, cfg.config_hash())
    for r in rows:
        flag = "" if r.resolved else "  (under-resolved, excluded)"
        print(f"m={r.mode} k={r.k:.6g} omega={r.omega_measured:.8g} theory={r.omega_theory:.8g} "
              f"rel_error={r.rel_error:.3e}{flag}")
    if dc.max_rel_error is not None:
        bad = [r for r in rows if r.resolved and r.rel_error > dc.max_rel_error]
        if bad:
            return EXIT_VERIFICATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitmaxwell", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation from a TOML config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the built-in identity and derivative checks")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--check", action="append", default=None, metavar="NAME",
                   help="run only this check (repeatable)")
    v.add_argument("--output", default=None, help="also write the JSON report here")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("dispersion", help="measure plane-wave dispersion for a linear medium")
    d.add_argument("config")
    d.set_defaults(func=cmd_dispersion)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
