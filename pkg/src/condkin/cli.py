"""Scenario runner and result emission.

Usage: condkin --config <path> [--out <dir>] [--seed <u64>]
       [--scenario <name>]   (flags override the config file)

Outputs land in the chosen directory: trajectory.csv, profile.csv,
events.log, summary.json, verify.json (verify scenario only), plus
rendered figures and an echo of the effective configuration.  All text is
UTF-8 with LF line endings; re-running with identical configuration and
seed reproduces every file byte-for-byte except the timestamp in the
summary header.
"""

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import report
from .config import (ConfigError, build_initial, parse_config,
                     resolve_diag_zero)
from .kernel import basis
from .measure import moment, near_mass, tail_mass, total_mass
from .particles import ParticleState, format_event, run as particles_run
from .pde import GridSpec, evolve
from .selfsim import assemble_generalized, solve_profile
from .verification import PI2_12, VerificationContext, run_all
from .weakform import pi2_extrapolate

TRAJECTORY_COLUMNS = ("t", "mass_total", "mass_condensate", "energy_active",
                      "overflow_mass", "overflow_energy", "near_mass_0.1",
                      "tail_mass_10", "moment_2")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_lines(path, lines)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True,
                            allow_nan=False))
        fh.write("\n")


def _summary(cfg, scenario_fields):
    return {
        "header": {
            "tool": "condkin",
            "generated_at": datetime.datetime.now(
                datetime.timezone.utc).isoformat(),
        },
        "scenario": cfg.scenario,
        "effective_config": {k: v for k, v in
                             (line.split("=", 1)
                              for line in cfg.echo().splitlines())},
        "results": scenario_fields,
    }


def _trajectory_rows(pairs):
    """Rows of the trajectory schema from (time, Measure) pairs."""
    rows = []
    for t, mu in pairs:
        rows.append({
            "t": t,
            "mass_total": total_mass(mu),
            "mass_condensate": mu.condensate,
            "energy_active": moment(mu, 1.0),
            "overflow_mass": 0.0,
            "overflow_energy": 0.0,
            "near_mass_0.1": near_mass(mu, 0.1),
            "tail_mass_10": tail_mass(mu, 10.0),
            "moment_2": moment(mu, 2.0),
        })
    return rows


def _pde_trajectory_rows(traj):
    rows = _trajectory_rows(traj.measures())
    for row, state in zip(rows, traj.states):
        row["overflow_mass"] = state.overflow_mass
        row["overflow_energy"] = state.overflow_energy
        row["mass_total"] = state.mass_total()
    return rows


def _emit_trajectory(out_dir, rows, extra_cols=()):
    header = tuple(extra_cols) + TRAJECTORY_COLUMNS
    _write_csv(os.path.join(out_dir, "trajectory.csv"), header,
               [[row[c] for c in header] for row in rows])


def _emit_measure(out_dir, mu):
    rows = []
    if mu.condensate:
        rows.append((0.0, mu.condensate))
    rows += list(zip(mu.xs.tolist(), mu.ws.tolist()))
    _write_csv(os.path.join(out_dir, "profile.csv"), ("x", "w"), rows)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def _scenario_evolve_pde(cfg, out_dir):
    mu0, family = build_initial(cfg.initial)
    grid = GridSpec(cfg.x_min, cfg.x_max, cfg.n_nodes)
    traj = evolve(mu0, grid, cfg.eps, cfg.t_end, cfg.cadence,
                  dt_max=cfg.dt_max,
                  diag_zero=resolve_diag_zero(cfg, family))
    rows = _pde_trajectory_rows(traj)
    _emit_trajectory(out_dir, [dict(r) for r in rows])
    _emit_measure(out_dir, traj.states[-1].measure())
    if cfg.figures:
        report.trajectory_figure(rows, out_dir)
        report.measure_figure(traj.states[-1].measure(), out_dir,
                              name="final_measure.png",
                              title="t = %g" % traj.times[-1])
    final = traj.states[-1]
    return {
        "initial_family": family,
        "mass_error": abs(final.mass_total() - total_mass(mu0)),
        "condensate_final": final.condensate,
        "energy_final": final.energy_active() + final.overflow_energy,
        "overflow_mass": final.overflow_mass,
    }


def _scenario_evolve_particles(cfg, out_dir):
    mu0, family = build_initial(cfg.initial)
    if mu0.condensate:
        raise ConfigError("particle runs need all mass at positive sizes")
    rows = []
    event_lines = []
    finals = []
    for r in range(cfg.replicas):
        draw = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((cfg.seed, r, 0xD07A))))
        if family == "uniform":
            # continuous family: draw sizes from the density itself
            half = 0.5 * (mu0.xs[1] - mu0.xs[0])
            sizes = draw.uniform(float(mu0.xs.min()) - half,
                                 float(mu0.xs.max()) + half,
                                 cfg.n_particles)
        else:
            # sample particle sizes from the atoms of the initial measure
            idx = draw.choice(mu0.xs.size, size=cfg.n_particles,
                              p=mu0.ws / mu0.ws.sum())
            sizes = mu0.xs[idx]
        state = ParticleState(sizes, total_mass(mu0) / cfg.n_particles,
                              eps=cfg.eps,
                              absorb_threshold=cfg.absorb_threshold,
                              seed=cfg.seed, stream=r)
        times, snaps, events = particles_run(
            state, cfg.t_end, cfg.cadence, record_events=True)
        rep_rows = _trajectory_rows(zip(times, snaps))
        for row in rep_rows:
            row["replica"] = r
        rows += rep_rows
        if cfg.replicas > 1:
            event_lines.append("# replica %d" % r)
        event_lines += [format_event(ev) for ev in events]
        finals.append(snaps[-1])
    _emit_trajectory(out_dir, rows, extra_cols=("replica",))
    _write_lines(os.path.join(out_dir, "events.log"), event_lines)
    _emit_measure(out_dir, finals[0])
    if cfg.figures:
        report.trajectory_figure([r for r in rows if r["replica"] == 0],
                                 out_dir)
        report.measure_figure(finals[0], out_dir, name="final_measure.png",
                              title="replica 0, t = %g" % cfg.t_end)
    nm = [near_mass(mu, 0.1) for mu in finals]
    return {
        "initial_family": family,
        "replicas": cfg.replicas,
        "events_logged": sum(1 for ln in event_lines
                             if not ln.startswith("#")),
        "near_mass_0.1_mean": float(np.mean(nm)),
        "near_mass_0.1_stderr": (float(np.std(nm, ddof=1)
                                       / math.sqrt(len(nm)))
                                 if len(nm) > 1 else 0.0),
    }


def _scenario_selfsim_profile(cfg, out_dir):
    grid = GridSpec(cfg.eps, cfg.x_max, cfg.n_nodes)
    res = solve_profile(cfg.E, grid, cfg.eps, tol=cfg.tol,
                        max_pseudo_time=cfg.max_pseudo_time)
    _write_csv(os.path.join(out_dir, "profile.csv"),
               ("x", "psi", "phi"),
               list(zip(res.nodes.tolist(), res.psi.tolist(),
                        res.phi_w.tolist())))
    if cfg.figures:
        report.profile_figure(res, out_dir)
    return {
        "converged": res.converged,
        "stationarity_residual": res.residual_psi_eps,
        "unregularized_residual": res.residual_psi,
        "mass_equation_residual": res.residual_phi,
        "l1_phi": res.l1_phi,
        "constraint_value": res.state.constraint(),
        "pseudo_time": res.state.pseudo_time,
    }


def _scenario_assemble_selfsim(cfg, out_dir):
    grid = GridSpec(cfg.eps, cfg.x_max, cfg.n_nodes)
    res = solve_profile(cfg.E, grid, cfg.eps, tol=cfg.tol,
                        max_pseudo_time=cfg.max_pseudo_time)
    M = cfg.M if cfg.M > 0.0 else 1.5 * res.l1_phi / math.sqrt(cfg.t0)
    fam = assemble_generalized(res, M, cfg.t0)
    n_rec = max(2, int(round(cfg.t_end / cfg.cadence)) + 1)
    times = np.linspace(0.0, cfg.t_end, n_rec).tolist()
    traj = fam.trajectory(times)
    rows = _trajectory_rows(traj)
    _emit_trajectory(out_dir, rows)
    _emit_measure(out_dir, traj[-1][1])
    if cfg.figures:
        report.trajectory_figure(rows, out_dir)
        report.profile_figure(res, out_dir)
    return {
        "M": M,
        "t0": cfg.t0,
        "l1_phi": res.l1_phi,
        "condensate_initial": traj[0][1].condensate,
        "condensate_final": traj[-1][1].condensate,
    }


def _scenario_identity_check(cfg, out_dir):
    phi = basis("bump", center=0.0, radius=1.0)[0]
    ladder = sorted(cfg.eps_ladder, reverse=True)
    value, vals = pi2_extrapolate(phi, ladder)
    if cfg.figures:
        report.identity_figure(ladder, vals, PI2_12, out_dir)
    _write_csv(os.path.join(out_dir, "profile.csv"), ("eps", "value"),
               list(zip(ladder, vals)))
    return {
        "extrapolated": value,
        "target": PI2_12,
        "rel_error": abs(value - PI2_12) / PI2_12,
        "ladder": {repr(e): v for e, v in zip(ladder, vals)},
    }


def _scenario_verify(cfg, out_dir):
    ctx = VerificationContext(seed=cfg.seed)

    def progress(res):
        status = "PASS" if res["passed"] else "FAIL"
        print("[%s] %2d %s" % (status, res["id"], res["name"]), flush=True)

    results, all_passed = run_all(ctx, progress=progress)
    _write_json(os.path.join(out_dir, "verify.json"),
                {"all_passed": all_passed, "criteria": results})
    traj = ctx.uniform_traj()
    rows = _pde_trajectory_rows(traj)
    _emit_trajectory(out_dir, rows)
    res = ctx.profile()
    _write_csv(os.path.join(out_dir, "profile.csv"),
               ("x", "psi", "phi"),
               list(zip(res.nodes.tolist(), res.psi.tolist(),
                        res.phi_w.tolist())))
    if cfg.figures:
        report.trajectory_figure(rows, out_dir)
        report.profile_figure(res, out_dir)
    return {
        "all_passed": all_passed,
        "passed": sum(1 for r in results if r["passed"]),
        "failed": [r["id"] for r in results if not r["passed"]],
    }


_SCENARIOS = {
    "evolve-pde": _scenario_evolve_pde,
    "evolve-particles": _scenario_evolve_particles,
    "selfsim-profile": _scenario_selfsim_profile,
    "assemble-selfsim": _scenario_assemble_selfsim,
    "identity-check": _scenario_identity_check,
    "verify": _scenario_verify,
}


def run(cfg):
    """Execute a validated configuration.  Returns the process exit status."""
    out_dir = cfg.out
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.echo"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.echo())
    fields = _SCENARIOS[cfg.scenario](cfg, out_dir)
    _write_json(os.path.join(out_dir, "summary.json"),
                _summary(cfg, fields))
    if cfg.scenario == "verify" and not fields["all_passed"]:
        return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="condkin",
        description="Kinetic condensation/energy-transfer scenario runner")
    parser.add_argument("--config", required=True,
                        help="path to a key=value configuration file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", help="RNG seed (overrides config)")
    parser.add_argument("--scenario",
                        help="scenario name (overrides config)")
    args = parser.parse_args(argv)
    overrides = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.scenario is not None:
        overrides["scenario"] = args.scenario
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print("error: cannot read config: %s" % exc, file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
