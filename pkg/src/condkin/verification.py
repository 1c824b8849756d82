"""The bundled acceptance/verification suite.

Thirteen numbered checks covering the sharp numeric anchors (the pi^2/12
constant and the condensate growth rate of the truncated x^(-1/2) datum)
and the property-level contracts: conservation laws, condensate
monotonicity and onset, averaged sqrt(r) bounds, long-time condensation,
particle/deterministic agreement, scaling covariance, the self-similar
profile with its regularity properties, and weak-form residuals.

Expensive runs are shared between checks through a lazily-populated
context, so `run_all` (and the `verify` CLI scenario, and the acceptance
test suite) computes each trajectory exactly once.
"""

import math

import numpy as np

from .config import powerlaw_half_measure, uniform_measure
from .kernel import basis, phi_basis
from .measure import (ScalingParams, bl_distance, moment, near_mass,
                      rescale, total_mass)
from .particles import ParticleState, run as particles_run
from .pde import GridSpec, evolve
from .selfsim import (assemble_generalized, profile_property_checks,
                      scaling_test_family, solve_profile)
from .weakform import (RhsOptions, pi2_extrapolate, sqrt_bound_check,
                       weak_residual)

PI2_12 = math.pi ** 2 / 12.0


class VerificationContext:
    """Caches the shared trajectories and profiles across checks."""

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._cache = {}

    def get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -- shared runs -------------------------------------------------------

    def uniform_traj(self, dt_max=0.05, n_nodes=240):
        def build():
            mu0 = uniform_measure(1.0, 2.0, 1.0)
            return evolve(mu0, GridSpec(1e-4, 1e2, n_nodes), 1e-3,
                          t_end=5.0, cadence=0.1, dt_max=dt_max,
                          diag_zero=True)
        return self.get(("uniform", dt_max, n_nodes), build)

    def powerlaw_traj(self, x_min):
        def build():
            mu0 = powerlaw_half_measure(x_min, 1.0)
            n = int(round(40 * math.log10(1e2 / x_min)))
            return evolve(mu0, GridSpec(x_min, 1e2, n), 1e-4,
                          t_end=0.2, cadence=0.01, dt_max=0.01,
                          diag_zero=False)
        return self.get(("powerlaw", x_min), build)

    def particle_ensemble(self, replicas=32, n=10000):
        def build():
            out = []
            for r in range(replicas):
                draw = np.random.Generator(np.random.PCG64(
                    np.random.SeedSequence((self.seed, r, 0xD07A))))
                sizes = draw.uniform(1.0, 2.0, n)
                st = ParticleState(sizes, 1.0 / n, eps=1e-3,
                                   seed=self.seed, stream=r)
                e0 = float(np.sum(sizes)) * st.weight
                times, snaps, _ = particles_run(st, 1.0, cadence=0.25,
                                                record_events=False)
                out.append((times, snaps, e0))
            return out
        return self.get(("particles", replicas, n), build)

    def particle_pde_reference(self):
        def build():
            mu0 = uniform_measure(1.0, 2.0, 1.0)
            return evolve(mu0, GridSpec(1e-4, 1e2, 960), 1e-3,
                          t_end=1.0, cadence=0.25, dt_max=0.05,
                          diag_zero=False)
        return self.get("particle_ref", build)

    def profile(self, n_nodes=480):
        def build():
            return solve_profile(1.0, GridSpec(1e-3, 1e3, n_nodes), 1e-3,
                                 tol=1e-3, max_pseudo_time=120.0)
        return self.get(("profile", n_nodes), build)

    def assembled_traj(self):
        def build():
            res = self.profile()
            t0 = 1.0
            fam = assemble_generalized(res, 1.5 * res.l1_phi / math.sqrt(t0),
                                       t0)
            return fam, fam.trajectory(np.linspace(0.0, 3.0, 61).tolist())
        return self.get("assembled", build)

    def verify_trajectories(self):
        """Every deterministic trajectory the suite produces, by label."""
        out = {
            "uniform": self.uniform_traj().measures(),
            "powerlaw_xmin_1e-4": self.powerlaw_traj(1e-4).measures(),
            "assembled": self.assembled_traj()[1],
        }
        return out


def _result(cid, name, passed, details):
    return {"id": cid, "name": name, "passed": bool(passed),
            "details": details}


# ---------------------------------------------------------------------------
# The thirteen checks
# ---------------------------------------------------------------------------

def check_01_pi2_identity(ctx):
    phi = basis("bump", center=0.0, radius=1.0)[0]
    value, ladder = pi2_extrapolate(phi)
    rel = abs(value - PI2_12) / PI2_12
    return _result(1, "pi2-over-12 identity", rel <= 0.01,
                   {"extrapolated": value, "target": PI2_12,
                    "rel_error": rel, "ladder_values": ladder})


def check_02_mass_conservation(ctx):
    traj = ctx.uniform_traj()
    errs = [abs(s.mass_total() - 1.0) for s in traj.states]
    worst = max(errs)
    return _result(2, "mass conservation", worst <= 1e-9,
                   {"max_abs_error": worst, "t_end": traj.times[-1]})


def check_03_energy_conservation(ctx):
    e0 = ctx.uniform_traj().states[0].energy_active()

    def err(traj):
        return max(abs(s.energy_active() + s.overflow_energy - e0) / e0
                   for s in traj.states)

    e_coarse = err(ctx.uniform_traj(dt_max=0.05))
    e_fine = err(ctx.uniform_traj(dt_max=0.025))
    # energy is a linear invariant of the scheme, so both errors sit at
    # the rounding floor; require the tolerance and no growth under dt/2
    floor = 1e-12
    passed = e_coarse <= 1e-4 and (e_fine <= 0.5 * e_coarse
                                   or e_fine <= floor)
    return _result(3, "energy conservation", passed,
                   {"rel_error_dt": e_coarse, "rel_error_dt_half": e_fine,
                    "rounding_floor": floor})


def check_04_condensate_onset(ctx):
    traj = ctx.uniform_traj()
    cond = [s.condensate for s in traj.states]
    monotone = all(b >= a - 1e-15 for a, b in zip(cond, cond[1:]))
    k01 = min(range(len(traj.times)),
              key=lambda k: abs(traj.times[k] - 0.1))
    mu01 = traj.states[k01].measure()
    onset = traj.states[k01].condensate > 0.0
    deltas = np.geomspace(1e-3, 1e-2, 7)
    nm = np.asarray([near_mass(mu01, d) for d in deltas])
    slope = float(np.polyfit(np.log(deltas), np.log(nm), 1)[0])
    return _result(4, "condensate monotonicity and onset",
                   monotone and onset and 0.0 < slope < 0.55,
                   {"monotone": monotone,
                    "condensate_at_0.1": traj.states[k01].condensate,
                    "near_mass_slope": slope})


def check_05_sqrt_bound(ctx):
    rs = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0]
    violations = []
    margins = {}
    for label, traj in ctx.verify_trajectories().items():
        t1, t2 = traj[0][0], traj[-1][0]
        for r in rs:
            holds, margin = sqrt_bound_check(traj, r, t1, t2)
            margins["%s r=%g" % (label, r)] = margin
            if not holds:
                violations.append((label, r))
    return _result(5, "averaged sqrt(r) mass bound", not violations,
                   {"violations": violations,
                    "min_margin": min(margins.values())})


def check_06_longtime_condensation(ctx):
    def build():
        mu0 = uniform_measure(1.0, 2.0, 1.0)
        grid = GridSpec(1e-4, 1e2, 240)
        traj = evolve(mu0, grid, 1e-3, t_end=700.0, cadence=10.0,
                      dt_max=0.2, diag_zero=True)
        return traj
    traj = ctx.get("longtime", build)
    nm = [near_mass(s.measure(), 0.05) for s in traj.states]
    reached = [t for t, v in zip(traj.times, nm) if v >= 0.9]
    return _result(6, "long-time condensation", bool(reached),
                   {"t_reached_0.9": reached[0] if reached else None,
                    "near_mass_final": nm[-1]})


def _condensate_fit(traj):
    ts = np.asarray(traj.times)
    cs = np.asarray([s.condensate for s in traj.states])
    slope, intercept = np.polyfit(ts, cs, 1)
    pred = slope * ts + intercept
    ss_res = float(np.sum((cs - pred) ** 2))
    ss_tot = float(np.sum((cs - np.mean(cs)) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(r2)


def check_07_powerlaw_growth_rate(ctx):
    slope_c, r2_c = _condensate_fit(ctx.powerlaw_traj(1e-3))
    slope_f, r2_f = _condensate_fit(ctx.powerlaw_traj(1e-4))
    rel = abs(slope_f - PI2_12) / PI2_12
    toward = abs(slope_f - PI2_12) < abs(slope_c - PI2_12)
    passed = r2_f >= 0.99 and rel <= 0.25 and toward
    return _result(7, "condensate growth rate, truncated x^-1/2", passed,
                   {"slope_xmin_1e-3": slope_c, "slope_xmin_1e-4": slope_f,
                    "r2_xmin_1e-4": r2_f, "target": PI2_12,
                    "rel_deviation": rel, "monotone_toward": toward})


def check_08_particle_pde_agreement(ctx):
    reps = ctx.particle_ensemble()
    ref = ctx.particle_pde_reference().states[-1].measure()
    nm = np.asarray([near_mass(s[1][-1], 0.1) for s in reps])
    m2 = np.asarray([moment(s[1][-1], 2.0) for s in reps])
    k = len(reps)
    out = {}
    ok = True
    for name, vals, target in (("near_mass_0.1", nm, near_mass(ref, 0.1)),
                               ("moment_2", m2, moment(ref, 2.0))):
        se = float(np.std(vals, ddof=1) / math.sqrt(k))
        dev = abs(float(np.mean(vals)) - target) / se
        out[name] = {"ensemble_mean": float(np.mean(vals)),
                     "stderr": se, "reference": target, "deviation_se": dev}
        ok = ok and dev <= 3.0
    return _result(8, "particle/deterministic agreement", ok, out)


def check_09_particle_conservation(ctx):
    reps = ctx.particle_ensemble()
    counts_ok = True
    drifts = []
    for times, snaps, e0 in reps:
        # count: every snapshot's total mass equals the initial exactly
        for mu in snaps:
            if abs(total_mass(mu) - 1.0) > 1e-12:
                counts_ok = False
        drifts.append(moment(snaps[-1], 1.0) - e0)
    drifts = np.asarray(drifts)
    se = float(np.std(drifts, ddof=1) / math.sqrt(drifts.size))
    dev = abs(float(np.mean(drifts))) / se
    return _result(9, "particle conservation laws",
                   counts_ok and dev <= 3.0,
                   {"count_exact": counts_ok,
                    "size_sum_drift_mean": float(np.mean(drifts)),
                    "stderr": se, "deviation_se": dev})


def check_10_scaling_covariance(ctx):
    kappa = lam = 2.0
    mu0 = uniform_measure(1.0, 2.0, 1.0)
    scale = ScalingParams(kappa, lam)
    nu0 = rescale(mu0, scale)
    eps = 1e-3
    checkpoints = [0.25, 0.5, 0.75]

    def evolve_nu(n_nodes):
        # matched grid: base nodes and kernel cutoff pushed through the
        # same position map y -> y/lam, so discretization commutes exactly
        return evolve(nu0, GridSpec(1e-4 / lam, 1e2 / lam, n_nodes),
                      eps / lam, t_end=checkpoints[-1], cadence=0.25,
                      dt_max=0.0125, diag_zero=False)

    def build():
        base = evolve(mu0, GridSpec(1e-4, 1e2, 240), eps,
                      t_end=kappa * lam * checkpoints[-1], cadence=1.0,
                      dt_max=0.05, diag_zero=False)
        return base, evolve_nu(240), evolve_nu(480)
    base, nu_coarse, nu_fine = ctx.get("scaling", build)
    details = {}
    ok = True
    for t in checkpoints:
        k_nu = min(range(len(nu_coarse.times)),
                   key=lambda k: abs(nu_coarse.times[k] - t))
        k_base = min(range(len(base.times)),
                     key=lambda k: abs(base.times[k] - kappa * lam * t))
        commuted = rescale(base.states[k_base].measure(), scale)
        direct = nu_coarse.states[k_nu].measure()
        disc = bl_distance(direct, nu_fine.states[k_nu].measure())
        gap = bl_distance(direct, commuted)
        details["t=%g" % t] = {"bl_gap": gap, "discretization_error": disc}
        ok = ok and gap <= 2.0 * disc
    return _result(10, "scaling covariance", ok, details)


def check_11_selfsim_profile(ctx):
    res = ctx.profile()
    fam, traj = ctx.assembled_traj()
    phi_nonneg = bool(np.all(res.phi_w >= 0.0))
    constraint = res.state.constraint()
    masses = [total_mass(mu) for _, mu in traj]
    energies = [moment(mu, 1.0) for _, mu in traj]
    mass_const = max(abs(m - masses[0]) for m in masses) <= 1e-12
    energy_const = max(abs(e - energies[0]) for e in energies) <= 1e-9
    worst = 0.0
    for phi0 in phi_basis():
        r = weak_residual(traj, scaling_test_family(phi0, fam.t0),
                          RhsOptions(eps=0.0))
        worst = max(worst, r)
    passed = (res.converged and res.residual_psi_eps < 1e-3 and phi_nonneg
              and constraint <= 36.0 and mass_const and energy_const
              and worst < 5e-3)
    return _result(11, "self-similar energy profile", passed,
                   {"stationarity_residual": res.residual_psi_eps,
                    "unregularized_residual": res.residual_psi,
                    "mass_equation_residual": res.residual_phi,
                    "constraint_value": constraint, "l1_phi": res.l1_phi,
                    "phi_nonnegative": phi_nonneg,
                    "mass_constant": mass_const,
                    "energy_constant": energy_const,
                    "assembled_weak_residual": worst})


def check_12_profile_properties(ctx):
    res = ctx.profile()
    refined = ctx.profile(n_nodes=960)
    rep = profile_property_checks(res, refined=refined)
    exp_ok = rep["near_origin_exponent"] >= 1.0
    moments_ok = all(math.isfinite(v) for v in rep["moments"].values()) \
        and all(s <= 0.05 for s in rep["moment_shifts"].values())
    hq, hq_ref = rep["hoelder_quotient"], rep["hoelder_quotient_refined"]
    hoelder_ok = math.isfinite(hq) and hq_ref <= 1.5 * hq
    return _result(12, "profile regularity and moments",
                   exp_ok and moments_ok and hoelder_ok,
                   {"near_origin_exponent": rep["near_origin_exponent"],
                    "moment_shift_max": max(rep["moment_shifts"].values()),
                    "hoelder_quotient": hq,
                    "hoelder_quotient_refined": hq_ref})


def check_13_weak_residual_suite(ctx):
    phis = phi_basis()

    def worst(traj, opt):
        return max(weak_residual(traj, phi, opt) for phi in phis)

    opt_atomic = RhsOptions(eps=1e-3)
    opt_powerlaw = RhsOptions(eps=1e-4)
    r_coarse = worst(ctx.uniform_traj().measures(), opt_atomic)
    r_fine = worst(ctx.uniform_traj(dt_max=0.025, n_nodes=480).measures(),
                   opt_atomic)
    r_powerlaw = worst(ctx.powerlaw_traj(1e-4).measures(), opt_powerlaw)
    r_assembled = worst(ctx.assembled_traj()[1], RhsOptions(eps=0.0))
    passed = (max(r_coarse, r_fine, r_powerlaw, r_assembled) <= 1e-2
              and r_fine < r_coarse)
    return _result(13, "weak-form residual suite", passed,
                   {"uniform": r_coarse, "uniform_refined": r_fine,
                    "powerlaw": r_powerlaw, "assembled": r_assembled,
                    "decreases_under_refinement": r_fine < r_coarse})


ALL_CHECKS = (
    check_01_pi2_identity,
    check_02_mass_conservation,
    check_03_energy_conservation,
    check_04_condensate_onset,
    check_05_sqrt_bound,
    check_06_longtime_condensation,
    check_07_powerlaw_growth_rate,
    check_08_particle_pde_agreement,
    check_09_particle_conservation,
    check_10_scaling_covariance,
    check_11_selfsim_profile,
    check_12_profile_properties,
    check_13_weak_residual_suite,
)


def run_all(ctx=None, progress=None):
    """Run every check; returns (results list, all_passed)."""
    if ctx is None:
        ctx = VerificationContext()
    results = []
    for check in ALL_CHECKS:
        res = check(ctx)
        results.append(res)
        if progress is not None:
            progress(res)
    return results, all(r["passed"] for r in results)
