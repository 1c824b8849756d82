"""End-to-end acceptance suite.

Each test runs one of the library's built-in verification criteria and
prints a single pass/fail line with the key measured quantities.  The
checks share one VerificationContext so expensive trajectories, particle
ensembles, and profile solves are computed once; the full module takes
on the order of ten minutes on a single core.
"""

import pytest

from condkin import verification


@pytest.fixture(scope="module")
def ctx():
    return verification.VerificationContext(seed=0)


def _run(check, ctx):
    res = check(ctx)
    status = "PASS" if res["passed"] else "FAIL"
    details = ", ".join("%s=%s" % (k, v) for k, v in
                        sorted(res["details"].items()))
    print("[%s] criterion %02d %s: %s"
          % (status, res["id"], res["name"], details))
    assert res["passed"], res
    return res


def test_criterion_01_quadratic_identity(ctx):
    _run(verification.check_01_pi2_identity, ctx)


def test_criterion_02_mass_conservation(ctx):
    _run(verification.check_02_mass_conservation, ctx)


def test_criterion_03_energy_conservation(ctx):
    _run(verification.check_03_energy_conservation, ctx)


def test_criterion_04_condensate_onset(ctx):
    _run(verification.check_04_condensate_onset, ctx)


def test_criterion_05_near_origin_sqrt_bound(ctx):
    _run(verification.check_05_sqrt_bound, ctx)


def test_criterion_06_longtime_condensation(ctx):
    _run(verification.check_06_longtime_condensation, ctx)


def test_criterion_07_powerlaw_condensate_growth(ctx):
    _run(verification.check_07_powerlaw_growth_rate, ctx)


def test_criterion_08_particle_pde_agreement(ctx):
    _run(verification.check_08_particle_pde_agreement, ctx)


def test_criterion_09_particle_conservation(ctx):
    _run(verification.check_09_particle_conservation, ctx)


def test_criterion_10_scaling_covariance(ctx):
    _run(verification.check_10_scaling_covariance, ctx)


def test_criterion_11_selfsimilar_profile(ctx):
    _run(verification.check_11_selfsim_profile, ctx)


def test_criterion_12_profile_properties(ctx):
    _run(verification.check_12_profile_properties, ctx)


def test_criterion_13_weak_residual_suite(ctx):
    _run(verification.check_13_weak_residual_suite, ctx)


def test_all_checks_registered():
    assert len(verification.ALL_CHECKS) == 13
    assert [c.__name__ for c in verification.ALL_CHECKS] == sorted(
        c.__name__ for c in verification.ALL_CHECKS)
