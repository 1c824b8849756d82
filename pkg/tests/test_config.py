import math

import numpy as np
import pytest

from condkin.config import (ConfigError, build_initial, parse_config,
                            resolve_diag_zero)
from condkin.measure import moment, to_text, total_mass


class TestParseConfig:
    def test_defaults_applied(self):
        cfg = parse_config("scenario=identity-check\n")
        assert cfg.eps == 1e-3
        assert cfg.n_nodes == 240
        assert cfg.eps_ladder == (1e-2, 3e-3, 1e-3)
        assert cfg.out == "out"

    def test_scenario_mandatory(self):
        with pytest.raises(ConfigError, match="scenario is mandatory"):
            parse_config("")

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError, match="unknown scenario"):
            parse_config("scenario=frobnicate\n")

    def test_unknown_key_carries_line_number(self):
        with pytest.raises(ConfigError, match="line 3"):
            parse_config("scenario=verify\n# comment\nbogus=1\n")

    def test_out_of_range_value_names_key_and_line(self):
        with pytest.raises(ConfigError, match="line 2.*'eps'"):
            parse_config("scenario=verify\neps=-1\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 1.*key=value"):
            parse_config("this is not an assignment\n")

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config(
            "# full line comment\n\nscenario=verify  # trailing\n")
        assert cfg.scenario == "verify"

    def test_overrides_win(self):
        cfg = parse_config("scenario=verify\nseed=1\n",
                           overrides={"seed": "99", "out": "elsewhere"})
        assert cfg.seed == 99
        assert cfg.out == "elsewhere"

    def test_override_validation(self):
        with pytest.raises(ConfigError, match="'eps'"):
            parse_config("scenario=verify\n", overrides={"eps": "-2"})

    def test_grid_sanity(self):
        with pytest.raises(ConfigError, match="x_min"):
            parse_config("scenario=verify\nx_min=10\nx_max=1\n")

    def test_diagonal_mode_validated(self):
        with pytest.raises(ConfigError, match="diagonal"):
            parse_config("scenario=verify\ndiagonal=sideways\n")

    def test_echo_round_trips(self):
        cfg = parse_config("scenario=evolve-pde\neps=0.01\nseed=7\n"
                           "figures=false\n")
        cfg2 = parse_config(cfg.echo())
        assert cfg2.eps == cfg.eps
        assert cfg2.seed == cfg.seed
        assert cfg2.figures is False
        assert cfg2.eps_ladder == cfg.eps_ladder


class TestInitialFamilies:
    def test_dirac0(self):
        mu, name = build_initial("dirac0(2.5)")
        assert name == "dirac0"
        assert mu.condensate == 2.5
        assert mu.xs.size == 0

    def test_uniform_mass_and_energy(self):
        mu, name = build_initial("uniform(1,2,1)")
        assert name == "uniform"
        assert total_mass(mu) == pytest.approx(1.0, rel=1e-12)
        # midpoint cells reproduce the mean of the density exactly
        assert moment(mu, 1.0) == pytest.approx(1.5, rel=1e-12)

    def test_powerlaw_half_exact_truncation_integrals(self):
        mu, name = build_initial("powerlaw_half(0.01,1)")
        assert name == "powerlaw_half"
        # integral of x^(-1/2) over [a, b] is 2 (sqrt b - sqrt a)
        assert total_mass(mu) == pytest.approx(
            2.0 * (1.0 - math.sqrt(0.01)), rel=1e-12)
        # integral of x * x^(-1/2) is (2/3)(b^1.5 - a^1.5)
        assert moment(mu, 1.0) == pytest.approx(
            (2.0 / 3.0) * (1.0 - 0.01 ** 1.5), rel=1e-12)

    def test_twoatom(self):
        mu, name = build_initial("twoatom(1, 2, 0.25, 0.75)")
        assert mu.atoms == [(1.0, 0.25), (2.0, 0.75)]

    def test_profile_file(self, tmp_path):
        from condkin.measure import Measure
        mu0 = Measure(0.5, [(1.0, 1.0)])
        path = tmp_path / "m.txt"
        path.write_text(to_text(mu0), encoding="utf-8")
        mu, name = build_initial("profile_file(%s)" % path)
        assert name == "profile_file"
        assert mu == mu0

    def test_bad_descriptors(self):
        for bad in ("unknown_family(1)", "uniform(1,2)", "uniform(2,1,1)",
                    "dirac0(-1)", "twoatom(1,2,3)", "powerlaw_half(1,0.5)",
                    "42bogus("):
            with pytest.raises(ConfigError):
                build_initial(bad)


class TestDiagonalResolution:
    def test_auto_follows_family(self):
        cfg = parse_config("scenario=evolve-pde\n")
        assert resolve_diag_zero(cfg, "twoatom") is True
        assert resolve_diag_zero(cfg, "dirac0") is True
        assert resolve_diag_zero(cfg, "uniform") is False
        assert resolve_diag_zero(cfg, "powerlaw_half") is False

    def test_explicit_modes_override(self):
        atomic = parse_config("scenario=evolve-pde\ndiagonal=atomic\n")
        continuum = parse_config("scenario=evolve-pde\ndiagonal=continuum\n")
        assert resolve_diag_zero(atomic, "uniform") is True
        assert resolve_diag_zero(continuum, "twoatom") is False
