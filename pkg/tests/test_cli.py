import json
import os

import pytest

from condkin import cli


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


PDE_CFG = """\
scenario=evolve-pde
initial=twoatom(1,2,0.5,0.5)
x_min=1e-3
x_max=1e2
n_nodes=80
eps=1e-2
t_end=0.5
cadence=0.25
figures=false
"""

PART_CFG = """\
scenario=evolve-particles
initial=uniform(1,2,1)
n_particles=200
replicas=2
eps=1e-2
t_end=0.2
cadence=0.1
seed=3
figures=false
"""


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["--config", str(tmp_path / "nope.cfg")]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_config_error(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "scenario=evolve-pde\neps=-1\n")
        assert cli.main(["--config", cfg]) == 2
        assert "'eps'" in capsys.readouterr().err

    def test_runtime_error(self, tmp_path, capsys):
        # initial support above the grid top is a runtime failure, not a
        # config parse failure
        cfg = write_cfg(tmp_path, PDE_CFG + "initial=twoatom(1,200,0.5,0.5)\n"
                        + "out=%s\n" % (tmp_path / "o"))
        assert cli.main(["--config", cfg]) == 1
        assert "error" in capsys.readouterr().err

    def test_success(self, tmp_path):
        cfg = write_cfg(tmp_path, PDE_CFG + "out=%s\n" % (tmp_path / "o"))
        assert cli.main(["--config", cfg]) == 0


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pde")
    out = tmp / "o"
    cfg = write_cfg(tmp, PDE_CFG + "out=%s\n" % out)
    assert cli.main(["--config", cfg]) == 0
    return out


@pytest.fixture(scope="module")
def out_dirs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("part")
    outs = []
    for name in ("a", "b"):
        out = tmp / name
        cfg = write_cfg(tmp, PART_CFG + "out=%s\n" % out, name + ".cfg")
        assert cli.main(["--config", cfg]) == 0
        outs.append(out)
    return outs


class TestPdeOutputs:
    def test_file_set(self, out_dir):
        names = sorted(os.listdir(out_dir))
        assert names == ["config.echo", "profile.csv", "summary.json",
                         "trajectory.csv"]

    def test_trajectory_header_and_rows(self, out_dir):
        lines = read(out_dir / "trajectory.csv").decode().splitlines()
        assert lines[0].startswith("t,mass_total,mass_condensate,")
        assert len(lines) == 4  # header + t in {0, 0.25, 0.5}
        assert lines[1].split(",")[0] == "0.0"

    def test_profile_starts_with_condensate_row(self, out_dir):
        lines = read(out_dir / "profile.csv").decode().splitlines()
        assert lines[0] == "x,w"
        assert lines[1].startswith("0.0,")

    def test_summary_shape(self, out_dir):
        data = json.loads(read(out_dir / "summary.json"))
        assert data["scenario"] == "evolve-pde"
        assert "generated_at" in data["header"]
        assert data["effective_config"]["n_nodes"] == "80"
        assert data["results"]["mass_error"] == pytest.approx(0.0, abs=1e-12)

    def test_outputs_use_lf_only(self, out_dir):
        for name in ("trajectory.csv", "profile.csv", "summary.json",
                     "config.echo"):
            assert b"\r" not in read(out_dir / name)


class TestParticleOutputs:
    def test_events_log_written_with_replica_markers(self, out_dirs):
        text = read(out_dirs[0] / "events.log").decode()
        assert "# replica 0" in text and "# replica 1" in text

    def test_trajectory_has_replica_column(self, out_dirs):
        lines = read(out_dirs[0] / "trajectory.csv").decode().splitlines()
        assert lines[0].startswith("replica,t,")
        replicas = {ln.split(",")[0] for ln in lines[1:]}
        assert replicas == {"0", "1"}

    def test_byte_reproducible(self, out_dirs):
        a, b = out_dirs
        for name in ("events.log", "trajectory.csv", "profile.csv"):
            assert read(a / name) == read(b / name)

    def test_seed_override_changes_events(self, out_dirs, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(tmp_path, PART_CFG + "out=%s\n" % out)
        assert cli.main(["--config", cfg, "--seed", "4"]) == 0
        assert read(out / "events.log") != read(out_dirs[0] / "events.log")

    def test_condensate_initial_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, PART_CFG + "initial=dirac0(1)\nout=%s\n"
                        % (tmp_path / "o"))
        assert cli.main(["--config", cfg]) == 1
        assert "positive sizes" in capsys.readouterr().err


class TestOtherScenarios:
    def test_identity_check(self, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(tmp_path, "scenario=identity-check\nfigures=false\n"
                        "out=%s\n" % out)
        assert cli.main(["--config", cfg]) == 0
        data = json.loads(read(out / "summary.json"))
        assert data["results"]["rel_error"] < 0.01
        lines = read(out / "profile.csv").decode().splitlines()
        assert lines[0] == "eps,value"

    def test_selfsim_profile_with_figure(self, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(
            tmp_path,
            "scenario=selfsim-profile\nE=1.0\neps=1e-2\nx_max=1e2\n"
            "n_nodes=120\ntol=5e-3\nmax_pseudo_time=40\nout=%s\n" % out)
        assert cli.main(["--config", cfg]) == 0
        assert (out / "profile.png").exists()
        lines = read(out / "profile.csv").decode().splitlines()
        assert lines[0] == "x,psi,phi"
        data = json.loads(read(out / "summary.json"))
        assert data["results"]["converged"] is True

    def test_assemble_selfsim(self, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(
            tmp_path,
            "scenario=assemble-selfsim\nE=1.0\neps=1e-2\nx_max=1e2\n"
            "n_nodes=120\ntol=5e-3\nmax_pseudo_time=40\nt_end=1.0\n"
            "cadence=0.5\nfigures=false\nout=%s\n" % out)
        assert cli.main(["--config", cfg]) == 0
        lines = read(out / "trajectory.csv").decode().splitlines()
        assert len(lines) == 4
        data = json.loads(read(out / "summary.json"))
        assert data["results"]["condensate_final"] > 0.0

    def test_scenario_override(self, tmp_path):
        out = tmp_path / "o"
        cfg = write_cfg(tmp_path, "scenario=evolve-pde\nfigures=false\n"
                        "out=%s\n" % out)
        assert cli.main(["--config", cfg, "--scenario",
                         "identity-check"]) == 0
        data = json.loads(read(out / "summary.json"))
        assert data["scenario"] == "identity-check"
