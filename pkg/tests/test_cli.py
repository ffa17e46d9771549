import os

import pytest

from aggrnet import CALIBRATED_NOISE, REFERENCE_GEOMETRY
from aggrnet.cli import (EXIT_CONFIG, EXIT_INSTABILITY, EXIT_OK, load_config, main, run_experiment,
                         shipped_config)
from aggrnet.errors import ConfigError


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    return [l for l in open(path).read().splitlines() if not l.startswith("#")]


def test_minimal_defaults(tmp_path):
    spec = load_config(write(tmp_path, "[network]\nm1 = 1\nm2 = 1\n"))
    n = spec.network
    assert (n.t1, n.t2, n.alpha1, n.alpha2) == (0.1, 0.1, 0.8, 0.8)
    assert spec.scenario == "custom" and spec.sweep == []


def test_shipped_reference_geometry():
    spec = load_config(shipped_config("reference"))
    assert spec.network.geometry == REFERENCE_GEOMETRY
    assert spec.network.channel.noise_power == CALIBRATED_NOISE


@pytest.mark.parametrize("text,needle", [
    ("[network]\nm = 1\nd_sensor_sink = -5\n", ":3:"),
    ("[network]\nm = 1\nbogus = 2\n", ":3:"),
    ("[channel]\ngamma = 1\n", "missing section"),
    ("[network]\nm = 1\n[sweep]\nfoo = 1, 2\n", ":4:"),
    ("[network]\nm = 1\n[experiment]\nanalyses = \n", "analysis"),
    ("[network]\nm = 1\nt = 1.5\n", ":3:"),
])
def test_config_errors(tmp_path, text, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(write(tmp_path, text))


def test_sweep_syntax(tmp_path):
    spec = load_config(write(tmp_path, "[network]\nm = 1\n[sweep]\nm = 1:4\nt = linspace(0.1, 0.3, 3)\n"))
    assert spec.sweep[0] == ("m", [1, 2, 3, 4])
    assert spec.sweep[1][1] == pytest.approx([0.1, 0.2, 0.3])


def test_table1_scenario(tmp_path):
    assert main(["run", shipped_config("table1"), "--out", str(tmp_path)]) == EXIT_OK
    wide = rows(tmp_path / "table1.csv")
    assert len(wide[0].split(",")) == 9 and len(wide) == 31
    row5 = [r.split(",")[6] for r in wide[1:]]  # gamma 1.2, t 0.2
    assert row5[:3] == ["stable"] * 3 and row5[3] == "unstable" and row5[-1] == "stable"


def test_byte_identical_and_header(tmp_path):
    for d in ("a", "b"):
        assert main(["run", shipped_config("fig2"), "--out", str(tmp_path / d), "--threads", "2"]) == EXIT_OK
    a = (tmp_path / "a" / "fig2.csv").read_bytes()
    assert a == (tmp_path / "b" / "fig2.csv").read_bytes()
    assert a.startswith(b"# aggrnet") and b"config_sha256=" in a


def test_empty_sweep_header_only(tmp_path):
    cfg = write(tmp_path, "[network]\nm = 1\n[sweep]\nt =\n")
    assert main(["run", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert len(rows(tmp_path / "custom.csv")) == 1


def test_instability_exit_code_and_partial_rows(tmp_path):
    cfg = write(tmp_path, "[network]\nm = 1\n[channel]\ngamma = 2\n[sweep]\nt = 0.1, 0.2, 0.9, 0.3\n"
                          "[experiment]\nanalyses = delay-closed\n")
    assert main(["run", cfg, "--out", str(tmp_path)]) == EXIT_INSTABILITY
    assert len(rows(tmp_path / "custom.csv")) == 3  # header + the two points before the failure


def test_config_error_exit_code(tmp_path):
    assert main(["run", write(tmp_path, "[network]\nm = x\n"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_fig7_columns(tmp_path):
    cfg = write(tmp_path, "[network]\nm = 1\n[sweep]\ngamma = 1.2\n[sim]\nslots = 20000\nreplications = 2\n"
                          "[experiment]\nscenario = fig7\nanalyses = delay-closed, simulate\npoints = 2\n")
    spec = load_config(cfg)
    assert run_experiment(spec, str(tmp_path), gnuplot=True) == EXIT_OK
    out = rows(tmp_path / "fig7.csv")
    assert out[0] == "gamma,t,lambda,D_low,D_up,D_sim,sim_stderr" and len(out) == 3
    assert os.path.exists(tmp_path / "fig7.gp")


def test_custom_analyses(tmp_path):
    cfg = write(tmp_path, "[network]\nm = 1\n[channel]\ngamma = 1.2\n[sweep]\nt = 0.2\n[sim]\nslots = 20000\n"
                          "[experiment]\nanalyses = throughput, stability, delay-closed, delay-bvp, simulate\n")
    assert main(["run", cfg, "--out", str(tmp_path), "--seed", "3"]) == EXIT_OK
    header, row = [r.split(",") for r in rows(tmp_path / "custom.csv")]
    vals = dict(zip(header, row))
    assert float(vals["D1_bvp"]) == pytest.approx(float(vals["D_low"]), rel=1e-5)
    assert "seed=3" in open(tmp_path / "custom.csv").readline()


def test_tables_command(tmp_path, capsys):
    assert main(["tables", "reference"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("table,area,i,j,value")


def test_check_command():
    assert main(["check"]) == EXIT_OK
