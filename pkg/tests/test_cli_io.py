import os

import numpy as np
import pytest

from trifield import meshgen
from trifield.cli import main
from trifield.config import load_config, parse_config
from trifield.errors import ConfigError
from trifield.mesh import Mesh
from trifield.probes import PointProbe, ProbeSeries, component_names, read_probe_csv
from trifield.vtk import read_vtk, step_filename, write_vtk

COOK_SMALL = """
[problem]
preset = cook
[mesh]
n = 4
[time]
dt = 0.5
"""


def test_cook_preset_values():
    cfg = parse_config("[problem]\npreset = cook\n")
    assert cfg.kind == "solid" and cfg.t_end == 1.0 and cfg.dt == 0.25
    assert cfg.solid["mu"] == 80e9 and cfg.solid["inv_lambda"] == 0.0 and cfg.solid["load"] == 30e9
    assert cfg.probes[0].point == (48.0, 60.0)


def test_cantilever_preset_values():
    cfg = parse_config("[problem]\npreset = cantilever\n")
    assert cfg.solid["rho"] == 100.0 and cfg.solid["mu"] == 2.135e7
    assert cfg.solid["gravity"] == (0.0, -2.0)
    assert cfg.dt == 1e-3 and cfg.n_steps == 1000


def test_fsi_beam_preset_values():
    cfg = parse_config("[problem]\npreset = fsi_beam2d\n")
    assert cfg.kind == "fsi" and cfg.t_end == 40.0
    assert cfg.solid["young"] == 55428.0 and cfg.solid["rho"] == 10.0
    assert cfg.fluid["rho"] == 2.0 and cfg.fluid["nu"] == 0.2
    assert cfg.solver["relaxation"] == "aitken"


def test_overrides_and_material_alternatives():
    cfg = parse_config("[problem]\npreset = fsi_beam2d\n[solid]\nmu = 100\ninv_lambda = 0\n[fluid]\nmu = 0.4\n")
    assert "young" not in cfg.solid and cfg.solid["mu"] == 100.0
    assert "nu" not in cfg.fluid and cfg.fluid["mu"] == 0.4


def test_config_errors_are_all_listed():
    text = "[problem]\npreset = cook\n[time]\ndt = -1\n[solid]\nmu = abc\nbogus = 1\n[nonsense]\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    problems = info.value.problems
    assert len(problems) >= 4
    joined = "\n".join(problems)
    for word in ("dt", "mu", "bogus", "nonsense"):
        assert word in joined


def test_missing_preset_is_an_error():
    with pytest.raises(ConfigError):
        parse_config("[time]\ndt = 0.1\n")


def test_probe_outside_domain_is_an_error():
    with pytest.raises(ConfigError) as info:
        parse_config("[problem]\npreset = cook\n[probes]\nfar = 100, 100\n")
    assert any("outside" in p for p in info.value.problems)


def test_probe_domain_is_inferred():
    cfg = parse_config("[problem]\npreset = fsi_beam2d\n[probes]\nwake = 30, 5\n")
    assert cfg.probes[0].domain == "fluid"


def test_unreadable_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))


def test_step_filename():
    assert step_filename("out/cook", 7) == "out/cook_00007.vtk"


def test_vtk_single_triangle(tmp_path):
    m = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), "tri3")
    path = write_vtk(str(tmp_path / "t.vtk"), m, {"p": np.array([1.0, 2.0, 3.0])})
    text = open(path).read().split("\n")
    assert text[0] == "# vtk DataFile Version 3.0"
    assert "POINTS 3 double" in text and "CELLS 1 4" in text and "3 0 1 2" in text
    assert "CELL_TYPES 1" in text and "5" in text
    assert "SCALARS p double 1" in text


def test_vtk_round_trip(tmp_path, rng):
    m = meshgen.cook_membrane(3)
    d = rng.standard_normal((m.n_nodes, 2))
    p = rng.standard_normal(m.n_nodes)
    s = rng.standard_normal((m.n_nodes, 3))
    path = write_vtk(str(tmp_path / step_filename("cook", 3)), m, {"d": d, "p": p, "s": s})
    m2, data = read_vtk(path)
    assert np.array_equal(m2.cells, m.cells) and m2.kind == "tri3"
    assert np.max(np.abs(m2.nodes - m.nodes)) <= 1e-12
    assert np.max(np.abs(data["d"][:, :2] - d)) <= 1e-12 and np.all(data["d"][:, 2] == 0)
    assert np.max(np.abs(data["p"] - p)) <= 1e-12
    assert np.max(np.abs(data["s"] - s)) <= 1e-12


def test_vtk_rejects_wrong_length(tmp_path):
    m = meshgen.unit_square(2)
    with pytest.raises(ValueError):
        write_vtk(str(tmp_path / "x.vtk"), m, {"p": np.zeros(3)})


def test_probe_at_node_is_exact(rng):
    m = meshgen.unit_square(4)
    node = 7
    f = rng.standard_normal(m.n_nodes)
    assert PointProbe(m, m.nodes[node]).sample(f) == f[node]


def test_probe_reproduces_linear_field():
    m = meshgen.cook_membrane(4)
    f = 2.0 * m.nodes[:, 0] - m.nodes[:, 1]
    pt = np.array([20.3, 33.1])
    assert PointProbe(m, pt).sample(f) == pytest.approx(2 * 20.3 - 33.1, rel=1e-12)


def test_component_names():
    assert component_names("d", 2, "vector") == ["d_x", "d_y"]
    assert len(component_names("s", 3, "sym")) == 6
    assert component_names("p", 2, "scalar") == ["p"]


def test_probe_series_time_must_increase(tmp_path):
    ps = ProbeSeries(str(tmp_path / "p.csv"), ["a", "b"])
    ps.append(0.1, [1.0, 2.0])
    ps.append(0.2, [1.0 / 3.0, 2.0])
    with pytest.raises(ValueError):
        ps.append(0.2, [0.0, 0.0])
    data = read_probe_csv(ps.path)
    assert list(data) == ["time", "a", "b"]
    assert data["a"][1] == 1.0 / 3.0


def test_cli_run_cook(tmp_path):
    cfg = tmp_path / "cook.ini"
    cfg.write_text(COOK_SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--vtk-every", "1"]) == 0
    files = sorted(os.listdir(out))
    assert "probe_A.csv" in files
    assert {"cook_00000.vtk", "cook_00001.vtk", "cook_00002.vtk"} <= set(files)
    _, data = read_vtk(str(out / "cook_00002.vtk"))
    assert "p" in data and "d" in data
    probe = read_probe_csv(str(out / "probe_A.csv"))
    assert np.all(np.diff(probe["time"]) > 0) and len(probe["time"]) == 2
    assert probe["d_y"][-1] > 0


def test_cli_invalid_config_writes_nothing(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[problem]\npreset = cook\n[time]\ndt = zero\n")
    out = tmp_path / "out"
    code = main(["run", str(cfg), "--out", str(out)])
    assert code != 0
    assert not out.exists()
    assert "dt" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) != 0


def test_cli_bad_arguments():
    with pytest.raises(SystemExit):
        main(["run"])
    with pytest.raises(SystemExit):
        main(["run", "x.ini", "--max-steps", "0"])


def test_cli_unknown_suite():
    assert main(["verify", "nonexistent"]) == 2


def test_deterministic_reruns_are_bitwise_identical(tmp_path):
    cfg = tmp_path / "cook.ini"
    cfg.write_text(COOK_SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["run", str(cfg), "--out", str(out), "--vtk-every", "1", "--deterministic"]) == 0
        outs.append(out)
    for name in sorted(os.listdir(outs[0])):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_max_steps(tmp_path):
    cfg = tmp_path / "cook.ini"
    cfg.write_text(COOK_SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--max-steps", "1"]) == 0
    assert len(read_probe_csv(str(out / "probe_A.csv"))["time"]) == 1
    assert not any(f.endswith(".vtk") for f in os.listdir(out))
