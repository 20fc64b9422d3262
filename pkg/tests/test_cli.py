import json

import numpy as np
import pytest

from formheat import __version__, save_mesh
from formheat.cli import main, parse_config, run, validate
from formheat.errors import ConfigError
from formheat.model_problems import unit_square_mesh


@pytest.fixture()
def workdir(tmp_path):
    save_mesh(unit_square_mesh(6, bottom="neumann", top="dynamic",
                               interface_y=0.5), tmp_path / "square.mesh")
    save_mesh(unit_square_mesh(6, interface_y=0.5), tmp_path / "mixed.mesh")
    return tmp_path


def write_cfg(path, text):
    path.write_text(text)
    return str(path)


def test_parse_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("pipeline evolve\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config(bad)
    bad.write_text("pipeline = evolve\nnot.a.key = 1\n")
    with pytest.raises(ConfigError, match="not.a.key"):
        parse_config(bad)
    bad.write_text("pipeline = evolve\npipeline = scan\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(bad)


def test_exponents_pipeline_row(workdir):
    cfg = write_cfg(workdir / "exp.cfg", f"""
pipeline = exponents
output = {workdir}/exp
exponents.d = 3
exponents.gamma = 0.5
exponents.case = B
""")
    assert run(cfg) == 0
    lines = (workdir / "exp" / "exponents.csv").read_text().splitlines()
    assert lines[0] == "d,gamma,case,r_omega,r_tr,r_tr_gamma,r_tr_star,r0"
    assert lines[1] == "3,0.5,B,4,+inf,2.6667,+inf,2.6667"


def test_evolve_equilibrium_constant_mass(workdir):
    cfg = write_cfg(workdir / "run.cfg", f"""
pipeline = evolve
output = {workdir}/out
seed = 0
mesh = square.mesh
time.theta = 1.0
time.dt = 0.01
time.t_end = 0.1
init.bulk = 1.0
init.gd = 1.0
init.sigma = 1.0
""")
    assert run(cfg) == 0
    rows = (workdir / "out" / "monitors.csv").read_text().splitlines()
    assert rows[0] == "step,time,mass,energy,supnorm,minval,cg_iters"
    masses = [float(r.split(",")[2]) for r in rows[1:]]
    assert max(masses) - min(masses) <= 1e-11 * abs(masses[0])


def test_missing_mesh_error_record(workdir):
    cfg = write_cfg(workdir / "bad.cfg", f"""
pipeline = evolve
output = {workdir}/bad
mesh = nosuch.mesh
time.dt = 0.1
time.t_end = 0.1
""")
    assert run(cfg) == 2
    record = json.loads((workdir / "bad" / "error.json").read_text())
    assert "mesh: file not found" in record["error"]


def test_validate_well_formed_is_clean(workdir):
    cfg = write_cfg(workdir / "ok.cfg", f"""
pipeline = evolve
mesh = square.mesh
time.dt = 0.01
time.t_end = 0.1
""")
    assert validate(cfg) == []


def test_validate_case_b_gamma_range(workdir):
    cfg = write_cfg(workdir / "caseb.cfg", f"""
pipeline = evolve
mesh = mixed.mesh
coeff.weight.s = segment 0 0.5 1 0.5
coeff.weight.gamma = 1.5
time.dt = 0.01
time.t_end = 0.1
""")
    diags = validate(cfg)
    assert any("requires gamma < 1" in d for d in diags)


def test_validate_negative_surface_coefficient(workdir):
    cfg = write_cfg(workdir / "neg.cfg", f"""
pipeline = evolve
mesh = square.mesh
coeff.mu_sigma = -1.0
time.dt = 0.01
time.t_end = 0.1
""")
    diags = validate(cfg)
    assert any("violates nonnegativity" in d for d in diags)


def test_deterministic_outputs(workdir):
    text = f"""
pipeline = evolve
seed = 42
mesh = square.mesh
time.theta = 1.0
time.dt = 0.01
time.t_end = 0.05
time.snapshots = 0.05
init.bulk = random
init.gd = random
init.sigma = random
"""
    cfg = write_cfg(workdir / "det.cfg", text)
    assert run(cfg, output_override=workdir / "det1") == 0
    assert run(cfg, output_override=workdir / "det2") == 0
    for name in ("monitors.csv", "snapshot_000.csv"):
        a = (workdir / "det1" / name).read_bytes()
        b = (workdir / "det2" / name).read_bytes()
        assert a == b


def test_manifest_completeness(workdir):
    cfg = write_cfg(workdir / "man.cfg", f"""
pipeline = scan
output = {workdir}/scan
scan.s = point 0 0
scan.gamma = 1.0
scan.l_max = 2
scan.window = -1 -1 1 1
""")
    assert run(cfg) == 0
    manifest = (workdir / "scan" / "manifest.csv").read_text().splitlines()
    keys = [line.split(",", 1)[0] for line in manifest[1:]]
    for cfg_key in ("pipeline", "output", "scan.s", "scan.gamma",
                    "scan.l_max", "scan.window"):
        assert f"config.{cfg_key}" in keys
    outputs = [line.split(",", 1)[1] for line in manifest[1:]
               if line.startswith("output_file,")]
    import os
    produced = sorted(f for f in os.listdir(workdir / "scan")
                      if f not in ("manifest.csv",))
    assert sorted(outputs) == produced
    assert "wall_time_seconds" in keys


def test_eigs_pipeline(workdir):
    cfg = write_cfg(workdir / "eigs.cfg", f"""
pipeline = eigs
output = {workdir}/eigs
mesh = mixed.mesh
eigs.count = 3
""")
    assert run(cfg) == 0
    rows = (workdir / "eigs" / "eigs.csv").read_text().splitlines()
    assert rows[0] == "index,lambda,residual"
    assert len(rows) == 4
    lams = [float(r.split(",")[1]) for r in rows[1:]]
    assert lams == sorted(lams)


def test_probe_pipeline(workdir):
    save_mesh(unit_square_mesh(4, bottom="neumann", top="dynamic"),
              workdir / "tiny.mesh")
    cfg = write_cfg(workdir / "probe.cfg", f"""
pipeline = probe
output = {workdir}/probe
mesh = tiny.mesh
probe.theta = 1.0
probe.p = 2
probe.levels = 3
""")
    assert run(cfg) == 0
    rows = (workdir / "probe" / "probe.csv").read_text().splitlines()
    assert rows[0] == "level,h,ratio"
    assert len(rows) == 4


def test_main_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_main_validate_prints_ok(workdir, capsys):
    cfg = write_cfg(workdir / "v.cfg", f"""
pipeline = evolve
mesh = square.mesh
time.dt = 0.01
time.t_end = 0.1
""")
    assert main(["validate", cfg]) == 0
    assert capsys.readouterr().out.strip() == "ok"
