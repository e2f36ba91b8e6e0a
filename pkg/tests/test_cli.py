import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from etype_interp import config as cfgmod
from etype_interp.cli import main
from etype_interp.errors import ConfigError


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--help"])
    assert e.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_lagrange_defaults(tmp_path):
    c = write(tmp_path, {"schema_version": 1})
    out = tmp_path / "out"
    assert main(["converge-lagrange", "--config", c, "--output", str(out)]) == 0
    rows = read_csv(out / "lagrange.csv")
    assert rows[0] == ["tau", "weighted_error", "tail_budget", "nodes_used", "origin_integral"]
    assert [float(r[0]) for r in rows[1:]] == [8, 16, 32, 64]
    err = np.array([float(r[1]) for r in rows[1:]])
    assert np.all(np.diff(err) < 0)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["success"] and summary["criteria"]["strictly_decreasing"]["pass"]


def test_admissibility_exit_code(tmp_path, capsys):
    c = write(
        tmp_path,
        {
            "schema_version": 1,
            "experiment": "converge-lagrange",
            "system": {"family": "bessel", "nu": -0.75, "alpha": 0.5},
            "p": 8,
        },
    )
    assert main(["run", "--config", c, "--output", str(tmp_path / "o")]) == 2
    assert "p < 1/|nu+1/2| = 4" in capsys.readouterr().err


@pytest.mark.parametrize(
    "obj",
    [
        {"schema_version": 1, "bogus": 1},
        {"schema_version": 2},
        {"schema_version": 1, "system": {"family": "sinc", "nu": 0.0}},
        {"schema_version": 1, "target": {"id": "gaussian", "power": 2}},
        {"schema_version": 1, "p": 1.0},
        {"schema_version": 1, "experiment": "mz"},
    ],
)
def test_config_errors_exit_2(tmp_path, obj, capsys):
    c = write(tmp_path, obj)
    assert main(["converge-lagrange", "--config", c, "--output", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["nodes", "--config", str(tmp_path / "nope.json")]) == 2


def test_criterion_failure_exit_1(tmp_path, capsys):
    c = write(tmp_path, {"schema_version": 1, "criteria": {"final_error_max": 1e-300}})
    assert main(["converge-lagrange", "--config", c, "--output", str(tmp_path / "o")]) == 1
    assert "final_error" in capsys.readouterr().err


def test_deterministic_output(tmp_path):
    c = write(tmp_path, {"schema_version": 1, "system": {"family": "bessel", "nu": 0.5, "alpha": 0.25, "tau": 3}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["nodes", "--config", c, "--output", str(a), "--workers", "1"]) == 0
    assert main(["nodes", "--config", c, "--output", str(b), "--workers", "4"]) == 0
    assert (a / "nodes.csv").read_bytes() == (b / "nodes.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_csv_formatting(tmp_path):
    c = write(tmp_path, {"schema_version": 1, "system": {"family": "sinc", "tau": 2}, "window": [-5, 5]})
    out = tmp_path / "o"
    assert main(["nodes", "--config", c, "--output", str(out)]) == 0
    rows = read_csv(out / "nodes.csv")
    assert rows[0] == ["index", "node", "residual", "spacing_times_tau"]
    assert [r[0] for r in rows[1:]] == ["-3", "-2", "-1", "0", "1", "2", "3"]
    assert rows[4][1] == "0"
    assert float(rows[5][1]) == pytest.approx(np.pi / 2)
    assert rows[-1][3] == "nan"


def test_other_experiments(tmp_path):
    cases = [
        ("interp", {"system": {"family": "bessel", "nu": 0, "alpha": 0.5, "tau": 8}, "window": [-60, 60]}, "interp.csv"),
        ("mz", {"test_function": "sinc"}, "mz.csv"),
        ("reproduce", {"system": {"family": "bessel", "nu": 0, "tau": 16}}, "reproduce.csv"),
        ("converge-hbweight", {}, "hbweight.csv"),
    ]
    for exp, extra, fname in cases:
        c = write(tmp_path, {"schema_version": 1, **extra}, f"{exp}.json")
        out = tmp_path / exp
        assert main([exp, "--config", c, "--output", str(out)]) == 0, exp
        rows = read_csv(out / fname)
        assert len(rows) >= 2


def test_hermite_writes_diagnostics(tmp_path):
    c = write(tmp_path, {"schema_version": 1, "taus": [8, 16]})
    out = tmp_path / "h"
    main(["converge-hermite", "--config", c, "--output", str(out)])
    rows = read_csv(out / "hermite.csv")
    assert rows[0][-3:] == ["value_residual", "derivative_residual", "derivative_damping"]
    assert len(rows) == 3


def test_selftest_list(capsys):
    assert main(["selftest", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert "specfun.derivative_closure" in names and len(names) >= 20


def test_selftest_fault_injection():
    env = dict(os.environ, ETYPE_INTERP_SPECFUN_ABS_TOL="1e-2")
    r = subprocess.run([sys.executable, "-m", "etype_interp", "selftest"], env=env, capture_output=True, text=True, timeout=300)
    assert r.returncode == 1
    assert "specfun.derivative_closure" in r.stderr


def test_bad_log_level_warns(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ETYPE_INTERP_LOG", "loud")
    assert main(["selftest", "--list"]) == 0
    assert "ETYPE_INTERP_LOG" in capsys.readouterr().err


def test_round_trip_examples():
    raw = {
        "schema_version": 1,
        "experiment": "converge-hermite",
        "system": {"family": "bessel", "nu": 0, "alpha": 0.5},
        "taus": [16, 8],
        "policy": {"tail_mode": "holder_bound"},
    }
    c1 = cfgmod.parse(raw)
    d1 = c1.to_dict()
    d2 = cfgmod.parse(json.loads(json.dumps(d1))).to_dict()
    assert d1 == d2
    assert d1["taus"] == [8.0, 16.0] and d1["weight_mode"] == "smoothed"


_systems = st.one_of(
    st.builds(lambda t: {"family": "sinc", "tau": t}, st.floats(0.5, 64)),
    st.builds(
        lambda nu, a, t: {"family": "bessel", "nu": nu, "alpha": a, "tau": t},
        st.sampled_from([-0.75, -0.5, 0, 0.5, 3]),
        st.sampled_from([0, 0.5, 0.25]),
        st.floats(0.5, 64),
    ),
    st.builds(lambda t: {"family": "expw", "w": "linear", "tau": t}, st.floats(1, 64)),
)
_targets = st.one_of(
    st.builds(lambda a: {"id": "gaussian", "a": a}, st.floats(0.1, 30)),
    st.builds(lambda q: {"id": "rational", "power": q}, st.floats(1.5, 4)),
    st.just({"id": "zero"}),
    st.builds(lambda r: {"id": "bump", "radius": r}, st.floats(0.5, 3)),
)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["nodes", "interp", "converge-lagrange", "reproduce"]),
    _systems,
    _targets,
    st.lists(st.floats(1, 256), min_size=1, max_size=5),
    st.sampled_from([1.5, 2.0, 3.0]),
)
def test_round_trip_property(exp, system, target, taus, p):
    raw = {"schema_version": 1, "experiment": exp, "system": system, "target": target, "taus": taus, "p": p}
    try:
        c = cfgmod.parse(raw)
    except ConfigError:
        return
    d1 = c.to_dict()
    assert cfgmod.parse(json.loads(json.dumps(d1))).to_dict() == d1
