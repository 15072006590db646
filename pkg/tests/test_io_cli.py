"""Config parsing, state persistence, CLI exit codes, export round-trips."""

import json
import subprocess
import sys

import pytest

from aknsd import scalars
from aknsd.config import parse_config
from aknsd.dynamics import FlowIndex, rk4_evolve
from aknsd.errors import ConfigError, SchemaError
from aknsd.hierarchy import HierarchyState, dressing_residual
from aknsd.instances import DESK_WINDOW, desk_data, impulse_potential
from aknsd.persist import (
    load_state,
    read_trajectory_csv,
    save_state,
    state_from_json,
    state_to_json,
    export_trajectory_csv,
)
from aknsd.verify import config_hash, run_verify_suite

MINIMAL = """
{
  "m": 2,
  "a": ["1", "-1"],
  "window": {"n_min": -4, "n_max": 4, "halo": 6},
  "depth": 4,
  "seed": 7
}
"""


def test_minimal_config_parses():
    config = parse_config(MINIMAL)
    assert config.m == 2
    assert config.mode == scalars.RATIONAL
    assert config.depth == 4


def test_repeated_a_rejected():
    bad = MINIMAL.replace('["1", "-1"]', '["1", "1"]')
    with pytest.raises(ConfigError, match="distinct"):
        parse_config(bad)


def test_zero_a_rejected():
    bad = MINIMAL.replace('["1", "-1"]', '["0", "1"]')
    with pytest.raises(ConfigError, match="nonzero"):
        parse_config(bad)


def test_unknown_key_rejected_by_name():
    doc = json.loads(MINIMAL)
    doc["foo"] = 1
    with pytest.raises(ConfigError, match="foo"):
        parse_config(json.dumps(doc))


def test_diagonal_potential_rejected():
    doc = json.loads(MINIMAL)
    doc["potential"] = {"type": "explicit",
                        "sites": {"0": [["1", "0"], ["0", "0"]]}}
    with pytest.raises(ConfigError, match="diagonal"):
        parse_config(json.dumps(doc))


def test_all_violations_listed_together():
    doc = json.loads(MINIMAL)
    doc["a"] = ["1", "1"]
    doc["depth"] = 99
    doc["bar"] = 2
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    text = str(err.value)
    assert "distinct" in text and "halo" in text and "bar" in text


# -- persistence -----------------------------------------------------------------


def solved_state():
    data = desk_data(2)
    return HierarchyState.solve(data, impulse_potential(DESK_WINDOW, 2),
                                DESK_WINDOW, 4)


def test_state_roundtrip_bit_exact(tmp_path):
    state = solved_state()
    path = tmp_path / "state.json"
    save_state(state, str(path))
    back = load_state(str(path))
    assert state_to_json(back) == state_to_json(state)
    assert dressing_residual(back) == 0


def test_vacuum_state_roundtrip(tmp_path):
    data = desk_data(2)
    from aknsd.instances import vacuum_potential

    state = HierarchyState.solve(data, vacuum_potential(DESK_WINDOW, 2),
                                 DESK_WINDOW, 3)
    path = tmp_path / "vac.json"
    save_state(state, str(path))
    assert state_to_json(load_state(str(path))) == state_to_json(state)


def test_truncated_state_file_rejected(tmp_path):
    state = solved_state()
    path = tmp_path / "state.json"
    save_state(state, str(path))
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(SchemaError):
        load_state(str(path))


def test_version_mismatch_rejected():
    state = solved_state()
    doc = state_to_json(state)
    doc["version"] = 99
    with pytest.raises(SchemaError, match="version"):
        state_from_json(doc)


def test_trajectory_csv_roundtrip(tmp_path):
    data = desk_data(2, scalars.FLOAT)
    u = impulse_potential(DESK_WINDOW, 2, scalars.FLOAT, value=0.2)
    state = HierarchyState.solve(data, u, DESK_WINDOW, 3, validate=False)
    traj = rk4_evolve(state, FlowIndex(1, 1), 0.05, 2)
    path = tmp_path / "traj.csv"
    export_trajectory_csv(traj, str(path))
    rows = read_trajectory_csv(str(path))
    sites = DESK_WINDOW.stored_hi - DESK_WINDOW.stored_lo + 1
    assert len(rows) == 3 * sites * 4
    step, t, n, i, j, value = rows[0]
    assert (step, n, i, j) == ("0", str(DESK_WINDOW.stored_lo), "1", "1")
    # re-imported values match the snapshots bit for bit
    by_key = {(int(r[0]), int(r[2]), int(r[3]), int(r[4])): r[5] for r in rows}
    for s_idx, (_, snap) in enumerate(traj.snapshots):
        for n in snap.sites():
            v = snap.at(n)
            assert by_key[(s_idx, n, 1, 2)] == repr(v.get(1, 2))


def test_empty_trajectory_header_only(tmp_path):
    from aknsd.dynamics import Trajectory

    data = desk_data(2, scalars.FLOAT)
    traj = Trajectory(FlowIndex(0, 1), 0.1, 0, [])
    path = tmp_path / "empty.csv"
    export_trajectory_csv(traj, str(path))
    assert read_trajectory_csv(str(path)) == []


# -- verification reports ------------------------------------------------------------


def small_config(extra=None):
    doc = json.loads(MINIMAL)
    doc["potential"] = {"type": "impulse"}
    if extra:
        doc.update(extra)
    return parse_config(json.dumps(doc))


def test_verify_algebra_deterministic():
    config = small_config()
    r1 = run_verify_suite(config, "algebra").to_json()
    r2 = run_verify_suite(config, "algebra").to_json()
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)
    assert r1["verdict"] == "pass"


def test_verify_resolvent_passes():
    report = run_verify_suite(small_config(), "resolvent")
    assert report.verdict == "pass", [c for c in report.checks if not c["pass"]]


def test_verify_bilinear_passes():
    report = run_verify_suite(small_config(), "bilinear")
    assert report.verdict == "pass", [c for c in report.checks if not c["pass"]]


def test_config_hash_stable_and_sensitive():
    c1, c2 = small_config(), small_config()
    assert config_hash(c1) == config_hash(c2)
    c3 = small_config({"seed": 8})
    assert config_hash(c1) != config_hash(c3)


# -- CLI ------------------------------------------------------------------------------


def run_cli(args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "aknsd.cli"] + args,
        capture_output=True, text=True, cwd=cwd,
    )


def test_cli_dress_and_verify_exit_codes(tmp_path):
    config_path = tmp_path / "c.json"
    config_path.write_text(MINIMAL)
    out = run_cli(["dress", "--config", str(config_path)])
    assert out.returncode == 0, out.stderr
    assert "dressing residual: 0" in out.stdout

    out = run_cli(["verify", "--config", str(config_path), "--suite", "algebra",
                   "--out", str(tmp_path / "report.json")])
    assert out.returncode == 0, out.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdict"] == "pass"


def test_cli_input_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = run_cli(["dress", "--config", str(bad)])
    assert out.returncode == 2
    out = run_cli(["dress", "--config", str(tmp_path / "missing.json")])
    assert out.returncode == 2


def test_cli_env_override(tmp_path, monkeypatch):
    config_path = tmp_path / "c.json"
    config_path.write_text(MINIMAL)
    out = subprocess.run(
        [sys.executable, "-m", "aknsd.cli", "dress"],
        capture_output=True, text=True,
        env={**__import__("os").environ, "AKNSD_CONFIG": str(config_path)},
    )
    assert out.returncode == 0, out.stderr


def test_cli_tau_command(tmp_path):
    config_path = tmp_path / "c.json"
    config_path.write_text(MINIMAL)
    out = run_cli(["tau", "--config", str(config_path)])
    assert out.returncode == 0, out.stderr
    doc = json.loads(out.stdout)
    assert doc["vacuum_candidate_error"] == "0"
    assert doc["lambda_consistency"] is True


def test_verify_all_suites_pass_on_vacuum_config():
    config = parse_config(MINIMAL)  # vacuum potential by default
    report = run_verify_suite(config, "all")
    assert report.verdict == "pass", [c for c in report.checks if not c["pass"]]
    names = {c["check"] for c in report.checks}
    assert "continuum_dx_relation_order" in names
    assert "commutativity_defect" in names
