import csv
import io
import json

import pytest

from fadingmac import cli
from fadingmac import nonident as ni
from fadingmac.exceptions import NoConvergenceError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.mark.parametrize("argv,header", [
    (["capacity"], cli.HEADERS["capacity"]),
    (["ratesplit", "--layers", "1,2"], cli.HEADERS["ratesplit"]),
    (["partial-csi", "--powers", "1"], cli.HEADERS["partial-csi"]),
    (["nonident", "--powers", "1", "--grid", "4000"], cli.HEADERS["nonident"]),
    (["look", "--users", "2,4", "--active", "2", "--blocks", "0"], cli.HEADERS["look"]),
    (["figure", "2", "--grid", "4000"], cli.HEADERS["figure2"]),
    (["figure", "4", "--grid", "4000"], cli.HEADERS["figure4"]),
])
def test_commands_emit_headers(capsys, argv, header):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert rows(out)[0] == header


def test_capacity_values(capsys):
    _, out, _ = run(capsys, "capacity", "--strategy", "tdma")
    r = rows(out)[1]
    assert r[0] == "plain-tdma" and float(r[3]) == pytest.approx(float(r[4]), abs=1e-9)


def test_figure3_first_row(capsys):
    _, out, _ = run(capsys, "figure", "3")
    r = rows(out)
    assert r[1][0] == "1" and float(r[1][3]) == pytest.approx(0.7382, abs=1e-4)


def test_figure5_strong_law_column(capsys):
    _, out, _ = run(capsys, "figure", "5", "--strong-law-curve", "--grid", "4000")
    r = rows(out)
    assert r[0][-1] == "strong_law_alpha"
    assert all(float(x[1]) >= float(x[2]) - 1e-6 for x in r[1:])


def test_validation_exit_code(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[users]\ncount = 2\nbudgets = [1.0, 1.0, 1.0]\n[[laws]]\nkind = "rayleigh"\n')
    code, _, err = run(capsys, "capacity", "--config", str(cfg))
    assert code == 2 and "users.budgets" in err
    assert run(capsys, "capacity", "--strategy", "nonsense")[0] == 2
    assert run(capsys, "look", "--users", "2", "--active", "3")[0] == 2


def test_thresholds_with_wrong_command(capsys, tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('[users]\ncount = 2\nbudgets = [1.0]\n[[laws]]\nkind = "rayleigh"\n'
                   '[partial_csi]\nthresholds = [1.0]\n')
    assert run(capsys, "nonident", "--config", str(cfg))[0] == 2
    assert run(capsys, "partial-csi", "--config", str(cfg))[0] == 0


def test_nonconvergence_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise NoConvergenceError("stuck", residuals=[1.0])
    monkeypatch.setattr(ni, "solve_upper_bound", boom)
    monkeypatch.setattr(cli, "solve_upper_bound", boom, raising=False)
    assert run(capsys, "nonident", "--powers", "1", "--grid", "2000")[0] == 3


def test_manifest_and_replay(capsys, tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('[users]\ncount = 2\nbudgets = [1.0]\n[[laws]]\nkind = "rayleigh"\n'
                   '[strategy]\nname = "alpha-midpoint"\n')
    out = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--blocks", "20000", "--seed", "7",
                     "--workers", "2", "--out", str(out))
    assert code == 0
    man = json.loads((tmp_path / "sim.csv.manifest.json").read_text())
    assert man["seed"] == 7 and man["scenario_sha256"] and man["versions"]["numpy"]
    cfg.unlink()
    replay = tmp_path / "again.csv"
    code, _, err = run(capsys, "replay", str(tmp_path / "sim.csv.manifest.json"), "--out", str(replay))
    assert code == 0 and "matches" in err
    assert replay.read_bytes() == out.read_bytes()


def test_replay_detects_mismatch(capsys, tmp_path):
    out = tmp_path / "c.csv"
    assert run(capsys, "capacity", "--out", str(out))[0] == 0
    path = tmp_path / "c.csv.manifest.json"
    man = json.loads(path.read_text())
    man["csv_sha256"] = "0" * 64
    path.write_text(json.dumps(man))
    assert run(capsys, "replay", str(path), "--out", str(tmp_path / "r.csv"))[0] == 1


def test_every_command_writes_manifest(capsys, tmp_path):
    for argv in (["ratesplit", "--layers", "1"], ["look", "--users", "2", "--blocks", "0"]):
        out = tmp_path / f"{argv[0]}.csv"
        assert run(capsys, *argv, "--out", str(out))[0] == 0
        assert (tmp_path / f"{argv[0]}.csv.manifest.json").exists()


def test_look_blocks_zero_skips_simulation(capsys):
    code, out, _ = run(capsys, "look", "--users", "2,8", "--blocks", "0")
    assert code == 0
    assert all(r[4] == "" and r[5] == "" for r in rows(out)[1:])
    assert run(capsys, "look", "--users", "2", "--blocks", "-1")[0] == 2
    assert run(capsys, "simulate", "--blocks", "0")[0] == 2


def test_partial_csi_bits(capsys):
    _, out, _ = run(capsys, "partial-csi", "--bits", "0", "--powers", "1")
    r = rows(out)[1]
    assert float(r[2]) == pytest.approx(float(r[1]), abs=1e-12)
    _, one, _ = run(capsys, "partial-csi", "--bits", "1", "--powers", "1")
    _, med, _ = run(capsys, "partial-csi", "--threshold", "q:0.5", "--powers", "1")
    assert one == med
    assert run(capsys, "partial-csi", "--bits", "-1")[0] == 2
    code, _, err = run(capsys, "partial-csi", "--bits", "2", "--powers", "1", "--blocks", "20000")
    assert code == 0 and "simulated" in err
