import json
import subprocess
import sys

import pytest

from arbor.cli import MANIFEST_SUFFIX, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_mu_target(capsys):
    code, out, _ = call(capsys, "mu", "--target", "5/8", "--m", "2", "--depth", "20")
    assert code == 0
    doc = json.loads(out)
    assert doc["antichain"] == ["0", "100"]
    assert doc["interval"] == ["5/8", "5/8"]


def test_mu_antichain(capsys):
    code, out, _ = call(capsys, "mu", "--antichain", "0,100", "--depth", "5")
    assert code == 0 and json.loads(out)["interval"] == ["5/8", "5/8"]


def test_quotients_csv(capsys):
    code, out, _ = call(capsys, "quotients", "--group", "grigorchuk", "--levels", "5")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "level,order,log_m_order"
    assert rows[2].startswith("1,2,")
    assert rows[6].startswith("5,4194304,")


def test_hdim_sunic(capsys):
    code, out, _ = call(capsys, "hdim", "--group", "sunic", "--m", "2", "--r", "3", "--levels", "8")
    assert code == 0
    doc = json.loads(out)
    bound = doc["sunic_lower_bound"]
    assert bound["value"] == "0" and bound["satisfied"]
    assert doc["enclosure"]["certified"]
    assert float(doc["enclosure"]["lo"]) <= 13 / 16 + 1e-12 <= float(doc["enclosure"]["hi"]) + 2e-12


def test_construct_roundtrip(capsys, tmp_path):
    code, out, _ = call(capsys, "construct", "sunic", "--m", "3", "--r", "2")
    assert code == 0
    path = tmp_path / "g.json"
    path.write_text(out)
    code, out2, _ = call(capsys, "construct", "--input", str(path))
    assert code == 0 and out2 == out
    code, sx, _ = call(capsys, "construct", "grigorchuk", "--emit", "sexpr")
    assert code == 0 and sx.startswith("a (gen grig a)")


def test_grig_filt_csv(capsys):
    code, out, _ = call(capsys, "grig-filt", "--max-m", "1", "--level", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "filtration,m,r,closed_form,empirical,stabilized"
    assert "gamma,1,1,2,2,1" in lines


def test_usage_errors(capsys):
    for argv in ([], ["frobnicate"], ["quotients"], ["mu"], ["mu", "--target", "x/y"],
                 ["quotients", "--levels", "3", "--jobs", "0"], ["verify", "--criteria", "a"]):
        code, _, err = call(capsys, *argv)
        assert code == 2, argv
        assert json.loads(err.strip().splitlines()[-1])["error"]
    code, _, err = call(capsys, "construct", "nonesuch")
    assert code == 2 and json.loads(err)["error"]


def test_computation_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = call(capsys, "quotients", "--input", str(bad), "--levels", "3")
    assert code == 1 and json.loads(err)["error"] == "schema_violation"
    code, _, err = call(capsys, "quotients", "--input", str(tmp_path / "missing.json"), "--levels", "3")
    assert code == 1
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"name": "g", "m": 2}))
    code, _, err = call(capsys, "quotients", "--input", str(invalid), "--levels", "3")
    assert code == 1 and json.loads(err)["error"] == "schema_violation"


def test_out_and_manifest_deterministic(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"q{i}.csv"
        code, _, _ = call(capsys, "quotients", "--group", "basilica", "--levels", "4",
                          "--out", str(path))
        assert code == 0
        outs.append(path.read_bytes())
        man = json.loads((tmp_path / f"q{i}.csv{MANIFEST_SUFFIX}").read_text())
        assert man["subcommand"] == "quotients"
        assert man["parameters"]["levels"] == 4
        assert list(man["outputs"].values())[0] == __import__("hashlib").sha256(outs[-1]).hexdigest()
    assert outs[0] == outs[1]


def test_manifest_records_inputs(capsys, tmp_path):
    code, out, _ = call(capsys, "construct", "grigorchuk")
    src = tmp_path / "g.json"
    src.write_text(out)
    dst = tmp_path / "q.csv"
    assert call(capsys, "quotients", "--input", str(src), "--levels", "3", "--out", str(dst))[0] == 0
    man = json.loads((tmp_path / f"q.csv{MANIFEST_SUFFIX}").read_text())
    assert str(src) in man["inputs"]


def test_jobs_do_not_change_output(capsys):
    a = call(capsys, "quotients", "--group", "grigorchuk", "--levels", "5", "--method", "schreier-sims")
    b = call(capsys, "quotients", "--group", "grigorchuk", "--levels", "5", "--method", "schreier-sims",
             "--jobs", "3")
    assert a == b


def test_cache(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("ARBOR_CACHE_DIR", str(tmp_path / "cache"))
    first = call(capsys, "quotients", "--group", "grigorchuk", "--levels", "4")
    assert list((tmp_path / "cache").glob("table-*.json"))
    second = call(capsys, "quotients", "--group", "grigorchuk", "--levels", "4")
    assert first == second


def test_verify_subset(capsys):
    code, out, _ = call(capsys, "verify", "--criteria", "1,7")
    assert code == 0
    assert out.count("[PASS]") == 2
    code, out, _ = call(capsys, "verify", "--criteria", "5")
    assert code == 1 and "[FAIL] criterion 5" in out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "arbor", "mu", "--target", "1/2"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0
    assert json.loads(res.stdout)["antichain"] == ["0"]
