import csv
import io
import json

import pytest

from nomaiot.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    return rc, capsys.readouterr()


def data_rows(text):
    body = "\n".join(l for l in text.splitlines() if not l.startswith("#"))
    return list(csv.reader(io.StringIO(body)))


def header(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# "):
            key, value = line[2:].split(": ", 1)
            out[key] = json.loads(value)
    return out


def test_bounds_defaults_row_count(capsys):
    rc, cap = run(capsys, "bounds", "--trials", "20000")
    rows = data_rows(cap.out)
    assert rc == 0 and len(rows) - 1 >= 10
    man = header(cap.out)
    assert man["subcommand"] == "bounds" and man["seed"] == 0


def test_bounds_single_point_deterministic(capsys):
    args = ("bounds", "--mu-grid", "0.08", "--trials", "20000", "--seed", "3")
    _, a = run(capsys, *args)
    _, b = run(capsys, *args)
    assert data_rows(a.out) == data_rows(b.out)
    assert len(data_rows(a.out)) == 2


def test_outage_curves(capsys):
    rc, cap = run(capsys, "outage", "--K-list", "2,4,8,16", "--snr-grid", "10:30:10",
                  "--trials", "20000", "--self-check")
    assert rc == 0
    rows = data_rows(cap.out)[1:]
    assert sorted({int(r[0]) for r in rows}) == [1, 2, 4, 8, 16]
    assert all(0.0 <= float(r[3]) <= 1.0 for r in rows)
    assert "PASS" in cap.err and "FAIL" not in cap.err


def test_outage_guard(capsys):
    rc, cap = run(capsys, "outage", "--K-list", "25", "--trials", "10")
    assert rc == 3 and "guard" in cap.err


def test_link_ml_and_guard(capsys):
    rc, cap = run(capsys, "link", "--receiver", "ml", "--users", "2", "--trials", "50",
                  "--payload", "20")
    assert rc == 0 and len(data_rows(cap.out)) == 3
    assert len(header(cap.out)["signature_pool_sha256"]) == 64
    rc, _ = run(capsys, "link", "--receiver", "ml", "--users", "16", "--spread-len", "16",
                "--trials", "1")
    assert rc == 3


def test_link_noiseless(capsys):
    rc, cap = run(capsys, "link", "--receiver", "mmse,sic,ml", "--pool", "orthogonal",
                  "--noiseless", "--trials", "20", "--payload", "20")
    assert rc == 0
    assert all(float(r[3]) == 0.0 for r in data_rows(cap.out)[1:])


def test_link_self_check(capsys):
    rc, cap = run(capsys, "link", "--receiver", "ml,sic,mmse", "--trials", "300",
                  "--payload", "20", "--self-check")
    assert rc == 0 and cap.err.count("PASS") == 2


def test_link_unknown_receiver(capsys):
    rc, _ = run(capsys, "link", "--receiver", "zf", "--trials", "1")
    assert rc == 2


def test_system(capsys):
    rc, cap = run(capsys, "system", "--pa", "0", "--slots", "100")
    doc = json.loads(cap.out)
    assert rc == 0
    assert doc["aloha"]["transmissions"] == 0
    assert doc["overhead"]["grant_based"]["sizes"] == "assumed"
    assert all(p["assumed"] for p in doc["profiles"])
    with pytest.raises(SystemExit) as exc:
        main(["system", "--pa", "1.5"])
    assert exc.value.code == 2


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"slots": 50, "pa": 0.0, "devices": 10}))
    _, cap = run(capsys, "system", "--config", str(cfg), "--pa", "1.0")
    params = json.loads(cap.out)["manifest"]["parameters"]
    assert params["slots"] == 50 and params["pa"] == 1.0 and params["devices"] == 10
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit):
        main(["system", "--config", str(bad)])


def test_pool_and_profiles_roundtrip(capsys, tmp_path):
    pool_path = tmp_path / "pool.json"
    assert main(["pool", "--L", "4", "--M", "8", "--out", str(pool_path)]) == 0
    rc, cap = run(capsys, "link", "--pool-file", str(pool_path), "--users", "3",
                  "--trials", "20", "--payload", "10")
    assert rc == 0
    prof_path = tmp_path / "profiles.json"
    assert main(["profiles", "--out", str(prof_path)]) == 0
    rc, cap = run(capsys, "system", "--profiles", str(prof_path), "--slots", "10")
    assert rc == 0 and json.loads(cap.out)["overhead"]["grant_free"]["control_bits"] == 0


@pytest.mark.parametrize("cmd", [
    ("outage", "--K-list", "2,4", "--snr-grid", "10:20:10", "--trials", "70000"),
    ("link", "--receiver", "sic", "--trials", "600", "--payload", "10"),
])
def test_threads_do_not_change_output(capsys, cmd):
    outs = []
    for t in ("1", "4", "8"):
        _, cap = run(capsys, *cmd, "--threads", t)
        outs.append(data_rows(cap.out))
    assert outs[0] == outs[1] == outs[2]
