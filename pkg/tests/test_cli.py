import json
import subprocess
import sys

import pytest

from semioverlap.cli import main

HO = {"coeffs": [[0, 0, 0.5], [0, 0, 0], [0.5, 0, 0]]}
HO2 = {"coeffs": [[2, -2, 0.5], [0, 0, 0], [0.5, 0, 0]]}


@pytest.fixture
def models(tmp_path):
    a, b = tmp_path / "ho.json", tmp_path / "ho2.json"
    a.write_text(json.dumps(HO))
    b.write_text(json.dumps(HO2))
    return str(a), str(b)


def run(argv, capsys):
    rc = main(argv)
    out, err = capsys.readouterr()
    return rc, out, err


def test_spectrum_csv(models, capsys):
    rc, out, _ = run(["spectrum", "--model", models[0], "--hbar", "0.1", "--levels", "5"], capsys)
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("# config: ")
    json.loads(lines[0][len("# config: "):])
    assert lines[1] == "n,b_bs,b_exact,abs_err,rel_err"
    assert len(lines) == 7
    for line in lines[2:]:
        n, bs, ex, err, _ = line.split(",")
        assert float(bs) == pytest.approx(0.1 * (int(n) + 0.5), abs=1e-8)
        assert float(err) <= 1e-8


def test_missing_model_file(capsys):
    rc, _, err = run(["spectrum", "--model", "/nonexistent/ho.json", "--hbar", "0.1"], capsys)
    assert rc == 2 and err.startswith("error:")


def test_malformed_model(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["spectrum", "--model", str(bad), "--hbar", "0.1"], capsys)[0] == 2
    bad.write_text(json.dumps({"coeffs": [[0, 0, 1]]}))
    assert run(["spectrum", "--model", str(bad), "--hbar", "0.1"], capsys)[0] == 2


def test_bad_grid(models, capsys):
    rc, _, _ = run(["spectrum", "--model", models[0], "--hbar", "0.1", "--grid", "100"], capsys)
    assert rc == 2


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--hbar", "0.1"])
    assert exc.value.code == 2


def test_non_realizable_pr(capsys):
    rc, _, err = run(["sixj", "--pr", "4", "4", "4", "4", "8", "4"], capsys)
    assert rc == 1 and "NotRealizable" in err


def test_tangential_overlap(models, capsys):
    rc, _, err = run(["overlap", "--model1", models[0], "--model2", models[1], "--hbar", "0.2",
                      "--n1", "2", "--n2", "2"], capsys)
    assert rc == 1 and "TangentialIntersection" in err


def test_sixj_exact(capsys):
    rc, out, _ = run(["sixj", "--exact", "1", "1", "1", "1", "1", "1"], capsys)
    assert rc == 0
    header, row = out.strip().splitlines()[1:]
    assert header.split(",")[-1] == "exact"
    assert float(row.split(",")[-1]) == pytest.approx(1 / 6, abs=1e-15)


def test_sixj_converge_columns(capsys):
    rc, out, _ = run(["sixj", "--converge", "--scales", "1,2"], capsys)
    assert rc == 0
    assert out.splitlines()[1] == "lambda,j12,exact,pr,abs_err"


def test_overlap_csv(models, capsys):
    rc, out, _ = run(["overlap", "--model1", models[0], "--model2", models[1], "--hbar", "0.1",
                      "--n1", "12", "--n2", "10"], capsys)
    assert rc == 0
    lines = out.strip().splitlines()
    assert lines[1] == "n1,n2,b1,b2,abs_asym,abs_exact,rel_err,n_intersections"
    fields = lines[2].split(",")
    assert int(fields[-1]) == 2 and float(fields[6]) < 0.05


def test_wkb_eval_nan_inside_layer(models, capsys):
    rc, out, _ = run(["wkb-eval", "--model", models[0], "--hbar", "0.05", "--level", "10"], capsys)
    assert rc == 0
    rows = [line.split(",") for line in out.strip().splitlines()[2:]]
    assert any(r[1] == "nan" for r in rows) and any(r[1] != "nan" for r in rows)


def test_byte_identical_repeats(models, tmp_path, capsys):
    argv = ["overlap", "--model1", models[0], "--model2", models[1], "--hbar", "0.1",
            "--n1", "11,12", "--n2", "10", "--out", str(tmp_path / "o.csv")]
    assert main(argv) == 0
    first = (tmp_path / "o.csv").read_bytes()
    assert main(argv) == 0
    assert (tmp_path / "o.csv").read_bytes() == first


def test_validate(capsys):
    rc, _, err = run(["validate"], capsys)
    lines = err.strip().splitlines()
    assert rc == 0 and len(lines) == 7
    assert all(line.startswith("PASS") for line in lines)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "semioverlap", "sixj", "1", "1", "1", "1", "1", "1"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[1].startswith("j1,j2")
