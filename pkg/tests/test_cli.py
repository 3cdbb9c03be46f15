import csv
import io
import shutil
import xml.etree.ElementTree as ET

import pytest

from primerace.cli import DENSITY_FIELDS, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))


@pytest.fixture
def small_store(tmp_path, capsys):
    """A fresh zero directory holding q=4 zeros up to height 40."""
    d = tmp_path / "zd"
    code, out, _ = run(capsys, "--zero-dir", d, "--height", 40, "zeros", "compute", "--q", 4)
    assert code == 0
    return d, out


def test_zeros_compute_writes_files(small_store):
    d, out = small_store
    f = d / "zeros" / "q4" / "chi3_T40.csv"
    assert f.is_file()
    (row,) = rows(out)
    assert row["conductor"] == "4" and row["conrey_index"] == "3"
    assert int(row["count"]) >= 5
    assert row["flagged"] == "0"


def test_zeros_verify_passes(small_store, capsys):
    d, _ = small_store
    code, out, _ = run(capsys, "--zero-dir", d, "--height", 40, "zeros", "verify", "--q", 4, "--deep")
    assert code == 0
    assert out.startswith("PASS") and "sign_changes_missing=0" in out


def test_zeros_verify_reports_bad_line(small_store, capsys):
    d, _ = small_store
    f = d / "zeros" / "q4" / "chi3_T40.csv"
    lines = f.read_text().splitlines(True)
    lines[2], lines[3] = lines[3], lines[2]
    f.write_text("".join(lines))
    code, out, _ = run(capsys, "--zero-dir", d, "--height", 40, "zeros", "verify", "--q", 4)
    assert code == 1
    assert out.startswith("FAIL") and "chi3_T40.csv:4:" in out


def test_zeros_verify_missing_file(tmp_path, capsys):
    code, out, _ = run(capsys, "--zero-dir", tmp_path, "--height", 40, "zeros", "verify", "--q", 3)
    assert code == 1
    assert "no zero file" in out


def test_zeros_import(small_store, tmp_path, capsys):
    d, _ = small_store
    src = tmp_path / "chi3_T40.csv"
    shutil.copyfile(d / "zeros" / "q4" / "chi3_T40.csv", src)
    dest = tmp_path / "other"
    code, out, _ = run(capsys, "--zero-dir", dest, "zeros", "import", src)
    assert code == 0 and out.startswith("PASS")
    assert (dest / "zeros" / "q4" / "chi3_T40.csv").read_bytes() == src.read_bytes()


def test_zeros_import_rejects_imprimitive(tmp_path, capsys):
    src = tmp_path / "chi1_T10.csv"
    src.write_text("conductor,conrey_index,ordinate,abs_error\n8,1,5.0,1e-08\n")
    code, _, err = run(capsys, "--zero-dir", tmp_path / "z", "zeros", "import", src)
    assert code == 2 and "primitive" in err


def test_corrupt_cache_is_data_error(small_store, capsys):
    d, _ = small_store
    f = d / "zeros" / "q4" / "chi3_T40.csv"
    f.write_text(f.read_text() + "4,3,not-a-number,1e-08\n")
    code, _, err = run(capsys, "--zero-dir", d, "--height", 40, "density", "invert2", "--q", 4, "--classes", "3,1")
    assert code == 3 and "data error" in err


def test_density_mc_symmetric_pair(zero_dir, capsys):
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "density", "mc", "--q", 5, "--classes", "2,3",
                       "--n", "1000000")
    assert code == 0
    (r,) = rows(out)
    assert list(r) == DENSITY_FIELDS
    assert r["N"] == "1000000" and r["T"] == "1000"
    v, u = float(r["value"]), float(r["uncertainty"])
    assert abs(v - 0.5) <= 3 * u


def test_density_invert2(zero_dir, capsys):
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "density", "invert2", "--q", 4, "--classes", "3,1")
    assert code == 0
    (r,) = rows(out)
    assert r["method"] == "inversion-2way"
    assert float(r["value"]) > 0.9


def test_density_all_table_shape(zero_dir, capsys):
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "density", "all", "--q", 151, "--classes", "2,3,5",
                       "--n", 20000)
    assert code == 0
    table = rows(out)
    assert [r["method"] for r in table] == ["monte-carlo", "inversion-2way", "gaussian-approx", "asymptotic-T11",
                                           "asymptotic-T12", "upper-bound-T13"]
    assert table[1]["value"] == "" and "r=2" in table[1]["note"]
    mc, ga = float(table[0]["value"]), float(table[2]["value"])
    assert abs(mc - ga) < 4 * float(table[0]["uncertainty"])
    assert len({r["config_hash"] for r in table}) == 1


def test_density_output_reproducible(zero_dir, tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"d{k}.csv"
        s = tmp_path / f"h{k}.svg"
        code, _, _ = run(capsys, "--zero-dir", zero_dir, "density", "mc", "--q", 4, "--classes", "3,1",
                         "--n", 20000, "--output", p, "--svg", s)
        assert code == 0
        outs.append((p.read_bytes(), s.read_bytes()))
    assert outs[0] == outs[1]
    ET.fromstring(outs[0][1])
    code, _, _ = run(capsys, "--zero-dir", zero_dir, "--seed", 5, "density", "mc", "--q", 4, "--classes", "3,1",
                     "--n", 20000, "--output", tmp_path / "d2.csv")
    assert (tmp_path / "d2.csv").read_bytes() != outs[0][0]


def test_density_gauss_and_asymptotic(zero_dir, capsys):
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "density", "gauss", "--q", 5, "--classes", "1,2,3,4",
                       "--n", 20000)
    assert code == 0
    (r,) = rows(out)
    assert 0 < float(r["value"]) < 1 and "epsilon=" in r["note"]
    code, out, _ = run(capsys, "density", "asymptotic", "--q", 1000003, "--classes", "1,2")
    assert code == 0
    assert [r["method"] for r in rows(out)] == ["asymptotic-T11", "asymptotic-T12", "upper-bound-T13"]


def test_race_exact(tmp_path, capsys):
    out_dir = tmp_path / "o"
    code, out, _ = run(capsys, "race", "--q", 4, "--classes", "3,1", "--xmax", "1e7", "--exact",
                       "--out-dir", out_dir)
    assert code == 0
    (r,) = rows(out)
    assert float(r["value"]) >= 0.9
    assert r["lower"] == r["upper"] == r["value"]
    stem = out_dir / "race_q4_3-1_x10000000"
    head = (stem.parent / (stem.name + ".csv")).read_text().splitlines()[0]
    assert head.startswith("# config_hash=") and "seed=" in head
    for suffix in ("_E.svg", "_density.svg"):
        p = stem.parent / (stem.name + suffix)
        assert p.stat().st_size < 1_000_000
        assert "config_hash=" in p.read_text()
        ET.parse(p)


def test_race_grid_reproducible(tmp_path, capsys):
    blobs = []
    for k in range(2):
        d = tmp_path / str(k)
        code, out, _ = run(capsys, "race", "--q", 5, "--classes", "2,3", "--xmax", "1e5", "--out-dir", d)
        assert code == 0
        blobs.append(sorted((p.name, p.read_bytes()) for p in d.iterdir()))
    assert blobs[0] == blobs[1]
    assert len(blobs[0]) == 3


def test_covariance_output(zero_dir, tmp_path, capsys):
    p = tmp_path / "cov.csv"
    code, _, _ = run(capsys, "--zero-dir", zero_dir, "covariance", "--q", 5, "--classes", "1,2,3,4", "--output", p)
    assert code == 0
    text = p.read_text()
    assert text.startswith("# config_hash=") and "T=1000" in text.splitlines()[0]


def test_report(zero_dir, capsys):
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "report", "--q", 4, "--classes", "3,1", "--n", 20000,
                       "--xmax", "1e5")
    assert code == 0
    assert "inversion-2way" in out and "primes to 100000" in out


def test_verify_paper_subset(zero_dir, tmp_path, capsys):
    p = tmp_path / "v.txt"
    code, out, _ = run(capsys, "--zero-dir", zero_dir, "verify-paper", "--only", "characters", "symmetry",
                       "--output", p)
    assert code == 0
    assert p.read_text() == out
    assert "summary: 3 passed, 0 failed, 0 skipped" in out


@pytest.mark.parametrize("argv", [
    ["density", "mc", "--q", 4, "--classes", "2,1"],
    ["density", "mc", "--q", 1, "--classes", "0,1"],
    ["density", "invert2", "--q", 5, "--classes", "1,2,3"],
    ["density", "mc", "--q", 5, "--classes", "2,2"],
])
def test_usage_errors_exit_2(zero_dir, capsys, argv):
    code, _, err = run(capsys, "--zero-dir", zero_dir, *argv)
    assert code == 2 and err.startswith("error:")


def test_bad_config_exit_2(tmp_path, capsys):
    f = tmp_path / "bad.cfg"
    f.write_text("seed = -3\n")
    code, _, err = run(capsys, "--config", f, "race", "--q", 4, "--classes", "3,1", "--xmax", 100)
    assert code == 2 and "seed" in err


@pytest.mark.parametrize("argv", [["bogus"], ["race", "--q", 4, "--classes", "x", "--xmax", 10],
                                  ["race", "--q", 4, "--classes", "3,1", "--xmax", "1.5"]])
def test_argparse_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv])
    assert exc.value.code == 2
