import shutil

import pytest

from primerace.config import RunConfig
from primerace.lzeros import ZeroStore
from primerace.verify import FAIL, PASS, SKIPPED, Suite, render, run_verify


@pytest.fixture
def copied_store(zero_dir, tmp_path):
    """Private copy of the small-modulus zero files, safe to corrupt."""
    for q in (3, 4, 5, 8):
        shutil.copytree(zero_dir / "zeros" / f"q{q}", tmp_path / "zeros" / f"q{q}")
    return tmp_path


def by_section(results):
    out = {}
    for r in results:
        out.setdefault(r.section, []).append(r.status)
    return out


def test_spectrum_clean(copied_store):
    cfg = RunConfig(zero_dir=str(copied_store))
    res = Suite(cfg, ZeroStore(copied_store, compute=False)).run(["spectrum"])
    assert res and all(r.status == PASS for r in res)


def test_corrupt_zero_file_localized(copied_store):
    f = copied_store / "zeros" / "q5" / "chi2_T1000.csv"
    lines = f.read_text().splitlines(True)
    lines[5], lines[6] = lines[6], lines[5]
    f.write_text("".join(lines))
    cfg = RunConfig(zero_dir=str(copied_store))
    res = Suite(cfg, ZeroStore(copied_store, compute=False)).run(["characters", "spectrum"])
    sec = by_section(res)
    assert sec["spectrum q=5"] == [FAIL]
    bad = [r for r in res if r.status == FAIL]
    assert len(bad) == 1 and "chi2_T1000.csv:7" in bad[0].detail
    for s in ("characters", "spectrum q=3", "spectrum q=4", "spectrum q=8"):
        assert set(sec[s]) == {PASS}


def test_missing_data_fails_section_only(tmp_path):
    cfg = RunConfig(zero_dir=str(tmp_path))
    res = Suite(cfg, ZeroStore(tmp_path, compute=False)).run(["symmetry", "characters"])
    sec = by_section(res)
    assert sec["symmetry"] == [FAIL]
    assert sec["characters"] == [PASS]


def test_small_r_gate_skipped(config):
    res = Suite(config).run(["large_char_set"])
    status = {r.name: r.status for r in res}
    assert status["floor phi/(2r)"] == PASS
    assert status["r > phi/4 gate"] == SKIPPED


def test_render_summary(config):
    res = Suite(config).run(["matrix_bounds", "large_char_set"])
    text = render(res, config)
    assert text.splitlines()[1].startswith(f"config_hash={config.hash()} seed={config.seed}")
    assert text.rstrip().endswith("3 passed, 0 failed, 1 skipped")


def test_deterministic(config):
    sections = ["tail_bound", "order_integral", "partitions", "engines"]
    a, ok_a = run_verify(config, sections=sections)
    b, ok_b = run_verify(config, sections=sections)
    assert a == b and ok_a == ok_b
    assert ok_a, a
