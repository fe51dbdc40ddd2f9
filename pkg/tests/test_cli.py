import subprocess
import sys

import pytest

from fbc.cli import SWEEP_HEADER, main
from fbc.io import read_capture, read_events


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_writes_events(tmp_path, capsys):
    assert run("synth", "--preset", "bar", "--duration-ms", 200, "--out", tmp_path / "b.aer8") == 0
    s = read_events(tmp_path / "b.aer8")
    assert len(s) > 0 and (s.width, s.height) == (320, 240)
    assert "wrote" in capsys.readouterr().err


def test_synth_seed_changes_noise(tmp_path):
    scene = tmp_path / "s.txt"
    scene.write_text("width=64\nheight=48\nduration_ms=100\nnoise_rate=500\n")
    run("synth", "--scene", scene, "--out", tmp_path / "a.csv")
    run("synth", "--scene", scene, "--out", tmp_path / "b.csv", "--seed", 5)
    run("synth", "--scene", scene, "--out", tmp_path / "c.csv", "--seed", 5)
    a, b, c = ((tmp_path / n).read_bytes() for n in ("a.csv", "b.csv", "c.csv"))
    assert a != b and b == c


def test_compress_decompress_metrics(tmp_path, capsys):
    src = tmp_path / "bar.aer8"
    run("synth", "--preset", "constant", "--duration-ms", 300, "--out", src)
    assert run("compress", src, "--out", tmp_path / "c.fbc", "--pt-ms", 20) == 0
    packets, w, h = read_capture(tmp_path / "c.fbc")
    assert (w, h) == (320, 240) and packets
    assert run("decompress", tmp_path / "c.fbc", "--out", tmp_path / "r.csv") == 0
    assert len(read_events(tmp_path / "r.csv")) > 0
    capsys.readouterr()
    assert run("metrics", "--orig", src, "--recon", tmp_path / "r.csv", "--csv", tmp_path / "cubes.csv") == 0
    out = capsys.readouterr().out
    assert "distance_mean" in out and "TE_median_us" in out
    assert (tmp_path / "cubes.csv").read_text().startswith("cube_index,t_start_us,distance\n")


def test_cascaded_archive_decompresses_to_same_events(tmp_path):
    args = ["compress", "--preset", "constant", "--duration-ms", 300, "--flow", "oracle"]
    run(*args, "--out", tmp_path / "c.fbc")
    run(*args, "--cascade", "lzma", "--out", tmp_path / "c.fbcz")
    assert (tmp_path / "c.fbcz").stat().st_size < (tmp_path / "c.fbc").stat().st_size
    run("decompress", tmp_path / "c.fbc", "--out", tmp_path / "a.aer8")
    run("decompress", tmp_path / "c.fbcz", "--out", tmp_path / "b.aer8")
    assert (tmp_path / "a.aer8").read_bytes() == (tmp_path / "b.aer8").read_bytes()


def test_simulate_report_and_sweep(tmp_path, capsys):
    rc = run(
        "simulate", "--preset", "constant", "--duration-ms", 300, "--flow", "oracle",
        "--baseline", "random", "--cascade", "lzma", "--sweep-pt", "10:30:10", "--csv", tmp_path / "s.csv",
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("[PT ") == 3 and "random_distance_mean" in out and "cascaded_CR" in out
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == SWEEP_HEADER and len(lines) == 4
    assert [row.split(",")[0] for row in lines[1:]] == ["10", "20", "30"]


def test_simulate_cr_above_one_on_constant_scene(tmp_path, capsys):
    run("simulate", "--preset", "constant", "--duration-ms", 500, "--flow", "oracle", "--csv", tmp_path / "s.csv")
    row = (tmp_path / "s.csv").read_text().splitlines()[1].split(",")
    assert float(row[2]) > 1


def test_ingest(tmp_path):
    (tmp_path / "e.txt").write_text("t x y p\n0.001 1 2 1\n0.002 3 4 0\n")
    assert run("ingest", tmp_path / "e.txt", "--width", 8, "--height", 8, "--out", tmp_path / "e.csv") == 0
    assert list(read_events(tmp_path / "e.csv").t) == [1000, 2000]


def test_bench_small(tmp_path, capsys):
    rc = run("bench", "--sweep-pt", "10:20:10", "--counts", "500,1000", "--events", 1000, "--repeats", 1,
             "--csv", tmp_path / "b.csv")
    assert rc == 0
    out = capsys.readouterr().out
    assert "scaling exponent" in out
    assert len((tmp_path / "b.csv").read_text().splitlines()) == 5


def test_missing_input_names_path(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("compress", tmp_path / "nope.aer8", "--out", tmp_path / "x.fbc")
    assert exc.value.code != 0
    assert "nope.aer8" in capsys.readouterr().err


def test_oracle_flow_needs_scene(tmp_path, capsys):
    run("synth", "--preset", "bar", "--duration-ms", 50, "--out", tmp_path / "b.aer8")
    with pytest.raises(SystemExit) as exc:
        run("simulate", tmp_path / "b.aer8", "--flow", "oracle")
    assert exc.value.code == 2
    assert "synthetic scene" in capsys.readouterr().err


def test_two_sources_rejected(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--preset", "bar", "--scene", tmp_path / "s.txt")
    assert exc.value.code == 2


def test_malformed_input_exits_1(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("# width=4 height=4\n1,1,zz,1\n")
    with pytest.raises(SystemExit) as exc:
        run("compress", tmp_path / "bad.csv", "--out", tmp_path / "x.fbc")
    assert exc.value.code == 1
    assert "line 2" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "fbc.cli", "synth", "--preset", "bar", "--duration-ms", "50", "--out", str(tmp_path / "b.csv")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "b.csv").exists()
