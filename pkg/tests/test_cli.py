import numpy as np
import pytest

from qubit_reach.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "qubit-reach" in capsys.readouterr().out


def test_usage_error_is_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["reachset"])  # missing --T and params
    assert exc.value.code == 2


def test_param_flag_conflicts():
    with pytest.raises(SystemExit) as exc:
        main(["lacuna", "--gamma-ratio", "0.1", "--omega", "1.0"])
    assert exc.value.code == 2


def test_simulate_fixed_point(tmp_path, capsys):
    sched = tmp_path / "zero.csv"
    sched.write_text("t,u,n\n0,0,0\n")
    code, out, _ = run(
        capsys, "simulate", "--gamma-ratio", "0.1", "--schedule", str(sched),
        "--r0", "0,0,1", "--T", "10", "--samples", "5",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,rx,ry,rz"
    for line in lines[1:]:
        t, rx, ry, rz = (float(v) for v in line.split(","))
        assert (rx, ry, rz) == (0.0, 0.0, 1.0)


def test_lacuna_prints_certificates(capsys):
    code, out, _ = run(
        capsys, "lacuna", "--gamma-ratio", "0.1", "--alpha", "0.4", "--beta", "1e-3"
    )
    assert code == 0
    assert f"guaranteed ball radius = {1 - 0.025 * np.pi!r}" in out
    assert "alpha bound = 0.49751859510499463" in out
    assert "PASS" in out
    code, out, _ = run(
        capsys, "lacuna", "--gamma-ratio", "0.1", "--alpha", "0.6", "--beta", "1e-6"
    )
    assert "FAIL" in out


def test_lacuna_physical_units_delta(capsys):
    code, out, _ = run(
        capsys, "lacuna", "--omega", "4.5e15", "--kappa", "2.4e-29", "--gamma", "2.2e8"
    )
    assert code == 0
    delta = float(out.split("delta = ")[1].splitlines()[0])
    assert abs(delta - np.pi * 2.2e8 / (4 * 4.5e15)) < 1e-12 * delta


def test_lacuna_domain_error_exit_1(capsys):
    code, _, err = run(capsys, "lacuna", "--gamma-ratio", "1.5")
    assert code == 1
    assert "error:" in err


def test_extremal_csv(tmp_path, capsys):
    out_path = tmp_path / "traj.csv"
    code, _, _ = run(
        capsys, "extremal", "--gamma-ratio", "0.1", "--psi0", "1.0", "--T", "2",
        "--samples", "9", "--out", str(out_path),
    )
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "tau,z,R,p,q,theta,H"
    assert len(lines) == 10
    h_vals = [float(l.split(",")[6]) for l in lines[1:]]
    assert max(h_vals) - min(h_vals) < 1e-7


def test_rank_table(capsys):
    code, out, _ = run(capsys, "rank", "--gamma-ratio", "0.1", "--grid", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "rx,ry,rz,rank,witness,det"
    for line in lines[1:]:
        parts = line.split(",")
        assert parts[3] == "3"


def test_spiral_outputs(tmp_path, capsys):
    svg_path = tmp_path / "spiral.svg"
    code, out, _ = run(
        capsys, "spiral", "--gamma-ratio", "0.1", "--samples", "16",
        "--out", str(tmp_path / "arcs.csv"), "--svg", str(svg_path),
    )
    assert code == 0
    assert "guaranteed ball radius" in out
    assert svg_path.read_text().startswith("<svg")


def test_reachset_deterministic(tmp_path, capsys):
    args = [
        "reachset", "--gamma-ratio", "0.1", "--T", "0.5", "--seeds", "64",
        "--raster", "64",
    ]
    outs = []
    for k in (1, 2):
        csv_path = tmp_path / f"cells{k}.csv"
        svg_path = tmp_path / f"set{k}.svg"
        code, _, _ = run(capsys, *args, "--out", str(csv_path), "--svg", str(svg_path),
                         "--overlay-spiral")
        assert code == 0
        outs.append((csv_path.read_bytes(), svg_path.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][1].startswith(b"<svg")


def test_reachset_obj_export(tmp_path, capsys):
    obj_path = tmp_path / "mesh.obj"
    code, _, _ = run(
        capsys, "reachset", "--gamma-ratio", "0.1", "--T", "1", "--seeds", "64",
        "--raster", "64", "--out", str(tmp_path / "c.csv"), "--obj", str(obj_path),
        "--obj-angles", "16",
    )
    assert code == 0
    text = obj_path.read_text()
    assert text.startswith("v ") and "\nf " in text


def test_movie_frames(tmp_path, capsys):
    code, out, _ = run(
        capsys, "movie", "--gamma-ratio", "0.1", "--T-max", "0.6", "--frames", "3",
        "--seeds", "64", "--raster", "64", "--out-dir", str(tmp_path / "frames"),
    )
    assert code == 0
    frames = sorted((tmp_path / "frames").glob("frame_*.svg"))
    assert len(frames) == 3


def test_table_build_and_query(tmp_path, capsys):
    table_path = tmp_path / "table.csv"
    code, out, _ = run(
        capsys, "table", "build", "--gamma-ratio", "0.1", "--seeds", "256",
        "--T-max", "2", "--grid", "256", "--out", str(table_path),
    )
    assert code == 0
    assert "nonempty cells" in out
    code, out, _ = run(capsys, "table", "query", "--in", str(table_path),
                       "--z", "0.0", "--R", "0.9")
    assert code == 0
    assert out.startswith("psi0=")
    # unreachable target exits 1
    code, _, err = run(capsys, "table", "query", "--in", str(table_path),
                       "--z", "0.999", "--R", "0.001")
    assert code == 1 and "error:" in err


def test_every_subcommand_has_help(capsys):
    for cmd in ("simulate", "extremal", "reachset", "movie", "spiral", "lacuna", "rank"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert "usage:" in capsys.readouterr().out


def test_thread_cap_does_not_change_output(tmp_path, capsys, monkeypatch):
    # QUBIT_REACH_THREADS only distributes fixed seed blocks
    results = []
    for threads in ("1", "3"):
        monkeypatch.setenv("QUBIT_REACH_THREADS", threads)
        csv_path = tmp_path / f"cells_t{threads}.csv"
        code, _, _ = run(
            capsys, "reachset", "--gamma-ratio", "0.1", "--T", "0.5",
            "--seeds", "256", "--raster", "64", "--out", str(csv_path),
        )
        assert code == 0
        results.append(csv_path.read_bytes())
    assert results[0] == results[1]


def test_simulate_schedule_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,u,n\n0,0,0\n")
    code, _, err = run(
        capsys, "simulate", "--gamma-ratio", "0.1", "--schedule", str(bad), "--T", "1"
    )
    assert code == 1
    assert "header" in err
