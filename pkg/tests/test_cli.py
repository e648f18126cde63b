import json
import subprocess
import sys

import pytest

from metd.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_convergence_csv_and_plot(tmp_path, capsys):
    assert run(tmp_path, "convergence", "--problem", "lyapunov", "--schemes", "metd1,metd2",
               "--dts", "0.2,0.1,0.05,0.025") == 0
    lines = (tmp_path / "convergence_results.csv").read_text().splitlines()
    assert lines[0].startswith("# schema: metd.convergence/v1")
    assert lines[1] == "problem,scheme,dt,error,slope,exact"
    assert len(lines) == 2 + 8
    slopes = {row.split(",")[1]: float(row.split(",")[4]) for row in lines[2:]}
    assert slopes["metd1"] == pytest.approx(1.0, abs=0.15)
    assert slopes["metd2"] == pytest.approx(2.0, abs=0.2)
    assert (tmp_path / "convergence_plot.svg").read_text().startswith("<svg")


def test_results_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["care", "--t-end", "5", "--out", str(d)]) == 0
    assert (a / "care_results.csv").read_bytes() == (b / "care_results.csv").read_bytes()


def test_refuses_to_overwrite(tmp_path, capsys):
    assert run(tmp_path, "lyapunov", "--t-end", "1") == 0
    assert run(tmp_path, "lyapunov", "--t-end", "1") == 2
    assert "--force" in capsys.readouterr().err
    assert run(tmp_path, "lyapunov", "--t-end", "1", "--force") == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dt": 0.1, "t_end": 1.0, "scheme": "metd1"}))
    assert run(tmp_path, "lyapunov", "--config", str(cfg), "--dt", "0.25") == 0
    rows = (tmp_path / "lyapunov_results.csv").read_text().splitlines()[2:]
    assert len(rows) == 4  # flag dt wins over the file


def test_config_errors(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(tmp_path, "lyapunov", "--config", str(cfg)) == 2
    assert run(tmp_path, "lyapunov", "--config", str(tmp_path / "missing.json")) == 2
    assert run(tmp_path, "convergence", "--schemes", "metd7") == 2
    assert run(tmp_path, "convergence", "--dts", "0.1,0.05") == 2


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "lyapunov", "--bogus")
    assert exc.value.code == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["lyapunov", "--out", str(blocker / "sub")]) == 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("METD_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["lyapunov", "--t-end", "0.5"]) == 0
    assert (tmp_path / "env" / "lyapunov_results.csv").exists()


def test_jets_run(tmp_path):
    assert run(tmp_path, "jets", "--nx", "16", "--ny", "32", "--dt", "0.5", "--steps", "200", "--modes", "1,3") == 0
    lines = (tmp_path / "jets_results.csv").read_text().splitlines()
    assert lines[1] == "step,t,kx,norm,distance,hermitian_error"
    assert len(lines) == 2 + 2 * 201
    assert max(float(r.split(",")[3]) for r in lines[2:]) < 0.1
    assert "<rect" in (tmp_path / "jets_plot.svg").read_text()


def test_jets_divergence_exit_code(tmp_path):
    # the BCH2 generator overflows for kx = 3 at dt = 0.5
    assert run(tmp_path, "jets", "--modes", "3", "--form", "bch2", "--dt", "0.5", "--steps", "200", "--no-plot") == 3


def test_jets_excluded_mode(tmp_path):
    assert run(tmp_path, "jets", "--modes", "0") == 2


def test_cgnn_run(tmp_path):
    assert run(tmp_path, "cgnn", "--t-end", "2", "--dt", "0.01") == 0
    lines = (tmp_path / "cgnn_results.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[2].startswith("1,")


def test_bench_splits_timings(tmp_path):
    assert run(tmp_path, "bench", "--problem", "care", "--compare", "vectorized", "--sizes", "2,4", "--repeats", "1") == 0
    assert (tmp_path / "bench_results.csv").read_text().splitlines()[1] == "n,max_abs_difference"
    timing = (tmp_path / "bench_timings.csv").read_text().splitlines()
    assert len(timing) == 2 + 4


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "metd.cli", "lyapunov", "--t-end", "0.5", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
