import pytest

from onebit_dma.cli import default_grid, main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_power_subcommand(capsys):
    code, out, _ = _run(capsys, "power", "--k", "2", "--nd", "5", "--ne", "10")
    assert code == 0
    lines = dict(line.split("=") for line in out.split())
    assert float(lines["P_DMA_W"]) == pytest.approx(0.315)
    assert float(lines["P_FD_W"]) == pytest.approx(2.168)
    assert float(lines["P_FD/P_DMA"]) == pytest.approx(6.88253968)


@pytest.mark.parametrize("argv", [
    ["sweep-snr", "--k", "0"],
    ["sweep-snr", "--solver", "annealing"],
    ["sweep-snr", "--arms", "dma-sdr,hybrid"],
    ["sweep-snr", "--grid", "a,b"],
    ["frobnicate"],
    [],
])
def test_invalid_arguments_exit_1(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_runtime_failure_exit_2(capsys, tmp_path):
    code, _, err = _run(capsys, "single", "--trials", "1", "--arms", "fd",
                        "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 2
    assert "runtime failure" in err


def test_single_writes_csv(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = _run(capsys, "single", "--k", "2", "--nd", "2", "--ne", "3", "--trials", "2",
                      "--solver", "closed-form", "--max-iters", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ") and "solver=closed-form" in lines[0]
    assert lines[1].startswith("axis_name,axis_value,arm")
    assert len(lines) == 4


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nk = 3\nnd=2\nne=2\ntrials=1\narms=fd\nseed=4\n")
    code, out, _ = _run(capsys, "sweep-snr", "--config", str(cfg), "--grid", "0,5", "--seed", "9")
    assert code == 0
    echo = out.splitlines()[0]
    assert "k=3" in echo and "seed=9" in echo and "grid=0,5" in echo
    assert "config=" not in echo and "workers=" not in echo


def test_bad_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("banana=1\n")
    code, _, err = _run(capsys, "single", "--config", str(cfg))
    assert code == 1 and "banana" in err


def test_grid_range_syntax(capsys):
    code, out, _ = _run(capsys, "sweep-snr", "--arms", "fd", "--trials", "1", "--grid=-5:5:5")
    assert code == 0
    values = [line.split(",")[1] for line in out.splitlines()[2:]]
    assert values == ["-5", "0", "5"]


def test_default_grids():
    assert default_grid("snr", 2) == (-10, -5, 0, 5, 10, 15, 20, 25)
    assert default_grid("nd", 5) == (5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25)
    assert default_grid("ne", 5)[0] == 20 and default_grid("ne", 5)[-1] == 260
