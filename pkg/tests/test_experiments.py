import io

import pytest

from onebit_dma import experiments as ex
from onebit_dma.analog_optimizer import OptimizerConfig
from onebit_dma.combining import SingularSystemError
from onebit_dma.experiments import (CSV_HEADER, PowerModelParams, SweepResult, SweepSpec,
                                    emit_csv, power_dma, power_fd, read_csv, run_sweep,
                                    run_trial)
from onebit_dma.signal_model import Scenario, SystemDims


def test_power_examples():
    p = PowerModelParams()
    assert p.p_adc_mw(1) == pytest.approx(1.0)
    assert p.p_adc_mw(10) == pytest.approx(512.0)
    assert power_dma(SystemDims(2, 5, 10)) == pytest.approx(0.315)
    assert power_fd(2) == pytest.approx(2.168)
    assert power_fd(2) / power_dma(SystemDims(2, 5, 10)) == pytest.approx(2168 / 315)


def test_power_linearity():
    base = power_dma(SystemDims(2, 5, 10))
    # one more microstrip brings an RF chain, two ADCs and N_e elements
    assert power_dma(SystemDims(2, 6, 10)) - base == pytest.approx(0.062 + 10 * 1e-4)
    assert power_dma(SystemDims(2, 5, 11)) - base == pytest.approx(5 * 1e-4)
    assert power_fd(4) == pytest.approx(2 * power_fd(2))
    with pytest.raises(ValueError):
        power_fd(0)
    with pytest.raises(ValueError):
        PowerModelParams(P_RF=-1.0)


def test_power_fraction_formulas():
    p_fd = power_fd(5)
    assert p_fd == pytest.approx(5.42)
    for nd in (10, 25):
        assert power_dma(SystemDims(5, nd, 20)) / p_fd == pytest.approx(nd * 0.064 / 5.42)
    for ne in (140, 250):
        assert power_dma(SystemDims(5, 5, ne)) / p_fd == pytest.approx((0.5 * ne + 310) / 5420)


@pytest.fixture(scope="module")
def scenario():
    return Scenario.from_db(SystemDims(2, 3, 4), 10.0)


def test_run_trial_deterministic(scenario):
    cfg = OptimizerConfig(max_outer_iterations=5)
    for arm in ex.ARMS:
        a = run_trial(scenario, arm, (0, 0, 3), cfg)
        b = run_trial(scenario, arm, (0, 0, 3), cfg)
        assert a[0] == b[0]
    assert run_trial(scenario, "fd", (0, 0, 3))[0] != run_trial(scenario, "fd", (0, 0, 4))[0]


def test_random_arm_skips_optimization(scenario):
    rate, diag = run_trial(scenario, "dma-random", 5)
    assert diag["iterations"] == 0
    assert rate == diag["initial_rate"]


def test_arms_share_channel_and_initialization(scenario):
    cfg = OptimizerConfig(max_outer_iterations=3)
    _, d1 = run_trial(scenario, "dma-sdr", 9, cfg)
    _, d2 = run_trial(scenario, "dma-closed-form", 9, cfg)
    _, d3 = run_trial(scenario, "dma-random", 9, cfg)
    assert d1["initial_rate"] == d2["initial_rate"] == d3["initial_rate"]


def test_unknown_arm_and_evaluation(scenario):
    with pytest.raises(ValueError):
        run_trial(scenario, "hybrid", 0)
    with pytest.raises(ValueError):
        run_trial(scenario, "dma-sdr", 0, evaluation="guess")


@pytest.mark.slow
def test_sdr_beats_random_on_paired_seeds():
    sc = Scenario.from_db(SystemDims(2, 5, 10), 10.0)
    wins = sum(run_trial(sc, "dma-sdr", (1, 0, t))[0] >= run_trial(sc, "dma-random", (1, 0, t))[0]
               for t in range(50))
    assert wins >= 45


def _small_spec(**kw):
    base = dict(axis="snr", grid=(0.0,), K=2, N_d=2, N_e=3, trials=1,
                arms=("dma-closed-form", "fd"),
                optimizer=OptimizerConfig(max_outer_iterations=3))
    base.update(kw)
    return SweepSpec(**base)


def test_sweep_single_row():
    res = run_sweep(_small_spec(arms=("fd",)))
    assert len(res.rows) == 1
    row = res.rows[0]
    assert row.trials == 1 and row.failures == 0 and row.std_rate == 0.0
    assert row.rate_per_watt == pytest.approx(row.mean_rate / row.power_w)


def test_sweep_spec_validation():
    for bad in [dict(axis="k"), dict(grid=()), dict(trials=0), dict(arms=("x",)),
                dict(evaluation="none")]:
        with pytest.raises(ValueError):
            _small_spec(**bad)


def test_sweep_same_index_same_mean():
    spec = _small_spec(grid=(5.0, 5.0), trials=2)
    a, b = run_sweep(spec), run_sweep(spec)
    assert [r.mean_rate for r in a.rows] == [r.mean_rate for r in b.rows]


def test_sweep_counts_failures(monkeypatch):
    def flaky(scenario, arm, seed, config, evaluation):
        if seed[2] % 2:
            raise SingularSystemError("degenerate draw")
        return 1.0, {"iterations": 2}

    monkeypatch.setattr(ex, "run_trial", flaky)
    row = run_sweep(_small_spec(trials=4, arms=("dma-sdr",))).rows[0]
    assert row.trials == 2 and row.failures == 2 and row.mean_rate == 1.0
    assert row.flagged


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv(SweepResult("rho_db", []), path)
    assert path.read_text(encoding="utf-8") == ",".join(CSV_HEADER) + "\n"


def test_csv_round_trip(tmp_path):
    spec = _small_spec(grid=(10.0, -5.0), trials=2)
    res = run_sweep(spec)
    path = tmp_path / "out.csv"
    emit_csv(res, path, config={"k": 2, "solver": "closed-form"})
    config, rows = read_csv(path)
    assert config == {"k": "2", "solver": "closed-form"}
    assert len(rows) == len(spec.grid) * len(spec.arms)
    assert [float(r["axis_value"]) for r in rows] == [-5.0, -5.0, 10.0, 10.0]
    for r in rows:
        ref = res.row(float(r["axis_value"]), r["arm"])
        assert float(r["mean_rate_bpshz"]) == float(f"{ref.mean_rate:.9g}")
        assert float(r["power_w"]) == float(f"{ref.power_w:.9g}")
        assert int(r["failures"]) == ref.failures


def test_csv_stream_and_determinism():
    spec = _small_spec(grid=(0.0, 10.0), trials=2)
    outs = []
    for _ in range(2):
        buf = io.StringIO()
        emit_csv(run_sweep(spec), buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]


def test_sweep_axis_scenarios():
    s = _small_spec(axis="nd", grid=(4,))
    assert s.scenario_at(4).dims.N_d == 4
    s = _small_spec(axis="ne", grid=(7,))
    assert s.scenario_at(7).dims.N_e == 7
    assert s.axis_name == "N_e"
