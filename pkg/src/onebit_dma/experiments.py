"""Power models, the Monte Carlo sweep harness and CSV output."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analog_optimizer import OptimizerConfig, optimize_analog
from .combining import SingularSystemError, effective_map, fd_baseline_rate, optimal_sindr, sum_rate
from .quantization import DegenerateCovarianceError, approx_large_k_stats
from .signal_model import (DEFAULT_BETA_DE, Scenario, SystemDims, generate_channel,
                           random_combiner)

ARMS = ("dma-sdr", "dma-closed-form", "dma-random", "fd")
ARM_IDS = {arm: i for i, arm in enumerate(ARMS)}
ARM_SOLVER = {"dma-sdr": "sdr", "dma-closed-form": "closed_form", "dma-random": "random"}
AXES = {"snr": "rho_db", "nd": "N_d", "ne": "N_e"}

CSV_HEADER = ("axis_name", "axis_value", "arm", "trials", "mean_rate_bpshz", "std_rate_bpshz",
              "power_w", "rate_per_watt", "mean_iters", "failures")

# seed-stream tags below the per-trial key; arm streams use ARM_IDS
_CHANNEL_STREAM = 100
_INIT_STREAM = 101

_TRIAL_ERRORS = (SingularSystemError, DegenerateCovarianceError, np.linalg.LinAlgError)


# --------------------------------------------------------------------------
# power consumption


@dataclass(frozen=True)
class PowerModelParams:
    P_RF: float = 60.0        # mW per RF chain
    f_s: float = 1e9          # Hz
    F_OM: float = 500e-15     # J per conversion step
    P_el: float = 0.1         # mW per metamaterial element
    b_fd: int = 10
    b_dma: int = 1

    def __post_init__(self):
        if min(self.P_RF, self.f_s, self.F_OM, self.P_el) <= 0:
            raise ValueError("power model parameters must be positive")
        if self.b_fd < 1 or self.b_dma < 1:
            raise ValueError("ADC resolution must be at least 1 bit")

    def p_adc_mw(self, bits: int) -> float:
        return self.f_s * self.F_OM * 2.0 ** bits * 1e3


def power_dma(dims: SystemDims, params: PowerModelParams = PowerModelParams()) -> float:
    """Total DMA receiver power in watts."""
    mw = dims.N * params.P_el + dims.N_d * (params.P_RF + 2.0 * params.p_adc_mw(params.b_dma))
    return mw * 1e-3


def power_fd(n_rf: int, params: PowerModelParams = PowerModelParams()) -> float:
    """Fully digital receiver power in watts."""
    if n_rf < 1:
        raise ValueError("n_rf must be positive")
    return n_rf * (params.P_RF + 2.0 * params.p_adc_mw(params.b_fd)) * 1e-3


# --------------------------------------------------------------------------
# single trial


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, tuple):
        return np.random.SeedSequence(seed[0], spawn_key=tuple(seed[1:]))
    return np.random.SeedSequence(seed)


def _stream(ss: np.random.SeedSequence, tag: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (tag,))


def approx_sum_rate(Q, A, H, scenario: Scenario) -> float:
    """Sum rate with the large-K surrogate ``G`` and ``C_d`` plugged into the SINDR."""
    G, C_d = approx_large_k_stats(scenario.dims, scenario.rho, scenario.eta)
    return sum_rate(optimal_sindr(effective_map(G, Q, A), H, C_d, scenario.rho))


def run_trial(scenario: Scenario, arm: str, seed, config: OptimizerConfig = OptimizerConfig(),
              evaluation: str = "exact") -> Tuple[float, dict]:
    """One Monte Carlo trial of ``arm``; returns ``(rate, diagnostics)``.

    The channel and the random initial combiner depend only on ``seed``, so
    all DMA arms of the same trial see the same draw. Solver randomness is
    drawn from a stream keyed by the arm.
    """
    if arm not in ARM_IDS:
        raise ValueError(f"unknown arm {arm!r}")
    ss = _seed_sequence(seed)
    arm_ss = _stream(ss, ARM_IDS[arm])
    if arm == "fd":
        rate = fd_baseline_rate(scenario.dims.K, scenario.rho, np.random.default_rng(arm_ss),
                                n_rf=scenario.dims.N_RF)
        return rate, {"iterations": 0}

    H = generate_channel(scenario.dims, np.random.default_rng(_stream(ss, _CHANNEL_STREAM)))
    init_rng = np.random.default_rng(_stream(ss, _INIT_STREAM))
    Q0 = random_combiner(scenario.dims, init_rng)
    solver_seed = int(arm_ss.generate_state(1)[0])
    cfg = replace(config, solver=ARM_SOLVER[arm], seed=solver_seed)
    if evaluation not in ("exact", "approx"):
        raise ValueError(f"unknown evaluation {evaluation!r}")
    res = optimize_analog(H, scenario, cfg, initial=Q0)
    approx = approx_sum_rate(res.combiner, scenario.propagation, H, scenario)
    rate = res.rate if evaluation == "exact" else approx
    return rate, {"iterations": res.iterations, "converged": res.converged,
                  "initial_rate": res.initial_rate, "exact_rate": res.rate,
                  "approx_rate": approx}


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    axis: str                          # "snr" | "nd" | "ne"
    grid: Tuple[float, ...]
    K: int = 2
    N_d: int = 5
    N_e: int = 10
    N_RF: Optional[int] = None
    rho_db: float = 10.0
    trials: int = 200
    seed: int = 0
    arms: Tuple[str, ...] = ("dma-sdr", "fd")
    beta_de: float = DEFAULT_BETA_DE
    eta: float = 1.0
    evaluation: str = "exact"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    power: PowerModelParams = field(default_factory=PowerModelParams)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {sorted(AXES)}")
        if len(self.grid) == 0:
            raise ValueError("grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = [a for a in self.arms if a not in ARM_IDS]
        if bad or not self.arms:
            raise ValueError(f"invalid arms {self.arms!r}")
        if self.evaluation not in ("exact", "approx"):
            raise ValueError("evaluation must be 'exact' or 'approx'")
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "arms", tuple(self.arms))

    @property
    def axis_name(self) -> str:
        return AXES[self.axis]

    def scenario_at(self, value) -> Scenario:
        rho_db, nd, ne = self.rho_db, self.N_d, self.N_e
        if self.axis == "snr":
            rho_db = float(value)
        elif self.axis == "nd":
            nd = int(value)
        else:
            ne = int(value)
        dims = SystemDims(self.K, nd, ne, self.N_RF)
        return Scenario.from_db(dims, rho_db, self.beta_de, self.eta)


@dataclass
class SweepRow:
    axis_name: str
    axis_value: float
    arm: str
    trials: int
    mean_rate: float
    std_rate: float
    power_w: float
    rate_per_watt: float
    mean_iters: float
    failures: int

    @property
    def flagged(self) -> bool:
        """More than 1% of the attempted trials failed."""
        return self.failures > 0.01 * (self.trials + self.failures)


@dataclass
class SweepResult:
    axis_name: str
    rows: List[SweepRow]

    def row(self, axis_value, arm) -> SweepRow:
        for r in self.rows:
            if r.arm == arm and r.axis_value == axis_value:
                return r
        raise KeyError((axis_value, arm))


def _run_task(task):
    spec, gi, arm, t = task
    scenario = spec.scenario_at(spec.grid[gi])
    try:
        rate, diag = run_trial(scenario, arm, (spec.seed, gi, t), spec.optimizer, spec.evaluation)
    except _TRIAL_ERRORS:
        return gi, arm, t, None, 0
    return gi, arm, t, rate, diag.get("iterations", 0)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Run every (grid point, arm, trial) and reduce in a fixed order.

    Trial seeds are keyed by ``(spec.seed, grid index, trial index)`` so the
    outcome does not depend on ``workers``.
    """
    tasks = [(spec, gi, arm, t) for gi in range(len(spec.grid)) for arm in spec.arms
             for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        outcomes = [_run_task(task) for task in tasks]

    grouped: Dict[Tuple[int, str], list] = {}
    for gi, arm, t, rate, iters in outcomes:
        grouped.setdefault((gi, arm), []).append((t, rate, iters))

    rows = []
    for gi, value in enumerate(spec.grid):
        scenario = spec.scenario_at(value)
        for arm in spec.arms:
            entries = sorted(grouped[(gi, arm)], key=lambda e: e[0])
            ok = [(r, it) for _, r, it in entries if r is not None]
            rates = np.array([r for r, _ in ok], dtype=float)
            n = rates.size
            mean = float(rates.mean()) if n else math.nan
            std = float(rates.std(ddof=1)) if n > 1 else 0.0
            power = (power_fd(scenario.dims.N_RF, spec.power) if arm == "fd"
                     else power_dma(scenario.dims, spec.power))
            iters = float(np.mean([it for _, it in ok])) if n else math.nan
            rows.append(SweepRow(spec.axis_name, value, arm, n, mean, std, power,
                                 mean / power, iters, len(entries) - n))
    return SweepResult(spec.axis_name, rows)


# --------------------------------------------------------------------------
# CSV


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def emit_csv(result: SweepResult, path, config: Optional[Dict[str, object]] = None) -> None:
    """Write ``result`` as UTF-8 CSV to a path or text stream.

    ``config`` is echoed as one leading ``#`` line.
    """
    lines = []
    if config:
        lines.append("# " + " ".join(f"{k}={config[k]}" for k in sorted(config)))
    lines.append(",".join(CSV_HEADER))
    for r in sorted(result.rows, key=lambda r: (float(r.axis_value), r.arm)):
        lines.append(",".join([r.axis_name, _fmt(r.axis_value), r.arm, str(r.trials),
                               _fmt(r.mean_rate), _fmt(r.std_rate), _fmt(r.power_w),
                               _fmt(r.rate_per_watt), _fmt(r.mean_iters), str(r.failures)]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv(path):
    """Parse a file written by :func:`emit_csv` into ``(config, rows)``."""
    config = {}
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read().splitlines()
    body = []
    for line in text:
        if line.startswith("#"):
            for item in line[1:].split():
                k, _, v = item.partition("=")
                config[k] = v
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return config, rows
