"""Structured experiment configuration and the end-to-end runner.

A config is a JSON document. Relative file paths inside it are resolved
against the directory holding the config file. Matrix files are CSV with one
matrix row per line and interleaved ``re, im`` columns.
"""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import (
    BilinearControlSystem,
    ControlSchedule,
    ThermoTrajectory,
    gaussian_schedule,
    propagate,
    record_thermo,
)
from .errors import ObsThermoError, ValidationError
from .grape import OptimizationConfig, grape_optimize
from .lie import (
    DEFAULT_RANK_TOL,
    ClosureReport,
    OperatorBasis,
    close_algebra,
    gram_schmidt,
    observability_space,
)
from .models import CentralSpinSpec, all_up_state, build_central_spin
from .observability import DensityState

logger = logging.getLogger(__name__)

PHASE_KINDS = ("optimize", "gaussian", "fixed")
SERIES_HEADER = ("t", "y", "O", "U", "S", "D")


# --- config ---------------------------------------------------------------------

@dataclass
class SystemConfig:
    """Either ``kind="central_spin"`` with model parameters or ``kind="matrices"`` with file paths."""

    kind: str = "central_spin"
    n_bath: int = 3
    field: float = 10.0
    couplings: list[float] | None = None
    control_axis: str = "y"
    measurement_axis: str = "x"
    drift: str | None = None
    controls: list[str] = dataclasses.field(default_factory=list)
    observable: str | None = None

    def validate(self) -> None:
        if self.kind == "central_spin":
            self.spec()
        elif self.kind == "matrices":
            if not self.drift or not self.observable:
                raise ValidationError("matrix systems need 'drift' and 'observable' paths")
        else:
            raise ValidationError(f"unknown system kind {self.kind!r}")

    def spec(self) -> CentralSpinSpec:
        return CentralSpinSpec(n_bath=self.n_bath, field=self.field,
                               couplings=tuple(self.couplings or ()),
                               control_axis=self.control_axis,
                               measurement_axis=self.measurement_axis)

    def to_dict(self) -> dict:
        if self.kind == "central_spin":
            keys = ("kind", "n_bath", "field", "couplings", "control_axis", "measurement_axis")
        else:
            keys = ("kind", "drift", "controls", "observable")
        return {k: getattr(self, k) for k in keys}


@dataclass
class PhaseConfig:
    """One time window of length ``tau``.

    ``optimize`` runs GRAPE, ``gaussian`` samples a Gaussian pulse on the
    global clock, ``fixed`` takes explicit amplitudes (inline or a CSV path).
    """

    kind: str
    amplitude: float = 1.0
    center: float = 0.0
    sigma: float = 0.1
    amplitudes: list | None = None
    path: str | None = None

    def validate(self) -> None:
        if self.kind not in PHASE_KINDS:
            raise ValidationError(f"unknown phase kind {self.kind!r}; expected one of {PHASE_KINDS}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValidationError(f"gaussian phase needs sigma > 0, got {self.sigma}")
        if self.kind == "fixed" and (self.amplitudes is None) == (self.path is None):
            raise ValidationError("fixed phase needs exactly one of 'amplitudes' or 'path'")

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": self.kind, "amplitude": self.amplitude, "center": self.center,
                    "sigma": self.sigma}
        if self.kind == "fixed":
            d = {"kind": self.kind}
            if self.amplitudes is not None:
                d["amplitudes"] = self.amplitudes
            else:
                d["path"] = self.path
            return d
        return {"kind": self.kind}


@dataclass
class OptimizerSettings:
    max_iters: int = 500
    gradient_tol: float = 1e-6
    step_rule: str = "backtracking"
    step_size: float = 1.0
    init_pulse: str = "random"
    init_scale: float = 1.0
    target: str = "maximize"
    amplitude_bound: float | None = None

    def build(self, n_slots: int, tau: float, t0: float, seed: int) -> OptimizationConfig:
        return OptimizationConfig(n_slots=n_slots, horizon=tau, t0=t0, seed=seed,
                                  **dataclasses.asdict(self))


@dataclass
class ExperimentConfig:
    system: SystemConfig = dataclasses.field(default_factory=SystemConfig)
    tau: float = 1.0
    n_slots: int = 1000
    phases: list[PhaseConfig] = dataclasses.field(default_factory=lambda: [PhaseConfig("optimize")])
    initial_state: dict = dataclasses.field(default_factory=lambda: {"kind": "all_up"})
    rank_tol: float = DEFAULT_RANK_TOL
    observability_max_depth: int | None = None
    optimizer: OptimizerSettings = dataclasses.field(default_factory=OptimizerSettings)
    seed: int = 0
    on_psd_violation: str = "raise"
    comparison: dict | None = None
    outputs: dict = dataclasses.field(default_factory=lambda: {"dir": "out"})
    base_dir: Path = dataclasses.field(default=Path("."), compare=False, repr=False)

    def validate(self) -> None:
        self.system.validate()
        if not (isinstance(self.tau, (int, float)) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau!r}")
        if not (isinstance(self.n_slots, int) and self.n_slots >= 3):
            raise ValidationError(f"n_slots must be an integer >= 3, got {self.n_slots!r}")
        if not self.phases:
            raise ValidationError("at least one phase is required")
        for ph in self.phases:
            ph.validate()
        if self.initial_state.get("kind") not in ("all_up", "matrix"):
            raise ValidationError("initial_state.kind must be 'all_up' or 'matrix'")
        if self.initial_state["kind"] == "matrix" and "path" not in self.initial_state:
            raise ValidationError("matrix initial state needs a 'path'")
        if self.initial_state["kind"] == "all_up" and self.system.kind != "central_spin":
            raise ValidationError("all_up initial state requires a central_spin system")
        if not self.rank_tol > 0:
            raise ValidationError("rank_tol must be positive")
        if self.observability_max_depth is not None and self.observability_max_depth < 0:
            raise ValidationError("observability_max_depth must be >= 0")
        if self.on_psd_violation not in ("raise", "nan"):
            raise ValidationError("on_psd_violation must be 'raise' or 'nan'")
        if self.comparison is not None:
            idx = self.comparison.get("phase")
            if not (isinstance(idx, int) and 0 <= idx < len(self.phases)):
                raise ValidationError("comparison.phase must index an existing phase")
            if not isinstance(self.comparison.get("start_times"), list):
                raise ValidationError("comparison.start_times must be a list")
        # building the optimizer config exercises its own validation
        self.optimizer.build(self.n_slots, float(self.tau), 0.0, self.seed)

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "tau": self.tau,
            "n_slots": self.n_slots,
            "phases": [p.to_dict() for p in self.phases],
            "initial_state": self.initial_state,
            "rank_tol": self.rank_tol,
            "observability_max_depth": self.observability_max_depth,
            "optimizer": dataclasses.asdict(self.optimizer),
            "seed": self.seed,
            "on_psd_violation": self.on_psd_violation,
            "comparison": self.comparison,
            "outputs": self.outputs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | str = ".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValidationError("config root must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = dict(d)
            if "system" in kw:
                kw["system"] = SystemConfig(**kw["system"])
            if "phases" in kw:
                kw["phases"] = [PhaseConfig(**p) for p in kw["phases"]]
            if "optimizer" in kw:
                kw["optimizer"] = OptimizerSettings(**kw["optimizer"])
        except TypeError as exc:
            raise ValidationError(f"malformed config: {exc}") from exc
        cfg = cls(**kw, base_dir=Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str, base_dir: Path | str = ".") -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d, base_dir)

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text, path.parent)

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


# --- file formats -----------------------------------------------------------------

def read_matrix_csv(path: Path | str) -> np.ndarray:
    """Complex matrix from rows of interleaved ``re, im`` values."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read matrix file {path}: {exc}") from exc
    if raw.shape[1] % 2 or raw.shape[1] // 2 != raw.shape[0]:
        raise ValidationError(f"{path}: expected n rows of 2n columns, got {raw.shape}")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def write_matrix_csv(path: Path | str, m: np.ndarray) -> None:
    m = np.asarray(m, dtype=complex)
    out = np.empty((m.shape[0], 2 * m.shape[1]))
    out[:, 0::2], out[:, 1::2] = m.real, m.imag
    np.savetxt(path, out, delimiter=",", fmt="%.17g")


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.17g}"


def write_series_csv(path: Path | str, tr: ThermoTrajectory, skip_first: bool = False) -> None:
    rows = zip(tr.t, tr.output, tr.obs_energy, tr.unobs_energy, tr.entropy, tr.dissipation)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for k, row in enumerate(rows):
            if skip_first and k == 0:
                continue
            w.writerow([_fmt(float(x)) for x in row])


def _append_series(path: Path, tr: ThermoTrajectory) -> None:
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        for row in list(zip(tr.t, tr.output, tr.obs_energy, tr.unobs_energy,
                            tr.entropy, tr.dissipation))[1:]:
            w.writerow([_fmt(float(x)) for x in row])


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


# --- runner -----------------------------------------------------------------------

@contextlib.contextmanager
def stage(phase: str, step: str):
    """Re-raise package errors with the phase and step prefixed to the message."""
    try:
        yield
    except ObsThermoError as exc:
        raise type(exc)(f"[{phase} / {step}] {exc}") from exc


@dataclass
class PhaseResult:
    kind: str
    schedule: ControlSchedule
    trajectory: ThermoTrajectory
    states: np.ndarray
    optimization: Any = None

    def summary(self) -> dict:
        tr = self.trajectory
        d = {"kind": self.kind, "t0": self.schedule.t0, "t1": self.schedule.t1,
             "Q": tr.heat, "W": tr.work, "dS": tr.entropy_change,
             "S_start": float(tr.entropy[0]), "S_end": float(tr.entropy[-1]),
             "y_end": float(tr.output[-1]),
             "psd_violations": int(np.isnan(tr.entropy).sum()),
             "min_effective_eig": float(tr.min_effective_eig.min())}
        if self.optimization is not None:
            r = self.optimization
            d.update(J_terminal=r.terminal_output, iterations=r.iterations,
                     converged=r.converged, gradient_norm=r.gradient_norm)
        return d


@dataclass
class ExperimentResult:
    system: BilinearControlSystem
    basis: OperatorBasis
    lie_report: ClosureReport
    obs_report: ClosureReport
    phases: list[PhaseResult]
    comparison: list[dict]
    seed: int

    def summary(self) -> dict:
        per_phase = [p.summary() for p in self.phases]
        j_terminal = next((p["J_terminal"] for p in per_phase if "J_terminal" in p), None)
        return _json_safe({
            "dim_L": self.lie_report.dimension, "depth_L": self.lie_report.max_depth,
            "dim_V": self.obs_report.dimension, "depth_V": self.obs_report.max_depth,
            "V_closed": self.obs_report.closed,
            "Q": [p["Q"] for p in per_phase], "W": [p["W"] for p in per_phase],
            "dS": [p["dS"] for p in per_phase],
            "J_terminal": j_terminal, "seed": self.seed,
            "lie_closure": self.lie_report.as_dict(),
            "observability_closure": self.obs_report.as_dict(),
            "phases": per_phase,
            "comparison": [{k: v for k, v in row.items() if k != "trajectory"}
                           for row in self.comparison],
        })


def build_system(cfg: ExperimentConfig) -> BilinearControlSystem:
    sc = cfg.system
    if sc.kind == "central_spin":
        return build_central_spin(sc.spec())
    drift = read_matrix_csv(cfg.resolve(sc.drift))
    controls = tuple(read_matrix_csv(cfg.resolve(c)) for c in sc.controls)
    obs = read_matrix_csv(cfg.resolve(sc.observable))
    return BilinearControlSystem(drift, controls, obs)


def initial_state(cfg: ExperimentConfig, sys: BilinearControlSystem) -> DensityState:
    if cfg.initial_state["kind"] == "all_up":
        return all_up_state(cfg.system.n_bath + 1)
    rho = DensityState(read_matrix_csv(cfg.resolve(cfg.initial_state["path"])))
    if rho.n != sys.n:
        raise ValidationError(f"initial state dim {rho.n} does not match system dim {sys.n}")
    return rho


def _fixed_schedule(cfg: ExperimentConfig, ph: PhaseConfig, t0: float, n_controls: int):
    if ph.amplitudes is not None:
        amps = np.array(ph.amplitudes, dtype=float)
    else:
        try:
            amps = np.loadtxt(cfg.resolve(ph.path), delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read amplitudes {ph.path}: {exc}") from exc
    if amps.ndim == 1:
        amps = amps[:, None]
    if amps.shape != (cfg.n_slots, n_controls):
        raise ValidationError(f"fixed amplitudes must have shape ({cfg.n_slots}, {n_controls}), "
                              f"got {amps.shape}")
    return ControlSchedule(t0, t0 + cfg.tau, amps)


def phase_schedule(cfg: ExperimentConfig, ph: PhaseConfig, t0: float,
                   sys: BilinearControlSystem) -> ControlSchedule:
    """Schedule for a non-optimised phase starting at ``t0``."""
    if ph.kind == "gaussian":
        if sys.n_controls != 1:
            raise ValidationError("gaussian phase needs a single-control system")
        return gaussian_schedule(t0, t0 + cfg.tau, cfg.n_slots, ph.amplitude, ph.center, ph.sigma)
    if ph.kind == "fixed":
        return _fixed_schedule(cfg, ph, t0, sys.n_controls)
    raise ValidationError(f"phase kind {ph.kind!r} has no fixed schedule")


def run_experiment(cfg: ExperimentConfig, out_dir: Path | str | None = None) -> ExperimentResult:
    """Build, close, decompose, evolve and record; optionally write CSV/JSON outputs."""
    cfg.validate()
    with stage("setup", "build system"):
        sys = build_system(cfg)
        rho = initial_state(cfg, sys)
    with stage("setup", "close algebra"):
        lie, lie_rep = close_algebra([sys.drift, *sys.controls], cfg.rank_tol)
    with stage("setup", "observability space"):
        v_raw, obs_rep = observability_space(lie, sys.observable, cfg.rank_tol,
                                             max_depth=cfg.observability_max_depth)
    with stage("setup", "gram-schmidt"):
        v = gram_schmidt(v_raw, cfg.rank_tol)
    logger.info("dim L = %d (depth %d), dim V = %d (depth %d)", lie_rep.dimension,
                lie_rep.max_depth, obs_rep.dimension, obs_rep.max_depth)

    results: list[PhaseResult] = []
    rho_k = rho.matrix
    for p, ph in enumerate(cfg.phases):
        name = f"phase {p} ({ph.kind})"
        t0 = p * cfg.tau
        opt = None
        if ph.kind == "optimize":
            with stage(name, "optimize"):
                ocfg = cfg.optimizer.build(cfg.n_slots, float(cfg.tau), t0, cfg.seed)
                opt = grape_optimize(sys, rho_k, ocfg)
                sched = opt.schedule
        else:
            with stage(name, "schedule"):
                sched = phase_schedule(cfg, ph, t0, sys)
        with stage(name, "propagate"):
            states = propagate(sys, sched, rho_k)
        with stage(name, "record"):
            tr = record_thermo(sys, v, sched, states, keep_states=False,
                               on_psd_violation=cfg.on_psd_violation)
        results.append(PhaseResult(ph.kind, sched, tr, states, opt))
        rho_k = states[-1]

    comparison = []
    if cfg.comparison is not None:
        comparison = _run_comparison(cfg, sys, v, results)

    res = ExperimentResult(sys, v, lie_rep, obs_rep, results, comparison, cfg.seed)
    if out_dir is not None:
        write_outputs(res, Path(out_dir))
    return res


def _state_at(cfg: ExperimentConfig, results: list[PhaseResult], t: float) -> np.ndarray:
    p = min(int(t // cfg.tau), len(results) - 1)
    if p < 0:
        raise ValidationError(f"comparison start time {t} precedes the experiment")
    sched = results[p].schedule
    k = int(round((t - sched.t0) / sched.dt))
    if not 0 <= k <= sched.n_slots or abs(sched.t0 + k * sched.dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValidationError(f"comparison start time {t} is not on the time grid")
    return results[p].states[k]


def _run_comparison(cfg: ExperimentConfig, sys, v, results) -> list[dict]:
    """Replay one phase's schedule from states taken at other times.

    The phase's own start is always included. Rows are ordered as given,
    each with the peak-to-peak swing of the observable energy.
    """
    idx = cfg.comparison["phase"]
    sched = results[idx].schedule
    starts = [float(t) for t in cfg.comparison["start_times"]]
    if sched.t0 not in starts:
        starts.append(sched.t0)
    rows = []
    for ts in starts:
        with stage(f"comparison from t={ts:g}", "propagate"):
            rho_s = _state_at(cfg, results, ts)
            states = propagate(sys, sched, rho_s)
            tr = record_thermo(sys, v, sched, states, keep_states=False, on_psd_violation="nan")
        rows.append({"start_time": ts, "O_peak_to_peak": float(np.ptp(tr.obs_energy)),
                     "S_start": float(tr.entropy[0]), "trajectory": tr})
    return rows


def write_outputs(res: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    combined = out / "series.csv"
    for p, ph in enumerate(res.phases):
        write_series_csv(out / f"phase_{p}.csv", ph.trajectory)
        if p == 0:
            write_series_csv(combined, ph.trajectory)
        else:
            _append_series(combined, ph.trajectory)
        sched = ph.schedule
        np.savetxt(out / f"phase_{p}_controls.csv",
                   np.column_stack([sched.times[:-1], sched.amplitudes]), delimiter=",",
                   fmt="%.17g", header="t_start," + ",".join(
                       f"u{c}" for c in range(sched.n_controls)), comments="")
    for row in res.comparison:
        write_series_csv(out / f"comparison_t{row['start_time']:g}.csv", row["trajectory"])
    summary = res.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
