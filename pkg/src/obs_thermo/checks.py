"""Invariant checks run against a recorded experiment (the ``check`` subcommand)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BilinearControlSystem, ControlSchedule, ThermoTrajectory
from .lie import OperatorBasis, close_algebra, project_onto
from .models import CentralSpinSpec, build_central_spin, dim_formula
from .operators import expm_unitary


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


FD_STEP = 1e-6


def state_rate_fd(sys: BilinearControlSystem, sched: ControlSchedule, states: np.ndarray,
                  h: float = FD_STEP) -> np.ndarray:
    """Central difference ``(rho(+h) - rho(-h)) / 2h`` at every grid point.

    Each state is propagated exactly by ``+-h`` under the Hamiltonian used for
    that sample (slot ``k``, the last sample reusing the final slot), so the
    only errors are the O(h^2) stencil truncation and roundoff of order
    ``eps / h``. Differencing the recorded series instead is limited by the
    grid spacing.
    """
    hs = sys.hamiltonians(sched.amplitudes)
    out = np.empty_like(states)
    for k, rho in enumerate(states):
        hk = hs[min(k, sched.n_slots - 1)]
        up, um = expm_unitary(hk, h), expm_unitary(hk, -h)
        out[k] = (up @ rho @ up.conj().T - um @ rho @ um.conj().T) / (2 * h)
    return out


def heat_rate_fd(sys: BilinearControlSystem, v: OperatorBasis, sched: ControlSchedule,
                 states: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Finite-difference ``dU/dt`` along a trajectory (see :func:`state_rate_fd`)."""
    rates = state_rate_fd(sys, sched, states, h)
    hs = sys.hamiltonians(sched.amplitudes)
    out = np.empty(len(states))
    for k in range(len(states)):
        _, _, h_u = project_onto(v, hs[min(k, sched.n_slots - 1)])
        out[k] = np.vdot(h_u, rates[k]).real
    return out


def theta_rate_fd(sys: BilinearControlSystem, v: OperatorBasis, sched: ControlSchedule,
                  states: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Finite-difference ``d theta / dt``, shape ``(T, dim V)``."""
    rates = state_rate_fd(sys, sched, states, h)
    flat_b = v.elements.reshape(len(v), -1)
    return (rates.reshape(len(states), -1) @ flat_b.conj().T).real


def unitarity_drift(states: np.ndarray) -> tuple[float, float]:
    tr = np.abs(np.einsum("tii->t", states) - 1.0).max()
    pur = np.einsum("tab,tab->t", states.conj(), states).real
    return float(tr), float(np.abs(pur - pur[0]).max())


def phase_checks(label: str, sys: BilinearControlSystem, v: OperatorBasis,
                 sched: ControlSchedule, states: np.ndarray,
                 tr: ThermoTrajectory) -> list[CheckResult]:
    out = []
    d_tr, d_pur = unitarity_drift(states)
    out.append(CheckResult(f"{label} trace/purity", d_tr < 1e-10 and d_pur < 1e-10,
                           f"trace drift {d_tr:.2e}, purity drift {d_pur:.2e}"))
    n = sys.n
    s_coeffs = np.array([np.vdot(b, sys.observable).real for b in v.elements])
    y_rec = np.trace(sys.observable).real / n + (tr.theta @ s_coeffs if len(v) else 0.0)
    err = float(np.abs(y_rec - tr.output).max())
    out.append(CheckResult(f"{label} output identity", err < 1e-10, f"max error {err:.2e}"))
    e_sum = tr.obs_energy + tr.unobs_energy
    direct = np.einsum("tab,tab->t", sys.hamiltonians(sched.amplitudes)[
        np.minimum(np.arange(len(states)), sched.n_slots - 1)].conj(), states).real
    err = float(np.abs(e_sum - direct).max())
    out.append(CheckResult(f"{label} O + U = <H>", err < 1e-10, f"max error {err:.2e}"))
    amps = sched.amplitudes
    if np.ptp(amps, axis=0).max(initial=0.0) < 1e-12:
        de = float(np.abs(tr.energy - tr.energy[0]).max())
        out.append(CheckResult(f"{label} energy conservation", de < 1e-9, f"max |dE| {de:.2e}"))
        fd = heat_rate_fd(sys, v, sched, states)
        rel = np.abs(tr.dissipation - fd) / np.maximum(1.0, np.abs(fd))
        out.append(CheckResult(f"{label} <D> = dU/dt", float(rel[1:-1].max()) < 1e-5,
                               f"max relative error {rel[1:-1].max():.2e}"))
    s = tr.entropy[np.isfinite(tr.entropy)]
    bad = int(np.isnan(tr.entropy).sum())
    ok = bad == 0 and bool(np.all((s >= -1e-12) & (s <= np.log(n) + 1e-10)))
    out.append(CheckResult(f"{label} 0 <= S <= log n", ok,
                           f"{bad} samples with non-positive effective state" if bad
                           else f"range [{s.min():.6f}, {s.max():.6f}]"))
    return out


def formula_check(n_bath: int) -> CheckResult:
    spec = CentralSpinSpec(n_bath)
    sys = build_central_spin(spec)
    _, rep = close_algebra([sys.drift, *sys.controls])
    want = dim_formula(n_bath)
    return CheckResult(f"dim L formula N={n_bath}", rep.dimension == want,
                       f"closure {rep.dimension}, formula {want}")
