"""Piecewise-constant bilinear control dynamics and thermodynamic recording."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PSDViolationError, ValidationError
from .lie import OperatorBasis
from .observability import DensityState, effective_spectrum, StateDecomposition
from .operators import as_operator, dagger, expm_unitary_batch, require_hermitian
from .thermo import ThermoSample, _entropy_from_eigs, series_derivative


@dataclass(frozen=True)
class BilinearControlSystem:
    """``H(u) = drift + sum_i u_i controls[i]`` with measured observable ``observable``."""

    drift: np.ndarray
    controls: tuple[np.ndarray, ...]
    observable: np.ndarray

    def __post_init__(self):
        drift = require_hermitian(self.drift, 1e-12, "drift")
        controls = tuple(require_hermitian(c, 1e-12, "control") for c in self.controls)
        obs = require_hermitian(self.observable, 1e-12, "observable")
        for m in (*controls, obs):
            if m.shape != drift.shape:
                raise ValidationError(f"operator shape {m.shape} differs from drift {drift.shape}")
        for m in (drift, *controls, obs):
            m.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "observable", obs)

    @property
    def n(self) -> int:
        return self.drift.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def hamiltonian(self, u: Sequence[float]) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != self.n_controls:
            raise ValidationError(f"expected {self.n_controls} amplitudes, got {u.shape[0]}")
        h = self.drift.copy()
        for a, c in zip(u, self.controls):
            h = h + a * c
        return h

    def hamiltonians(self, amplitudes: np.ndarray) -> np.ndarray:
        """Stack of slot Hamiltonians for an ``(n_slots, n_controls)`` amplitude array."""
        amps = np.asarray(amplitudes, dtype=float)
        if amps.ndim != 2 or amps.shape[1] != self.n_controls:
            raise ValidationError(
                f"amplitudes must have shape (n_slots, {self.n_controls}), got {amps.shape}")
        hs = np.broadcast_to(self.drift, (amps.shape[0], self.n, self.n)).copy()
        if self.n_controls:
            hs += np.tensordot(amps, np.stack(self.controls), axes=1)
        return hs


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant amplitudes on a uniform grid over ``[t0, t1]``."""

    t0: float
    t1: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps[:, None]
        if amps.ndim != 2 or amps.shape[0] < 1:
            raise ValidationError("amplitudes must be a non-empty (n_slots, n_controls) array")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes must be finite")
        if not self.t1 > self.t0:
            raise ValidationError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zeros(cls, t0: float, t1: float, n_slots: int, n_controls: int = 1) -> "ControlSchedule":
        return cls(t0, t1, np.zeros((n_slots, n_controls)))

    @property
    def n_slots(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_controls(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_slots

    @property
    def times(self) -> np.ndarray:
        """Slot boundaries, ``n_slots + 1`` points."""
        return np.linspace(self.t0, self.t1, self.n_slots + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n_slots) + 0.5) * self.dt

    def with_amplitudes(self, amplitudes) -> "ControlSchedule":
        return ControlSchedule(self.t0, self.t1, amplitudes)


def gaussian_schedule(t0: float, t1: float, n_slots: int, amplitude: float = 1.0,
                      center: float = 0.0, sigma: float = 0.1) -> ControlSchedule:
    """Single-control Gaussian pulse sampled at slot midpoints."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    sched = ControlSchedule.zeros(t0, t1, n_slots)
    tm = sched.midpoints
    return sched.with_amplitudes(amplitude * np.exp(-((tm - center) ** 2) / (2 * sigma**2)))


def slot_propagators(sys: BilinearControlSystem, sched: ControlSchedule):
    if sched.n_controls != sys.n_controls:
        raise ValidationError(
            f"schedule has {sched.n_controls} controls, system has {sys.n_controls}")
    return expm_unitary_batch(sys.hamiltonians(sched.amplitudes), sched.dt)


def propagate(sys: BilinearControlSystem, sched: ControlSchedule, rho0) -> np.ndarray:
    """States at all slot boundaries, shape ``(n_slots + 1, n, n)``.

    ``rho_{k+1} = U_k rho_k U_k^dagger`` with the exact slot propagator.
    """
    rho = rho0.matrix if isinstance(rho0, DensityState) else as_operator(rho0)
    if rho.shape != (sys.n, sys.n):
        raise ValidationError(f"initial state shape {rho.shape} does not match system dim {sys.n}")
    us, _, _ = slot_propagators(sys, sched)
    states = np.empty((sched.n_slots + 1, sys.n, sys.n), dtype=complex)
    states[0] = rho
    for k, u in enumerate(us):
        rho = u @ rho @ dagger(u)
        states[k + 1] = rho
    return states


@dataclass
class ThermoTrajectory:
    """Thermodynamic time series sampled at slot boundaries.

    Entropy entries are NaN where the effective state was not positive and
    the trajectory was recorded with ``on_psd_violation="nan"``.
    """

    t: np.ndarray
    output: np.ndarray
    obs_energy: np.ndarray
    unobs_energy: np.ndarray
    entropy: np.ndarray
    dissipation: np.ndarray
    theta: np.ndarray
    h_coeffs: np.ndarray
    states: np.ndarray | None = None
    min_effective_eig: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def energy(self) -> np.ndarray:
        return self.obs_energy + self.unobs_energy

    def sample(self, k: int) -> ThermoSample:
        return ThermoSample(
            t=float(self.t[k]), obs_energy=float(self.obs_energy[k]),
            unobs_energy=float(self.unobs_energy[k]), entropy=float(self.entropy[k]),
            dissipation=float(self.dissipation[k]), output=float(self.output[k]),
            theta=self.theta[k], h_coeffs=self.h_coeffs[k])

    @property
    def samples(self) -> list[ThermoSample]:
        return [self.sample(k) for k in range(len(self))]

    def heat_rate_series(self) -> np.ndarray:
        return series_derivative(self.unobs_energy, self.dt)

    def work_rate_series(self) -> np.ndarray:
        return series_derivative(self.obs_energy, self.dt)

    @property
    def heat(self) -> float:
        return float(self.unobs_energy[-1] - self.unobs_energy[0])

    @property
    def work(self) -> float:
        return float(self.obs_energy[-1] - self.obs_energy[0])

    @property
    def entropy_change(self) -> float:
        return float(self.entropy[-1] - self.entropy[0])


def record_thermo(sys: BilinearControlSystem, v: OperatorBasis, sched: ControlSchedule,
                  states: np.ndarray, keep_states: bool = True,
                  on_psd_violation: str = "raise") -> ThermoTrajectory:
    """Observability decomposition and energy accounting along a trajectory.

    Sample ``k`` is split against the Hamiltonian of slot ``k``; the final
    sample reuses the last slot. ``on_psd_violation`` is ``"raise"`` or
    ``"nan"``.
    """
    if on_psd_violation not in ("raise", "nan"):
        raise ValidationError(f"unknown on_psd_violation policy {on_psd_violation!r}")
    if not v.orthonormal:
        raise ValidationError("record_thermo needs an orthonormal observability basis")
    states = np.asarray(states)
    if states.shape[0] != sched.n_slots + 1:
        raise ValidationError("need one state per slot boundary")
    eye_n = np.eye(sys.n) / sys.n
    r = len(v)
    hs = sys.hamiltonians(sched.amplitudes)
    slot_of = np.minimum(np.arange(sched.n_slots + 1), sched.n_slots - 1)
    h_t = hs[slot_of]

    flat_b = v.elements.reshape(r, -1)
    flat_s = states.reshape(len(states), -1)
    theta = (flat_s @ flat_b.conj().T).real
    hc = (h_t.reshape(len(h_t), -1) @ flat_b.conj().T).real
    h_o = np.tensordot(hc, v.elements, axes=1) if r else np.zeros_like(h_t)
    h_u = h_t - h_o
    d_ops = 1j * (h_o @ h_u - h_u @ h_o)

    def expect(ops):
        return np.einsum("tab,tab->t", ops.conj(), states).real

    obs_e = expect(h_o)
    unobs_e = expect(h_u)
    diss = expect(d_ops)
    output = np.einsum("ab,tab->t", sys.observable.conj(), states).real

    rho_o = np.tensordot(theta, v.elements, axes=1) if r else np.zeros_like(states)
    entropy = np.empty(len(states))
    min_eig = np.empty(len(states))
    for k in range(len(states)):
        dec = StateDecomposition(rho=states[k], rho_o=rho_o[k],
                                 rho_u=states[k] - eye_n - rho_o[k], theta=theta[k])
        min_eig[k] = np.linalg.eigvalsh(dec.effective_matrix())[0]
        try:
            w, _ = effective_spectrum(dec)
            entropy[k] = _entropy_from_eigs(w)
        except PSDViolationError as exc:
            if on_psd_violation == "raise":
                raise PSDViolationError(f"t={sched.times[k]:.6g}: {exc}") from exc
            entropy[k] = np.nan
    return ThermoTrajectory(
        t=sched.times, output=output, obs_energy=obs_e, unobs_energy=unobs_e,
        entropy=entropy, dissipation=diss, theta=theta, h_coeffs=hc,
        states=states if keep_states else None, min_effective_eig=min_eig)


def evolve(sys: BilinearControlSystem, v: OperatorBasis, sched: ControlSchedule, rho0,
           on_psd_violation: str = "raise") -> ThermoTrajectory:
    """``propagate`` followed by ``record_thermo``."""
    states = propagate(sys, sched, rho0)
    return record_thermo(sys, v, sched, states, on_psd_violation=on_psd_violation)
