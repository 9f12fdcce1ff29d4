"""Observability decomposition of states and Hamiltonians.

Given an orthonormal basis ``{B_i}`` of the observability space (Hermitian
representatives), a state splits as ``rho = I/n + rho_o + rho_u`` with
``rho_o = sum_i <B_i, rho> B_i`` and ``rho_u`` the traceless remainder.
Only ``rho_o`` affects the measured output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import PSDViolationError, ValidationError
from .lie import OperatorBasis, bracket, project_onto
from .operators import as_operator, dagger, is_hermitian, require_hermitian

PSD_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class DensityState:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_operator(self.matrix)
        if not is_hermitian(m, 1e-10):
            raise ValidationError("density matrix is not Hermitian")
        m = 0.5 * (m + dagger(m))
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-12:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -1e-10:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, psi) -> "DensityState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityState":
        return cls(np.eye(n, dtype=complex) / n)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityState) else as_operator(rho)


@dataclass(frozen=True)
class StateDecomposition:
    rho: np.ndarray
    rho_o: np.ndarray
    rho_u: np.ndarray
    theta: np.ndarray

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    def effective_matrix(self) -> np.ndarray:
        """``rho_o + I/n`` before any PSD handling."""
        return self.rho_o + np.eye(self.n) / self.n

    def effective_state(self, clamp_tol: float = PSD_CLAMP_TOL) -> np.ndarray:
        """The effective density matrix ``rho_o + I/n``.

        Eigenvalues in ``[-clamp_tol, 0)`` are set to zero and the trace is
        restored; anything more negative raises :class:`PSDViolationError`.
        """
        w, v = effective_spectrum(self, clamp_tol)
        return (v * w) @ dagger(v)


def effective_spectrum(dec: StateDecomposition,
                       clamp_tol: float = PSD_CLAMP_TOL) -> tuple[np.ndarray, np.ndarray]:
    eff = dec.effective_matrix()
    w, v = np.linalg.eigh(0.5 * (eff + dagger(eff)))
    if w[0] < -clamp_tol:
        raise PSDViolationError(
            f"effective state has eigenvalue {w[0]:.3e} < -{clamp_tol:g}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
    return w, v


def decompose_state(rho, v: OperatorBasis) -> StateDecomposition:
    m = _matrix(rho)
    if m.shape[0] != v.n:
        raise ValidationError(f"state dim {m.shape[0]} does not match basis dim {v.n}")
    n = m.shape[0]
    shifted = m - np.eye(n) / n
    theta, rho_o, rho_u = project_onto(v, shifted)
    return StateDecomposition(rho=m, rho_o=rho_o, rho_u=rho_u, theta=theta)


def decompose_states(states: np.ndarray, v: OperatorBasis) -> np.ndarray:
    """Coefficients ``theta`` for a stack of states, shape ``(T, dim V)``.

    Basis elements are traceless, so the ``I/n`` shift does not change them.
    """
    if not v.orthonormal:
        raise ValidationError("basis must be orthonormal")
    flat_b = v.elements.reshape(len(v), -1)
    flat_s = np.asarray(states).reshape(len(states), -1)
    return (flat_s @ flat_b.conj().T).real


def measured_output(rho, s) -> float:
    """``y = Tr(S rho)``."""
    s = require_hermitian(s, 1e-10, "observable")
    m = _matrix(rho)
    if m.shape != s.shape:
        raise ValidationError(f"state {m.shape} and observable {s.shape} differ in shape")
    return float(np.vdot(s, m).real)


def output_from_decomposition(dec: StateDecomposition, s) -> float:
    """Output reconstructed from the observable part only: ``Tr(S)/n + <S, rho_o>``."""
    s = as_operator(s)
    return float((np.trace(s) / dec.n).real + np.vdot(s, dec.rho_o).real)


@dataclass(frozen=True)
class HamiltonianSplit:
    h: np.ndarray
    h_o: np.ndarray
    h_u: np.ndarray
    h_coeffs: np.ndarray


def split_hamiltonian(h, v: OperatorBasis) -> HamiltonianSplit:
    """``H = H_o + H_u`` with ``H_o`` in the span of ``v``; the identity part stays in ``H_u``."""
    h = require_hermitian(h, 1e-10, "Hamiltonian")
    if h.shape[0] != v.n:
        raise ValidationError(f"Hamiltonian dim {h.shape[0]} does not match basis dim {v.n}")
    coeffs, h_o, h_u = project_onto(v, h)
    return HamiltonianSplit(h=h, h_o=h_o, h_u=h_u, h_coeffs=coeffs)


class Stationarity(enum.Enum):
    COMMUTES_WITH_L = "commutes_with_L"
    SIMULTANEOUS_EIGENVECTOR = "simultaneous_eigenvector"
    NEITHER = "neither"


def stationarity_check(v: OperatorBasis, lie: OperatorBasis,
                       tol: float = 1e-10) -> list[Stationarity]:
    """Classify each basis element of ``v`` against the algebra ``lie``.

    An element commutes with L when every bracket with an algebra element
    vanishes. It is a simultaneous eigenvector when each bracket is a
    multiple of the element itself. For Hermitian operands the bracket is
    HS-orthogonal to the element, so that multiple is always zero and a
    non-commuting element reads ``NEITHER``.
    """
    if v.n != lie.n:
        raise ValidationError("bases act on different dimensions")
    out = []
    for b in v.elements:
        nb = np.linalg.norm(b)
        comms = [bracket(h, b) for h in lie.elements]
        scale = [np.linalg.norm(h) * nb for h in lie.elements]
        if all(np.linalg.norm(c) <= tol * max(sc, 1.0) for c, sc in zip(comms, scale)):
            out.append(Stationarity.COMMUTES_WITH_L)
            continue
        eigen = True
        for c, sc in zip(comms, scale):
            mu = np.vdot(b, c) / nb**2
            if np.linalg.norm(c - mu * b) > tol * max(sc, 1.0):
                eigen = False
                break
        out.append(Stationarity.SIMULTANEOUS_EIGENVECTOR if eigen else Stationarity.NEITHER)
    return out
