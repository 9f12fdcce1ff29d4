"""Heat, work, dissipation, generalized entropy and SLD Fisher information.

Energies are split against an observability basis: ``O = <H_o, rho>``,
``U = <H_u, rho>``. Their time derivatives are the work and heat rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .lie import OperatorBasis
from .observability import (
    PSD_CLAMP_TOL,
    HamiltonianSplit,
    StateDecomposition,
    effective_spectrum,
)
from .operators import as_operator, dagger

ABELIAN_TOL = 1e-10
PURITY_TOL = 1e-10
SLD_EIG_TOL = 1e-12


@dataclass(frozen=True)
class ThermoSample:
    t: float
    obs_energy: float
    unobs_energy: float
    entropy: float
    dissipation: float
    output: float
    theta: np.ndarray
    h_coeffs: np.ndarray


def _rho(rho) -> np.ndarray:
    return rho.matrix if hasattr(rho, "matrix") else as_operator(rho)


def energies(rho, split: HamiltonianSplit) -> tuple[float, float]:
    """Observable and unobservable energies ``(O, U)``."""
    m = _rho(rho)
    return float(np.vdot(split.h_o, m).real), float(np.vdot(split.h_u, m).real)


def dissipation_operator(split: HamiltonianSplit) -> np.ndarray:
    """``D = i[H_o, H_u]``; its expectation is the heat rate for a constant Hamiltonian."""
    return 1j * (split.h_o @ split.h_u - split.h_u @ split.h_o)


def heat_rate(rho, d: np.ndarray) -> float:
    return float(np.vdot(d, _rho(rho)).real)


# --- series-level rates -------------------------------------------------------

def series_derivative(values, dt: float) -> np.ndarray:
    """Centered differences on a uniform grid, one-sided at the endpoints.

    Integrating the result with the trapezoidal rule telescopes to
    ``values[-1] - values[0]`` exactly.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 3:
        raise ValidationError("need at least 3 samples for a finite-difference rate")
    return np.gradient(values, dt, axis=0, edge_order=1)


def series_derivative_4th(values, dt: float) -> np.ndarray:
    """Fourth-order centered differences; second-order stencils near the ends."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 5:
        raise ValidationError("need at least 5 samples for the fourth-order stencil")
    out = np.gradient(v, dt, axis=0, edge_order=2)
    out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dt)
    return out


def work_and_heat_rates(obs_energy, unobs_energy, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(W_dot, Q_dot)`` from recorded ``O(t)`` and ``U(t)`` series."""
    return series_derivative(obs_energy, dt), series_derivative(unobs_energy, dt)


def integrate(rate, dt: float) -> float:
    return float(np.trapezoid(np.asarray(rate, dtype=float), dx=dt))


# --- entropy --------------------------------------------------------------------

def _entropy_from_eigs(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


def generalized_entropy(dec: StateDecomposition, clamp_tol: float = PSD_CLAMP_TOL) -> float:
    """von Neumann entropy of the effective state ``rho_o + I/n`` (``0 log 0 = 0``)."""
    w, _ = effective_spectrum(dec, clamp_tol)
    return _entropy_from_eigs(w)


def _log_effective(dec: StateDecomposition, clamp_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the effective state with ``log`` of its eigenvalues.

    Zero eigenvalues get log 0 := 0; first-order flows leave them fixed.
    """
    w, v = effective_spectrum(dec, clamp_tol)
    logw = np.zeros_like(w)
    pos = w > 1e-300
    logw[pos] = np.log(w[pos])
    return logw, v


def theta_rates(rho, h, v: OperatorBasis) -> np.ndarray:
    """``d theta_j / dt = <B_j, -i[H, rho]>`` under unitary dynamics."""
    m = _rho(rho)
    h = as_operator(h)
    rho_dot = -1j * (h @ m - m @ h)
    flat = v.elements.reshape(len(v), -1)
    return (flat.conj() @ rho_dot.reshape(-1)).real


def entropy_rate(dec: StateDecomposition, split: HamiltonianSplit, v: OperatorBasis,
                 clamp_tol: float = PSD_CLAMP_TOL) -> float:
    """``dS/dt = -<d rho_o/dt, log(rho_o + I/n)>`` for unitary evolution under ``split.h``."""
    if len(v) == 0:
        return 0.0
    logw, vecs = _log_effective(dec, clamp_tol)
    rates = theta_rates(dec.rho, split.h, v)
    rho_o_dot = np.tensordot(rates, v.elements, axes=1)
    diag = np.einsum("ai,ab,bi->i", vecs.conj(), rho_o_dot, vecs).real
    return float(-(diag * logw).sum())


def is_abelian(v: OperatorBasis, tol: float = ABELIAN_TOL) -> bool:
    els = v.elements
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            c = els[i] @ els[j] - els[j] @ els[i]
            if np.linalg.norm(c) > tol * max(np.linalg.norm(els[i]) * np.linalg.norm(els[j]), 1.0):
                return False
    return True


def channel_dissipators(split: HamiltonianSplit, v: OperatorBasis) -> np.ndarray:
    """Per-basis-element dissipators ``D_j = -i h_j [H_u, B_j]`` (orthonormal basis).

    They sum to ``i[H_o, H_u]``.
    """
    hu = split.h_u
    comms = np.einsum("ab,jbc->jac", hu, v.elements) - np.einsum("jab,bc->jac", v.elements, hu)
    return -1j * split.h_coeffs[:, None, None] * comms


def clausius_entropy_rate(dec: StateDecomposition, split: HamiltonianSplit, v: OperatorBasis,
                          clamp_tol: float = PSD_CLAMP_TOL) -> float:
    """Entropy rate assembled channel by channel, valid when ``v`` is abelian.

    ``dS/dt = sum_j (<D_j>/h_j) <B_j, log(rho_o + I/n)>``. Since
    ``D_j = -i h_j [H_u, B_j]``, the quotient is evaluated as
    ``<-i[H_u, B_j]>``, which is also its limit as ``h_j -> 0``. Channels
    with vanishing ``h_j`` therefore still contribute.
    """
    if not v.orthonormal:
        raise ValidationError("clausius_entropy_rate needs an orthonormal basis")
    if not is_abelian(v):
        raise ValidationError("clausius form requires pairwise commuting basis elements")
    logw, vecs = _log_effective(dec, clamp_tol)
    log_eff = (vecs * logw) @ dagger(vecs)
    hu = split.h_u
    comms = np.einsum("ab,jbc->jac", hu, v.elements) - np.einsum("jab,bc->jac", v.elements, hu)
    per_h = np.einsum("jab,ba->j", -1j * comms, dec.rho).real
    overlaps = np.einsum("jab,ab->j", v.elements.conj(), log_eff).real
    return float((per_h * overlaps).sum())


# --- Fisher information ---------------------------------------------------------

def fisher_pure(v: OperatorBasis) -> np.ndarray:
    """Gram matrix ``<B_i, B_j>`` of the basis (metric of the observability space)."""
    return v.gram()


def sld_operators(rho, v: OperatorBasis) -> np.ndarray:
    """Symmetric logarithmic derivatives for ``d rho / d theta_j = B_j``.

    Solves ``B_j = (L_j rho + rho L_j)/2`` in the eigenbasis of ``rho``:
    ``(L_j)_ab = 2 (B_j)_ab / (lam_a + lam_b)``. Entries with
    ``lam_a + lam_b < 1e-12`` are set to zero. For a mixed state this is
    only allowed where ``B_j`` has no weight; a pure state keeps the
    regularised solution.
    """
    m = _rho(rho)
    lam, u = np.linalg.eigh(0.5 * (m + dagger(m)))
    lam = np.clip(lam, 0.0, None)
    pure = abs(float(np.vdot(m, m).real) - 1.0) <= PURITY_TOL
    den = lam[:, None] + lam[None, :]
    keep = den >= SLD_EIG_TOL
    b_eig = np.einsum("ai,jab,bk->jik", u.conj(), v.elements, u)
    if not pure:
        lost = np.abs(b_eig[:, ~keep]).max(initial=0.0)
        if lost > 1e-10:
            raise NumericalError("SLD equation has no solution: basis element supported "
                                 "on the kernel of a mixed state")
    l_eig = np.where(keep, 2.0 * b_eig / np.where(keep, den, 1.0), 0.0)
    return np.einsum("ai,jik,bk->jab", u, l_eig, u.conj())


def sld_fisher_oracle(rho, v: OperatorBasis) -> np.ndarray:
    """``F_ij = (1/2) <rho, [L_i, L_j]_+>`` from explicitly solved SLDs."""
    m = _rho(rho)
    ls = sld_operators(m, v)
    # Tr(rho L_i L_j) for all pairs
    lr = np.einsum("iab,bc->iac", ls, m)
    g = np.einsum("iac,jca->ij", lr, ls)
    f = 0.5 * (g + g.T).real
    return f


def heat_rate_fisher(theta, theta_dot, h, h_dot, fisher) -> float:
    """Heat rate ``-sum_ij (theta_dot_i h_j + theta_i h_dot_j) F_ij``."""
    theta, theta_dot, h, h_dot = (np.asarray(x, dtype=float) for x in (theta, theta_dot, h, h_dot))
    fisher = np.asarray(fisher, dtype=float)
    r = theta.shape[0]
    if not (theta_dot.shape == h.shape == h_dot.shape == (r,) and fisher.shape == (r, r)):
        raise ValidationError("theta, theta_dot, h, h_dot and F must have matching lengths")
    h_matrix_dot = np.outer(theta_dot, h) + np.outer(theta, h_dot)
    return float(-(h_matrix_dot * fisher).sum())
