"""Dense complex-matrix kernel.

Operators are plain ``numpy.ndarray`` objects of shape ``(n, n)`` and dtype
``complex128``. Tolerances are relative to the Frobenius norm of the input.
The inner product is Hilbert-Schmidt, ``<A, B> = Tr(A^dagger B)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import NotHermitianError, ValidationError

IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

DEFAULT_TOL = 1e-10


def as_operator(a) -> np.ndarray:
    """Return ``a`` as a square complex array, raising on bad shape or non-finite entries."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries")
    return arr


def _same_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^dagger b)``."""
    a, b = as_operator(a), as_operator(b)
    _same_dims(a, b)
    return complex(np.vdot(a, b))


def hs_norm(a) -> float:
    return float(np.linalg.norm(as_operator(a)))


def commutator(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    _same_dims(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    _same_dims(a, b)
    return a @ b + b @ a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().swapaxes(-1, -2)


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    scale = max(np.linalg.norm(a), 1.0)
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol * scale)


def is_unitary(u, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[-1]))) <= tol)


def require_hermitian(a, tol: float = DEFAULT_TOL, name: str = "operator") -> np.ndarray:
    a = as_operator(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError(f"{name} is not Hermitian (tol {tol:g})")
    return a


def embed_site(op, site: int, n_sites: int) -> np.ndarray:
    """Place a single-spin operator at ``site`` of an ``n_sites`` spin-1/2 register.

    Site 0 is the leftmost tensor factor.
    """
    op = as_operator(op)
    if op.shape != (2, 2):
        raise ValidationError("embed_site expects a 2x2 operator")
    if n_sites < 1 or not 0 <= site < n_sites:
        raise ValidationError(f"site {site} out of range for {n_sites} sites")
    factors = [op if k == site else IDENTITY_2 for k in range(n_sites)]
    return reduce(np.kron, factors)


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def herm_eig(a, tol: float = DEFAULT_TOL) -> Spectrum:
    a = require_hermitian(a, tol)
    w, v = np.linalg.eigh(0.5 * (a + dagger(a)))
    w.setflags(write=False)
    v.setflags(write=False)
    return Spectrum(w, v)


def expm_unitary(h, dt: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Propagator ``exp(-i h dt)`` via Hermitian eigendecomposition."""
    spec = herm_eig(h, tol)
    v = spec.eigenvectors
    return (v * np.exp(-1j * dt * spec.eigenvalues)) @ dagger(v)


def expm_unitary_pade(h, dt: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Propagator ``exp(-i h dt)`` via scaling-and-squaring (scipy).

    Independent route used to cross-check :func:`expm_unitary`.
    """
    h = require_hermitian(h, tol)
    return scipy.linalg.expm(-1j * dt * h)


def expm_unitary_batch(hs: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Propagators for a stack of Hermitian matrices ``(k, n, n)``.

    Returns ``(U, eigenvalues, eigenvectors)`` so callers can reuse the
    decomposition (e.g. for propagator derivatives). Hermiticity is not
    re-checked here.
    """
    w, v = np.linalg.eigh(hs)
    u = (v * np.exp(-1j * dt * w)[..., None, :]) @ dagger(v)
    return u, w, v
