"""Central spin model: one spin-1/2 coupled to N bath spins by Heisenberg exchange."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import BilinearControlSystem
from .errors import ValidationError
from .observability import DensityState
from .operators import PAULI, embed_site


@dataclass(frozen=True)
class CentralSpinSpec:
    """Parameters of the central spin model.

    The drift is ``-B (sum of all sigma_z) + sum_j gamma_j sigma_c . sigma_j``.
    The stored control operator is ``-sigma_{control_axis}`` on the central
    spin, so a positive amplitude ``u`` realises ``-u sigma_y``.
    """

    n_bath: int
    field: float = 10.0
    couplings: tuple[float, ...] = ()
    control_axis: str = "y"
    measurement_axis: str = "x"

    def __post_init__(self):
        if not isinstance(self.n_bath, (int, np.integer)) or self.n_bath < 1:
            raise ValidationError(f"n_bath must be an integer >= 1, got {self.n_bath!r}")
        couplings = tuple(float(g) for g in self.couplings) or (-3.0,) * self.n_bath
        if len(couplings) != self.n_bath:
            raise ValidationError(f"expected {self.n_bath} couplings, got {len(couplings)}")
        if not all(np.isfinite(couplings)) or not np.isfinite(self.field):
            raise ValidationError("field and couplings must be finite")
        for axis in (self.control_axis, self.measurement_axis):
            if axis not in PAULI:
                raise ValidationError(f"axis must be one of x, y, z; got {axis!r}")
        object.__setattr__(self, "couplings", couplings)

    @property
    def n_sites(self) -> int:
        return self.n_bath + 1

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites


def build_central_spin(spec: CentralSpinSpec) -> BilinearControlSystem:
    m = spec.n_sites
    drift = -spec.field * sum(embed_site(PAULI["z"], k, m) for k in range(m))
    for j, gamma in enumerate(spec.couplings, start=1):
        for p in PAULI.values():
            drift = drift + gamma * embed_site(p, 0, m) @ embed_site(p, j, m)
    control = -embed_site(PAULI[spec.control_axis], 0, m)
    observable = embed_site(PAULI[spec.measurement_axis], 0, m)
    return BilinearControlSystem(drift, (control,), observable)


def all_up_state(n_sites: int) -> DensityState:
    """Every spin along +z (the first computational basis vector)."""
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[0] = 1.0
    return DensityState.from_ket(psi)


def dim_formula(n_bath: int) -> int:
    """Closed-form dimension of the dynamical Lie algebra for equal couplings."""
    n = int(n_bath)
    if n < 1:
        raise ValidationError("n_bath must be >= 1")
    if n % 2 == 0:
        num = (2 + n) * (9 + 4 * n * (4 + n))
    else:
        num = (1 + n) * (3 + 2 * n) * (7 + 2 * n)
    return num // 6
