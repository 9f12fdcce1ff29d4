"""Dynamical Lie algebra and observability space generation.

Algebra elements are stored through Hermitian representatives: a Hermitian
``B`` stands for the skew-Hermitian ``iB``. On representatives the Lie
bracket becomes ``(A, B) -> i[A, B]``, which maps Hermitian pairs to
Hermitian matrices, so every coefficient we deal with is real.

Linear independence is decided against an incrementally maintained
orthonormal row space in the real coordinates ``(Re A, Im A)``. For
Hermitian matrices the Euclidean product of those coordinates equals the
Hilbert-Schmidt product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import RankDeficientError, ValidationError
from .operators import DEFAULT_TOL, as_operator, require_hermitian

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-9


def bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lie bracket on Hermitian representatives, ``i[a, b]``."""
    return 1j * (a @ b - b @ a)


def traceless_part(s) -> np.ndarray:
    s = as_operator(s)
    n = s.shape[0]
    return s - (np.trace(s) / n) * np.eye(n)


def _realvec(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


@dataclass(frozen=True)
class OperatorBasis:
    """Ordered basis of a real subspace of traceless Hermitian operators.

    ``elements`` has shape ``(k, n, n)``; ``depths[i]`` is the commutator
    round in which element ``i`` entered the basis.
    """

    elements: np.ndarray
    depths: tuple[int, ...]
    orthonormal: bool = False
    n: int = field(default=0)

    def __post_init__(self):
        els = np.asarray(self.elements, dtype=complex)
        if els.ndim != 3 or els.shape[1] != els.shape[2]:
            raise ValidationError(f"basis elements must have shape (k, n, n), got {els.shape}")
        if len(self.depths) != els.shape[0]:
            raise ValidationError("one depth per element required")
        els = els.copy()
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "n", els.shape[1])

    @classmethod
    def empty(cls, n: int) -> "OperatorBasis":
        return cls(np.zeros((0, n, n), dtype=complex), (), orthonormal=True)

    @classmethod
    def from_matrices(cls, mats: Iterable, depths: Sequence[int] | None = None,
                      orthonormal: bool = False) -> "OperatorBasis":
        mats = [as_operator(m) for m in mats]
        if not mats:
            raise ValidationError("use OperatorBasis.empty for an empty basis")
        if depths is None:
            depths = [0] * len(mats)
        return cls(np.stack(mats), tuple(depths), orthonormal)

    def __len__(self) -> int:
        return self.elements.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.elements[i]

    def __iter__(self):
        return iter(self.elements)

    @property
    def max_depth(self) -> int:
        return max(self.depths, default=0)

    def gram(self) -> np.ndarray:
        """Real Gram matrix ``Re <B_i, B_j>``."""
        flat = self.elements.reshape(len(self), -1)
        return (flat.conj() @ flat.T).real

    def vectors(self) -> np.ndarray:
        """Real coordinate rows, shape ``(k, 2 n^2)``."""
        flat = self.elements.reshape(len(self), -1)
        return np.concatenate([flat.real, flat.imag], axis=1)


@dataclass(frozen=True)
class ClosureReport:
    dimension: int
    max_depth: int
    generator_count: int
    rank_tol_used: float
    bracket_rule: str
    depth_counts: tuple[int, ...]
    # False when a depth cap stopped the iteration before a round came back empty.
    closed: bool = True

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "max_depth": self.max_depth,
            "generator_count": self.generator_count,
            "rank_tol_used": self.rank_tol_used,
            "bracket_rule": self.bracket_rule,
            "depth_counts": list(self.depth_counts),
            "closed": self.closed,
        }


class SpanTracker:
    """Incremental rank test against an orthonormal row space.

    A candidate is accepted when the norm of its residual after projection
    exceeds ``rank_tol * max(|candidate|, scale)``. Callers pass the product
    of the bracket operands' norms as ``scale``, so a bracket that vanishes
    in exact arithmetic (pure roundoff) is not mistaken for a new direction.
    Projection is done twice (classical Gram-Schmidt with one
    re-orthogonalisation pass).
    """

    def __init__(self, length: int, rank_tol: float = DEFAULT_RANK_TOL):
        self.rank_tol = rank_tol
        self._q = np.zeros((0, length))

    def __len__(self) -> int:
        return self._q.shape[0]

    def residual(self, v: np.ndarray) -> np.ndarray:
        q = self._q
        r = v - q.T @ (q @ v)
        return r - q.T @ (q @ r)

    def try_add(self, v: np.ndarray, scale: float = 0.0) -> bool:
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return False
        r = self.residual(v)
        nr = np.linalg.norm(r)
        if nr <= self.rank_tol * max(nv, scale):
            return False
        self._q = np.vstack([self._q, r / nr])
        return True


def _prepare(mats: Sequence, name: str) -> list[np.ndarray]:
    out = [require_hermitian(m, DEFAULT_TOL, name) for m in mats]
    dims = {m.shape for m in out}
    if len(dims) > 1:
        raise ValidationError(f"{name}s have mismatched dimensions: {sorted(dims)}")
    return out


def _grow(seeds: list[np.ndarray], partners: list[np.ndarray], rank_tol: float,
          max_depth: int | None) -> tuple[list[np.ndarray], list[int], bool]:
    """Shared closure loop.

    Seeds form depth 0; round k brackets every element accepted in round
    k-1 with every partner, in (element index, partner index) order.
    Brackets of older elements were already tried in earlier rounds and
    can only produce vectors dependent on a smaller span, so only the newest
    layer needs to be visited.
    """
    n = seeds[0].shape[0]
    tracker = SpanTracker(2 * n * n, rank_tol)
    elements: list[np.ndarray] = []
    depths: list[int] = []

    def offer(c: np.ndarray, depth: int, scale: float = 0.0) -> bool:
        if not tracker.try_add(_realvec(c), scale):
            return False
        # unit HS norm keeps nested brackets from growing geometrically
        elements.append(c / np.linalg.norm(c))
        depths.append(depth)
        return True

    norms = [float(np.linalg.norm(p)) for p in partners]
    for s in seeds:
        offer(s, 0)
    if not elements:
        return elements, depths, True

    start, k = 0, 0
    while True:
        end = len(elements)
        if start == end:
            return elements, depths, True
        if max_depth is not None and k >= max_depth:
            # probe one more round without keeping results
            probe = SpanTracker(2 * n * n, rank_tol)
            probe._q = tracker._q.copy()
            grows = any(probe.try_add(_realvec(bracket(p, elements[i])), norms[j])
                        for i in range(start, end) for j, p in enumerate(partners))
            return elements, depths, not grows
        k += 1
        for i in range(start, end):
            b = elements[i]
            for p, np_ in zip(partners, norms):
                # stored elements have unit norm, so |p| |b| = |p|
                offer(bracket(p, b), k, np_)
        logger.debug("closure round %d: %d new elements", k, len(elements) - end)
        start = end


def close_algebra(generators: Sequence, rank_tol: float = DEFAULT_RANK_TOL,
                  max_depth: int | None = None) -> tuple[OperatorBasis, ClosureReport]:
    """Basis of the real Lie algebra generated by ``{i G : G in generators}``.

    Generators are Hermitian. Their identity components are dropped, since
    they only contribute a central ``u(1)`` phase and the basis is kept
    inside ``su(n)``. Round k brackets the previous round's additions with
    the generators only.
    """
    if len(generators) == 0:
        raise ValidationError("close_algebra needs at least one generator")
    gens = [traceless_part(g) for g in _prepare(generators, "generator")]
    elements, depths, closed = _grow(gens, gens, rank_tol, max_depth)
    n = gens[0].shape[0]
    basis = (OperatorBasis(np.stack(elements), tuple(depths)) if elements
             else OperatorBasis.empty(n))
    report = _report(basis, len(gens), rank_tol, "generators", closed)
    return basis, report


def observability_space(lie_basis: OperatorBasis, s, rank_tol: float = DEFAULT_RANK_TOL,
                        max_depth: int | None = None) -> tuple[OperatorBasis, ClosureReport]:
    """Basis of the span of ``S'`` and all its iterated brackets with the algebra.

    ``s`` is a Hermitian observable or a sequence of them; depth 0 holds their
    traceless parts. Returns an empty basis when every observable is
    proportional to the identity. ``max_depth`` truncates the iteration; the
    report's ``closed`` flag says whether the truncated span happens to be
    invariant anyway.
    """
    obs = [s] if np.ndim(s) == 2 else list(s)
    seeds = [traceless_part(o) for o in _prepare(obs, "observable")]
    n = seeds[0].shape[0]
    if len(lie_basis) and lie_basis.n != n:
        raise ValidationError(f"observable dim {n} does not match algebra dim {lie_basis.n}")
    elements, depths, closed = _grow(seeds, list(lie_basis.elements), rank_tol, max_depth)
    basis = (OperatorBasis(np.stack(elements), tuple(depths)) if elements
             else OperatorBasis.empty(n))
    report = _report(basis, len(lie_basis), rank_tol, "lie_basis", closed)
    return basis, report


def _report(basis: OperatorBasis, n_gen: int, rank_tol: float, rule: str,
            closed: bool) -> ClosureReport:
    counts = np.bincount(np.asarray(basis.depths, dtype=int), minlength=1) if len(basis) else [0]
    return ClosureReport(
        dimension=len(basis),
        max_depth=basis.max_depth,
        generator_count=n_gen,
        rank_tol_used=rank_tol,
        bracket_rule=rule,
        depth_counts=tuple(int(c) for c in counts),
        closed=closed,
    )


def gram_schmidt(basis: OperatorBasis, rank_tol: float = DEFAULT_RANK_TOL) -> OperatorBasis:
    """Orthonormalise under the real HS product, preserving order and depths."""
    out: list[np.ndarray] = []
    for k, a in enumerate(basis.elements):
        x = a.copy()
        for _ in range(2):
            for q in out:
                x = x - np.vdot(q, x).real * q
        nx = np.linalg.norm(x)
        if nx <= rank_tol * max(np.linalg.norm(a), np.finfo(float).tiny):
            raise RankDeficientError(f"element {k} is linearly dependent on its predecessors")
        out.append(x / nx)
    if not out:
        return OperatorBasis.empty(basis.n)
    return OperatorBasis(np.stack(out), basis.depths, orthonormal=True)


def _coefficients(basis: OperatorBasis, a: np.ndarray) -> np.ndarray:
    flat = basis.elements.reshape(len(basis), -1)
    return (flat.conj() @ a.reshape(-1)).real


def project_onto(basis: OperatorBasis, a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthogonal projection of ``a`` onto the span of an orthonormal basis.

    Returns ``(coeffs, in_span, residual)`` with ``coeffs[i] = <B_i, a>``.
    Coefficients are real because both operands are Hermitian.
    """
    if not basis.orthonormal:
        raise ValidationError("project_onto requires an orthonormal basis (run gram_schmidt)")
    a = as_operator(a)
    if a.shape[0] != basis.n:
        raise ValidationError(f"operator dim {a.shape[0]} does not match basis dim {basis.n}")
    if len(basis) == 0:
        return np.zeros(0), np.zeros_like(a), a.copy()
    coeffs = _coefficients(basis, a)
    in_span = np.tensordot(coeffs, basis.elements, axes=1)
    return coeffs, in_span, a - in_span


def _orthonormal(basis: OperatorBasis, rank_tol: float) -> OperatorBasis:
    return basis if basis.orthonormal else gram_schmidt(basis, rank_tol)


def span_contains(basis: OperatorBasis, a, rank_tol: float = DEFAULT_RANK_TOL) -> bool:
    a = as_operator(a)
    _, _, res = project_onto(_orthonormal(basis, rank_tol), a)
    return bool(np.linalg.norm(res) <= rank_tol * max(np.linalg.norm(a), 1.0))


def is_ideal(sub: OperatorBasis, full: OperatorBasis, rank_tol: float = DEFAULT_RANK_TOL) -> bool:
    """True iff ``i[x, y]`` stays in ``span(sub)`` for every ``x`` in full, ``y`` in sub."""
    q = _orthonormal(sub, rank_tol)
    for x in full.elements:
        for y in sub.elements:
            c = bracket(x, y)
            _, _, res = project_onto(q, c)
            scale = max(np.linalg.norm(c), np.linalg.norm(x) * np.linalg.norm(y))
            if np.linalg.norm(res) > rank_tol * scale:
                return False
    return True


def same_span(a: OperatorBasis, b: OperatorBasis, tol: float = 1e-9) -> bool:
    """Compare the orthogonal projectors onto two spans."""
    if a.n != b.n:
        return False
    if len(a) != len(b):
        return False
    qa, _ = np.linalg.qr(a.vectors().T)
    qb, _ = np.linalg.qr(b.vectors().T)
    return bool(np.max(np.abs(qa @ qa.T - qb @ qb.T), initial=0.0) <= tol)
