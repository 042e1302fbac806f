"""Small dense symmetric positive-definite matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DiagNotUnit,
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    SkewnessTooLarge,
)

MAX_DIM = 16
SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DispersionMatrix:
    """Validated dispersion matrix with cached factorization.

    Instances are immutable; build them through :func:`build_dispersion`.
    """

    entries: np.ndarray
    chol: np.ndarray = field(repr=False)
    inv: np.ndarray = field(repr=False)
    det: float
    unit_diag: bool

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))

    def is_correlation(self, atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.diag(self.entries) - 1.0) <= atol))

    def __eq__(self, other):
        if not isinstance(other, DispersionMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())


def build_dispersion(entries, require_unit_diag: bool = False, max_dim: int = MAX_DIM) -> DispersionMatrix:
    """Validate ``entries`` and return a :class:`DispersionMatrix`.

    Raises
    ------
    NotSymmetric
        If the asymmetry exceeds ``1e-12`` relative to the largest entry.
    NotPositiveDefinite
        If any Cholesky pivot falls below ``1e-12 * max|entry|``.
    DiagNotUnit
        If ``require_unit_diag`` and some diagonal entry differs from 1.
    """
    a = np.array(entries, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"dispersion must be square, got shape {a.shape}")
    d = a.shape[0]
    if d < 1 or d > max_dim:
        raise DimensionMismatch(f"dimension {d} outside [1, {max_dim}]")
    if not np.all(np.isfinite(a)):
        raise ValueError("dispersion entries must be finite")
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        raise NotPositiveDefinite("zero matrix")
    if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if require_unit_diag and np.any(np.abs(np.diag(a) - 1.0) > 1e-12):
        raise DiagNotUnit(f"diagonal must be all ones, got {np.diag(a)}")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(chol) ** 2
    if np.any(~np.isfinite(pivots)) or np.min(pivots) <= PIVOT_RTOL * scale:
        raise NotPositiveDefinite(f"smallest Cholesky pivot {np.min(pivots):.3e} too small")
    eye = np.eye(d)
    linv = np.linalg.solve(chol, eye)
    inv = linv.T @ linv
    inv = 0.5 * (inv + inv.T)
    det = float(np.prod(pivots))
    a.setflags(write=False)
    chol.setflags(write=False)
    inv.setflags(write=False)
    return DispersionMatrix(entries=a, chol=chol, inv=inv, det=det, unit_diag=require_unit_diag)


def correlation(rho: float) -> DispersionMatrix:
    """Bivariate correlation matrix ``[[1, rho], [rho, 1]]``."""
    return build_dispersion([[1.0, rho], [rho, 1.0]], require_unit_diag=True)


def quad_form(v, inv) -> float | np.ndarray:
    """Return ``v inv v^T``; ``v`` may carry leading batch axes."""
    inv = inv.inv if isinstance(inv, DispersionMatrix) else np.asarray(inv, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != inv.shape[0]:
        raise DimensionMismatch(f"vector length {v.shape[-1]} vs matrix {inv.shape}")
    out = np.einsum("...i,ij,...j->...", v, inv, v)
    # rounding can give -0.0 or tiny negatives at v = 0
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def skewness_norm(sigma: DispersionMatrix, delta) -> float:
    """``delta Sigma^-1 delta^T``."""
    return quad_form(np.asarray(delta, dtype=float), sigma)


def extended_dispersion(sigma: DispersionMatrix, delta) -> DispersionMatrix:
    """Block matrix ``[[1, delta], [delta^T, Sigma]]`` of the (d+1)-dim parent law."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (sigma.dim,):
        raise DimensionMismatch(f"delta must have shape ({sigma.dim},), got {delta.shape}")
    s = skewness_norm(sigma, delta)
    if not s < 1.0:
        raise SkewnessTooLarge(f"delta Sigma^-1 delta^T = {s:.6g} >= 1")
    d = sigma.dim
    big = np.empty((d + 1, d + 1))
    big[0, 0] = 1.0
    big[0, 1:] = delta
    big[1:, 0] = delta
    big[1:, 1:] = sigma.entries
    try:
        return build_dispersion(big, max_dim=MAX_DIM + 1)
    except NotPositiveDefinite as exc:
        # s < 1 but within rounding of the boundary
        raise SkewnessTooLarge(str(exc)) from None
