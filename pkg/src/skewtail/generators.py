"""Density generators ``g_k`` and their tail classification.

A k-dimensional elliptical density is ``|Sigma|^{-1/2} g_k(q)`` with ``q`` the
Mahalanobis quadratic form. Generators are normalized so that
``int_0^inf r^{k/2-1} g_k(r) dr = Gamma(k/2) / pi^{k/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from . import _kernels
from .errors import ClassMismatch, QuadratureFailure, UnsupportedGenerator
from .report import ValidationReport

RV_GRID = np.geomspace(1e2, 1e6, 25)
RV_ALPHA_TOL = 0.05
GUMBEL_TOL = 0.05


@dataclass(frozen=True)
class TailClass:
    """Tail classification of a generator.

    ``kind`` is ``"regularly_varying"`` (with index ``alpha``, meaning
    ``g in RV_{-alpha}``) or ``"gumbel_quadratic"`` (with auxiliary ``m``).
    """

    kind: str
    alpha: float | None = None
    m: Callable[[float], float] | None = None
    slowly_varying: str = "1"

    @property
    def is_heavy(self) -> bool:
        return self.kind == "regularly_varying"


def _inv(t):
    return 1.0 / np.asarray(t, dtype=float)


class DensityGenerator:
    """Base class. Subclasses implement :meth:`log`."""

    family: str = "abstract"
    dim: int

    def __call__(self, s):
        with np.errstate(under="ignore"):
            return np.exp(self.log(s))

    def log(self, s):  # pragma: no cover - abstract
        raise NotImplementedError

    def marginalize(self) -> "DensityGenerator":
        raise NotImplementedError

    def declared_tail(self) -> TailClass:
        raise NotImplementedError

    # closed-form families expose their kernel parameters; custom ones return None
    kernel = None

    def conditional_logcdf(self, b, q):
        """log P(X0 <= b | X = x) for the (dim-1)-dim conditioning with q(x) = q.

        Only closed-form families implement this.
        """
        raise UnsupportedGenerator(f"{self.family} has no closed-form conditional law")

    def spherical_draws(self, rng, n):
        """``n`` draws from the spherical law with generator ``g_k`` (identity dispersion)."""
        raise UnsupportedGenerator(f"{self.family} generator has no radial sampler")

    def to_dict(self) -> dict:
        raise UnsupportedGenerator(f"{self.family} generator is not serializable")


class NormalGenerator(DensityGenerator):
    family = "normal"

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self._logc = -0.5 * self.dim * math.log(2.0 * math.pi)

    @property
    def kernel(self):
        return (_kernels.EXP_FAMILY, 0.0, 0.0)

    def log(self, s):
        return self._logc - 0.5 * np.asarray(s, dtype=float)

    def marginalize(self):
        if self.dim == 1:
            raise ValueError("cannot marginalize a 1-dim generator")
        return NormalGenerator(self.dim - 1)

    def declared_tail(self):
        return TailClass("gumbel_quadratic", m=_inv)

    def conditional_logcdf(self, b, q):
        return special.log_ndtr(np.asarray(b, dtype=float))

    def spherical_draws(self, rng, n):
        return rng.standard_normal((n, self.dim))

    def to_dict(self):
        return {"family": "normal"}

    def __repr__(self):
        return f"NormalGenerator(dim={self.dim})"

    def __eq__(self, other):
        return isinstance(other, NormalGenerator) and other.dim == self.dim

    def __hash__(self):
        return hash(("normal", self.dim))


def student_t_constant(nu: float, k: int) -> float:
    """``k(nu, k) = Gamma((nu+k)/2) nu^{nu/2} / (Gamma(nu/2) pi^{k/2})``."""
    return math.exp(log_student_t_constant(nu, k))


def log_student_t_constant(nu: float, k: int) -> float:
    return (
        special.gammaln(0.5 * (nu + k))
        + 0.5 * nu * math.log(nu)
        - special.gammaln(0.5 * nu)
        - 0.5 * k * math.log(math.pi)
    )


class StudentTGenerator(DensityGenerator):
    """``g_k(x) = k(nu, k) (nu + x)^{-(nu+k)/2}``."""

    family = "student_t"

    def __init__(self, nu: float, dim: int):
        if not nu > 0:
            raise ValueError("nu must be positive")
        if int(dim) != dim or dim < 1:
            raise ValueError("dim must be a positive integer")
        self.nu = float(nu)
        self.dim = int(dim)
        self._logc = log_student_t_constant(self.nu, self.dim)

    @property
    def alpha(self) -> float:
        return 0.5 * (self.nu + self.dim)

    @property
    def kernel(self):
        return (_kernels.POWER_FAMILY, self.nu, self.alpha)

    def log(self, s):
        return self._logc - self.alpha * np.log(self.nu + np.asarray(s, dtype=float))

    def marginalize(self):
        if self.dim == 1:
            raise ValueError("cannot marginalize a 1-dim generator")
        return StudentTGenerator(self.nu, self.dim - 1)

    def declared_tail(self):
        return TailClass("regularly_varying", alpha=self.alpha)

    def conditional_logcdf(self, b, q):
        # X0 | X=x is t with nu+d dof scaled by sqrt((nu+q)/(nu+d)), d = dim-1
        dof = self.nu + self.dim - 1
        b = np.asarray(b, dtype=float)
        q = np.asarray(q, dtype=float)
        return stats.t.logcdf(b * np.sqrt(dof / (self.nu + q)), dof)

    def spherical_draws(self, rng, n):
        # normal vector divided by sqrt(chi2_nu / nu)
        z = rng.standard_normal((n, self.dim))
        return z / np.sqrt(rng.chisquare(self.nu, size=n) / self.nu)[:, None]

    def to_dict(self):
        return {"family": "student_t", "nu": self.nu}

    def __repr__(self):
        return f"StudentTGenerator(nu={self.nu!r}, dim={self.dim})"

    def __eq__(self, other):
        return isinstance(other, StudentTGenerator) and (other.nu, other.dim) == (self.nu, self.dim)

    def __hash__(self):
        return hash(("student_t", self.nu, self.dim))


class CustomGenerator(DensityGenerator):
    """User-supplied generator with a declared tail class.

    Parameters
    ----------
    dim : int
        Dimension ``k`` the generator is normalized for.
    func : callable
        Vectorized ``g_k``. Must be pure.
    tail : TailClass
        Declared tail behaviour; checked by :func:`classify_tail`.
    log_func : callable, optional
        ``log g_k``; needed for log-space work far in light tails.
    radius_sampler : callable, optional
        ``radius_sampler(rng, n, k)`` returning ``n`` draws of the radius
        ``R`` in the stochastic representation ``X = R A U`` with ``U``
        uniform on the unit sphere of R^k.
    """

    def __init__(self, dim, func, tail: TailClass, log_func=None, radius_sampler=None, name="custom"):
        self.dim = int(dim)
        self.func = func
        self.tail = tail
        self.log_func = log_func
        self.radius_sampler = radius_sampler
        self.name = name
        self.family = "custom_rv" if tail.kind == "regularly_varying" else "custom_gumbel"

    def __call__(self, s):
        if self.log_func is not None:
            return super().__call__(s)
        return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)

    def log(self, s):
        if self.log_func is not None:
            return np.asarray(self.log_func(np.asarray(s, dtype=float)), dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float))

    def declared_tail(self):
        return self.tail

    def spherical_draws(self, rng, n):
        if self.radius_sampler is None:
            raise UnsupportedGenerator(f"{self.name}: no radius sampler supplied")
        z = rng.standard_normal((n, self.dim))
        u = z / np.linalg.norm(z, axis=1)[:, None]
        return u * np.asarray(self.radius_sampler(rng, n, self.dim), dtype=float)[:, None]

    def marginalize(self):
        if self.dim == 1:
            raise ValueError("cannot marginalize a 1-dim generator")
        parent = self
        tail = self.tail
        if tail.is_heavy:
            tail = TailClass(tail.kind, alpha=tail.alpha - 0.5, slowly_varying=tail.slowly_varying)

        def func(s):
            return marginal_by_quadrature(parent, s)

        radius = None
        if self.radius_sampler is not None:
            # radius of the leading k-1 coordinates of a parent draw
            def radius(rng, n, k):
                return np.linalg.norm(parent.spherical_draws(rng, n)[:, :k], axis=1)

        return CustomGenerator(self.dim - 1, func, tail, radius_sampler=radius, name=f"{self.name}/marg")

    def __repr__(self):
        return f"CustomGenerator(name={self.name!r}, dim={self.dim}, tail={self.tail.kind})"


def marginal_by_quadrature(g: DensityGenerator, s, epsrel: float = 1e-12):
    """``g_{k-1}(s) = 2 int_0^inf g_k(r^2 + s) dr`` evaluated numerically.

    Closed-form families go through the compiled half-line kernel; custom
    generators use adaptive QUADPACK on ``[0, inf)`` with the integrand
    scaled by ``g_k(s)``.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if g.kernel is not None:
        code, shift, expo = g.kernel
        ratio, _ = _kernels.half_line_ratio(code, shift, expo, s_arr, np.full_like(s_arr, np.inf), epsrel=epsrel)
        out = g(s_arr) * ratio
    else:
        out = np.empty_like(s_arr)
        for i, si in enumerate(s_arr.ravel()):
            ls = float(g.log(si))
            if not np.isfinite(ls):
                out.flat[i] = 0.0
                continue

            def f(r, si=si, ls=ls):
                return math.exp(float(g.log(r * r + si)) - ls)

            val, err, *rest = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=epsrel, limit=500, full_output=1)
            if len(rest) > 1 and err > 1e-6 * abs(val):
                raise QuadratureFailure(f"marginal integral did not converge at s={si}: {rest[1]}")
            out.flat[i] = 2.0 * val * math.exp(ls)
    return out if np.ndim(s) else float(out[0])


def normalization_integral(g: DensityGenerator, epsrel: float = 1e-10) -> float:
    """``int_0^inf r^{k/2-1} g_k(r) dr``, computed as ``2 int_0^inf s^{k-1} g(s^2) ds``."""
    k = g.dim

    def f(s):
        if s == 0.0:
            return float(g(0.0)) if k == 1 else 0.0
        return math.exp((k - 1) * math.log(s) + float(g.log(s * s)))

    # split where the integrand is largest to help QAGI
    peak = math.sqrt(max(k - 1, 1))
    a, _ = integrate.quad(f, 0.0, peak, epsabs=0.0, epsrel=epsrel, limit=500)
    b, _ = integrate.quad(f, peak, np.inf, epsabs=0.0, epsrel=epsrel, limit=500)
    return 2.0 * (a + b)


def normalization_target(k: int) -> float:
    return math.gamma(0.5 * k) / math.pi ** (0.5 * k)


def estimate_rv_index(g: DensityGenerator, grid=RV_GRID) -> float:
    """Least-squares ``-slope`` of ``log g`` against ``log t``."""
    lg = np.asarray(g.log(grid), dtype=float)
    if not np.all(np.isfinite(lg)):
        return math.nan
    slope = np.polyfit(np.log(grid), lg, 1)[0]
    return float(-slope)


def _gumbel_log_ratio(g, q_mat, x, t):
    q_mat = np.atleast_2d(np.asarray(q_mat, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ones = np.ones(q_mat.shape[0])
    m = float(g.declared_tail().m(t))
    v = t * ones + m * x
    # expand the difference analytically to avoid cancelling two O(t^2) terms
    top_minus_bottom = 2.0 * t * m * float(x @ q_mat @ ones) + m * m * float(x @ q_mat @ x)
    base = t * t * float(ones @ q_mat @ ones)
    return float(g.log(base + top_minus_bottom) - g.log(base)), float(v @ q_mat @ v)


def gumbel_scaling_check(g: DensityGenerator, q_mat, x, t_grid=(10.0, 100.0, 1000.0), tolerance=0.02) -> ValidationReport:
    """Check ``g([t1+m(t)x] Q [..]^T) / g(t^2 1Q1^T) -> exp(-x Q 1^T)`` along ``t_grid``."""
    tail = g.declared_tail()
    if tail.kind != "gumbel_quadratic":
        raise ClassMismatch("generator is not declared Gumbel-quadratic")
    q_mat = np.atleast_2d(np.asarray(q_mat, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    target = float(x @ q_mat @ np.ones(q_mat.shape[0]))
    ratios = [math.exp(_gumbel_log_ratio(g, q_mat, x, float(t))[0]) for t in t_grid]
    analytic = math.exp(-target)
    notes = "ratios=" + ",".join(f"{r:.12g}" for r in ratios)
    return ValidationReport(
        "gumbel_scaling", analytic=analytic, estimate=ratios[-1], tolerance=tolerance, notes=notes
    )


def _check_pure(g):
    grid = np.geomspace(1e-2, 1e4, 9)
    a = np.asarray(g(grid))
    b = np.asarray(g(grid))
    if not np.array_equal(a, b, equal_nan=True):
        raise ClassMismatch(f"generator {g!r} is not pure (repeated calls disagree)")


def check_eventually_nonincreasing(g: DensityGenerator, grid=None) -> bool:
    """Spot-check that ``g`` does not increase on the upper half of a log grid."""
    if grid is None:
        grid = np.geomspace(1.0, 1e6, 61)
    lg = np.asarray(g.log(grid), dtype=float)
    tail = lg[len(lg) // 2 :]
    finite = np.isfinite(tail)
    if not np.any(finite):
        return True
    return bool(np.all(np.diff(tail[finite]) <= 1e-12 * np.abs(tail[finite][:-1]) + 1e-300))


def classify_tail(g: DensityGenerator, verify: bool = True) -> TailClass:
    """Return the tail class of ``g``.

    Built-in families are classified analytically. Custom generators keep
    their declared class after a numeric check: the regression index must
    lie within 0.05 of the declared ``alpha``, or the Gumbel scaling ratio
    and self-neglecting property must hold within 5% at ``t = 100``.
    """
    tail = g.declared_tail()
    if not verify or not isinstance(g, CustomGenerator):
        return tail
    _check_pure(g)
    if tail.kind == "regularly_varying":
        est = estimate_rv_index(g)
        if not (math.isfinite(est) and abs(est - tail.alpha) <= RV_ALPHA_TOL):
            raise ClassMismatch(f"declared RV index {tail.alpha} but measured {est}")
    elif tail.kind == "gumbel_quadratic":
        if tail.m is None:
            raise ClassMismatch("Gumbel class needs an auxiliary function m")
        rep = gumbel_scaling_check(g, [[1.0]], [1.0], t_grid=(10.0, 100.0), tolerance=GUMBEL_TOL)
        t = 100.0
        m_t = float(tail.m(t))
        selfneg = float(tail.m(t + m_t)) / m_t
        if not rep.passed or abs(selfneg - 1.0) > GUMBEL_TOL:
            raise ClassMismatch(
                f"Gumbel scaling not observed (ratio {rep.estimate:.4g} vs {rep.analytic:.4g}, "
                f"m ratio {selfneg:.4g})"
            )
        if estimate_rv_index(g) < 50 and math.isfinite(estimate_rv_index(g)):
            # a finite power-law slope means the tail is not rapidly varying
            raise ClassMismatch("declared Gumbel generator looks regularly varying")
    else:
        raise ClassMismatch(f"unknown tail kind {tail.kind!r}")
    return tail


def generator_from_dict(spec: dict, dim: int) -> DensityGenerator:
    family = spec.get("family")
    if family == "normal":
        return NormalGenerator(dim)
    if family == "student_t":
        if "nu" not in spec:
            raise ValueError("student_t generator needs 'nu'")
        return StudentTGenerator(float(spec["nu"]), dim)
    raise UnsupportedGenerator(f"cannot deserialize generator family {family!r}")
