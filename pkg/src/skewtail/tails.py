"""Tail densities ``lambda(w)`` and copula tail densities ``lambda_U``/``lambda_L``.

Two regimes are covered:

* heavy: ``g_{d+1}`` regularly varying with index ``-alpha``; scaling limits
  ``f(tw)`` with tail order ``kappa = 1``;
* light: ``g_{d+1}`` in the quadratic Gumbel domain; translation limits
  ``f(t1 + m(t)w)`` with ``kappa = 1 Sigma^-1 1^T``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from . import _kernels
from .errors import DomainError, MixedSignSkewness, SigmaNotNormalized, WrongRegime
from .generators import StudentTGenerator, classify_tail, student_t_constant
from .linalg import DispersionMatrix, correlation, quad_form

HEAVY = "heavy"
LIGHT = "light"
UPPER = "upper"
LOWER = "lower"


def half_line_power_integral(b, c, alpha):
    """``int_{-inf}^{b} (r^2 + c)^{-alpha} dr`` via the Student-t CDF with ``2 alpha - 1`` dof."""
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    dof = 2.0 * alpha - 1.0
    log_scale = (0.5 - alpha) * np.log(c) + special.betaln(0.5, alpha - 0.5)
    out = np.exp(log_scale) * special.stdtr(dof, b * np.sqrt(dof / c))
    return out if np.ndim(out) else float(out)


def half_line_power_quad(b, c, alpha, backend=None):
    """Same integral by adaptive Gauss-Kronrod quadrature (cross-check path)."""
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    ratio, _ = _kernels.half_line_ratio(_kernels.POWER_FAMILY, 0.0, alpha, c, b, backend=backend)
    out = ratio * np.power(np.broadcast_to(c, ratio.shape), -alpha)
    return out if np.ndim(b) or np.ndim(c) else float(out.reshape(-1)[0])


def k1_constant(nu: float, theta_bar_1: float) -> float:
    """Marginal normalizing constant ``K_1`` of the skew-t family."""
    log_num = special.gammaln(0.5 * nu) + 0.5 * math.log(math.pi)
    log_den = (
        math.log(2.0)
        + special.gammaln(0.5 * (nu + 1))
        + 0.5 * (nu - 2) * math.log(nu)
        + stats.t.logcdf(theta_bar_1 * math.sqrt(nu + 1), nu + 1)
    )
    return math.exp(log_num - log_den)


def k1_by_quadrature(nu: float, theta_bar_1: float) -> float:
    """``1/K_1 = (2 k(nu, 2) / nu) int_{-inf}^{theta_bar} (r^2 + 1)^{-(nu+2)/2} dr``.

    The integral is the limit of ``f_1(t) t^{nu+1}`` for the univariate skew-t
    margin, computed here by plain QUADPACK rather than the t CDF.
    """
    alpha = 0.5 * (nu + 2)

    def f(r):
        return (r * r + 1.0) ** (-alpha)

    if theta_bar_1 >= 0:
        a, _ = integrate.quad(f, -np.inf, 0.0, epsabs=0.0, epsrel=1e-13)
        b, _ = integrate.quad(f, 0.0, theta_bar_1, epsabs=0.0, epsrel=1e-13)
        val = a + b
    else:
        val, _ = integrate.quad(f, -np.inf, theta_bar_1, epsabs=0.0, epsrel=1e-13)
    return nu / (2.0 * student_t_constant(nu, 2) * val)


@dataclass(frozen=True, eq=False)
class TailDensityResult:
    """Tail density ``lambda(w)`` of a skew-elliptical law plus its constants.

    Attributes
    ----------
    regime, orientation : str
        ``"heavy"``/``"light"`` and ``"upper"``/``"lower"``.
    kappa : float
        Tail order.
    a : ndarray
        Tail-equivalence constants with ``a[0] == 1``.
    gamma, K, alpha : float or None
        Heavy regime only.
    c : float or None
        Light regime prefactor (2 when ``1 theta^T != 0``, else 1).
    m : callable or None
        Light regime auxiliary function.
    V : str
        Description of the normalizing function.
    """

    regime: str
    orientation: str
    kappa: float
    a: np.ndarray
    sigma: DispersionMatrix = field(repr=False)
    theta: np.ndarray
    gamma: float | None = None
    K: float | None = None
    alpha: float | None = None
    c: float | None = None
    m: Callable | None = field(default=None, repr=False)
    V: str = ""
    normalizer: Callable | None = field(default=None, repr=False)
    fn: Callable | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.sigma.dim

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dim:
            raise DomainError(f"w must have trailing dimension {self.dim}")
        if self.regime == HEAVY and np.any(w <= 0):
            raise DomainError("heavy-regime tail density is defined for w > 0")
        if self.fn is not None:
            out = self.fn(w)
        elif self.regime == HEAVY:
            out = self._heavy(w)
        else:
            out = self._light(w)
        return out if np.ndim(out) else float(out)

    def _heavy(self, w):
        b = w @ self.theta
        if self.orientation == LOWER:
            b = -b
        q = quad_form(w, self.sigma)
        return 2.0 * self.K * math.exp(-0.5 * self.sigma.logdet) * half_line_power_integral(b, q, self.alpha)

    def _light(self, w):
        s = self.sigma.inv @ np.ones(self.dim)
        return self.c * math.exp(-0.5 * self.sigma.logdet) * np.exp(-(w @ s))

    def by_quadrature(self, w, backend=None):
        """Heavy-regime ``lambda(w)`` with the half-line integral done numerically."""
        if self.regime != HEAVY:
            raise WrongRegime("quadrature path exists only for the heavy regime")
        w = np.asarray(w, dtype=float)
        b = w @ self.theta
        if self.orientation == LOWER:
            b = -b
        q = quad_form(w, self.sigma)
        val = half_line_power_quad(b, q, self.alpha, backend=backend)
        return 2.0 * self.K * math.exp(-0.5 * self.sigma.logdet) * val


@dataclass(frozen=True, eq=False)
class CopulaTailDensity:
    """Copula tail density ``lambda_U(w; kappa)`` or ``lambda_L(w; kappa)``."""

    orientation: str
    regime: str
    kappa: float
    dim: int
    fn: Callable = field(repr=False)
    slowly_varying: str = "1"
    source: TailDensityResult | None = field(default=None, repr=False)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dim:
            raise DomainError(f"w must have trailing dimension {self.dim}")
        if np.any(w <= 0):
            raise DomainError("copula tail density is defined for w > 0")
        out = self.fn(w)
        return out if np.ndim(out) else float(out)


def _require_normalized(model):
    if not model.sigma.is_correlation():
        raise SigmaNotNormalized("tail results need a unit-diagonal Sigma")


def default_K(model, orientation: str = UPPER) -> float:
    """Normalizing constant for the heavy regime.

    Skew-t: ``k(nu, d+1) K_1`` so that the copula margins match ``F_1``;
    other generators: 1.
    """
    g = model.generator
    if isinstance(g, StudentTGenerator):
        tb = float(model.theta_bar[0])
        if orientation == LOWER:
            tb = -tb
        return student_t_constant(g.nu, model.d + 1) * k1_constant(g.nu, tb)
    return 1.0


def heavy_tail_density(model, K: float | None = None, orientation: str = UPPER) -> TailDensityResult:
    """Heavy-regime tail density of ``model``.

    ``lambda(w) = 2K|Sigma|^{-1/2} int_{-inf}^{+-w theta^T} (r^2 + w Sigma^-1 w^T)^{-alpha} dr``.
    The tail-equivalence constants use the index ``alpha - (d-1)/2`` of the
    bivariate generator ``g_2`` that drives each margin.
    """
    tail = classify_tail(model.generator)
    if not tail.is_heavy:
        raise WrongRegime("generator is not regularly varying")
    d = model.d
    alpha = float(tail.alpha)
    if not alpha > 0.5 * (d + 1):
        raise WrongRegime(f"need alpha > (d+1)/2, got {alpha}")
    _require_normalized(model)
    if orientation not in (UPPER, LOWER):
        raise ValueError(f"orientation must be 'upper' or 'lower', got {orientation!r}")
    sgn = 1.0 if orientation == UPPER else -1.0
    alpha2 = alpha - 0.5 * (d - 1)
    ends = half_line_power_integral(sgn * np.asarray(model.theta_bar), 1.0, alpha2)
    a = np.asarray(ends / ends[0], dtype=float)
    if K is None:
        K = default_K(model, orientation)
    if not K > 0:
        raise ValueError("K must be positive")
    gamma = 2.0 * alpha - d - 1
    return TailDensityResult(
        regime=HEAVY,
        orientation=orientation,
        kappa=1.0,
        a=a,
        sigma=model.sigma,
        theta=np.asarray(model.theta),
        gamma=gamma,
        K=float(K),
        alpha=alpha,
        V=f"V(t) ~ t^(-{gamma:g}), regularly varying with index -gamma",
    )


def heavy_lower_tail_density(model, K: float | None = None) -> TailDensityResult:
    return heavy_tail_density(model, K=K, orientation=LOWER)


def _light_constants(theta_bar):
    tb = np.asarray(theta_bar, dtype=float)
    if np.all(tb >= 0):
        if tb[0] == 0:
            return np.where(tb == 0, 1.0, 2.0)
        return np.where(tb == 0, 0.5, 1.0)
    if np.all(tb < 0) and np.all(tb == tb[0]):
        return np.ones_like(tb)
    raise MixedSignSkewness(f"theta_bar signs are mixed: {tb.tolist()}")


def light_tail_density(model, orientation: str = UPPER) -> TailDensityResult:
    """Light-regime tail density ``c |Sigma|^{-1/2} exp(-w Sigma^-1 1^T)``.

    The lower orientation is the upper tail of the reflected model.
    """
    tail = classify_tail(model.generator)
    if tail.kind != "gumbel_quadratic":
        raise WrongRegime("generator is not in the quadratic Gumbel domain")
    _require_normalized(model)
    if orientation not in (UPPER, LOWER):
        raise ValueError(f"orientation must be 'upper' or 'lower', got {orientation!r}")
    sgn = 1.0 if orientation == UPPER else -1.0
    th = sgn * np.asarray(model.theta)
    tb = sgn * np.asarray(model.theta_bar)
    a = _light_constants(tb)
    d = model.d
    ones = np.ones(d)
    s_theta = float(ones @ th)
    c = 1.0 if s_theta == 0.0 else 2.0
    kappa = quad_form(ones, model.sigma)
    gd = model.generator.marginalize()
    if s_theta < 0:
        v_desc = "V(t) = 2|Sigma|^{-1/2} g_d(t^2 kappa) G(t) with G(t) t-dependent; see normalizer"
    else:
        v_desc = f"V(t) = {c:g}|Sigma|^{{-1/2}} g_d(t^2 kappa)"

    def normalizer(t, _g=gd, _s=s_theta, _q=kappa):
        """``log`` of the t-dependent normalizing factor at the diagonal point ``t 1``."""
        return float(
            math.log(2.0) - 0.5 * model.sigma.logdet + _g.log(t * t * _q) + model.generator.conditional_logcdf(t * _s, t * t * _q)
        )

    return TailDensityResult(
        regime=LIGHT,
        orientation=orientation,
        kappa=kappa,
        a=a,
        sigma=model.sigma,
        theta=th,
        c=c,
        m=tail.m,
        V=v_desc,
        normalizer=normalizer,
    )


def copula_tail_density_heavy(tdr: TailDensityResult) -> CopulaTailDensity:
    """``lambda_U(w; 1) = lambda(a^{1/gamma} w^{-1/gamma}) prod (a_i^{1/gamma}/gamma) w_i^{-1/gamma-1}``."""
    if tdr.regime != HEAVY:
        raise WrongRegime("expected a heavy-regime tail density")
    g = tdr.gamma
    a = np.asarray(tdr.a)

    def fn(w):
        s = a ** (1.0 / g) * w ** (-1.0 / g)
        jac = np.prod(a ** (1.0 / g) / g * w ** (-1.0 / g - 1.0), axis=-1)
        return tdr(s) * jac

    return CopulaTailDensity(tdr.orientation, HEAVY, 1.0, tdr.dim, fn, source=tdr)


def heavy_direct_form(ctd: CopulaTailDensity, s):
    """Inverse transform ``lambda(s) = gamma^d prod(a) prod(s^{-gamma-1}) lambda_U(a s^{-gamma})``."""
    tdr = ctd.source
    g = tdr.gamma
    a = np.asarray(tdr.a)
    s = np.asarray(s, dtype=float)
    d = tdr.dim
    return g**d * np.prod(a) * np.prod(s ** (-g - 1.0), axis=-1) * ctd(a * s ** (-g))


def copula_tail_density_light(tdr: TailDensityResult) -> CopulaTailDensity:
    """``lambda_U(w; kappa) = lambda(-ln(w/a)) prod(1/w_i)``."""
    if tdr.regime != LIGHT:
        raise WrongRegime("expected a light-regime tail density")
    a = np.asarray(tdr.a)
    s = tdr.sigma.inv @ np.ones(tdr.dim)
    logc = math.log(tdr.c) - 0.5 * tdr.sigma.logdet

    def fn(w):
        if np.any(w <= 0):
            raise DomainError("w must be positive")
        lw = np.log(w / a)
        # exp(-(-ln(w/a)) s) prod(1/w) evaluated in one log-sum
        return np.exp(logc + lw @ s - np.sum(np.log(w), axis=-1))

    return CopulaTailDensity(tdr.orientation, LIGHT, tdr.kappa, tdr.dim, fn, source=tdr)


def lower_copula_tail_light(model) -> CopulaTailDensity:
    """Lower-corner copula tail density in the light regime (upper tail of the reflected model).

    Notes
    -----
    For equal positive skewness the reflected model has ``theta < 0``, so the
    skewing factor decays like a Gaussian and the true lower-corner decay rate
    is faster than the returned ``kappa`` suggests; numeric copula densities
    approach ``u^{kappa_L - d}`` with ``kappa_L = 2(1 - delta^2)/(1 - 2 delta^2)``
    (bivariate, ``rho = 0``) rather than ``u^{kappa - d}``.
    """
    return copula_tail_density_light(light_tail_density(model, orientation=LOWER))


def tail_density(model, orientation: str = UPPER, K: float | None = None) -> TailDensityResult:
    """Dispatch on the tail class of the generator."""
    if classify_tail(model.generator).is_heavy:
        return heavy_tail_density(model, K=K, orientation=orientation)
    return light_tail_density(model, orientation=orientation)


def copula_tail_density(model, orientation: str = UPPER, K: float | None = None) -> CopulaTailDensity:
    if getattr(model, "family_tag", None) == "mixture" and hasattr(model, "eta"):
        if orientation != UPPER:
            raise WrongRegime("only the upper tail is available for the mixture family")
        return mixture_tail_density(model)[1]
    tdr = tail_density(model, orientation, K)
    if tdr.regime == HEAVY:
        return copula_tail_density_heavy(tdr)
    return copula_tail_density_light(tdr)


def mixture_tail_density(m) -> tuple[TailDensityResult, CopulaTailDensity]:
    """Upper tail of the bivariate skew-normal mixture.

    ``lambda(w) = (1-rho^2)^{-1/2} exp(-(w1+w2)/(1+|rho|))`` and
    ``kappa = 2/(1+|rho|)``. With ``eta = 0`` this is the symmetric normal case.
    """
    from .model import skew_normal

    if m.eta == 0.0:
        tdr = light_tail_density(skew_normal([0.0, 0.0], rho=m.rho))
        return tdr, copula_tail_density_light(tdr)
    r = abs(m.rho)
    pref = (1.0 - m.rho**2) ** -0.5
    kappa = 2.0 / (1.0 + r)

    def lam(w):
        return pref * np.exp(-np.sum(w, axis=-1) / (1.0 + r))

    def lam_u(w):
        return pref * np.prod(w, axis=-1) ** (-r / (1.0 + r))

    tdr = TailDensityResult(
        regime=LIGHT,
        orientation=UPPER,
        kappa=kappa,
        a=np.ones(2),
        sigma=correlation(r),
        theta=np.zeros(2),
        c=1.0,
        m=lambda t: 1.0 / np.asarray(t, dtype=float),
        V="V(t) = |Sigma|^{-1/2} g_2(t^2 kappa)",
        fn=lam,
    )
    return tdr, CopulaTailDensity(UPPER, LIGHT, kappa, 2, lam_u, source=tdr)


def evaluate_grid(fn, axes):
    """Evaluate ``fn`` on the Cartesian product of ``axes``; returns (points, values)."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return pts, np.asarray(fn(pts), dtype=float).reshape(-1)


def grid_to_csv(points, values, value_name: str = "lambda") -> str:
    """CSV text with header ``w_1,...,w_d,<value_name>`` and 17 significant digits."""
    points = np.atleast_2d(points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"w_{j + 1}" for j in range(points.shape[1])] + [value_name])
    for p, v in zip(points, values):
        writer.writerow([format(float(x), ".17g") for x in p] + [format(float(v), ".17g")])
    return buf.getvalue()
