"""Bivariate tail-dependence parameters ``b_U(1,1)`` and ``b_L(1,1)``."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import IncompatibleSkewness, SkewnessTooLarge, TooFewSamples, WrongRegime
from .linalg import correlation, extended_dispersion
from .model import theta_bivariate

POLAR = "polar_closed_form"
CUBE = "cube_quadrature"
EMPIRICAL = "empirical"
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class TailDepParams:
    b_upper: float
    b_lower: float
    method: str
    error_estimate: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for b in (self.b_upper, self.b_lower):
            if not (0.0 - 1e-9 <= b <= 1.0 + 1e-9) and math.isfinite(b):
                raise ValueError(f"tail dependence {b} outside [0, 1]")

    def to_json(self) -> str:
        rec = asdict(self)
        rec["error"] = rec.pop("error_estimate")
        return json.dumps(rec, sort_keys=True)


@dataclass(frozen=True)
class SkewTParams:
    nu: float
    rho: float
    delta1: float
    delta2: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        try:
            extended_dispersion(correlation(self.rho), [self.delta1, self.delta2])
        except SkewnessTooLarge as exc:
            raise IncompatibleSkewness(str(exc)) from None

    @property
    def theta(self):
        return theta_bivariate(self.rho, (self.delta1, self.delta2))

    @property
    def theta_bar(self):
        d = np.array([self.delta1, self.delta2])
        return d / np.sqrt(1.0 - d**2)

    def reflected(self) -> "SkewTParams":
        return SkewTParams(self.nu, self.rho, -self.delta1, -self.delta2)


def _params(p) -> SkewTParams:
    if isinstance(p, SkewTParams):
        return p
    if isinstance(p, dict):
        delta = p.get("delta", (p.get("delta1", 0.0), p.get("delta2", 0.0)))
        return SkewTParams(float(p["nu"]), float(p.get("rho", 0.0)), float(delta[0]), float(delta[1]))
    nu, rho, d1, d2 = p
    return SkewTParams(float(nu), float(rho), float(d1), float(d2))


def k_star(p) -> float:
    """Constant ``K*`` of the polar representation ``lambda = h(omega) r^{-(nu+2)}``."""
    p = _params(p)
    nu = p.nu
    log_num = 0.5 * (nu + 1) * math.log1p(-p.rho**2) + 2 * math.log(nu) + special.gammaln(0.5 * nu)
    log_den = (
        math.log(2.0)
        + 0.5 * math.log(math.pi)
        + special.gammaln(0.5 * (nu + 1))
        + stats.t.logcdf(p.theta_bar[0] * math.sqrt(nu + 1), nu + 1)
    )
    return math.exp(log_num - log_den)


def a2_skew_t(p) -> float:
    """Tail-equivalence ratio ``T_{nu+1}(theta_bar_2 sqrt(nu+1)) / T_{nu+1}(theta_bar_1 sqrt(nu+1))``."""
    p = _params(p)
    s = math.sqrt(p.nu + 1)
    tb = p.theta_bar
    return math.exp(stats.t.logcdf(tb[1] * s, p.nu + 1) - stats.t.logcdf(tb[0] * s, p.nu + 1))


def skew_t_h(omega, p):
    """Angular part ``h(omega)`` of the bivariate skew-t upper tail density."""
    p = _params(p)
    omega = np.asarray(omega, dtype=float)
    nu, rho = p.nu, p.rho
    th = p.theta
    c, s = np.cos(omega), np.sin(omega)
    base = 1.0 - 2.0 * rho * c * s
    arg = (th[0] * c + th[1] * s) * np.sqrt((nu + 2) * (1 - rho**2)) / np.sqrt(base)
    out = k_star(p) * base ** (-(nu + 2) / 2) * special.stdtr(nu + 2, arg)
    return out if np.ndim(out) else float(out)


def _polar_b(p: SkewTParams, epsabs: float):
    nu = p.nu
    a2 = a2_skew_t(p)
    zeta = math.atan(a2 ** (1.0 / nu))
    v1, e1 = integrate.quad(lambda w: skew_t_h(w, p) * math.sin(w) ** nu, 0.0, zeta, epsabs=epsabs, epsrel=1e-10)
    v2, e2 = integrate.quad(
        lambda w: skew_t_h(w, p) * math.cos(w) ** nu, zeta, 0.5 * math.pi, epsabs=epsabs, epsrel=1e-10
    )
    return v1 / (a2 * nu) + v2 / nu, e1 / (a2 * nu) + e2 / nu


def skew_t_taildep(p, epsabs: float = 1e-8) -> TailDepParams:
    """Polar-integral ``b_U`` and ``b_L`` of the bivariate skew-t copula.

    ``b_U = a2^{-1} nu^{-1} int_0^zeta h sin^nu + nu^{-1} int_zeta^{pi/2} h cos^nu``
    with ``zeta = arctan(a2^{1/nu})``; ``b_L`` is ``b_U`` of the reflected model.
    """
    p = _params(p)
    bu, eu = _polar_b(p, epsabs)
    bl, el = _polar_b(p.reflected(), epsabs)
    return TailDepParams(bu, bl, POLAR, max(eu, el), asdict(p))


def classical_t_taildep(nu: float, rho: float) -> float:
    """``2 T_{nu+1}(-sqrt((nu+1)(1-rho)/(1+rho)))``."""
    return float(2.0 * stats.t.cdf(-math.sqrt((nu + 1) * (1 - rho) / (1 + rho)), nu + 1))


def _cube(fn, epsabs):
    def inner(w1):
        val, _ = integrate.quad(
            lambda w2: float(fn(np.array([w1, w2]))), 0.0, 1.0, epsabs=epsabs, epsrel=1e-9, limit=200, points=[w1]
        )
        return val

    return integrate.quad(inner, 0.0, 1.0, epsabs=epsabs, epsrel=1e-9, limit=200)


def cube_taildep(ctd, ctd_lower=None, epsabs: float = 1e-10) -> TailDepParams:
    """``b = int_0^1 int_0^1 lambda(w1, w2) dw`` by nested adaptive quadrature.

    ``ctd`` supplies ``b_upper``; ``ctd_lower`` (optional) supplies ``b_lower``,
    otherwise ``b_lower`` is reported as NaN.
    """
    if ctd.kappa != 1.0:
        raise WrongRegime("the unit-square functional needs tail order 1")
    if ctd.dim != 2:
        raise WrongRegime("cube_taildep is bivariate")
    bu, eu = _cube(ctd, epsabs)
    bl, el = (math.nan, 0.0)
    if ctd_lower is not None:
        if ctd_lower.kappa != 1.0:
            raise WrongRegime("the unit-square functional needs tail order 1")
        bl, el = _cube(ctd_lower, epsabs)
    return TailDepParams(bu, bl, CUBE, max(eu, el))


def empirical_taildep(samples, u: float = 0.005) -> TailDepParams:
    """Rank-based joint exceedance ratio at level ``u`` with binomial standard errors."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError("samples must be an n x 2 array")
    n = x.shape[0]
    if n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    ranks = np.argsort(np.argsort(x, axis=0, kind="stable"), axis=0, kind="stable") + 1
    k = n * u
    up = np.sum(np.all(ranks > n - k, axis=1))
    lo = np.sum(np.all(ranks <= k, axis=1))
    est_u = up / k
    est_l = lo / k
    se_u = math.sqrt((up / n) * (1 - up / n) / n) / u
    se_l = math.sqrt((lo / n) * (1 - lo / n) / n) / u
    return TailDepParams(
        float(est_u),
        float(est_l),
        EMPIRICAL,
        float(max(se_u, se_l)),
        {"n": n, "u": u, "se_upper": se_u, "se_lower": se_l},
    )
