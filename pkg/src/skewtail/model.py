"""Skew-elliptical laws ``SE_d(mu, Sigma, g_{d+1}, delta)``.

``Y`` is distributed as ``X | X0 > 0`` where ``(X0, X)`` is a (d+1)-dim
elliptical vector with dispersion ``[[1, delta], [delta^T, Sigma]]``.
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy import integrate, optimize, special, stats

from . import _kernels
from .errors import DimensionMismatch, QuadratureFailure, QuantileFailure
from .generators import (
    DensityGenerator,
    NormalGenerator,
    StudentTGenerator,
    generator_from_dict,
)
from .linalg import (
    DispersionMatrix,
    build_dispersion,
    extended_dispersion,
    quad_form,
    skewness_norm,
)

LOG2 = math.log(2.0)
QUANTILE_XTOL = 1e-12
PROB_RTOL = 1e-10


def theta(delta, sigma: DispersionMatrix) -> np.ndarray:
    """``delta Sigma^-1 / (1 - delta Sigma^-1 delta^T)^{1/2}``."""
    delta = np.asarray(delta, dtype=float)
    extended_dispersion(sigma, delta)  # raises SkewnessTooLarge
    s = skewness_norm(sigma, delta)
    return (sigma.inv @ delta) / math.sqrt(1.0 - s)


def theta_bivariate(rho: float, delta) -> np.ndarray:
    """Bivariate closed form ``theta_1 = (delta_1 - rho delta_2) / D``."""
    d1, d2 = (float(v) for v in delta)
    big_d = math.sqrt((1 - rho**2) * (1 - rho**2 - d1**2 - d2**2 + 2 * d1 * d2 * rho))
    return np.array([(d1 - rho * d2) / big_d, (d2 - rho * d1) / big_d])


def _as_points(y, d):
    y = np.asarray(y, dtype=float)
    if d == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    if y.shape[-1] != d:
        raise DimensionMismatch(f"points must have trailing dimension {d}, got {y.shape}")
    return y


class _MarginalMixin:
    """Univariate CDF, survival and quantiles by quadrature of ``marginal_pdf``."""

    def _marginal_mode_guess(self, i):
        return 0.0

    def marginal_cdf(self, i, x):
        return self._marginal_prob(i, x, upper=False)

    def marginal_sf(self, i, x):
        return self._marginal_prob(i, x, upper=True)

    def _marginal_prob(self, i, x, upper):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x_arr)

        def f(t):
            return float(self.marginal_pdf(i, t))

        c = self._marginal_mode_guess(i)
        for j, xj in enumerate(x_arr.ravel()):
            # integrate the short side directly and never subtract from 1
            if upper:
                if xj >= c:
                    val = _quad(f, xj, np.inf)
                else:
                    val = _quad(f, xj, c) + _quad(f, c, np.inf)
            else:
                if xj <= c:
                    val = _quad(f, -np.inf, xj)
                else:
                    val = _quad(f, -np.inf, c) + _quad(f, c, xj)
            out.flat[j] = min(max(val, 0.0), 1.0)
        return out if np.ndim(x) else float(out[0])

    def marginal_isf(self, i, p):
        """Upper quantile: ``x`` with ``P(Y_i > x) = p``."""
        return self._quantile(i, p, upper=True)

    def marginal_ppf(self, i, p):
        return self._quantile(i, p, upper=False)

    def _quantile(self, i, p, upper):
        if not 0.0 < p < 1.0:
            raise QuantileFailure(f"probability {p} outside (0, 1)")
        prob = self.marginal_sf if upper else self.marginal_cdf

        def h(x):
            # compare on log scale so small tail probabilities keep relative accuracy
            return math.log(max(prob(i, x), 1e-300)) - math.log(p)

        c = self._marginal_mode_guess(i)
        lo, hi = c - 1.0, c + 1.0
        for _ in range(200):
            if h(lo) * h(hi) < 0:
                break
            lo, hi = c - 2.0 * (c - lo), c + 2.0 * (hi - c)
        else:
            raise QuantileFailure(f"could not bracket quantile p={p}")
        try:
            return optimize.brentq(h, lo, hi, xtol=QUANTILE_XTOL, rtol=4 * np.finfo(float).eps)
        except (ValueError, RuntimeError) as exc:
            raise QuantileFailure(str(exc)) from None


def _quad(f, a, b):
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=400)
    if not math.isfinite(val) or err > max(1e-8 * abs(val), 1e-300):
        raise QuadratureFailure(f"quadrature on [{a}, {b}] gave {val} +- {err}")
    return val


class SkewEllipticalModel(_MarginalMixin):
    """The skew-elliptical law ``SE_d(mu, Sigma, g_{d+1}, delta)``.

    Parameters
    ----------
    mu : array_like, shape (d,)
    sigma : DispersionMatrix or array_like, shape (d, d)
    delta : array_like, shape (d,)
        Cross-dispersion with the latent selector ``X0``;
        ``delta Sigma^-1 delta^T < 1`` is required.
    generator : DensityGenerator
        ``g_{d+1}``, of dimension ``d + 1``.
    family_tag : str, optional
        Free-form label carried through serialization.
    """

    def __init__(self, mu, sigma, delta, generator: DensityGenerator, family_tag: str | None = None):
        if not isinstance(sigma, DispersionMatrix):
            sigma = build_dispersion(sigma)
        d = sigma.dim
        mu = np.array(mu, dtype=float).reshape(-1)
        delta = np.array(delta, dtype=float).reshape(-1)
        if mu.shape != (d,) or delta.shape != (d,):
            raise DimensionMismatch(f"mu and delta must have length {d}")
        if generator.dim != d + 1:
            raise DimensionMismatch(f"generator must have dim {d + 1}, got {generator.dim}")
        self.star = extended_dispersion(sigma, delta)
        self.sigma = sigma
        self.mu = mu
        self.delta = delta
        self.generator = generator
        self.family_tag = family_tag or generator.family
        self.theta = theta(delta, sigma)
        diag = np.diag(sigma.entries)
        self.theta_bar = delta / np.sqrt(diag * (diag - delta**2))
        self._gd = generator.marginalize()
        for arr in (self.mu, self.delta, self.theta, self.theta_bar):
            arr.setflags(write=False)

    @property
    def d(self) -> int:
        return self.sigma.dim

    def __repr__(self):
        return (
            f"SkewEllipticalModel(d={self.d}, family={self.family_tag!r}, "
            f"delta={self.delta.tolist()}, generator={self.generator!r})"
        )

    # -- density -----------------------------------------------------------

    def _parts(self, y):
        z = y - self.mu
        q = quad_form(z, self.sigma)
        b = z @ self.theta
        return np.asarray(q, dtype=float), np.asarray(b, dtype=float)

    def logpdf(self, y, method: str = "auto"):
        """Log density. ``method`` is ``"auto"``, ``"closed"`` or ``"quad"``."""
        y = _as_points(y, self.d)
        q, b = self._parts(y)
        base = LOG2 - 0.5 * self.sigma.logdet
        g = self.generator
        if method == "auto":
            method = "closed" if g.kernel is not None else "quad"
        if method == "closed":
            out = base + self._gd.log(q) + g.conditional_logcdf(b, q)
        elif method == "quad":
            out = base + g.log(q) + np.log(self._half_line(q, b))
        else:
            raise ValueError(f"unknown method {method!r}")
        return out if np.ndim(out) else float(out)

    def pdf(self, y, method: str = "auto"):
        with np.errstate(under="ignore"):
            return np.exp(self.logpdf(y, method=method))

    def _half_line(self, q, b):
        """``int_{-inf}^{b} g(r^2 + q) dr / g(q)``."""
        g = self.generator
        q = np.asarray(q, dtype=float)
        b = np.asarray(b, dtype=float)
        if g.kernel is not None:
            code, shift, expo = g.kernel
            val, err = _kernels.half_line_ratio(code, shift, expo, q, b)
            if np.any(~np.isfinite(val)) or np.any(err > 1e-8 * np.abs(val) + 1e-300):
                raise QuadratureFailure("half-line integral did not converge")
            return val.reshape(q.shape)
        q_b, b_b = np.broadcast_arrays(q, b)
        out = np.empty(q_b.shape)
        for idx in np.ndindex(q_b.shape):
            qi, bi = float(q_b[idx]), float(b_b[idx])
            lq = float(g.log(qi))

            def f(r, qi=qi, lq=lq):
                return math.exp(float(g.log(r * r + qi)) - lq)

            if bi >= 0:
                val = _quad(f, 0.0, np.inf) + _quad(f, 0.0, bi)
            else:
                val = _quad(f, -bi, np.inf)
            out[idx] = val
        return out

    def symmetric_pdf(self, y):
        """Density of the symmetric elliptical law ``|Sigma|^{-1/2} g_d(q)``."""
        y = _as_points(y, self.d)
        q, _ = self._parts(y)
        out = np.exp(-0.5 * self.sigma.logdet + self._gd.log(q))
        return out if np.ndim(out) else float(out)

    # -- marginals ---------------------------------------------------------

    def marginal(self, i: int) -> "SkewEllipticalModel":
        """Univariate marginal of component ``i`` (0-based)."""
        if not 0 <= i < self.d:
            raise IndexError(f"component {i} out of range for d={self.d}")
        g = self.generator
        while g.dim > 2:
            g = g.marginalize()
        return SkewEllipticalModel(
            [self.mu[i]], [[self.sigma.entries[i, i]]], [self.delta[i]], g, family_tag=self.family_tag
        )

    def _marginal_cache(self, i):
        cache = self.__dict__.setdefault("_margs", {})
        if i not in cache:
            cache[i] = self.marginal(i)
        return cache[i]

    def marginal_logpdf(self, i, t):
        return self._marginal_cache(i).logpdf(np.asarray(t, dtype=float))

    def marginal_pdf(self, i, t):
        return self._marginal_cache(i).pdf(np.asarray(t, dtype=float))

    def _marginal_mode_guess(self, i):
        return float(self.mu[i])

    # -- transforms --------------------------------------------------------

    def reflect(self) -> "SkewEllipticalModel":
        """Model with ``delta -> -delta``; its density at ``mu - z`` equals ours at ``mu + z``."""
        return SkewEllipticalModel(self.mu, self.sigma, -self.delta, self.generator, self.family_tag)

    def centered(self) -> "SkewEllipticalModel":
        return SkewEllipticalModel(np.zeros(self.d), self.sigma, self.delta, self.generator, self.family_tag)

    # -- sampling ----------------------------------------------------------

    def parent_draws(self, n: int, rng) -> np.ndarray:
        """``n`` draws of the centred (d+1)-dim parent ``(X0, X)``."""
        s = self.generator.spherical_draws(rng, n)
        return s @ self.star.chol.T

    def sample(self, n: int, seed=None) -> np.ndarray:
        """Exact draws using the sign flip ``(X0, X) -> (-X0, -X)`` when ``X0 <= 0``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        x = self.parent_draws(int(n), rng)
        sign = np.where(x[:, 0] > 0.0, 1.0, -1.0)
        return self.mu + sign[:, None] * x[:, 1:]

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.entries.reshape(-1).tolist(),
            "delta": self.delta.tolist(),
            "generator": self.generator.to_dict(),
            "family_tag": self.family_tag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SkewEllipticalModel":
        d = int(data["d"])
        sigma = np.asarray(data["sigma"], dtype=float).reshape(d, d)
        gen = generator_from_dict(data["generator"], d + 1)
        return cls(data["mu"], sigma, data["delta"], gen, family_tag=data.get("family_tag"))

    @classmethod
    def from_json(cls, text: str) -> "SkewEllipticalModel":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, SkewEllipticalModel):
            return NotImplemented
        return (
            self.sigma == other.sigma
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.delta, other.delta)
            and self.generator == other.generator
        )

    __hash__ = None


def _sigma_from(rho, d, sigma):
    if sigma is not None:
        return build_dispersion(sigma)
    if d == 1:
        return build_dispersion([[1.0]], require_unit_diag=True)
    if d != 2:
        raise DimensionMismatch("give sigma explicitly when d > 2")
    return build_dispersion([[1.0, rho], [rho, 1.0]], require_unit_diag=True)


def skew_normal(delta, rho: float = 0.0, mu=None, sigma=None) -> SkewEllipticalModel:
    """Skew-normal model; ``rho`` builds a bivariate correlation matrix."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    d = delta.size
    s = _sigma_from(rho, d, sigma)
    mu = np.zeros(d) if mu is None else mu
    return SkewEllipticalModel(mu, s, delta, NormalGenerator(d + 1), family_tag="skew-normal")


def skew_t(nu: float, delta, rho: float = 0.0, mu=None, sigma=None) -> SkewEllipticalModel:
    """Skew-t model with ``nu`` degrees of freedom."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    d = delta.size
    s = _sigma_from(rho, d, sigma)
    mu = np.zeros(d) if mu is None else mu
    return SkewEllipticalModel(mu, s, delta, StudentTGenerator(nu, d + 1), family_tag="skew-t")


class MixtureSkewNormal2(_MarginalMixin):
    """Bivariate mixture of skew-normal vectors.

    Density ``2 phi2(y; rho) Phi(eta min(y)) + 2 phi2(y1, -y2; rho)
    (Phi(eta y1) + Phi(eta y2) - 1) 1{eta y1 + eta y2 > 0}``.
    Both margins are skew-normal ``2 phi(y) Phi(eta y)``.
    """

    d = 2
    family_tag = "mixture"

    def __init__(self, rho: float, eta: float):
        if not -1.0 < rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if not eta >= 0.0:
            raise ValueError("eta must be nonnegative")
        self.rho = float(rho)
        self.eta = float(eta)
        self.sigma = build_dispersion([[1.0, rho], [rho, 1.0]], require_unit_diag=True)

    def __repr__(self):
        return f"MixtureSkewNormal2(rho={self.rho!r}, eta={self.eta!r})"

    def _logphi2(self, y1, y2):
        q = (y1 * y1 - 2 * self.rho * y1 * y2 + y2 * y2) / (1 - self.rho**2)
        return -math.log(2 * math.pi) - 0.5 * self.sigma.logdet - 0.5 * q

    def logpdf(self, y):
        y = _as_points(y, 2)
        y1, y2 = y[..., 0], y[..., 1]
        e = self.eta
        first = LOG2 + self._logphi2(y1, y2) + special.log_ndtr(e * np.minimum(y1, y2))
        with np.errstate(divide="ignore", invalid="ignore"):
            # Phi(a) + Phi(b) - 1 = Phi(a) - Phi(-b), positive iff a + b > 0
            w = special.ndtr(e * y1) - special.ndtr(-e * y2)
            second = LOG2 + self._logphi2(y1, -y2) + np.log(np.where(e * y1 + e * y2 > 0, w, 0.0))
        out = np.logaddexp(first, second)
        return out if np.ndim(out) else float(out)

    def pdf(self, y):
        with np.errstate(under="ignore"):
            return np.exp(self.logpdf(y))

    def marginal_logpdf(self, i, t):
        t = np.asarray(t, dtype=float)
        out = LOG2 + stats.norm.logpdf(t) + special.log_ndtr(self.eta * t)
        return out if np.ndim(out) else float(out)

    def marginal_pdf(self, i, t):
        return np.exp(self.marginal_logpdf(i, t))

    def sample(self, n: int, seed=None) -> np.ndarray:
        """``Y_i = Z_i`` if ``eta Z_i > W`` else ``-Z_i``, with one shared ``W ~ N(0, 1)``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((int(n), 2)) @ self.sigma.chol.T
        w = rng.standard_normal(int(n))
        return np.where(self.eta * z > w[:, None], z, -z)

    def symmetric_pdf(self, y):
        y = _as_points(y, 2)
        return np.exp(self._logphi2(y[..., 0], y[..., 1]))

    def to_dict(self) -> dict:
        return {"family_tag": "mixture", "rho": self.rho, "eta": self.eta}


def model_from_dict(data: dict):
    if data.get("family_tag") == "mixture" and "rho" in data:
        return MixtureSkewNormal2(data["rho"], data["eta"])
    return SkewEllipticalModel.from_dict(data)


def mixture_normalization(m: MixtureSkewNormal2, epsabs: float = 1e-9) -> float:
    """Integrate the mixture density over the plane (test oracle)."""

    def f(y2, y1):
        return float(m.pdf([y1, y2]))

    # split along the lines y1 = 0, y2 = 0 and y1 + y2 = 0 where the density kinks
    total = 0.0
    lim = 12.0
    for a, b in ((-lim, 0.0), (0.0, lim)):
        val, _ = integrate.dblquad(
            f, a, b, lambda x: -lim, lambda x: -x, epsabs=epsabs, epsrel=1e-10
        )
        total += val
        val, _ = integrate.dblquad(f, a, b, lambda x: -x, lambda x: lim, epsabs=epsabs, epsrel=1e-10)
        total += val
    return total
