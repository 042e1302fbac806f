"""Numerical probes of the tail limits and a configurable check suite.

Each probe returns a :class:`~skewtail.report.ValidationReport`. Heavy
probes scale (``f(tw)``), light probes translate (``f(t1 + m(t)w)``);
both work in log space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import ConfigError, WrongRegime
from .generators import (
    NormalGenerator,
    classify_tail,
    gumbel_scaling_check,
    normalization_integral,
    normalization_target,
)
from .linalg import quad_form
from .model import MixtureSkewNormal2, SkewEllipticalModel, skew_normal, skew_t
from .report import ValidationReport
from .tails import (
    HEAVY,
    LOWER,
    UPPER,
    copula_tail_density,
    half_line_power_integral,
    heavy_tail_density,
    k1_by_quadrature,
    k1_constant,
    light_tail_density,
    tail_density,
)
from . import taildep as td

HEAVY_T_GRID = (10.0, 100.0, 1000.0)
LIGHT_T_GRID = (3.0, 10.0, 20.0, 30.0)
COPULA_U_GRID = (0.05, 0.02, 0.01)


@dataclass
class LimitProbe:
    """Ratios ``observed(t, w) / target(w)`` along an increasing ``t_grid``."""

    t_grid: tuple
    w_points: list
    target: Callable | None = None
    observed: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be strictly increasing and positive")

    def convergence_metric(self, w_index: int = 0) -> float:
        return abs(self.observed[w_index][-1] - 1.0)

    def monotone_tail(self, w_index: int = 0, last: int = 3) -> bool:
        dev = np.abs(np.asarray(self.observed[w_index][-last:]) - 1.0)
        return bool(np.all(np.diff(dev) <= 1e-12))


def _fmt(ratios):
    return ",".join(f"{r:.10g}" for r in ratios)


def probe_heavy_limit(model: SkewEllipticalModel, K=None, w=(1.0, 1.0), t_grid=HEAVY_T_GRID,
                      tolerance=0.02, orientation=UPPER) -> ValidationReport:
    """Ratio ``f(tw) / (2|Sigma|^{-1/2} t g_{d+1}(t^2) int (r^2 + w Sigma^-1 w^T)^{-alpha} dr)``.

    ``K`` only rescales ``lambda`` and cancels in the ratio; it is recorded
    in the notes.
    """
    tail = classify_tail(model.generator)
    if not tail.is_heavy:
        raise WrongRegime("probe_heavy_limit needs a regularly varying generator")
    if orientation == LOWER:
        model = model.reflect()
    model = model.centered()
    w = np.asarray(w, dtype=float)
    alpha = float(tail.alpha)
    probe = LimitProbe(tuple(t_grid), [w])
    log_int = math.log(half_line_power_integral(float(w @ model.theta), quad_form(w, model.sigma), alpha))
    ratios = []
    for t in probe.t_grid:
        log_asym = math.log(2.0) - 0.5 * model.sigma.logdet + math.log(t) + float(model.generator.log(t * t)) + log_int
        ratios.append(math.exp(float(model.logpdf(t * w)) - log_asym))
    probe.observed[0] = ratios
    return ValidationReport(
        "heavy_limit",
        analytic=1.0,
        estimate=ratios[-1],
        tolerance=tolerance,
        notes=f"w={w.tolist()} t={list(probe.t_grid)} ratios={_fmt(ratios)} K={K}",
        extra_ok=probe.monotone_tail() if len(ratios) >= 3 else True,
    )


def probe_light_limit(model: SkewEllipticalModel, w=(1.0, 1.0), t_grid=LIGHT_T_GRID,
                      tolerance=0.02, orientation=UPPER) -> ValidationReport:
    """Ratio ``f(t1 + m(t)w) / (c|Sigma|^{-1/2} g_d(t^2 kappa) exp(-w Sigma^-1 1^T))``."""
    tdr = light_tail_density(model, orientation=orientation)
    if orientation == LOWER:
        model = model.reflect()
    model = model.centered()
    w = np.asarray(w, dtype=float)
    d = model.d
    ones = np.ones(d)
    gd = model.generator.marginalize()
    s = model.sigma.inv @ ones
    ratios = []
    for t in t_grid:
        y = t * ones + float(tdr.m(t)) * w
        log_target = (
            math.log(tdr.c) - 0.5 * model.sigma.logdet + float(gd.log(t * t * tdr.kappa)) - float(w @ s)
        )
        ratios.append(math.exp(float(model.logpdf(y)) - log_target))
    return ValidationReport(
        "light_limit",
        analytic=1.0,
        estimate=ratios[-1],
        tolerance=tolerance,
        notes=f"w={w.tolist()} t={list(t_grid)} ratios={_fmt(ratios)} c={tdr.c:g}",
    )


def probe_marginal_equivalence(model: SkewEllipticalModel, orientation=UPPER, t=None,
                               tolerance=0.02) -> ValidationReport:
    """``f_i(+-t) / f_1(+-t)`` against the analytic ``a_i``; reports the worst component."""
    tdr = tail_density(model, orientation=orientation)
    if t is None:
        t = 1e3 if tdr.regime == HEAVY else 30.0
    sgn = 1.0 if orientation == UPPER else -1.0
    m = model.centered()
    l1 = float(m.marginal_logpdf(0, sgn * t))
    worst = None
    for i in range(1, m.d):
        est = math.exp(float(m.marginal_logpdf(i, sgn * t)) - l1)
        rel = abs(est - tdr.a[i]) / tdr.a[i]
        if worst is None or rel > worst[0]:
            worst = (rel, i, float(tdr.a[i]), est)
    if worst is None:
        worst = (0.0, 0, 1.0, 1.0)
    _, i, a_i, est = worst
    return ValidationReport(
        "marginal_equivalence",
        analytic=a_i,
        estimate=est,
        tolerance=tolerance,
        notes=f"orientation={orientation} t={t:g} component={i} a={np.asarray(tdr.a).tolist()}",
    )


def copula_density(model, u_vec, orientation=UPPER) -> float:
    """Numeric copula density at ``1 - u_vec`` (upper) or ``u_vec`` (lower)."""
    d = model.d
    x = np.empty(d)
    for i in range(d):
        x[i] = model.marginal_isf(i, u_vec[i]) if orientation == UPPER else model.marginal_ppf(i, u_vec[i])
    log_c = float(model.logpdf(x)) - sum(float(model.marginal_logpdf(i, x[i])) for i in range(d))
    return math.exp(log_c)


def probe_copula_density_limit(model, w=(1.0, 1.0), orientation=UPPER, u_grid=COPULA_U_GRID,
                               tolerance=0.10, normalize=None) -> ValidationReport:
    """``c(1 - u w) / u^{kappa - d}`` against ``lambda(w; kappa)``.

    In the light regime the copula density carries a slowly varying factor
    in ``u`` that the tail density does not describe, so by default the
    shape ``lambda(w)/lambda(1)`` is compared instead (``normalize=True``).
    """
    ctd = copula_tail_density(model, orientation=orientation)
    if normalize is None:
        normalize = ctd.regime != HEAVY
    w = np.asarray(w, dtype=float)
    d = w.size
    one = np.ones(d)
    ests = []
    for u in u_grid:
        val = copula_density(model, u * w, orientation) / u ** (ctd.kappa - d)
        if normalize:
            val /= copula_density(model, u * one, orientation) / u ** (ctd.kappa - d)
        ests.append(val)
    analytic = ctd(w) / ctd(one) if normalize else ctd(w)
    return ValidationReport(
        "copula_density_limit",
        analytic=float(analytic),
        estimate=ests[-1],
        tolerance=tolerance,
        notes=f"w={w.tolist()} u={list(u_grid)} estimates={_fmt(ests)} normalized={bool(normalize)} kappa={ctd.kappa:.12g}",
    )


def naive_rejection_sample(model: SkewEllipticalModel, n: int, seed=None) -> np.ndarray:
    """Draw the parent vector and keep only rows with ``X0 > 0`` (oracle sampler)."""
    rng = np.random.default_rng(seed)
    out = []
    got = 0
    while got < n:
        x = model.parent_draws(2 * (n - got) + 16, rng)
        keep = x[x[:, 0] > 0.0, 1:]
        out.append(keep)
        got += keep.shape[0]
    return model.mu + np.concatenate(out)[:n]


def mixture_rejection_sample(m: MixtureSkewNormal2, n: int, seed=None) -> np.ndarray:
    """Envelope rejection from ``g = (phi2(y) + phi2(y1, -y2))/2`` with bound ``f <= 4g``."""
    rng = np.random.default_rng(seed)
    out = []
    got = 0
    while got < n:
        k = 5 * (n - got) + 16
        z = rng.standard_normal((k, 2)) @ m.sigma.chol.T
        flip = rng.random(k) < 0.5
        z[flip, 1] *= -1.0
        g = 0.5 * (m.symmetric_pdf(z) + m.symmetric_pdf(z * np.array([1.0, -1.0])))
        keep = z[rng.random(k) * 4.0 * g < m.pdf(z)]
        out.append(keep)
        got += keep.shape[0]
    return np.concatenate(out)[:n]


def oracle_sample(model, n, seed=None):
    if isinstance(model, MixtureSkewNormal2):
        return mixture_rejection_sample(model, n, seed)
    return naive_rejection_sample(model, n, seed)


def ks_sampler_check(model, n=100_000, seed=0, alpha=0.01) -> ValidationReport:
    """Two-sample KS between the sign-flip sampler and the rejection oracle.

    Tested on each coordinate and on the coordinate sum; the report's
    estimate is the smallest p-value, passing when it exceeds ``alpha``.
    """
    a = model.sample(n, seed=seed)
    b = oracle_sample(model, n, seed=None if seed is None else seed + 1)
    projections = [a[:, i] for i in range(a.shape[1])]
    others = [b[:, i] for i in range(b.shape[1])]
    if a.shape[1] > 1:
        projections.append(a.sum(axis=1))
        others.append(b.sum(axis=1))
    pvals = [stats.ks_2samp(x, y).pvalue for x, y in zip(projections, others)]
    pmin = float(min(pvals))
    return ValidationReport(
        "sampler_ks",
        analytic=1.0,
        estimate=pmin,
        tolerance=1.0,
        seed=seed,
        n=n,
        notes=f"p-values={_fmt(pvals)} threshold={alpha}",
        extra_ok=pmin > alpha,
    )


def _gauss_legendre_cells(pdf, edges, order=8):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    e = np.asarray(edges, dtype=float)
    lo, hi = e[:-1], e[1:]
    half = 0.5 * (hi - lo)
    pts = 0.5 * (hi + lo)[:, None] + half[:, None] * nodes[None, :]  # cells x order
    wts = half[:, None] * weights[None, :]
    x1 = pts[:, None, :, None]
    x2 = pts[None, :, None, :]
    grid = np.stack(np.broadcast_arrays(x1, x2), axis=-1)
    vals = pdf(grid.reshape(-1, 2)).reshape(grid.shape[:-1])
    w = wts[:, None, :, None] * wts[None, :, None, :]
    return np.sum(vals * w, axis=(2, 3))


def chi2_grid_check(model, n=1_000_000, seed=0, bins=20, lim=3.0, alpha=0.01) -> ValidationReport:
    """Chi-square test of sampler counts on a ``bins x bins`` grid plus an outer cell."""
    x = model.sample(n, seed=seed)
    edges = np.linspace(-lim, lim, bins + 1)
    probs = _gauss_legendre_cells(model.pdf, edges)
    counts, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[edges, edges])
    obs = np.append(counts.ravel(), n - counts.sum())
    exp = np.append(probs.ravel(), 1.0 - probs.sum()) * n
    keep = exp >= 5.0
    # merge sparse cells into one bucket so the statistic stays valid
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(exp[keep], exp[~keep].sum())
    if exp_k[-1] == 0:
        obs_k, exp_k = obs_k[:-1], exp_k[:-1]
    chi2 = float(np.sum((obs_k - exp_k) ** 2 / exp_k))
    dof = obs_k.size - 1
    p = float(stats.chi2.sf(chi2, dof))
    return ValidationReport(
        "sampler_chi2",
        analytic=1.0,
        estimate=p,
        tolerance=1.0,
        seed=seed,
        n=n,
        notes=f"chi2={chi2:.6g} dof={dof} threshold={alpha}",
        extra_ok=p > alpha,
    )


# -- suite ------------------------------------------------------------------


def build_model(spec):
    """Model from a shorthand dict ``{"family": ..., ...}`` or a full serialization."""
    if isinstance(spec, (SkewEllipticalModel, MixtureSkewNormal2)):
        return spec
    if not isinstance(spec, dict):
        raise ConfigError(f"model spec must be a mapping, got {type(spec).__name__}")
    fam = spec.get("family")
    try:
        if fam == "skew-normal":
            return skew_normal(spec["delta"], rho=spec.get("rho", 0.0))
        if fam == "skew-t":
            if "nu" not in spec:
                raise ConfigError("skew-t model needs 'nu'")
            return skew_t(spec["nu"], spec["delta"], rho=spec.get("rho", 0.0))
        if fam == "mixture":
            return MixtureSkewNormal2(spec["rho"], spec["eta"])
        if "d" in spec:
            return SkewEllipticalModel.from_dict(spec)
    except KeyError as exc:
        raise ConfigError(f"model spec is missing {exc}") from None
    raise ConfigError(f"unknown model family {fam!r}")


def _tol(tolerance, default):
    return float(default if tolerance is None else tolerance)


def _mc_tol(tolerance, se, analytic):
    if tolerance is not None:
        return float(tolerance)
    return 3.0 * se / max(abs(analytic), 1e-12)


def _check_heavy_limit(params, tolerance, seed, n):
    return probe_heavy_limit(build_model(params["model"]), w=params.get("w", (1.0, 1.0)),
                             tolerance=_tol(tolerance, 0.02), orientation=params.get("orientation", UPPER))


def _check_light_limit(params, tolerance, seed, n):
    return probe_light_limit(build_model(params["model"]), w=params.get("w", (1.0, 1.0)),
                             tolerance=_tol(tolerance, 0.02), orientation=params.get("orientation", UPPER))


def _check_marginal(params, tolerance, seed, n):
    return probe_marginal_equivalence(build_model(params["model"]), params.get("orientation", UPPER),
                                      tolerance=_tol(tolerance, 0.02))


def _check_copula(params, tolerance, seed, n):
    return probe_copula_density_limit(build_model(params["model"]), w=params.get("w", (1.0, 1.0)),
                                      orientation=params.get("orientation", UPPER), tolerance=_tol(tolerance, 0.10))


def _check_k1(params, tolerance, seed, n):
    nu = float(params["nu"])
    tb = float(params.get("theta_bar", 0.0))
    return ValidationReport("k1_normalization", analytic=k1_constant(nu, tb), estimate=k1_by_quadrature(nu, tb),
                            tolerance=_tol(tolerance, 1e-9), notes=f"nu={nu} theta_bar={tb}")


def _check_taildep_symmetric(params, tolerance, seed, n):
    nu, rho = float(params["nu"]), float(params.get("rho", 0.0))
    res = td.skew_t_taildep((nu, rho, 0.0, 0.0))
    return ValidationReport("taildep_symmetric", analytic=td.classical_t_taildep(nu, rho), estimate=res.b_upper,
                            tolerance=_tol(tolerance, 1e-4), notes=f"nu={nu} rho={rho}")


def _check_taildep_cube(params, tolerance, seed, n):
    m = build_model(params["model"])
    p = (float(m.generator.nu), float(m.sigma.entries[0, 1]), *(float(v) for v in m.delta))
    polar = td.skew_t_taildep(p)
    cube = td.cube_taildep(copula_tail_density(m))
    return ValidationReport("taildep_cube", analytic=polar.b_upper, estimate=cube.b_upper,
                            tolerance=_tol(tolerance, 1e-4), notes=f"params={list(p)} cube_err={cube.error_estimate:.3g}")


def _check_taildep_empirical(params, tolerance, seed, n):
    m = build_model(params["model"])
    n = int(n or 1_000_000)
    u = float(params.get("u", 0.005))
    p = (float(m.generator.nu), float(m.sigma.entries[0, 1]), *(float(v) for v in m.delta))
    analytic = td.skew_t_taildep(p).b_upper
    emp = td.empirical_taildep(m.sample(n, seed=seed), u=u)
    se = emp.params["se_upper"]
    return ValidationReport("taildep_empirical", analytic=analytic, estimate=emp.b_upper,
                            tolerance=_mc_tol(tolerance, se, analytic), seed=seed, n=n,
                            notes=f"u={u} se={se:.4g}")


def _check_sampler_ks(params, tolerance, seed, n):
    return ks_sampler_check(build_model(params["model"]), n=int(n or 100_000), seed=seed,
                            alpha=float(params.get("alpha", 0.01)))


def _check_sampler_mean(params, tolerance, seed, n):
    """Mean of the sign-flip sampler against the rejection oracle (both MC)."""
    m = build_model(params["model"])
    n = int(n or 1_000_000)
    a = m.sample(n, seed=seed)[:, 0]
    b = oracle_sample(m, n, seed=None if seed is None else seed + 1)[:, 0]
    se = math.sqrt(a.var() / n + b.var() / n)
    return ValidationReport("sampler_mean", analytic=float(b.mean()), estimate=float(a.mean()),
                            tolerance=_mc_tol(tolerance, se, b.mean()), seed=seed, n=n, notes=f"se={se:.4g}")


def _check_chi2(params, tolerance, seed, n):
    return chi2_grid_check(build_model(params["model"]), n=int(n or 1_000_000), seed=seed,
                           alpha=float(params.get("alpha", 0.01)))


def _check_gumbel_scaling(params, tolerance, seed, n):
    dim = int(params.get("dim", 1))
    q = np.asarray(params.get("Q", np.eye(dim)), dtype=float)
    x = np.asarray(params.get("x", np.ones(q.shape[0])), dtype=float)
    return gumbel_scaling_check(NormalGenerator(dim), q, x, t_grid=(10.0, 100.0, 1000.0),
                                tolerance=_tol(tolerance, 0.02))


def _check_normalization(params, tolerance, seed, n):
    m = build_model(params["model"])
    g = m.generator
    return ValidationReport("generator_normalization", analytic=normalization_target(g.dim),
                            estimate=normalization_integral(g), tolerance=_tol(tolerance, 1e-6), notes=repr(g))


def _check_closed_vs_quad(params, tolerance, seed, n):
    m = build_model(params["model"])
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=2.0, size=(int(n or 200), m.d))
    a = m.pdf(y, method="closed")
    b = m.pdf(y, method="quad")
    worst = int(np.argmax(np.abs(a - b) / a))
    return ValidationReport("closed_vs_quad_pdf", analytic=float(a[worst]), estimate=float(b[worst]),
                            tolerance=_tol(tolerance, 1e-8), seed=seed, n=int(n or 200))


CHECKS = {
    "heavy_limit": _check_heavy_limit,
    "light_limit": _check_light_limit,
    "marginal_equivalence": _check_marginal,
    "copula_density_limit": _check_copula,
    "k1_normalization": _check_k1,
    "taildep_symmetric": _check_taildep_symmetric,
    "taildep_cube": _check_taildep_cube,
    "taildep_empirical": _check_taildep_empirical,
    "sampler_ks": _check_sampler_ks,
    "sampler_mean": _check_sampler_mean,
    "sampler_chi2": _check_chi2,
    "gumbel_scaling": _check_gumbel_scaling,
    "generator_normalization": _check_normalization,
    "closed_vs_quad_pdf": _check_closed_vs_quad,
}

_ST = {"family": "skew-t", "nu": 4, "rho": 0.5, "delta": [0.3, 0.3]}
_SN = {"family": "skew-normal", "rho": 0.0, "delta": [0.5, 0.5]}

DEFAULT_SUITE = {
    "checks": [
        {"name": "heavy_limit", "params": {"model": _ST, "w": [1, 1]}, "tolerance": 0.02},
        {"name": "heavy_limit", "params": {"model": _ST, "w": [1, 2], "orientation": "lower"}, "tolerance": 0.02},
        {"name": "light_limit", "params": {"model": _SN, "w": [1, 1]}, "tolerance": 0.02},
        {"name": "light_limit", "params": {"model": {**_SN, "delta": [0, 0]}, "w": [0, 0]}, "tolerance": 0.02},
        {"name": "marginal_equivalence", "params": {"model": {**_SN, "delta": [0.5, 0.0]}}, "tolerance": 0.02},
        {"name": "marginal_equivalence",
         "params": {"model": {"family": "skew-t", "nu": 3, "rho": 0.2, "delta": [0.6, -0.1]}}, "tolerance": 0.02},
        {"name": "copula_density_limit",
         "params": {"model": {"family": "skew-t", "nu": 1, "rho": 0.3, "delta": [0.4, 0.2]}, "w": [1, 2]},
         "tolerance": 0.10},
        {"name": "copula_density_limit",
         "params": {"model": {"family": "skew-normal", "rho": 0.5, "delta": [0, 0]}, "w": [1, 2]}, "tolerance": 0.10},
        {"name": "k1_normalization", "params": {"nu": 2, "theta_bar": 0.0}, "tolerance": 1e-9},
        {"name": "k1_normalization", "params": {"nu": 3.5, "theta_bar": 0.7}, "tolerance": 1e-9},
        {"name": "taildep_symmetric", "params": {"nu": 1, "rho": 0.0}, "tolerance": 1e-4},
        {"name": "taildep_cube",
         "params": {"model": {"family": "skew-t", "nu": 4, "rho": 0.3, "delta": [0.5, 0.5]}}, "tolerance": 1e-4},
        {"name": "taildep_empirical",
         "params": {"model": {"family": "skew-t", "nu": 1, "rho": 0.0, "delta": [0, 0]}, "u": 0.005},
         "seed": 11, "n": 400_000},
        {"name": "sampler_ks", "params": {"model": _ST}, "seed": 3, "n": 50_000},
        {"name": "sampler_mean", "params": {"model": {"family": "skew-normal", "delta": [0.5]}},
         "seed": 5, "n": 200_000},
        {"name": "gumbel_scaling", "params": {"dim": 1, "x": [1.0]}, "tolerance": 0.02},
        {"name": "generator_normalization", "params": {"model": _ST}, "tolerance": 1e-6},
        {"name": "closed_vs_quad_pdf", "params": {"model": _ST}, "seed": 1, "n": 200, "tolerance": 1e-8},
    ]
}


def validate_config(config) -> list[dict]:
    if not isinstance(config, dict) or "checks" not in config:
        raise ConfigError("suite config must be a mapping with a 'checks' list")
    checks = config["checks"]
    if not isinstance(checks, list):
        raise ConfigError("'checks' must be a list")
    out = []
    for j, c in enumerate(checks):
        if not isinstance(c, dict) or "name" not in c:
            raise ConfigError(f"check #{j} needs a 'name'")
        if c["name"] not in CHECKS:
            raise ConfigError(f"unknown check {c['name']!r}")
        unknown = set(c) - {"name", "params", "tolerance", "seed", "n"}
        if unknown:
            raise ConfigError(f"check #{j} has unknown keys {sorted(unknown)}")
        tol = c.get("tolerance")
        if tol is not None and not (isinstance(tol, (int, float)) and tol >= 0):
            raise ConfigError(f"check #{j}: tolerance must be a nonnegative number")
        params = c.get("params", {})
        if "model" in params:
            build_model(params["model"])
        out.append(c)
    return out


def run_suite(config=None) -> list[ValidationReport]:
    """Run every check in ``config`` (default: :data:`DEFAULT_SUITE`) in order."""
    checks = validate_config(DEFAULT_SUITE if config is None else config)
    reports = []
    for c in checks:
        fn = CHECKS[c["name"]]
        reports.append(fn(c.get("params", {}), c.get("tolerance"), c.get("seed"), c.get("n")))
    return reports


def reports_to_jsonl(reports) -> str:
    return "".join(r.to_json() + "\n" for r in reports)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read suite config {path}: {exc}") from None
