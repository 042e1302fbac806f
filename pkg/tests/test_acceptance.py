"""Acceptance criteria 1-10.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary (see ``conftest.py``).
"""

import math
import time

import numpy as np
import pytest
from scipy import special

from skewtail import tails
from skewtail.generators import (
    NormalGenerator,
    StudentTGenerator,
    marginal_by_quadrature,
    normalization_integral,
    normalization_target,
    student_t_constant,
)
from skewtail.linalg import correlation
from skewtail.model import MixtureSkewNormal2, SkewEllipticalModel, skew_normal, skew_t
from skewtail.oracle import (
    chi2_grid_check,
    ks_sampler_check,
    probe_heavy_limit,
    probe_light_limit,
    probe_marginal_equivalence,
)
from skewtail.taildep import classical_t_taildep, cube_taildep, empirical_taildep, skew_t_taildep

SEED = 20240611
ACCEPTANCE = {}


class Verdict:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.failures = []
        self.t0 = time.perf_counter()

    def check(self, ok, msg):
        if not ok:
            self.failures.append(msg)

    def finish(self, summary=""):
        elapsed = time.perf_counter() - self.t0
        self.check(elapsed < self.budget, f"runtime {elapsed:.1f}s exceeds {self.budget}s")
        ok = not self.failures
        detail = summary if ok else "; ".join(self.failures[:3])
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s) {self.title}: {detail}"
        ACCEPTANCE[self.number] = line
        print(line)
        assert ok, line


def _rng():
    return np.random.default_rng(SEED)


def test_criterion_01_symmetric_reduction():
    v = Verdict(1, "symmetric reduction", 10.0)
    rng = _rng()
    y2 = rng.uniform(-4, 4, size=(1000, 2))
    y1 = np.linspace(-6, 6, 1000)
    models = [
        (skew_normal([0.0]), y1),
        (skew_t(3.0, [0.0]), y1),
        (skew_normal([0.0, 0.0], rho=0.4), y2),
        (skew_t(1.0, [0.0, 0.0], rho=-0.3), y2),
        (skew_t(4.5, [0.0, 0.0], rho=0.5), y2),
        (MixtureSkewNormal2(0.6, 0.0), y2),
    ]
    worst = 0.0
    for m, y in models:
        diff = float(np.max(np.abs(m.pdf(y) - m.symmetric_pdf(y))))
        worst = max(worst, diff)
        v.check(diff < 1e-10, f"{m!r} pdf differs by {diff:.3g}")

    # heavy symmetric forms: a = 1, lambda = K |Sigma|^{-1/2} q^{1/2-alpha} B(1/2, alpha-1/2)
    w = rng.uniform(0.05, 4.0, size=(1000, 2))
    for nu, rho in [(1.0, 0.0), (4.0, 0.5)]:
        m = skew_t(nu, [0.0, 0.0], rho=rho)
        tdr = tails.heavy_tail_density(m)
        alpha = (nu + 3) / 2
        q = np.einsum("ij,jk,ik->i", w, m.sigma.inv, w)
        ref = tdr.K * m.sigma.det**-0.5 * q ** (0.5 - alpha) * special.beta(0.5, alpha - 0.5)
        v.check(np.array_equal(tdr.a, [1.0, 1.0]), "heavy a != 1")
        v.check(np.allclose(tdr(w), ref, rtol=1e-13, atol=0), f"heavy lambda form nu={nu}")
        ctd = tails.copula_tail_density_heavy(tdr)
        s = w ** (-1 / nu)
        qs = np.einsum("ij,jk,ik->i", s, m.sigma.inv, s)
        ref_u = tdr.K * m.sigma.det**-0.5 * qs ** (0.5 - alpha) * special.beta(0.5, alpha - 0.5)
        ref_u *= nu**-2 * np.prod(w, axis=1) ** (-1 / nu - 1)
        v.check(np.allclose(ctd(w), ref_u, rtol=1e-12, atol=0), f"heavy lambda_U form nu={nu}")

    # light symmetric forms: lambda = |Sigma|^{-1/2} exp(-w Sigma^-1 1), lambda_U = |Sigma|^{-1/2} prod w_i^{(Sigma^-1 1)_i - 1}
    for rho in (0.0, 0.5, -0.4):
        m = skew_normal([0.0, 0.0], rho=rho)
        s = m.sigma.inv @ np.ones(2)
        tdr = tails.light_tail_density(m)
        v.check(tdr.c == 1.0, "light c != 1")
        v.check(np.allclose(tdr(w), m.sigma.det**-0.5 * np.exp(-w @ s), rtol=1e-13, atol=0), f"light lambda rho={rho}")
        ctd = tails.copula_tail_density(m)
        ref_u = m.sigma.det**-0.5 * np.prod(w ** (s - 1.0), axis=1)
        v.check(np.allclose(ctd(w), ref_u, rtol=1e-12, atol=0), f"light lambda_U rho={rho}")
    v.finish(f"max |pdf - symmetric pdf| = {worst:.2e}")


def test_criterion_02_skew_normal_constants():
    v = Verdict(2, "skew-normal tail constants", 30.0)
    table = [
        ([0.0, 0.0], 1.0),
        ([0.0, 0.3], 2.0),
        ([0.3, 0.0], 0.5),
        ([0.3, 0.5], 1.0),
        ([0.5, 0.2], 1.0),
    ]
    worst = 0.0
    for rho in (0.0, 0.5):
        for delta, a2 in table:
            m = skew_normal(delta, rho=rho)
            got = tails.light_tail_density(m).a
            v.check(got[0] == 1.0 and got[1] == a2, f"a={got.tolist()} for delta={delta}")
            rep = probe_marginal_equivalence(m, t=30.0, tolerance=0.02)
            worst = max(worst, rep.rel_error)
            v.check(rep.passed, f"probe delta={delta} rho={rho}: {rep.estimate:.6g} vs {rep.analytic}")
    v.finish(f"worst probe error {worst:.2e} at t=30")


def test_criterion_03_tail_orders():
    v = Verdict(3, "tail orders", 1.0)
    for rho in (-0.5, 0.0, 0.5, 0.9):
        k = tails.light_tail_density(skew_normal([0.0, 0.0], rho=rho)).kappa
        v.check(math.isclose(k, 2 / (1 + rho), rel_tol=1e-14), f"light kappa {k} at rho={rho}")
    sig = np.array([[1.0, 0.3, -0.2], [0.3, 1.0, 0.1], [-0.2, 0.1, 1.0]])
    m3 = SkewEllipticalModel(np.zeros(3), sig, [0.0, 0.0, 0.0], NormalGenerator(4))
    k3 = tails.light_tail_density(m3).kappa
    v.check(math.isclose(k3, float(np.ones(3) @ np.linalg.solve(sig, np.ones(3))), rel_tol=1e-14), "d=3 kappa")
    for nu in (1.0, 4.0):
        v.check(tails.heavy_tail_density(skew_t(nu, [0.2, 0.1], rho=0.5)).kappa == 1.0, "heavy kappa")
        v.check(tails.copula_tail_density(skew_t(nu, [0.2, 0.1], rho=0.5)).kappa == 1.0, "heavy copula kappa")
    for rho in (-0.7, -0.2, 0.0, 0.3, 0.8):
        tdr, ctd = tails.mixture_tail_density(MixtureSkewNormal2(rho, 1.3))
        v.check(math.isclose(ctd.kappa, 2 / (1 + abs(rho)), rel_tol=1e-14), f"mixture kappa rho={rho}")
    v.finish("light 2/(1+rho), heavy 1, mixture 2/(1+|rho|)")


def test_criterion_04_heavy_limit():
    v = Verdict(4, "heavy-limit probe", 120.0)
    worst = 0.0
    n = 0
    for nu in (1.0, 4.0):
        for delta in ([0.0, 0.0], [0.3, 0.3]):
            for rho in (0.0, 0.5):
                m = skew_t(nu, delta, rho=rho)
                for w in ((1.0, 1.0), (1.0, 2.0)):
                    rep = probe_heavy_limit(m, w=w, tolerance=0.02)
                    worst = max(worst, rep.rel_error)
                    n += 1
                    v.check(abs(rep.estimate - 1.0) <= 0.02, f"nu={nu} delta={delta} rho={rho} w={w}: {rep.notes}")
    v.finish(f"{n} probes, worst |ratio - 1| = {worst:.2e} at t=1e3")


def test_criterion_05_light_limit():
    v = Verdict(5, "light-limit probe", 60.0)
    worst = 0.0
    for delta in ([0.0, 0.0], [0.5, 0.5]):
        for rho in (0.0, 0.5):
            m = skew_normal(delta, rho=rho)
            for w in ((1.0, 1.0), (1.0, 2.0), (0.0, 0.0)):
                rep = probe_light_limit(m, w=w, t_grid=(10.0, 20.0, 30.0), tolerance=0.02)
                worst = max(worst, rep.rel_error)
                v.check(rep.passed, f"delta={delta} rho={rho} w={w}: {rep.notes}")
    v.finish(f"worst |ratio - 1| = {worst:.2e} at t=30")


def test_criterion_06_k1():
    v = Verdict(6, "K1 closed form", 5.0)
    v.check(math.isclose(tails.k1_constant(2.0, 0.0), 2.0, rel_tol=1e-14), "K1(2, 0) != 2")
    worst = 0.0
    rng = _rng()
    for nu, tb in zip(rng.uniform(0.5, 12.0, 25), rng.uniform(-2.0, 2.0, 25)):
        a, b = tails.k1_constant(nu, tb), tails.k1_by_quadrature(nu, tb)
        err = abs(a - b) / b
        worst = max(worst, err)
        v.check(err < 1e-9, f"nu={nu:.3f} theta_bar={tb:.3f}: {a!r} vs {b!r}")
    v.finish(f"K1(2,0)=2, worst rel diff vs quadrature {worst:.1e}")


def test_criterion_07_taildep():
    v = Verdict(7, "tail dependence", 300.0)
    worst = 0.0
    for nu in (1.0, 2.0, 4.0):
        for rho in (0.0, 0.5):
            res = skew_t_taildep((nu, rho, 0.0, 0.0))
            ref = classical_t_taildep(nu, rho)
            err = max(abs(res.b_upper - ref), abs(res.b_lower - ref))
            worst = max(worst, err)
            v.check(err < 1e-4, f"polar nu={nu} rho={rho}: {res.b_upper} vs {ref}")
    cube_worst = 0.0
    for nu, rho, d1, d2 in [(4.0, 0.3, 0.5, 0.5), (2.0, 0.0, 0.3, -0.2), (1.0, 0.5, 0.0, 0.0)]:
        m = skew_t(nu, [d1, d2], rho=rho)
        cube = cube_taildep(tails.copula_tail_density(m), tails.copula_tail_density(m, orientation="lower"))
        polar = skew_t_taildep((nu, rho, d1, d2))
        err = max(abs(cube.b_upper - polar.b_upper), abs(cube.b_lower - polar.b_lower))
        cube_worst = max(cube_worst, err)
        v.check(err < 1e-4, f"cube vs polar {(nu, rho, d1, d2)}: {cube.b_upper}, {cube.b_lower}")
    zmax = 0.0
    for j, (nu, rho, d1, d2) in enumerate(
        [(1.0, 0.0, 0.0, 0.0), (1.0, 0.5, 0.0, 0.0), (2.0, 0.5, 0.0, 0.0), (2.0, 0.3, 0.4, 0.4)]
    ):
        m = skew_t(nu, [d1, d2], rho=rho)
        emp = empirical_taildep(m.sample(1_000_000, seed=SEED + j), u=0.005)
        polar = skew_t_taildep((nu, rho, d1, d2))
        zu = (emp.b_upper - polar.b_upper) / emp.params["se_upper"]
        zl = (emp.b_lower - polar.b_lower) / emp.params["se_lower"]
        zmax = max(zmax, abs(zu), abs(zl))
        v.check(abs(zu) <= 3 and abs(zl) <= 3, f"empirical {(nu, rho, d1, d2)}: z=({zu:.2f}, {zl:.2f})")
    v.finish(f"polar err {worst:.1e}, cube err {cube_worst:.1e}, empirical max |z| {zmax:.2f}")


def test_criterion_08_skew_asymmetry():
    v = Verdict(8, "skew asymmetry", 60.0)
    rng = _rng()
    w = rng.uniform(0.05, 5.0, size=(100, 2))
    for nu, rho, delta in [(1.0, 0.0, [0.3, 0.3]), (4.0, 0.5, [0.5, 0.35]), (2.5, -0.3, [0.4, 0.1])]:
        m = skew_t(nu, delta, rho=rho)
        v.check(bool(np.all(m.theta > 0)), f"theta not positive for {delta}")
        up = tails.heavy_tail_density(m, K=1.0)(w)
        lo = tails.heavy_lower_tail_density(m, K=1.0)(w)
        v.check(bool(np.all(up > lo)), f"lambda_upper <= lambda_lower somewhere for {delta}")
        res = skew_t_taildep((nu, rho, *delta))
        v.check(res.b_upper > res.b_lower, f"b_U={res.b_upper} <= b_L={res.b_lower}")
    v.finish("lambda_upper > lambda_lower on 100 points; b_U > b_L")


def test_criterion_09_invariants():
    v = Verdict(9, "invariant suite", 120.0)
    rng = _rng()
    n = 200
    counts = {}

    def count(name):
        counts[name] = counts.get(name, 0) + 1

    for _ in range(n):
        nu = rng.uniform(0.5, 8.0)
        rho = rng.uniform(-0.8, 0.8)
        d = rng.uniform(-0.5, 0.5, 2)
        try:
            m = skew_t(nu, d, rho=rho)
        except Exception:
            d = d / 2
            m = skew_t(nu, d, rho=rho)
        w = rng.uniform(0.05, 5.0, 2)
        t = rng.uniform(0.05, 20.0)
        ctd = tails.copula_tail_density(m)
        v.check(math.isclose(ctd(t * w), t ** (ctd.kappa - 2) * ctd(w), rel_tol=1e-10), "heavy copula scaling")
        count("copula homogeneity (heavy)")
        tdr = tails.heavy_tail_density(m)
        v.check(math.isclose(tdr(t * w), t ** (-tdr.gamma * tdr.kappa - 2) * tdr(w), rel_tol=1e-10), "heavy degree")
        count("heavy homogeneity")
        y = rng.normal(scale=2.0, size=2)
        v.check(math.isclose(float(m.pdf(y)), float(m.reflect().pdf(-y)), rel_tol=1e-13), "pdf reflection")
        lo = tails.heavy_lower_tail_density(m)
        v.check(math.isclose(lo(w), tails.heavy_tail_density(m.reflect())(w), rel_tol=1e-13), "tail reflection")
        count("reflection")
        b, c, alpha = rng.normal(scale=3.0), rng.uniform(0.01, 20.0), rng.uniform(1.0, 6.0)
        v.check(math.isclose(tails.half_line_power_quad(b, c, alpha), tails.half_line_power_integral(b, c, alpha),
                             rel_tol=1e-9), f"half-line integral b={b} c={c} alpha={alpha}")
        v.check(math.isclose(float(m.pdf(y, method="closed")), float(m.pdf(y, method="quad")), rel_tol=1e-9),
                "pdf closed vs quad")
        count("closed vs quadrature")

    while counts.get("light translation", 0) < n:
        rho = rng.uniform(-0.8, 0.8)
        sign = rng.choice([-1.0, 1.0])
        d = sign * np.abs(rng.uniform(0.0, 0.45, 2))
        if rng.random() < 0.3:
            d[rng.integers(2)] = 0.0
        try:
            m = skew_normal(d, rho=rho)
        except Exception:
            continue
        orientation = "upper" if sign > 0 else "lower"
        tdr = tails.light_tail_density(m, orientation=orientation)
        w = rng.uniform(0.0, 5.0, 2)
        z = rng.uniform(0.0, 5.0)
        v.check(math.isclose(tdr(w + z), tdr(w) * math.exp(-z * tdr.kappa), rel_tol=1e-10), "light translation")
        count("light translation")
        ctd = tails.copula_tail_density(m, orientation=orientation)
        wp, t = rng.uniform(0.05, 5.0, 2), rng.uniform(0.05, 20.0)
        v.check(math.isclose(ctd(t * wp), t ** (ctd.kappa - 2) * ctd(wp), rel_tol=1e-10), "light copula scaling")
        count("copula homogeneity (light)")

    for _ in range(n):
        dim = int(rng.integers(1, 5))
        g = StudentTGenerator(rng.uniform(0.5, 10.0), dim) if rng.random() < 0.7 else NormalGenerator(dim)
        v.check(math.isclose(normalization_integral(g), normalization_target(dim), rel_tol=1e-6), f"norm {g!r}")
        count("generator normalization")
        if dim > 1:
            s = rng.uniform(0.0, 30.0)
            v.check(math.isclose(float(marginal_by_quadrature(g, s)), float(g.marginalize()(s)), rel_tol=1e-8),
                    f"marginalize {g!r}")
            if dim > 2:
                gg = g.marginalize().marginalize()
                v.check(math.isclose(float(marginal_by_quadrature(g.marginalize(), s)), float(gg(s)), rel_tol=1e-8),
                        "marginalize chain")
        else:
            s = rng.uniform(0.0, 30.0)
            nu = getattr(g, "nu", None)
            ref = student_t_constant(nu, 1) * (nu + s) ** (-(nu + 1) / 2) if nu else math.exp(-s / 2) / math.sqrt(2 * math.pi)
            v.check(math.isclose(float(g(s)), ref, rel_tol=1e-13), "1-d generator form")
        count("marginalization recursion")

    for name, k in counts.items():
        v.check(k >= 200, f"{name}: only {k} cases")
    v.finish(", ".join(f"{k} x{c}" for k, c in counts.items()))


def test_criterion_10_sampler():
    v = Verdict(10, "sampler correctness", 180.0)
    families = {
        "skew-normal": skew_normal([0.5, -0.2], rho=0.3),
        "skew-t": skew_t(3.0, [0.4, 0.4], rho=0.5),
        "mixture": MixtureSkewNormal2(0.4, 1.5),
    }
    pks, pchi = [], []
    for j, (name, m) in enumerate(families.items()):
        ks = ks_sampler_check(m, n=100_000, seed=SEED + j)
        pks.append(ks.estimate)
        v.check(ks.passed, f"KS {name}: {ks.notes}")
        chi = chi2_grid_check(m, n=1_000_000, seed=SEED + 10 + j)
        pchi.append(chi.estimate)
        v.check(chi.passed, f"chi2 {name}: p={chi.estimate:.3g} {chi.notes}")
    v.finish(f"min KS p={min(pks):.3f}, min chi2 p={min(pchi):.3f}")
