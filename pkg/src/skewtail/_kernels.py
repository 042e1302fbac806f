"""Hot numeric kernels.

The half-line generator integrals behind every quadrature-path density
evaluation live here. Two interchangeable implementations exist:

* a scalar adaptive Gauss-Kronrod loop compiled with ``numba.njit``;
* a breadth-first vectorized NumPy version of the same algorithm.

Both use the same local acceptance rule, so they agree to rounding.
Set ``SKEWTAIL_NUMBA=0`` to force the NumPy path (it is also used
automatically when numba cannot be imported).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SKEWTAIL_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)

# g(s) proportional to exp(-s/2)
EXP_FAMILY = 0
# g(s) proportional to (shift + s)^(-expo)
POWER_FAMILY = 1

# QUADPACK qk21 abscissae (descending, last is the centre) and weights
_XGK = np.array(
    [
        0.995657163025808080735527280689003,
        0.973906528517171720077964012084452,
        0.930157491355708226001207180059508,
        0.865063366688984510732096688423493,
        0.780817726586416897063717578345042,
        0.679409568299024406234327365114874,
        0.562757134668604683339000099272694,
        0.433395394129247190799265943165784,
        0.294392862701460198131126603103866,
        0.148874338981631210884826001129720,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.011694638867371874278064396062192,
        0.032558162307964727478818972459390,
        0.054755896574351996031381300244580,
        0.075039674810919952767043140916190,
        0.093125454583697605535065465083366,
        0.109387158802297641899210590325805,
        0.123491976262065851077208465712214,
        0.134709217311473325928054001771707,
        0.142775938577060080797094273138717,
        0.147739104901338491374841515972068,
        0.149445554002916905664936468389821,
    ]
)
# 10-point Gauss weights for the odd-indexed Kronrod abscissae
_WG = np.array(
    [
        0.066671344308688137593568809893332,
        0.149451349150580593145776339657697,
        0.219086362515982043995534934228163,
        0.269266719309996355091226921569469,
        0.295524224714752870173892994651338,
    ]
)

# Full 21-point node/weight vectors on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(21)
for _j, _w in enumerate(_WG):
    GAUSS_W[2 * _j + 1] = _w
    GAUSS_W[19 - 2 * _j] = _w

HALF_PI = 0.5 * math.pi


MAX_DEPTH = 48
MAX_INTERVALS = 4000


def _jit(fn):
    return njit(cache=True)(fn) if HAS_NUMBA else fn


@_jit
def _mapped_integrand(code, expo, scale, phi):
    # r = scale * tan(phi); integrand of g(r^2 + q) / g(q) dr in phi
    c = math.cos(phi)
    if c <= 0.0:
        return 0.0
    if code == EXP_FAMILY:
        t = math.tan(phi)
        return math.exp(-0.5 * t * t) / (c * c)
    return scale * c ** (2.0 * expo - 2.0)


@_jit
def _gk21(code, expo, scale, a, b, nodes, wk, wg):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    rk = 0.0
    rg = 0.0
    for j in range(21):
        v = _mapped_integrand(code, expo, scale, centre + half * nodes[j])
        rk += wk[j] * v
        rg += wg[j] * v
    return rk * half, abs((rk - rg) * half)


@_jit
def _adaptive(code, expo, scale, a, b, epsabs, epsrel, nodes, wk, wg, stack_a, stack_b, stack_d):
    if b <= a:
        return 0.0, 0.0
    whole, err0 = _gk21(code, expo, scale, a, b, nodes, wk, wg)
    tol = max(epsabs, epsrel * abs(whole))
    if err0 <= tol:
        return whole, err0
    density = tol / (b - a)
    top = 0
    mid = 0.5 * (a + b)
    stack_a[0] = a
    stack_b[0] = mid
    stack_d[0] = 1
    stack_a[1] = mid
    stack_b[1] = b
    stack_d[1] = 1
    top = 2
    total = 0.0
    total_err = 0.0
    count = 0
    while top > 0:
        top -= 1
        x0 = stack_a[top]
        x1 = stack_b[top]
        depth = stack_d[top]
        v, e = _gk21(code, expo, scale, x0, x1, nodes, wk, wg)
        count += 1
        if e <= density * (x1 - x0) or depth >= MAX_DEPTH or count >= MAX_INTERVALS:
            total += v
            total_err += e
        else:
            m = 0.5 * (x0 + x1)
            stack_a[top] = x0
            stack_b[top] = m
            stack_d[top] = depth + 1
            stack_a[top + 1] = m
            stack_b[top + 1] = x1
            stack_d[top + 1] = depth + 1
            top += 2
    return total, total_err


@_jit
def _phi_limits(code, shift, q, b):
    scale = 1.0 if code == EXP_FAMILY else math.sqrt(shift + q)
    if b >= 0.0:
        return scale, math.atan(b / scale), 1.0
    return scale, math.atan(-b / scale), -1.0


@_jit
def _half_line_loop(code, shift, expo, q, b, epsabs, epsrel, nodes, wk, wg):
    n = q.shape[0]
    out = np.empty(n)
    err = np.empty(n)
    # depth-first stacks shared across points
    sa = np.empty(MAX_DEPTH * 2 + 2)
    sb = np.empty(MAX_DEPTH * 2 + 2)
    sd = np.empty(MAX_DEPTH * 2 + 2, dtype=np.int64)
    for i in range(n):
        scale, lim, sgn = _phi_limits(code, shift, q[i], b[i])
        if sgn > 0.0:
            v1, e1 = _adaptive(code, expo, scale, 0.0, HALF_PI, epsabs, epsrel, nodes, wk, wg, sa, sb, sd)
            v2, e2 = _adaptive(code, expo, scale, 0.0, lim, epsabs, epsrel, nodes, wk, wg, sa, sb, sd)
            out[i] = v1 + v2
            err[i] = e1 + e2
        else:
            v, e = _adaptive(code, expo, scale, lim, HALF_PI, epsabs, epsrel, nodes, wk, wg, sa, sb, sd)
            out[i] = v
            err[i] = e
    return out, err


def _mapped_integrand_vec(code, expo, scale, phi):
    c = np.cos(phi)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        if code == EXP_FAMILY:
            t = np.tan(phi)
            v = np.exp(-0.5 * t * t) / (c * c)
        else:
            v = scale * c ** (2.0 * expo - 2.0)
    return np.where(c > 0.0, v, 0.0)


def _adaptive_vec(code, expo, scale, a, b, epsabs, epsrel):
    """Breadth-first adaptive GK21 over many independent intervals."""
    n = a.shape[0]
    total = np.zeros(n)
    total_err = np.zeros(n)

    def gk(idx, x0, x1):
        centre = 0.5 * (x0 + x1)
        half = 0.5 * (x1 - x0)
        phi = centre[:, None] + half[:, None] * NODES[None, :]
        vals = _mapped_integrand_vec(code, expo, scale[idx][:, None], phi)
        rk = vals @ KRONROD_W
        rg = vals @ GAUSS_W
        return rk * half, np.abs((rk - rg) * half)

    live = b > a
    idx = np.nonzero(live)[0]
    if idx.size == 0:
        return total, total_err
    whole, err0 = gk(idx, a[idx], b[idx])
    tol = np.maximum(epsabs, epsrel * np.abs(whole))
    done = err0 <= tol
    total[idx[done]] = whole[done]
    total_err[idx[done]] = err0[done]
    density = np.zeros(n)
    density[idx] = tol / (b[idx] - a[idx])

    owner = idx[~done]
    mid = 0.5 * (a[owner] + b[owner])
    x0 = np.concatenate([a[owner], mid])
    x1 = np.concatenate([mid, b[owner]])
    owner = np.concatenate([owner, owner])
    depth = 1
    counts = np.zeros(n, dtype=np.int64)
    while owner.size:
        v, e = gk(owner, x0, x1)
        np.add.at(counts, owner, 1)
        accept = (e <= density[owner] * (x1 - x0)) | (depth >= MAX_DEPTH) | (
            counts[owner] >= MAX_INTERVALS
        )
        np.add.at(total, owner[accept], v[accept])
        np.add.at(total_err, owner[accept], e[accept])
        keep = ~accept
        owner = owner[keep]
        lo = x0[keep]
        hi = x1[keep]
        m = 0.5 * (lo + hi)
        x0 = np.concatenate([lo, m])
        x1 = np.concatenate([m, hi])
        owner = np.concatenate([owner, owner])
        depth += 1
    return total, total_err


def _half_line_numpy(code, shift, expo, q, b, epsabs, epsrel):
    if code == EXP_FAMILY:
        scale = np.ones_like(q)
    else:
        scale = np.sqrt(shift + q)
    lim = np.arctan(np.abs(b) / scale)
    pos = b >= 0.0
    zeros = np.zeros_like(q)
    halfpi = np.full_like(q, HALF_PI)
    # b >= 0: full half line plus [0, atan(b/L)]; b < 0: [atan(|b|/L), pi/2]
    v1, e1 = _adaptive_vec(code, expo, scale, np.where(pos, 0.0, lim), halfpi, epsabs, epsrel)
    v2, e2 = _adaptive_vec(code, expo, scale, zeros, np.where(pos, lim, 0.0), epsabs, epsrel)
    return v1 + v2, e1 + e2


def half_line_ratio(
    code: int,
    shift: float,
    expo: float,
    q,
    b,
    epsabs: float = 0.0,
    epsrel: float = 1e-13,
    backend: str | None = None,
):
    """Integrate ``g(r^2 + q) / g(q)`` over ``r`` in ``(-inf, b]``.

    ``g`` is either ``exp(-s/2)`` (``EXP_FAMILY``) or
    ``(shift + s)^(-expo)`` (``POWER_FAMILY``). The substitution
    ``r = L tan(phi)`` maps the half line onto ``[0, pi/2)``; the scale
    ``L`` is 1 for the exponential family and ``sqrt(shift + q)`` for the
    power family. Negative ``b`` integrates ``[|b|, inf)`` directly so the
    far tail never suffers cancellation.

    Returns ``(values, abs_error_estimates)`` as float arrays.
    """
    q = np.ascontiguousarray(np.atleast_1d(np.asarray(q, dtype=float)))
    b = np.ascontiguousarray(np.atleast_1d(np.asarray(b, dtype=float)))
    q, b = np.broadcast_arrays(q, b)
    shape = q.shape
    q = np.ascontiguousarray(q.ravel())
    b = np.ascontiguousarray(b.ravel())
    if code == POWER_FAMILY and np.any(shift + q <= 0.0):
        raise ValueError("power family needs shift + q > 0")
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        if not HAS_NUMBA:  # pragma: no cover
            raise RuntimeError("numba backend requested but numba is unavailable")
        out, err = _half_line_loop(
            int(code), float(shift), float(expo), q, b, float(epsabs), float(epsrel),
            NODES, KRONROD_W, GAUSS_W,
        )
    elif backend == "numpy":
        out, err = _half_line_numpy(int(code), float(shift), float(expo), q, b, epsabs, epsrel)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out.reshape(shape), err.reshape(shape)
