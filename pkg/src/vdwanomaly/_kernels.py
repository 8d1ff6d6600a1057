"""Jitted numerical kernels: scaled Bessel backbone, medium evaluation and
the Riccati log-derivative integrator for the radial modes.

Everything here works on plain floats and parameter vectors so numba can
compile it; the public modules wrap these in friendlier interfaces.  All
exponential magnitudes are carried as (mantissa, exponent) pairs with
value = mantissa * exp(exponent).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    if os.environ.get("VDW_DISABLE_JIT"):
        raise ImportError
    from numba import njit
except ImportError:  # pragma: no cover - fallback path
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        def deco(f):
            return f
        return deco

# ---------------------------------------------------------------------------
# Olver uniform-asymptotic polynomial table, filled in by specfun at import.
# U_COEFFS[s, j] is the coefficient of w**j in U_s(w), degrees 3s <= 18.
U_COEFFS = np.zeros((7, 19))
OLVER_MIN_ORDER = 150.0


def install_u_table(table):
    U_COEFFS[: table.shape[0], : table.shape[1]] = table


@njit(cache=True)
def _u_eval(s, w):
    acc = 0.0
    for j in range(3 * s, -1, -1):
        acc = acc * w + U_COEFFS[s, j]
    return acc


@njit(cache=True)
def olver_ik(p, x, s_max):
    """Uniform-asymptotic scaled I_p(x), K_p(x) for large order p.

    Returns (i_mant, i_exp, k_mant, k_exp).
    """
    z = x / p
    t = math.sqrt(1.0 + z * z)
    xi = t + math.log(z) - math.log(1.0 + t)
    w = 1.0 / t
    si = 0.0
    sk = 0.0
    ppow = 1.0
    for s in range(s_max + 1):
        u = _u_eval(s, w)
        si += u / ppow
        if s % 2 == 0:
            sk += u / ppow
        else:
            sk -= u / ppow
        ppow *= p
    pref = t**-0.5
    im = si * pref / math.sqrt(2.0 * math.pi * p)
    km = sk * pref * math.sqrt(math.pi / (2.0 * p))
    return im, p * xi, km, -p * xi


@njit(cache=True)
def _cf_i_ratio(p, x):
    """Continued fraction for I_{p+1}(x)/I_p(x) (modified Lentz)."""
    tiny = 1e-290
    b0 = 2.0 * (p + 1.0) / x
    f = b0 if abs(b0) > tiny else tiny
    c = f
    d = 0.0
    for m in range(1, 200000):
        b = 2.0 * (p + 1.0 + m) / x
        d = b + d
        if abs(d) < tiny:
            d = tiny
        c = b + 1.0 / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return 1.0 / f


@njit(cache=True)
def bessel_ik_range_seeded(p_lo, n, x, k_lo_m, k_lo_e, k_lo1_m, k_lo1_e):
    """Scaled I, K for orders p_lo .. p_lo+n-1 from two low-order K seeds.

    K seeds are K_{p_lo}(x), K_{p_lo+1}(x) as (mant, exp).  K goes up by
    recurrence, the I ratio comes from the continued fraction at the top
    order and I recurses downward, normalized through the Wronskian
    I_p K_{p+1} + I_{p+1} K_p = 1/x.
    Returns arrays (im, ie, km, ke) of length n+1 (one extra order for
    derivative recurrences).
    """
    m = n + 1
    km = np.empty(m + 1)
    ke = np.empty(m + 1)
    km[0] = k_lo_m
    ke[0] = k_lo_e
    km[1] = k_lo1_m
    ke[1] = k_lo1_e
    for j in range(2, m + 1):
        nu = p_lo + (j - 1)
        # K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu, aligned to exponent of K_nu
        e = ke[j - 1]
        a = km[j - 2] * math.exp(ke[j - 2] - e)
        v = a + (2.0 * nu / x) * km[j - 1]
        if v > 1e250 or v < 1e-250:
            s = math.log(v)
            km[j] = 1.0
            ke[j] = e + s
        else:
            km[j] = v
            ke[j] = e
    # renormalize mantissas
    for j in range(m + 1):
        if km[j] != 0.0:
            s = math.log(abs(km[j]))
            ke[j] += s
            km[j] = math.copysign(1.0, km[j])
    p_top = p_lo + (m - 1)
    rho = _cf_i_ratio(p_top, x)
    # I_top from Wronskian: I_p (K_{p+1} + rho K_p) = 1/x
    # K_{p+1} and K_p share exponents after renormalization step below
    kp_m = km[m] * math.exp(ke[m] - ke[m - 1])
    denom = x * (kp_m + rho * km[m - 1])
    it_m = 1.0 / denom
    it_e = -ke[m - 1]
    im = np.empty(m)
    ie = np.empty(m)
    im[m - 1] = it_m
    ie[m - 1] = it_e
    # I_{top+1} for the downward start
    prev_m = rho * it_m
    prev_e = it_e
    for j in range(m - 2, -1, -1):
        nu = p_lo + (j + 1)
        a = prev_m * math.exp(prev_e - ie[j + 1])
        v = (2.0 * nu / x) * im[j + 1] + a
        prev_m = im[j + 1]
        prev_e = ie[j + 1]
        if v > 1e250:
            s = math.log(v)
            im[j] = 1.0
            ie[j] = ie[j + 1] + s
        else:
            im[j] = v
            ie[j] = ie[j + 1]
    for j in range(m):
        if im[j] != 0.0:
            s = math.log(abs(im[j]))
            ie[j] += s
            im[j] = math.copysign(1.0, im[j])
    return im[:m], ie[:m], km[:m], ke[:m]


@njit(cache=True)
def bessel_ik_range_halfint(p_lo, n, x):
    """Scaled I, K arrays for half-integer orders p_lo, p_lo+1, ...

    Requires 2*p_lo to be a positive odd integer.  Uses the closed-form
    K_{1/2}, K_{3/2} seeds below the Olver crossover and the uniform
    asymptotics above it.
    Returns (im, ie, km, ke) of length n+1.
    """
    if p_lo + n - 1 >= OLVER_MIN_ORDER and p_lo >= OLVER_MIN_ORDER:
        m = n + 1
        im = np.empty(m)
        ie = np.empty(m)
        km = np.empty(m)
        ke = np.empty(m)
        for j in range(m):
            a, b, c, d = olver_ik(p_lo + j, x, 6)
            im[j] = a
            ie[j] = b
            km[j] = c
            ke[j] = d
        return im, ie, km, ke
    # K_{1/2} = sqrt(pi/(2x)) e^{-x}; K_{3/2} = K_{1/2} (1 + 1/x)
    k12_m = math.sqrt(math.pi / (2.0 * x))
    k12_e = -x
    k32_m = k12_m * (1.0 + 1.0 / x)
    k32_e = -x
    # climb from 1/2 up to p_lo, p_lo + 1
    steps = int(round(p_lo - 0.5))
    a_m, a_e = k12_m, k12_e
    b_m, b_e = k32_m, k32_e
    for s in range(steps):
        nu = 0.5 + s + 1.0
        c = a_m * math.exp(a_e - b_e) + (2.0 * nu / x) * b_m
        a_m, a_e = b_m, b_e
        if c > 1e250:
            lg = math.log(c)
            b_m, b_e = 1.0, b_e + lg
        else:
            b_m, b_e = c, b_e
        # keep mantissas tame
        if abs(a_m) > 1e200:
            lg = math.log(abs(a_m))
            a_e += lg
            a_m = math.copysign(1.0, a_m)
    return bessel_ik_range_seeded(p_lo, n, x, a_m, a_e, b_m, b_e)


# ---------------------------------------------------------------------------
# medium kernels

@njit(cache=True, inline="always")
def medium_eval(kind, pars, r, kappa):
    """(eps, deps, mu, dmu) with first radial derivatives at (r, kappa)."""
    if pars[6] > 0.5:
        d = 1.0 / (1.0 + (kappa / pars[7]) ** 2)
    else:
        d = 1.0
    if kind == 0:
        return 1.0 + pars[0] * d, 0.0, 1.0 + pars[1] * d, 0.0
    elif kind == 1:
        n1 = pars[0]
        kk = pars[1]
        a = pars[2]
        f = 1.0 + kk * r * r / (a * a)
        ns = 2.0 * n1 / f
        dns = -ns * (2.0 * kk * r / (a * a)) / f
        return 1.0 + (ns - 1.0) * d, dns * d, 1.0 + (ns - 1.0) * d, dns * d
    else:
        amp = pars[0]
        w = pars[1]
        chi = amp * math.exp(-r * r / (w * w))
        dchi = -2.0 * r / (w * w) * chi
        return 1.0 + chi * d, dchi * d, 1.0, 0.0


@njit(cache=True, inline="always")
def _riccati_rhs(kind, pars, pol, p, kappa, x, L):
    r = math.exp(x)
    eps, deps, mu, dmu = medium_eval(kind, pars, r, kappa)
    if pol == 0:
        nu = mu
        dnux = r * dmu
    else:
        nu = eps
        dnux = r * deps
    q = dnux / (2.0 * nu) + p * p + kappa * kappa * eps * mu * r * r
    return q + (dnux / nu) * L - L * L


@njit(cache=True)
def riccati_integrate(kind, pars, pol, p, kappa, x0, L0, marks, rtol, atol):
    """Integrate the Riccati equation from x0 to each mark in sequence.

    marks must be monotone, moving away from x0 (all below for the
    decaying-at-plus-infinity branch, all above for the other).  Also
    accumulates y = integral of L dx from x0.  Returns (L_at_marks,
    y_at_marks, status) with status 0 on success, 1 on step underflow.
    """
    nm = marks.shape[0]
    Ls = np.zeros(nm)
    ys = np.zeros(nm)
    x = x0
    L = L0
    y = 0.0
    direction = 1.0 if marks[nm - 1] > x0 else -1.0
    h = direction * 0.01
    # Dormand-Prince 5(4)
    for im in range(nm):
        xt = marks[im]
        while direction * (xt - x) > 1e-14:
            if direction * (x + h - xt) > 0.0:
                h = xt - x
            k1 = _riccati_rhs(kind, pars, pol, p, kappa, x, L)
            k2 = _riccati_rhs(kind, pars, pol, p, kappa, x + h / 5.0, L + h * (k1 / 5.0))
            k3 = _riccati_rhs(kind, pars, pol, p, kappa, x + 3.0 * h / 10.0,
                              L + h * (3.0 * k1 / 40.0 + 9.0 * k2 / 40.0))
            k4 = _riccati_rhs(kind, pars, pol, p, kappa, x + 4.0 * h / 5.0,
                              L + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0 + 32.0 * k3 / 9.0))
            k5 = _riccati_rhs(kind, pars, pol, p, kappa, x + 8.0 * h / 9.0,
                              L + h * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0
                                       + 64448.0 * k3 / 6561.0 - 212.0 * k4 / 729.0))
            k6 = _riccati_rhs(kind, pars, pol, p, kappa, x + h,
                              L + h * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0
                                       + 46732.0 * k3 / 5247.0 + 49.0 * k4 / 176.0
                                       - 5103.0 * k5 / 18656.0))
            L5 = L + h * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0 + 125.0 * k4 / 192.0
                          - 2187.0 * k5 / 6784.0 + 11.0 * k6 / 84.0)
            k7 = _riccati_rhs(kind, pars, pol, p, kappa, x + h, L5)
            L4 = L + h * (5179.0 * k1 / 57600.0 + 7571.0 * k3 / 16695.0 + 393.0 * k4 / 640.0
                          - 92097.0 * k5 / 339200.0 + 187.0 * k6 / 2100.0 + k7 / 40.0)
            sc = atol + rtol * max(abs(L), abs(L5))
            err = abs(L5 - L4) / sc
            if err <= 1.0:
                # y via the same 5th-order weights applied to L itself
                y += h * (35.0 * L / 384.0
                          + 500.0 * (L + h * (3.0 * k1 / 40.0 + 9.0 * k2 / 40.0)) / 1113.0
                          + 125.0 * (L + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0
                                              + 32.0 * k3 / 9.0)) / 192.0
                          - 2187.0 * (L + h * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0
                                               + 64448.0 * k3 / 6561.0
                                               - 212.0 * k4 / 729.0)) / 6784.0
                          + 11.0 * (L + h * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0
                                             + 46732.0 * k3 / 5247.0 + 49.0 * k4 / 176.0
                                             - 5103.0 * k5 / 18656.0)) / 84.0)
                x += h
                L = L5
            fac = 0.9 * err**-0.2 if err > 0.0 else 5.0
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            h *= fac
            if abs(h) < 1e-14 * max(1.0, abs(x)):
                return Ls, ys, 1
        Ls[im] = L
        ys[im] = y
    return Ls, ys, 0


# ---------------------------------------------------------------------------
# fast path for the renormalizer's Bessel-product jets

_BINOM = np.zeros((10, 10))
for _n in range(10):
    _BINOM[_n, 0] = 1.0
    for _k in range(1, _n + 1):
        _BINOM[_n, _k] = _BINOM[_n - 1, _k - 1] + (_BINOM[_n - 1, _k] if _k <= _n - 1 else 0.0)


@njit(cache=True)
def z_deriv_stack(P, z, v0, v1, order):
    """Z^(m)(z) for m = 0..order from (Z, Z') via the defining equation.

    Z^(m) = sum_j (A_j Z + B_j Z') z^-j with integer-coefficient
    recurrences in the inverse-power representation.
    """
    d = np.empty(order + 1)
    d[0] = v0
    if order >= 1:
        d[1] = v1
    n = order + 3
    A = np.zeros(n)
    B = np.zeros(n)
    A2 = np.zeros(n)
    B2 = np.zeros(n)
    B[0] = 1.0  # current = Z^(1)
    p2 = P * P
    zinv = 1.0 / z
    for m in range(2, order + 1):
        for j in range(n):
            A2[j] = 0.0
            B2[j] = 0.0
        for j in range(n - 2):
            a = A[j]
            b = B[j]
            if a != 0.0:
                A2[j + 1] += -j * a  # d/dz of a_j z^-j
                B2[j] += a
            if b != 0.0:
                A2[j] += b
                A2[j + 2] += p2 * b
                B2[j + 1] += -j * b - b
        for j in range(n):
            A[j] = A2[j]
            B[j] = B2[j]
        va = 0.0
        vb = 0.0
        zp = 1.0
        for j in range(n):
            va += A[j] * zp
            vb += B[j] * zp
            zp *= zinv
        d[m] = va * v0 + vb * v1
    return d


@njit(cache=True, inline="always")
def _conv(a, b, order):
    out = np.empty(order + 1)
    for t in range(order + 1):
        s = 0.0
        for j in range(t + 1):
            s += _BINOM[t, j] * a[j] * b[t - j]
        out[t] = s
    return out


@njit(cache=True)
def f_jets_core(P, k, r, r0, order):
    """k-jets of F = I_P(k r0) K_P(k r)/sqrt(r r0) and radial variants.

    Returns (val, dr, dr0, drdr0, log_scale) with arrays of length
    order+1 holding d^m/dk^m at the common factored-out exponent.
    """
    zi = k * r0
    zk = k * r
    im, ie, km, ke = bessel_ik_range_halfint(P, 1, zi)
    i0 = im[0]
    e_i = ie[0]
    i1 = im[1] * math.exp(ie[1] - e_i) + (P / zi) * im[0]
    im2, ie2, km2, ke2 = bessel_ik_range_halfint(P, 1, zk)
    k0 = km2[0]
    e_k = ke2[0]
    k1 = -km2[1] * math.exp(ke2[1] - e_k) + (P / zk) * km2[0]

    di = z_deriv_stack(P, zi, i0, i1, order + 1)
    dk = z_deriv_stack(P, zk, k0, k1, order + 1)
    ji = np.empty(order + 1)
    j1i = np.empty(order + 1)
    jk = np.empty(order + 1)
    j1k = np.empty(order + 1)
    rp0 = 1.0
    rp = 1.0
    for m in range(order + 1):
        ji[m] = di[m] * rp0
        j1i[m] = di[m + 1] * rp0
        jk[m] = dk[m] * rp
        j1k[m] = dk[m + 1] * rp
        rp0 *= r0
        rp *= r
    # d/dr0 I(k r0) = k I'(k r0); as a k-jet: k*j1i[t] + t*j1i[t-1]
    kdi = np.empty(order + 1)
    kdk = np.empty(order + 1)
    for t in range(order + 1):
        kdi[t] = k * j1i[t] + (t * j1i[t - 1] if t > 0 else 0.0)
        kdk[t] = k * j1k[t] + (t * j1k[t - 1] if t > 0 else 0.0)
    s = 1.0 / math.sqrt(r * r0)
    c_ik = _conv(ji, jk, order)
    c_i_dk = _conv(ji, kdk, order)
    c_di_k = _conv(kdi, jk, order)
    c_di_dk = _conv(kdi, kdk, order)
    val = np.empty(order + 1)
    drv = np.empty(order + 1)
    dr0v = np.empty(order + 1)
    drr0v = np.empty(order + 1)
    for t in range(order + 1):
        val[t] = c_ik[t] * s
        drv[t] = (c_i_dk[t] - c_ik[t] * (0.5 / r)) * s
        dr0v[t] = (c_di_k[t] - c_ik[t] * (0.5 / r0)) * s
        drr0v[t] = (
            c_di_dk[t]
            - c_di_k[t] * (0.5 / r)
            - c_i_dk[t] * (0.5 / r0)
            + c_ik[t] * (0.25 / (r * r0))
        ) * s
    return val, drv, dr0v, drr0v, e_i + e_k
