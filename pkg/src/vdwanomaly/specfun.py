"""Special functions for the mode pipeline.

Scaled modified Bessel functions at real order, Olver uniform asymptotics
with the U_s polynomials, uniform IK-product asymptotics, Legendre and
Hermite utilities, and the vector-spherical-harmonic coincidence sums that
serve as angular-weight oracles.

All exponentially large or small values are carried as (mantissa,
exponent) pairs, value = mantissa * exp(exponent), because products like
I_p K_p at order several hundred are O(1/p) while the factors overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from ._kernels import OLVER_MIN_ORDER


class SpecfunError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Olver U_s polynomials, generated exactly from the integro-differential
# recurrence u_{s+1} = x^2 (1 - x^2) u_s' / 2 + (1/8) int_0^x (1 - 5 t^2) u_s.

U_SMAX = 6


def _u_step(u):
    """One application of the U recurrence to exact coefficients."""
    out = [Fraction(0)] * (len(u) + 3)
    for j, c in enumerate(u):
        if j > 0:  # x^2 (1 - x^2) u' / 2
            out[j + 1] += Fraction(j) * c / 2
            out[j + 3] -= Fraction(j) * c / 2
        # (1/8) int_0^x (1 - 5 t^2) u dt
        out[j + 1] += c / Fraction(8 * (j + 1))
        out[j + 3] -= 5 * c / Fraction(8 * (j + 3))
    while out and out[-1] == 0:
        out.pop()
    return out


def _u_polynomials(s_max):
    polys = [[Fraction(1)]]  # coefficient lists, index = power of x
    for _ in range(s_max):
        polys.append(_u_step(polys[-1]))
    return polys


U_POLYNOMIALS = _u_polynomials(U_SMAX)

_table = np.zeros((U_SMAX + 1, 3 * U_SMAX + 1))
for _s, _poly in enumerate(U_POLYNOMIALS):
    for _j, _c in enumerate(_poly):
        _table[_s, _j] = float(_c)
_kernels.install_u_table(_table)


def u_polynomial(s):
    """Exact rational coefficients of U_s (index = power)."""
    if not 0 <= s <= U_SMAX:
        raise SpecfunError(f"U_s stored only for s <= {U_SMAX}")
    return list(U_POLYNOMIALS[s])


def u_recurrence_step(coeffs):
    """Apply the U-recurrence to exact coefficients, for cross-checks."""
    return _u_step([Fraction(c) for c in coeffs])


# ---------------------------------------------------------------------------
# scaled values

@dataclass(frozen=True)
class Scaled:
    """value = mantissa * exp(exponent)"""

    mantissa: float
    exponent: float

    def value(self):
        if self.exponent > 700.0:
            raise OverflowError("unscaled value would overflow; use the scaled pair")
        return self.mantissa * math.exp(self.exponent)

    def log_abs(self):
        return math.log(abs(self.mantissa)) + self.exponent


@dataclass(frozen=True)
class BesselIK:
    """Scaled I_p, K_p and their x-derivatives at one (p, x)."""

    p: float
    x: float
    i: Scaled
    di: Scaled
    k: Scaled
    dk: Scaled


def _seeds_general(p_frac, x):
    """K seeds at fractional order via scipy, as (mant, exp) pairs."""
    from scipy.special import kve

    k0 = kve(p_frac, x)
    k1 = kve(p_frac + 1.0, x)
    if not (np.isfinite(k0) and np.isfinite(k1) and k0 > 0):
        raise SpecfunError(f"cannot seed K at order {p_frac}, x={x}")
    return float(k0), -x, float(k1), -x


def bessel_ik_orders(p_lo, n, x):
    """Scaled (im, ie, km, ke) arrays for orders p_lo .. p_lo + n.

    Length n+1: one extra order so derivative recurrences close.
    """
    if x <= 0:
        raise SpecfunError("argument must be positive")
    if p_lo <= 0:
        raise SpecfunError("order must be positive")
    two_p = 2.0 * p_lo
    if abs(two_p - round(two_p)) < 1e-12 and int(round(two_p)) % 2 == 1:
        return _kernels.bessel_ik_range_halfint(p_lo, n, x)
    if p_lo >= OLVER_MIN_ORDER:
        return _kernels.bessel_ik_range_halfint(p_lo, n, x)  # Olver branch inside
    frac = p_lo - math.floor(p_lo)
    base = frac if frac > 1e-12 else 1.0
    if base < 0.3:
        base += 1.0  # keep the scipy seed away from order 0 underflow corners
    m0, e0, m1, e1 = _seeds_general(base, x)
    climb = int(round(p_lo - base))
    if climb < 0:
        base -= 1.0
        m0, e0, m1, e1 = _seeds_general(base, x)
        climb = int(round(p_lo - base))
    im, ie, km, ke = _kernels.bessel_ik_range_seeded(base, climb + n + 1, x, m0, e0, m1, e1)
    return im[climb:], ie[climb:], km[climb:], ke[climb:]


def bessel_ik(p, x):
    """Scaled I_p(x), K_p(x) and derivatives.

    Backbone: closed-form half-integer seeds with stable recurrences and a
    continued-fraction ratio below order 150, Olver uniform asymptotics
    above; both paths overlap for cross-validation.
    """
    im, ie, km, ke = bessel_ik_orders(p, 1, x)
    # I' = I_{p+1} + (p/x) I_p ; K' = -K_{p+1} + (p/x) K_p
    di_m = im[1] * math.exp(ie[1] - ie[0]) + (p / x) * im[0]
    dk_m = -km[1] * math.exp(ke[1] - ke[0]) + (p / x) * km[0]
    return BesselIK(
        p=p,
        x=x,
        i=Scaled(im[0], ie[0]),
        di=Scaled(di_m, ie[0]),
        k=Scaled(km[0], ke[0]),
        dk=Scaled(dk_m, ke[0]),
    )


def ik_uniform_product(alpha1, z1, alpha2, z2, s_max=U_SMAX):
    """Uniform asymptotics of I_{a1}(a1 z1) K_{a2}(a2 z2) as a Scaled value.

    The exponent a1 xi1 - a2 xi2 is carried separately from the double-sum
    mantissa so nearby products can be combined without overflow.
    """
    if alpha1 < 10 or alpha2 < 10:
        raise SpecfunError("uniform product asymptotics need orders >= 10")
    if s_max > U_SMAX:
        raise SpecfunError(f"only U_0..U_{U_SMAX} are stored")
    t1 = math.sqrt(1.0 + z1 * z1)
    t2 = math.sqrt(1.0 + z2 * z2)
    xi1 = t1 + math.log(z1) - math.log(1.0 + t1)
    xi2 = t2 + math.log(z2) - math.log(1.0 + t2)
    w1, w2 = 1.0 / t1, 1.0 / t2
    ev1 = [_eval_u(s, w1) for s in range(s_max + 1)]
    ev2 = [_eval_u(s, w2) for s in range(s_max + 1)]
    total = 0.0
    for s1 in range(s_max + 1):
        for s2 in range(0, s1 + 1):
            total += ((-1.0) ** s2) * ev1[s1 - s2] * ev2[s2] / (
                alpha1 ** (s1 - s2) * alpha2**s2
            )
    mant = total / (2.0 * math.sqrt(alpha1 * alpha2) * math.sqrt(t1) * math.sqrt(t2))
    return Scaled(mant, alpha1 * xi1 - alpha2 * xi2)


def _eval_u(s, w):
    acc = 0.0
    for c in reversed(U_POLYNOMIALS[s]):
        acc = acc * w + float(c)
    return acc


# ---------------------------------------------------------------------------
# Legendre and vector spherical harmonics

def legendre_deriv_at_one(l, k):
    """Exact k-th derivative of P_l at x = 1 as a Fraction."""
    if l < 0 or k < 0:
        raise SpecfunError("l and k must be nonnegative")
    if k > l:
        return Fraction(0)
    num = Fraction(1)
    for q in range(-k + 1, k + 1):
        num *= l + q
    den = Fraction(1)
    for q in range(1, k + 1):
        den *= 2 * q
    return num / den


VSH_KINDS = ("YY", "PsiPsi", "PhiPhi", "PsiPhi", "PhiPsi", "YPsi", "YPhi", "PsiY", "PhiY")


def vsh_sum(l, kind):
    """Closed-form m-sum of outer products of vector spherical harmonics at
    coincident angles, as a real 3x3 matrix in the (r, theta, phi) frame.

    Returns (matrix, degenerate) where degenerate flags the l = 0 case for
    kinds that involve the tangential harmonics (they vanish there).
    """
    if kind not in VSH_KINDS:
        raise SpecfunError(f"unknown kind {kind!r}")
    m = np.zeros((3, 3))
    if kind == "YY":
        m[0, 0] = (2 * l + 1) / (4 * math.pi)
        return m, False
    if l == 0:
        return m, True
    c = l * (l + 1) * (2 * l + 1) / (8 * math.pi)
    if kind in ("PsiPsi", "PhiPhi"):
        m[1, 1] = c
        m[2, 2] = c
    elif kind == "PsiPhi":
        m[1, 2] = c
        m[2, 1] = -c
    elif kind == "PhiPsi":
        m[1, 2] = -c
        m[2, 1] = c
    # mixed radial/tangential kinds are identically zero
    return m, False


def _sph_harm(l, m, theta, phi):
    from scipy.special import sph_harm_y

    return sph_harm_y(l, m, theta, phi)


def _vsh_vectors(l, m, theta, phi):
    """(Y, Psi, Phi) at one angle, complex 3-vectors in (r, theta, phi)."""
    y = _sph_harm(l, m, theta, phi)
    dth = _dtheta_sph_harm(l, m, theta, phi)
    dph_over_sin = (1j * m / math.sin(theta)) * y
    yv = np.array([y, 0.0, 0.0])
    psi = np.array([0.0, dth, dph_over_sin])
    phiv = np.array([0.0, -dph_over_sin, dth])
    return yv, psi, phiv


def _dtheta_sph_harm(l, m, theta, phi):
    y = _sph_harm(l, m, theta, phi)
    if m < l:
        y1 = _sph_harm(l, m + 1, theta, phi)
        return m * y / math.tan(theta) + math.sqrt((l - m) * (l + m + 1)) * np.exp(
            -1j * phi
        ) * y1
    return m * y / math.tan(theta)


def vsh_sum_bruteforce(l, kind, theta, phi):
    """Direct m-sum of the outer products from explicit Y_lm gradients."""
    if kind not in VSH_KINDS:
        raise SpecfunError(f"unknown kind {kind!r}")
    pick = {"Y": 0, "Psi": 1, "Phi": 2}
    if kind == "YY":
        a = b = 0
    else:
        names = kind.replace("Phi", "F").replace("Psi", "S")
        seq = []
        for ch in names:
            seq.append({"Y": 0, "S": 1, "F": 2}[ch])
        a, b = seq[0], seq[1]
    total = np.zeros((3, 3), dtype=complex)
    for m in range(-l, l + 1):
        vecs = _vsh_vectors(l, m, theta, phi)
        total += np.outer(vecs[a], np.conj(vecs[b]))
    return total


# ---------------------------------------------------------------------------
# Hermite polynomials (scaled)

def hermite(n, x):
    """H_n(x) by the three-term recurrence, as a Scaled value."""
    if n < 0 or n > 10000:
        raise SpecfunError("need 0 <= n <= 10000")
    if n == 0:
        return Scaled(1.0, 0.0)
    prev, cur, e = 1.0, 2.0 * x, 0.0  # H_0, H_1 on a shared exponent
    for k in range(1, n):
        prev, cur = cur, 2.0 * x * cur - 2.0 * k * prev
        a = max(abs(prev), abs(cur))
        if a > 1e200:
            lg = math.log(a)
            prev *= math.exp(-lg)
            cur *= math.exp(-lg)
            e += lg
    return Scaled(cur, e)
