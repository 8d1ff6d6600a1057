"""Geometrical optics of the renormalizer.

Optical length to quadratic order around the emission point, the outgoing
amplitude with its curvature correction, the first-scattering amplitude
beta_1 (the reciprocity breaker), and the near-field waves D0, D1 that get
subtracted in renormalization.  All expansion coefficients are frozen at
the emission radius; radial derivative stacks come from the same jet
scheme the media module uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .jets import Jet
from .media import sample


class GeoOpticsError(ValueError):
    pass


DEFAULT_VALIDITY = 0.05  # max |r - r0| / r0 and |gamma| for the quadratic expansion


@dataclass(frozen=True)
class LocalGeometry:
    """Local expansion data at (r0, kappa) for one polarization."""

    r0: float
    kappa: float
    polarization: str
    n0: float
    dn0: float
    d2n0: float
    nu0: float
    dnu0: float
    d2nu0: float
    ricci_rr: float  # radial projector term of the wave equation [m^-2]
    curvature: float  # 3D curvature scalar R0 [m^-2]
    alpha0: float  # angular quadratic coefficient of the optical length
    beta1: float  # first-scattering amplitude [m^-2]


def _geometry_jets(profile, r0, kappa, polarization, order=0, m=math):
    """Jets (in r at r0) of n, nu, R_rr, R0, alpha0, beta1.

    The returned jets have `order` usable derivative slots; medium jets two
    orders higher feed the second derivatives inside the formulas.
    """
    e, u = profile.eps_mu_jets(r0, kappa, order + 2, m)
    n = (e * u).sqrt()
    nu = u if polarization == "E" else e
    r = Jet.variable(r0, order + 2, m)
    dn, d2n = n.diff(1), n.diff(2)
    dnu, d2nu = nu.diff(1), nu.diff(2)
    lap_n = d2n + 2.0 * dn / r
    ricci = (2.0 / (n * n * nu)) * (dnu * dnu / nu - d2nu - dnu / r)
    curv = -4.0 * lap_n / (n * n * n) + 2.0 * dn * dn / (n * n * n * n)
    alpha0 = dn * r * (dn * r + 2.0 * n) / (24.0 * n)
    beta = (1.0 / (24.0 * n * n)) * (
        (dn * dn - 2.0 * n * lap_n) / (n * n) + (6.0 * nu * d2nu - 9.0 * dnu * dnu) / (nu * nu)
    )
    return {"n": n, "nu": nu, "ricci": ricci, "curv": curv, "alpha0": alpha0, "beta1": beta}


def local_geometry(profile, r0, kappa, polarization):
    """Curvature and expansion coefficients at the emission point."""
    margin = 1e-9 * r0
    if not (profile.r_min - margin <= r0 <= profile.r_max + margin):
        raise GeoOpticsError(f"r0={r0} outside profile domain")
    g = _geometry_jets(profile, r0, kappa, polarization)
    e, u = profile.eps_mu_jets(r0, kappa, 2)
    n = (e * u).sqrt()
    nu = u if polarization == "E" else e
    return LocalGeometry(
        r0=r0,
        kappa=kappa,
        polarization=polarization,
        n0=n.c[0], dn0=n.c[1], d2n0=n.c[2],
        nu0=nu.c[0], dnu0=nu.c[1], d2nu0=nu.c[2],
        ricci_rr=g["ricci"].c[0],
        curvature=g["curv"].c[0],
        alpha0=g["alpha0"].c[0],
        beta1=g["beta1"].c[0],
    )


def separation(r, r0, gamma, m=math):
    return m.sqrt(r * r + r0 * r0 - 2.0 * r * r0 * m.cos(gamma))


def _check_validity(r, r0, gamma, bound):
    bound = bound * (1.0 + 1e-12)
    if abs(r - r0) > bound * r0 or abs(gamma) > bound:
        raise GeoOpticsError(
            f"separation outside quadratic-expansion validity "
            f"(|dr|/r0={abs(r - r0) / r0:.3g}, gamma={gamma:.3g}, bound={bound})"
        )


def optical_length(profile, r, r0, gamma, kappa, validity=DEFAULT_VALIDITY, m=math):
    """Optical path length between (r, gamma) and the emission radius r0.

    Quadratic expansion with coefficients frozen at r0; reciprocal up to
    quadratic order although the coefficients are one-sided.
    """
    _check_validity(r, r0, gamma, validity)
    s = sample(profile, r0, kappa)
    rho = separation(r, r0, gamma, m)
    dr = r - r0
    alpha0 = s.dn * r0 * (s.dn * r0 + 2.0 * s.n) / (24.0 * s.n)
    sin_g = m.sin(gamma)
    return rho * (s.n + 0.5 * s.dn * dr + s.d2n * dr * dr / 6.0 - alpha0 * sin_g * sin_g)


def amplitude0(profile, r, r0, gamma, kappa, polarization, validity=DEFAULT_VALIDITY, m=math):
    """Outgoing geometrical-optics amplitude with the curvature correction."""
    _check_validity(r, r0, gamma, validity)
    rho = separation(r, r0, gamma, m)
    if rho == 0:
        raise GeoOpticsError("amplitude is singular at coincident points")
    geo = local_geometry(profile, r0, kappa, polarization)
    nu_r = sample(profile, r, kappa).nu(polarization)[0]
    pref = -1.0 / (4.0 * m.pi * m.sqrt(geo.nu0 * nu_r))
    return pref * (1.0 / rho + geo.n0 * geo.n0 * geo.curvature * rho / 48.0)


def beta1(profile, r0, kappa, polarization, derivatives=0, m=math):
    """First-scattering amplitude at the emission point.

    With derivatives > 0 returns the list [beta1, beta1', ...] of radial
    derivatives at r0.
    """
    g = _geometry_jets(profile, r0, kappa, polarization, order=derivatives, m=m)
    b = g["beta1"]
    if derivatives == 0:
        return b.c[0]
    return b.c[: derivatives + 1]


def beta1_via_amplitude(profile, r0, kappa, polarization, rho_rel=2e-3):
    """Cross-check route for beta1 through derivatives of the amplitude.

    Evaluates div(nu grad A0)/(2 n^2 nu A0) - R_rr/4 on the frozen
    quadratic medium at small radial separations and Richardson-
    extrapolates the separation to zero.  Runs in extended precision; the
    combination cancels ~1/rho^2-sized pieces.
    """
    import mpmath as mp

    geo = local_geometry(profile, r0, kappa, polarization)
    with mp.workdps(40):
        n0, dn0, d2n0 = mp.mpf(geo.n0), mp.mpf(geo.dn0), mp.mpf(geo.d2n0)
        v0, dv0, d2v0 = mp.mpf(geo.nu0), mp.mpf(geo.dnu0), mp.mpf(geo.d2nu0)
        r0m = mp.mpf(r0)
        c = n0 * n0 * mp.mpf(geo.curvature) / 48

        def value(rho):
            # radial-direction separation, frozen quadratic medium
            rj = Jet.variable(r0m + rho, 4, mp)
            dr = rj - r0m
            nu = v0 + dv0 * dr + 0.5 * d2v0 * dr * dr
            n = n0 + dn0 * dr + 0.5 * d2n0 * dr * dr
            rho_j = dr  # gamma = 0, r > r0
            pref = (-1.0 / (4 * mp.pi)) * (v0 * nu).reciprocal().sqrt()
            amp = pref * (rho_j.reciprocal() + c * rho_j)
            div = nu * (amp.diff(2) + (2.0 / rj + nu.diff(1) / nu) * amp.diff(1))
            # angular Laplacian through rho(gamma): d2rho/dgamma2|0 = r r0/rho
            damp_drho = pref * (-(rho_j * rho_j).reciprocal() + c)
            ang = 2.0 * nu * damp_drho * (rj * r0m) / (rho_j * rj * rj)
            total = (div + ang) / (2.0 * n * n * nu * amp)
            return total.c[0] - mp.mpf(geo.ricci_rr) / 4

        h = mp.mpf(rho_rel) * r0m
        vals = [value(h / 2**k) for k in range(5)]
        for step in range(1, 5):
            vals = [
                (2**step * vals[i + 1] - vals[i]) / (2**step - 1)
                for i in range(len(vals) - 1)
            ]
        return float(vals[0])


def renorm_wave(profile, r, r0, gamma, kappa, polarization,
                validity=DEFAULT_VALIDITY, with_flag=False, m=math):
    """The renormalizing near-field waves (D0, D1) at one geometry.

    D0 is the purely outgoing wave, D1 the first reflection; D1 carries the
    explicit 1/kappa of its asymptotic origin, so values at kappa below the
    resonance scale are extrapolations (flagged when requested).
    """
    if kappa <= 0:
        raise GeoOpticsError("renormalizing waves need kappa > 0")
    s = optical_length(profile, r, r0, gamma, kappa, validity, m)
    a0 = amplitude0(profile, r, r0, gamma, kappa, polarization, validity, m)
    b1 = beta1(profile, r0, kappa, polarization, m=m)
    damp = m.exp(-kappa * s)
    d0 = a0 * damp
    d1 = b1 * a0 * (s / kappa) * damp
    if with_flag:
        kres = profile.kappa_res
        return d0, d1, bool(kres is not None and kappa < kres)
    return d0, d1
