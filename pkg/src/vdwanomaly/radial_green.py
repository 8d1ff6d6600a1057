"""Exact radial Green coefficients per angular mode.

The radial equation is solved in the log-radius (Langer) variable through
the Riccati equations for the log-derivatives of the two decaying
homogeneous solutions.  Log-derivatives plus one accumulated magnitude
integral are all the Green coefficient and its first derivatives need;
the solutions themselves vary over hundreds of e-folds and are never
formed.  WKB series seed the integrations at the domain boundaries and
provide the asymptotic Green function for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .jets import Jet
from .media import MediaError


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModeIndex:
    """One term of the mode sum: angular momentum, polarization, wavenumber."""

    l: int
    polarization: str
    kappa: float

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("mode sums run over l >= 1")
        if self.polarization not in ("E", "M"):
            raise ValueError("polarization must be 'E' or 'M'")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError("kappa must be finite and positive")

    @property
    def p(self):
        return self.l + 0.5


@dataclass(frozen=True)
class RadialMode:
    """Riccati solution data for one mode at the requested radii.

    x_marks are ln r in increasing order; lp/lm are the log-derivatives of
    the upper/lower decaying solutions, yp/ym the accumulated integrals of
    lp (from x_hi, downward) and lm (from x_lo, upward) at the marks.
    """

    mode: ModeIndex
    x_marks: np.ndarray
    lp: np.ndarray
    lm: np.ndarray
    yp: np.ndarray
    ym: np.ndarray
    x_lo: float
    x_hi: float
    profile_hash: str

    def nu_at(self, profile, x):
        e, u = profile.eps_mu_jets(math.exp(x), self.mode.kappa, 0)
        return u.c[0] if self.mode.polarization == "E" else e.c[0]


def wkb_series(profile, mode, x, m=math):
    """Leading WKB derivative orders (s0', s1', s2') at ln-radius x.

    Signs follow the branch that decays at +infinity; all three orders are
    evaluated with the polarization's nu-terms included.
    """
    s = _wkb_jet(profile, mode, x, n_orders=3, jet_order=0, m=m)
    return s[0].c[0], s[1].c[0], s[2].c[0]


def _wkb_jet(profile, mode, x, n_orders, jet_order, m=math):
    """Jets of s_0'..s_{n_orders-1}' at x, each with jet_order slots.

    The recurrence consumes one derivative order per WKB order, so the
    medium jets start at jet_order + n_orders - 1 slots and shrink.
    """
    kappa, p = mode.kappa, mode.p
    if m is not math:
        kappa = m.mpf(kappa)
    depth = jet_order + n_orders - 1
    r = math.exp(x) if m is math else m.exp(x)
    e, u = profile.eps_mu_jets(r, kappa, depth + 1, m)
    nu = u if mode.polarization == "E" else e
    rj = Jet.variable(r, depth + 1, m)
    # convert radial jets to jets in x = ln r: d/dx = r d/dr
    a_r = e * u * (rj * rj) * kappa**2  # kappa^2 n^2 e^{2x} as a function of r
    A = _to_x_jet(a_r, rj, depth)
    V = _to_x_jet(nu, rj, depth)
    s_orders = []
    s0p = (A + p * p).sqrt()
    s_orders.append(s0p)
    if n_orders >= 2:
        s1p = s0p.diff(1) / (2.0 * s0p.truncate(s0p.order - 1)) - V.diff(1) / (2.0 * V.truncate(V.order - 1))
        s_orders.append(s1p)
    for mm in range(2, n_orders):
        prev = s_orders[mm - 1]
        acc = prev.diff(1) - (V.diff(1) / V) * prev - _convolve(s_orders, mm)
        if mm == 2:
            acc = acc + V.diff(1) / (2.0 * V)
        s_orders.append(acc / (2.0 * s0p))
    return s_orders


def _convolve(s_orders, mm):
    tot = None
    for k in range(1, mm):
        term = s_orders[k] * s_orders[mm - k]
        tot = term if tot is None else tot + term
    return tot


def _to_x_jet(f_r, r_jet, depth):
    """Turn a jet in r into a jet in x = ln r (d/dx = r d/dr)."""
    coeffs = []
    cur = f_r
    for _ in range(depth + 1):
        coeffs.append(cur.c[0])
        cur = r_jet.truncate(cur.order) * cur.diff(1)
    return Jet(coeffs, f_r._m)


def wkb_validity(profile, mode, x):
    s0p, s1p, _ = wkb_series(profile, mode, x)
    return abs(s1p / s0p)


_BUDGET_FULL = 46.0   # contraction e-folds that wipe any basin-interior seed
_BUDGET_VALID = 40.0  # enough when the seed itself is already good
_BUDGET_MIN = 35.0    # floor accepted when the medium representation runs out


def _auto_boundaries(profile, mode, x_marks):
    """Pick seeding points: trustworthy WKB seeds or enough contraction.

    The Riccati flow contracts seed errors like exp(-2 int s0' dx), so a
    mediocre seed far out is as good as an excellent one nearby.  The spec
    rule (validity < 0.1) is kept when attainable; profiles whose validity
    parameter plateaus (static fisheye at large radius has |s1'/s0'| ->
    1/p) fall back to the contraction budget.
    """
    x_min, x_max = float(x_marks[0]), float(x_marks[-1])
    kappa, p = mode.kappa, mode.p

    def s0_cheap(x):
        r = math.exp(x)
        e, u = profile.eps_mu_jets(r, kappa, 0)
        if min(e.c[0], u.c[0]) <= 1e-12:
            return None  # medium representation underflows out here
        return math.hypot(p, kappa * math.sqrt(e.c[0] * u.c[0]) * r)

    hard_lo = math.log(profile.r_min) - 40.0
    hard_hi = math.log(profile.r_max) + 40.0
    if profile.kind == "tabulated":
        hard_lo = math.log(profile.r_min)
        hard_hi = math.log(profile.r_max)

    def extend(x_t, direction, hard):
        x_b, budget = x_t, 0.0
        s_prev = s0_cheap(x_t)
        if s_prev is None:
            raise SolverError(f"medium not representable at ln r = {x_t:.2f}")
        checked_valid = False
        for _ in range(4000):
            if budget >= _BUDGET_FULL:
                return x_b
            if budget >= _BUDGET_VALID and not checked_valid:
                checked_valid = True
                if wkb_validity(profile, mode, x_b) < 0.1:
                    return x_b
            stride = min(0.5, max(0.02, (_BUDGET_FULL - budget) / (2.0 * s_prev)))
            x_next = x_b + direction * stride
            if direction * (x_next - hard) > 0:
                x_next = hard
            s_next = s0_cheap(x_next)
            if s_next is None or x_next == x_b:
                if budget >= _BUDGET_MIN:
                    return x_b
                raise SolverError(
                    "boundary seed invalid and domain cannot be enlarged "
                    f"(budget {budget:.1f} at ln r = {x_b:.2f})"
                )
            budget += abs(x_next - x_b) * (s_prev + s_next)
            x_b, s_prev = x_next, s_next
            if x_b == hard:
                if budget >= _BUDGET_MIN:
                    return x_b
                raise SolverError(
                    f"domain too small for a trustworthy seed (budget {budget:.1f})"
                )
        raise SolverError("boundary search did not terminate")

    return extend(x_min, -1.0, hard_lo), extend(x_max, +1.0, hard_hi)


def solve_radial_mode(profile, mode, radii, rtol=1e-11, cache_dir=None, boundaries=None):
    """Solve one mode's Riccati systems and record data at the given radii.

    radii may be any iterable; marks are deduplicated and sorted.  The
    boundary seeds are the WKB log-derivatives -(s0' + s2') - s1' on the
    upper side and +(s0' + s2') - s1' on the lower side, with the domain
    auto-extended until the seeds are trustworthy.  Precomputed boundaries
    may be passed to share the search between polarizations.
    """
    if cache_dir is not None:
        from . import cache as _cache

        hit = _cache.load_mode(cache_dir, profile, mode, radii)
        if hit is not None:
            return hit
    x_marks = np.array(sorted({math.log(r) for r in np.atleast_1d(radii)}))
    if np.any(~np.isfinite(x_marks)):
        raise SolverError("radii must be positive and finite")
    if boundaries is None:
        x_lo, x_hi = _auto_boundaries(profile, mode, x_marks)
    else:
        x_lo, x_hi = boundaries

    try:
        kind, pars = profile.kernel_params()
        fast = True
    except MediaError:
        fast = False
    pol = 0 if mode.polarization == "E" else 1
    p, kappa = mode.p, mode.kappa
    atol = 1e-12 * (1.0 + p + kappa * math.exp(x_hi))

    s0, s1, s2 = wkb_series(profile, mode, x_hi)
    seed_hi = -(s0 + s2) - s1
    s0, s1, s2 = wkb_series(profile, mode, x_lo)
    seed_lo = (s0 + s2) - s1

    if fast:
        lp, yp, st1 = _kernels.riccati_integrate(
            kind, pars, pol, p, kappa, x_hi, seed_hi, x_marks[::-1].copy(), rtol, atol
        )
        lm, ym, st2 = _kernels.riccati_integrate(
            kind, pars, pol, p, kappa, x_lo, seed_lo, x_marks.copy(), rtol, atol
        )
        lp, yp = lp[::-1].copy(), yp[::-1].copy()
    else:
        lp, yp, st1 = _riccati_python(profile, mode, x_hi, seed_hi, x_marks[::-1], rtol)
        lm, ym, st2 = _riccati_python(profile, mode, x_lo, seed_lo, x_marks, rtol)
        lp, yp = lp[::-1].copy(), yp[::-1].copy()
    if st1 or st2:
        raise SolverError("Riccati integration step underflow (stiffness failure)")
    rm = RadialMode(
        mode=mode,
        x_marks=x_marks,
        lp=lp,
        lm=lm,
        yp=yp,
        ym=ym,
        x_lo=x_lo,
        x_hi=x_hi,
        profile_hash=profile.config_hash(),
    )
    if cache_dir is not None:
        _cache.store_mode(cache_dir, profile, rm, radii)
    return rm


def _riccati_python(profile, mode, x0, L0, marks, rtol):
    """solve_ivp fallback for profiles without a jitted kernel."""
    from scipy.integrate import solve_ivp

    kappa, p = mode.kappa, mode.p
    pol = mode.polarization

    def rhs(x, state):
        r = math.exp(x)
        e, u = profile.eps_mu_jets(r, kappa, 1)
        nu = u if pol == "E" else e
        dnux = r * nu.c[1]
        q = dnux / (2.0 * nu.c[0]) + p * p + kappa * kappa * e.c[0] * u.c[0] * r * r
        L = state[0]
        return [q + (dnux / nu.c[0]) * L - L * L, L]

    sol = solve_ivp(
        rhs, (x0, marks[-1]), [L0, 0.0], t_eval=marks, rtol=rtol, atol=1e-13, method="RK45",
        max_step=0.1,
    )
    if not sol.success:
        return np.zeros(len(marks)), np.zeros(len(marks)), 1
    return sol.y[0], sol.y[1], 0


def _mark_index(rm, x):
    idx = int(np.argmin(np.abs(rm.x_marks - x)))
    if abs(rm.x_marks[idx] - x) > 1e-12 * max(1.0, abs(x)):
        raise SolverError(f"radius ln r = {x} was not among the solved marks")
    return idx


def green_bundle(rm, profile, r, r0):
    """(g, dg/dr, dg/dr0, d2g/dr dr0) for r >= r0, one-sided at coincidence.

    Assembled from the Riccati data: for x >= x0,
    u(x, x0) = nu(x0) / (L+(x0) - L-(x0)) * exp(y+(x) - y+(x0)) and
    g = u / sqrt(r r0); radial derivatives ride on the log-derivatives.
    """
    if r < r0:
        raise SolverError("green_bundle expects r >= r0 (swap for reciprocity)")
    x, x0 = math.log(r), math.log(r0)
    i1, i0 = _mark_index(rm, x), _mark_index(rm, x0)
    nu0 = rm.nu_at(profile, x0)
    u00 = nu0 / (rm.lp[i0] - rm.lm[i0])
    u = u00 * math.exp(rm.yp[i1] - rm.yp[i0])
    g = u / math.sqrt(r * r0)
    ar = (rm.lp[i1] - 0.5) / r
    ar0 = (rm.lm[i0] - 0.5) / r0
    return g, g * ar, g * ar0, g * ar * ar0


def green_coeff(rm, profile, r, r0, dr_order=0, dr0_order=0):
    """Green coefficient or one of its first derivatives at (r, r0)."""
    if dr_order > 1 or dr0_order > 1:
        raise SolverError("only first derivatives are provided")
    swap = r < r0
    if swap:
        r, r0 = r0, r
        dr_order, dr0_order = dr0_order, dr_order
    bundle = green_bundle(rm, profile, r, r0)
    return bundle[{(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 3}[(dr_order, dr0_order)]]


def wronskian_profile(rm, profile):
    """ln |W| along the marks, up to one additive constant.

    Constancy of the Wronskian is the solver's self-test: the returned
    array should be flat to the integration tolerance.
    """
    out = np.empty(len(rm.x_marks))
    for i, x in enumerate(rm.x_marks):
        nu = rm.nu_at(profile, x)
        out[i] = rm.yp[i] + rm.ym[i] + math.log((rm.lm[i] - rm.lp[i]) / nu)
    return out


def wkb_green(profile, mode, r, r0, m=math):
    """Asymptotic Green coefficient from the even WKB orders.

    Explicitly reciprocal; relative accuracy O(w^-3) in w^2 = p^2 +
    (kappa r)^2 since the first omitted even order is s4.
    """
    x, x0 = m.log(r), m.log(r0)
    for xx in (x, x0):
        if wkb_validity(profile, mode, xx) > 0.1:
            raise SolverError("WKB validity parameter above 0.1")

    def se_prime(xx):
        s0, _, s2 = wkb_series(profile, mode, xx, m=m)
        return s0 + s2

    def nu_of(xx):
        e, u = profile.eps_mu_jets(m.exp(xx), mode.kappa, 0, m)
        return u.c[0] if mode.polarization == "E" else e.c[0]

    # Gauss-Legendre panels for the phase integral between the two points
    lo, hi = (x0, x) if x >= x0 else (x, x0)
    nodes, weights = np.polynomial.legendre.leggauss(24)
    phase = 0.0
    npanel = max(1, int(abs(hi - lo) / 0.25) + 1)
    edges = np.linspace(lo, hi, npanel + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for t, wgt in zip(nodes, weights):
            phase += half * wgt * se_prime(mid + half * t)
    u = -0.5 * m.sqrt(nu_of(x) * nu_of(x0) / (se_prime(x) * se_prime(x0))) * m.exp(-abs(phase))
    return u * m.exp(-0.5 * (x + x0))
