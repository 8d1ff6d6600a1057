"""Renormalized vacuum stress assembly.

Per-mode spectral stresses are built from the exact radial Green
coefficients minus the near-field renormalizer, subtracted like for like
per derivative slot before any summation (the difference is finite, the
pieces are not).  Mode sums run over l >= 1 with adaptive truncation and
a power-law tail estimate; the imaginary-wavenumber integral uses a
nested midpoint scheme on a clustering substitution whose node set is
independent of worker count, so reductions are bit-identical for any
thread configuration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .media import sample
from .radial_green import ModeIndex, _auto_boundaries, green_bundle, solve_radial_mode
from .renorm import renorm_coeff

HBAR_C = 3.1615e-26  # J m


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Truncation and quadrature controls (config block `numerics`)."""

    l_tol: float = 1e-8
    l_max: int = 400
    l_floor_rel: float = 1e-11
    l_tail_extrapolation: bool = True
    kappa_rel_tol: float = 1e-6
    kappa_scale: Optional[float] = None
    kappa_cut: float = 100.0
    kappa_nodes_max: int = 2048
    mode_rtol: float = 1e-11
    threads: int = 1

    def scale_for(self, profile):
        if self.kappa_scale is not None:
            return self.kappa_scale
        if profile.kappa_res is not None:
            return profile.kappa_res
        return 1.0


@dataclass(frozen=True)
class StressResult:
    """Diagonal renormalized stress at one radius with diagnostics."""

    r: float
    sigma_rr: float
    sigma_thth: float
    trace_E: float
    trace_M: float
    sigma_rr_pol_E: float
    sigma_rr_pol_M: float
    grad_trace_E: float
    grad_trace_M: float
    l_max_used: int
    kappa_nodes: int
    error_estimate: float

    @property
    def sigma_phph(self):
        return self.sigma_thth


@dataclass(frozen=True)
class ModeStress:
    """Unweighted angular stress coefficients of one (l, kappa) mode.

    Components follow the polarization-to-field naming: w_<comp>_<F><P>.
    The degeneracy weight (2l+1)/(4 pi) is applied by the mode sum.
    """

    mode_l: int
    kappa: float
    r: float
    w_r_EE: float
    w_r_EM: float
    w_r_ME: float
    w_r_MM: float
    w_th_ME: float
    w_th_EM: float

    @property
    def w_rr(self):
        return self.w_r_EE + self.w_r_ME + self.w_r_MM + self.w_r_EM

    @property
    def w_thth(self):
        return self.w_th_ME + self.w_th_EM

    @property
    def trace_E(self):
        return self.w_r_EE + self.w_r_EM + 2.0 * self.w_th_EM

    @property
    def trace_M(self):
        return self.w_r_MM + self.w_r_ME + 2.0 * self.w_th_ME


def _assemble(l, kappa, r, s, deltas):
    ll = l * (l + 1.0)
    out = {}
    for pol in ("E", "M"):
        d = deltas[pol]
        nu = s.mu if pol == "E" else s.eps
        front = s.eps if pol == "E" else s.mu
        mixed = d[0] + r * d[1] + r * d[2] + r * r * d[3]
        w_r_same = kappa * kappa * front * d[0]
        w_th = -ll * d[0] / (nu * r * r)
        w_r_cross = -mixed / (nu * r * r) - w_th
        out[pol] = (w_r_same, w_r_cross, w_th)
    return ModeStress(
        mode_l=l,
        kappa=kappa,
        r=r,
        w_r_EE=out["E"][0],
        w_r_ME=out["E"][1],
        w_th_ME=out["E"][2],
        w_r_MM=out["M"][0],
        w_r_EM=out["M"][1],
        w_th_EM=out["M"][2],
    )


def _mode_stresses(profile, l, kappa, r, mode_rtol, renormalize=True, also_bare=False):
    """(renormalized ModeStress or None, bare ModeStress or None).

    Shares the boundary search and the Riccati solves between the two
    polarizations and the two assembly flavors.
    """
    s = sample(profile, r, kappa)
    bnd = None
    deltas, bares = {}, {}
    for pol in ("E", "M"):
        m = ModeIndex(l, pol, kappa)
        if bnd is None:
            bnd = _auto_boundaries(profile, m, np.array([math.log(r)]))
        rm = solve_radial_mode(profile, m, [r], rtol=mode_rtol, boundaries=bnd)
        g = np.array(green_bundle(rm, profile, r, r))
        bares[pol] = g
        if renormalize:
            rc = renorm_coeff(profile, m, r, r)
            deltas[pol] = g - rc.total
    ren = _assemble(l, kappa, r, s, deltas) if renormalize else None
    bare = _assemble(l, kappa, r, s, bares) if (also_bare or not renormalize) else None
    return ren, bare


def spectral_stress_mode(profile, mode, r, renormalize=True, mode_rtol=1e-11):
    """Angular spectral-stress coefficients of one mode at coincidence.

    The mixed-derivative entry uses the one-sided r -> r0+ branch in both
    the exact part and the renormalizer so the directional pieces cancel.
    """
    ren, bare = _mode_stresses(profile, mode.l, mode.kappa, r, mode_rtol,
                               renormalize=renormalize)
    return ren if renormalize else bare


def _l_sum(profile, kappa, r, spec, renormalize=True, force_l=None):
    """Sum the weighted mode vector over l with adaptive truncation.

    Returns (vector, l_used, tail_estimate, decreasing_ok).  Vector
    components: [w_rr, w_thth, tr_E, tr_M, (eps'/eps) tr_E,
    (mu'/mu) tr_M, w_rr from the E polarization, from the M polarization].
    """
    s = sample(profile, r, kappa)
    ge = s.deps / s.eps
    gm = s.dmu / s.mu
    total = np.zeros(8)
    small_run = 0
    mags = []
    history = []
    l_used = 0
    l_cap = force_l if force_l is not None else spec.l_max
    for l in range(1, l_cap + 1):
        ms, bare = _mode_stresses(profile, l, kappa, r, spec.mode_rtol,
                                  renormalize=renormalize, also_bare=True)
        if not renormalize:
            ms = bare
        weight = (2 * l + 1) / (4.0 * math.pi)
        vec = weight * np.array(
            [ms.w_rr, ms.w_thth, ms.trace_E, ms.trace_M,
             ge * ms.trace_E, gm * ms.trace_M,
             ms.w_r_EE + ms.w_r_ME, ms.w_r_MM + ms.w_r_EM]
        )
        total += vec
        l_used = l
        mag = np.max(np.abs(vec[:4]))
        mags.append(mag)
        history.append(vec)
        scale = max(np.max(np.abs(total[:4])), 1e-300)
        # once terms sink to the cancellation-noise level of the growing
        # bare magnitude, further modes only accumulate noise
        noise_floor = (
            spec.l_floor_rel * weight * max(abs(bare.w_rr), abs(bare.w_thth))
            if renormalize
            else 0.0
        )
        if force_l is None and (mag < spec.l_tol * scale or mag < noise_floor):
            small_run += 1
            if small_run >= 3:
                break
        else:
            small_run = 0
    tail_vec, tail_mag = _tail_vector(history, l_used)
    if spec.l_tail_extrapolation and force_l is None:
        total = total + tail_vec
    decreasing = _eventually_decreasing(mags)
    return total, l_used, tail_mag, decreasing


def _tail_vector(history, l_used):
    """Richardson tail of the algebraically decaying mode terms.

    Components with a stable sign over the last terms get a fitted
    c l^-q tail added; the returned magnitude enters the error estimate
    either way.
    """
    k = min(8, len(history))
    tail = np.zeros(len(history[0]) if history else 8)
    if k < 5:
        return tail, 0.0
    arr = np.array(history[-k:])
    ls = np.arange(l_used - k + 1, l_used + 1, dtype=float)
    mag = 0.0
    for c in range(arr.shape[1]):
        ys = arr[:, c]
        if np.all(ys > 0) or np.all(ys < 0):
            sgn = math.copysign(1.0, ys[-1])
            q = -np.polyfit(np.log(ls), np.log(np.abs(ys)), 1)[0]
            q = min(max(q, 1.2), 40.0)
            t = sgn * abs(ys[-1]) * l_used / (q - 1.0)
            tail[c] = t
            if c < 4:
                mag = max(mag, abs(t))
        else:
            if c < 4:
                mag = max(mag, abs(ys[-1]) * l_used)
    return tail, mag


def _eventually_decreasing(mags, window=10):
    if len(mags) < window + 2:
        return True
    tail = mags[-window:]
    bad = sum(1 for a, b in zip(tail, tail[1:]) if b > a * (1.0 + 1e-9))
    return bad <= window // 3


def _midpoint_nodes(level):
    """New v-nodes of the nested doubling midpoint scheme at this level."""
    step = 2.0 ** (1 - level)
    return [-1.0 + step * i for i in range(1, 2**level, 2)]


def kappa_quadrature(func, spec, kappa_scale, threads=1, abs_floor=0.0):
    """Integrate func(kappa) (vector-valued) up to kappa_cut * scale.

    Substitutions kappa = s t/(1-t), t = t_cut (1+u)/2, u = 1.5 v - 0.5 v^3
    cluster nodes around the scale and null the weight at both ends, so
    neither endpoint is ever sampled.  Midpoint doubling reuses previous
    nodes; node batches reduce in a fixed order, so repeated runs are
    byte-identical for any thread count.  The cap keeps amplified solver
    noise out of the far tail, where the renormalized integrand of a
    dispersive profile has long decayed.
    """
    t_cut = spec.kappa_cut / (1.0 + spec.kappa_cut)

    def eval_v(v):
        u = 1.5 * v - 0.5 * v**3
        t = t_cut * 0.5 * (1.0 + u)
        kap = kappa_scale * t / (1.0 - t)
        jac = kappa_scale / (1.0 - t) ** 2 * t_cut * 0.5 * 1.5 * (1.0 - v * v)
        return jac * np.asarray(func(kap), dtype=float)

    total = None
    converged_run = 0
    level = 1
    n_nodes = 0
    deltas = []
    while True:
        new_v = _midpoint_nodes(level)
        if n_nodes + len(new_v) > spec.kappa_nodes_max:
            raise NonConvergenceError(
                f"kappa quadrature exceeded {spec.kappa_nodes_max} nodes"
            )
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                vals = list(ex.map(eval_v, new_v))
        else:
            vals = [eval_v(v) for v in new_v]
        n_nodes += len(new_v)
        increment = None
        for v in vals:  # fixed order reduction
            increment = v if increment is None else increment + v
        increment = increment * 2.0 ** (1 - level)
        if total is None:
            total = increment
            level += 1
            continue
        new_total = 0.5 * total + increment
        delta = np.max(np.abs(new_total - total))
        scale = max(np.max(np.abs(new_total)), 1e-300)
        total = new_total
        deltas.append(delta)
        if delta < max(spec.kappa_rel_tol * scale, abs_floor) and level >= 4:
            converged_run += 1
            if converged_run >= 3:
                break
        else:
            converged_run = 0
        level += 1
    err = deltas[-1] if deltas else 0.0
    return total, n_nodes, err


def renormalized_stress(profile, r, spec=None, control_doubling=True):
    """Physical renormalized stress components at radius r.

    Subtraction happens per (l, kappa) mode before any summation; the
    remaining sums and the kappa integral converge absolutely for
    dispersive profiles.
    """
    spec = spec or QuadratureSpec()
    kappa_scale = spec.scale_for(profile)
    stats = {"l_max": 0, "tail": 0.0, "bad_tail": False}
    control_delta = [0.0]
    counter = [0]

    def integrand(kappa):
        vec, l_used, tail, ok = _l_sum(profile, kappa, r, spec)
        stats["l_max"] = max(stats["l_max"], l_used)
        stats["tail"] = max(stats["tail"], tail)
        if not ok:
            stats["bad_tail"] = True
        counter[0] += 1
        if control_doubling and counter[0] % 16 == 1:
            vec2, *_ = _l_sum(profile, kappa, r, spec,
                              force_l=min(2 * l_used, spec.l_max))
            control_delta[0] = max(control_delta[0], float(np.max(np.abs(vec2[:4] - vec[:4]))))
        return vec

    floor = 0.01 * spec.kappa_rel_tol * bare_mode_scale(profile, r, spec) / (
        HBAR_C / (2.0 * math.pi)
    )
    total, n_nodes, kerr = kappa_quadrature(
        integrand, spec, kappa_scale, threads=spec.threads, abs_floor=floor
    )
    if stats["bad_tail"]:
        raise NonConvergenceError("mode sums failed the decreasing-tail check")
    pref = -HBAR_C / (2.0 * math.pi)
    sig = pref * total
    err = abs(pref) * (kerr + stats["tail"] + control_delta[0])
    # polarization split of the rr component (E-polarization carries w_r_EE + w_r_ME)
    return StressResult(
        r=r,
        sigma_rr=sig[0],
        sigma_thth=sig[1],
        trace_E=sig[2],
        trace_M=sig[3],
        sigma_rr_pol_E=sig[6],
        sigma_rr_pol_M=sig[7],
        grad_trace_E=sig[4],
        grad_trace_M=sig[5],
        l_max_used=stats["l_max"],
        kappa_nodes=n_nodes,
        error_estimate=err,
    )


def bare_mode_scale(profile, r, spec=None):
    """Pressure scale of one bare mode: the (l=1, kappa_scale) magnitude.

    Used to normalize null tests; renormalized components should sit many
    orders below this.
    """
    spec = spec or QuadratureSpec()
    kappa = spec.scale_for(profile)
    ms = spectral_stress_mode(profile, ModeIndex(1, "E", kappa), r,
                              renormalize=False, mode_rtol=spec.mode_rtol)
    weight = 3.0 / (4.0 * math.pi)
    return abs(HBAR_C / (2.0 * math.pi) * weight * ms.w_rr * kappa)
