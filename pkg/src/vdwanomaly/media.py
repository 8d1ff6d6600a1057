"""Dispersive spherically symmetric medium profiles.

A profile provides eps(r, kappa) and mu(r, kappa) on the imaginary
frequency axis together with radial derivatives to the order the rest of
the pipeline needs.  Built-in kinds are closed-form; derivatives of any
order come from jet arithmetic so every consumer sees one consistent
differentiation scheme.  The dispersion model multiplies the static
susceptibilities by 1/(1 + kappa^2/kappa_res^2), which produces the
required 1/kappa^2 falloff of eps - 1 and mu - 1 at high kappa.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .jets import Jet

KINDS = ("homogeneous", "fisheye", "dilute_gas", "tabulated")

# integer ids used by the jitted kernels
KIND_ID = {"homogeneous": 0, "fisheye": 1, "dilute_gas": 2}


class MediaError(ValueError):
    """Invalid profile specification."""


@dataclass(frozen=True)
class MediumSample:
    """Medium values and radial derivatives at one (r, kappa) point."""

    r: float
    kappa: float
    eps: float
    deps: float
    d2eps: float
    mu: float
    dmu: float
    d2mu: float
    n: float
    dn: float
    d2n: float
    n_inf: Optional[float]
    z_inf: Optional[float]

    @property
    def nu_E(self):
        return self.mu

    @property
    def nu_M(self):
        return self.eps

    def nu(self, polarization):
        """(nu, nu', nu'') for the requested polarization."""
        if polarization == "E":
            return self.mu, self.dmu, self.d2mu
        if polarization == "M":
            return self.eps, self.deps, self.d2eps
        raise ValueError(f"unknown polarization {polarization!r}")


@dataclass(frozen=True)
class DispersiveProfile:
    """Validated spherically symmetric medium."""

    kind: str
    params: dict
    dispersion: dict
    r_min: float
    r_max: float
    _spline: object = field(default=None, repr=False, compare=False)

    # ------------------------------------------------------------------
    @property
    def kappa_res(self):
        if self.dispersion["model"] == "single_resonance":
            return self.dispersion["kappa_res"]
        return None

    @property
    def dispersive(self):
        return self.dispersion["model"] == "single_resonance"

    def config_hash(self):
        blob = json.dumps(
            {
                "kind": self.kind,
                "params": self.params,
                "dispersion": self.dispersion,
                "domain": {"r_min": self.r_min, "r_max": self.r_max},
            },
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- static susceptibilities ---------------------------------------
    def _chi_static_jets(self, r, order, m=math):
        """(chi_e0, chi_m0) jets in r of the static (kappa=0) medium."""
        x = Jet.variable(r, order, m)
        if self.kind == "homogeneous":
            ce = Jet.constant(r * 0 + self.params["eps0_value"] - 1.0, order, m)
            cm = Jet.constant(r * 0 + self.params["mu0_value"] - 1.0, order, m)
            return ce, cm
        if self.kind == "fisheye":
            n1, k, a = self.params["n1"], self.params["k"], self.params["a"]
            n_s = (2.0 * n1) / (1.0 + k * (x * x) / (a * a))
            chi = n_s - 1.0
            return chi, chi
        if self.kind == "dilute_gas":
            amp = self.params["polarizability_over_eps0"] * self.params["density_amplitude"]
            w = self.params["density_width"]
            chi = (-(x * x) / (w * w)).exp() * amp
            return chi, Jet.constant(r * 0, order, m)
        if self.kind == "tabulated":
            se, sm = self._spline
            ce = [float(se.derivative(j)(r)) if j <= 5 else 0.0 for j in range(order + 1)]
            cm = [float(sm.derivative(j)(r)) if j <= 5 else 0.0 for j in range(order + 1)]
            return Jet(ce, m), Jet(cm, m)
        raise MediaError(f"unknown kind {self.kind!r}")

    def _dispersion_factor(self, kappa):
        if not self.dispersive:
            return 1.0
        kr = self.kappa_res
        return 1.0 / (1.0 + (kappa / kr) ** 2)

    # -- public sampling -------------------------------------------------
    def eps_mu_jets(self, r, kappa, order, m=math):
        """Jets of eps and mu in r at fixed kappa, to the given order."""
        ce, cm = self._chi_static_jets(r, order, m)
        d = self._dispersion_factor(kappa)
        return ce * d + 1.0, cm * d + 1.0

    def n_jet(self, r, kappa, order, m=math):
        e, u = self.eps_mu_jets(r, kappa, order, m)
        return (e * u).sqrt()

    def n_inf_jets(self, r, order, m=math):
        """Jet of the high-kappa tail n_inf(r); None if dispersionless."""
        if not self.dispersive:
            return None
        ce, cm = self._chi_static_jets(r, order, m)
        return (ce + cm) * (0.5 * self.kappa_res**2)

    def z_inf(self, r):
        if not self.dispersive:
            return None
        ce, cm = self._chi_static_jets(r, 0)
        return 0.5 * self.kappa_res**2 * (cm.c[0] - ce.c[0])

    def kernel_params(self):
        """(kind_id, params vector) consumed by the jitted medium kernel."""
        if self.kind == "tabulated":
            raise MediaError("tabulated profiles have no fast kernel path")
        p = np.zeros(8)
        if self.kind == "homogeneous":
            p[0] = self.params["eps0_value"] - 1.0
            p[1] = self.params["mu0_value"] - 1.0
        elif self.kind == "fisheye":
            p[0] = self.params["n1"]
            p[1] = self.params["k"]
            p[2] = self.params["a"]
        else:  # dilute_gas
            p[0] = self.params["polarizability_over_eps0"] * self.params["density_amplitude"]
            p[1] = self.params["density_width"]
        p[6] = 1.0 if self.dispersive else 0.0
        p[7] = self.kappa_res if self.dispersive else 1.0
        return KIND_ID[self.kind], p


def make_profile(spec):
    """Build a validated DispersiveProfile from a config mapping.

    The mapping uses the config-file schema: keys `kind`, `params`,
    `dispersion` (optional) and `domain` (optional).
    """
    if "kind" not in spec:
        raise MediaError("profile spec missing 'kind'")
    kind = spec["kind"]
    if kind not in KINDS:
        raise MediaError(f"unknown kind {kind!r}; expected one of {KINDS}")
    params = dict(spec.get("params", {}))
    dispersion = dict(spec.get("dispersion", {"model": "none"}))
    dispersion.setdefault("model", "none")
    if dispersion["model"] not in ("none", "single_resonance"):
        raise MediaError(f"unknown dispersion model {dispersion['model']!r}")
    if dispersion["model"] == "single_resonance":
        if "kappa_res" not in dispersion or dispersion["kappa_res"] <= 0:
            raise MediaError("single_resonance dispersion needs kappa_res > 0")

    required = {
        "homogeneous": ("eps0_value", "mu0_value"),
        "fisheye": ("n1", "k", "a"),
        "dilute_gas": ("polarizability_over_eps0", "density_amplitude", "density_width"),
        "tabulated": ("r_grid", "eps_table", "mu_table"),
    }[kind]
    for name in required:
        if name not in params:
            raise MediaError(f"profile kind {kind!r} missing parameter {name!r}")

    domain = dict(spec.get("domain", {}))
    r_min = float(domain.get("r_min", _default_rmin(kind, params)))
    r_max = float(domain.get("r_max", _default_rmax(kind, params)))
    if r_min <= 0:
        raise MediaError("r_min must be positive")
    if r_max <= r_min:
        raise MediaError("r_max must exceed r_min")

    spline = None
    if kind == "tabulated":
        spline = _fit_tabulated(params)
        params = {
            "r_grid": list(map(float, params["r_grid"])),
            "eps_table": list(map(float, params["eps_table"])),
            "mu_table": list(map(float, params["mu_table"])),
        }

    prof = DispersiveProfile(kind, params, dispersion, r_min, r_max, spline)
    _validate_passivity(prof)
    return prof


def _default_rmin(kind, params):
    if kind == "tabulated":
        return float(params["r_grid"][0])
    return 1e-6 * _scale(kind, params)

def _default_rmax(kind, params):
    if kind == "tabulated":
        return float(params["r_grid"][-1])
    if kind == "fisheye":
        n1, k, a = params["n1"], params["k"], params["a"]
        if k > 0:
            return a * math.sqrt(max(2.0 * n1 - 1.0, 0.0) / k)  # keeps n >= 1
        return 10.0 * a
    return 10.0 * _scale(kind, params)

def _scale(kind, params):
    if kind == "fisheye":
        return params["a"]
    if kind == "dilute_gas":
        return params["density_width"]
    return 1.0


def _fit_tabulated(params):
    from scipy.interpolate import make_interp_spline

    r = np.asarray(params["r_grid"], dtype=float)
    eps = np.asarray(params["eps_table"], dtype=float)
    mu = np.asarray(params["mu_table"], dtype=float)
    if r.ndim != 1 or len(r) < 8:
        raise MediaError("tabulated profile needs a 1-d r_grid with >= 8 points")
    if np.any(np.diff(r) <= 0):
        raise MediaError("r_grid must be strictly increasing")
    if eps.shape != r.shape or mu.shape != r.shape:
        raise MediaError("tables must match r_grid length")
    h = np.diff(r).mean()
    for name, tab in (("eps_table", eps), ("mu_table", mu)):
        d2 = np.diff(tab, 2) / h**2
        jumps = np.abs(np.diff(d2))
        scale = max(np.abs(d2).max(), 1e-30)
        if len(jumps) and jumps.max() > 0.5 * scale + 1e-9:
            raise MediaError(f"{name} is not smooth enough for a C2 interpolant")
    # quintic B-splines are C4, so second derivatives are continuous
    se = make_interp_spline(r, eps - 1.0, k=5)
    sm = make_interp_spline(r, mu - 1.0, k=5)
    return se, sm


def _validate_passivity(prof):
    rs = np.linspace(prof.r_min, prof.r_max, 33)
    kr = prof.kappa_res or 1.0
    for r in rs:
        for kap in (0.0, kr, 10.0 * kr):
            s = sample(prof, float(r), kap)
            if s.eps < 1.0 - 1e-12 or s.mu < 1.0 - 1e-12:
                raise MediaError(
                    f"profile not passive: eps={s.eps}, mu={s.mu} at r={r}, kappa={kap}"
                )


def sample(profile, r, kappa):
    """Sample the medium at (r, kappa) with first and second derivatives."""
    if not (profile.r_min <= r <= profile.r_max):
        raise MediaError(f"r={r} outside domain [{profile.r_min}, {profile.r_max}]")
    if kappa < 0:
        raise MediaError("kappa must be nonnegative")
    e, u = profile.eps_mu_jets(r, kappa, 2)
    n = (e * u).sqrt()
    n_inf = profile.n_inf_jets(r, 0)
    return MediumSample(
        r=r,
        kappa=kappa,
        eps=e.c[0], deps=e.c[1], d2eps=e.c[2],
        mu=u.c[0], dmu=u.c[1], d2mu=u.c[2],
        n=n.c[0], dn=n.c[1], d2n=n.c[2],
        n_inf=None if n_inf is None else n_inf.c[0],
        z_inf=profile.z_inf(r),
    )
