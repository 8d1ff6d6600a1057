"""Truncated Taylor-series (jet) arithmetic.

A Jet holds the derivatives 0..order of a scalar function at a point and
propagates them through arithmetic.  Coefficients may be floats or mpmath
mpf values; elementary functions only touch the zeroth coefficient through
the supplied math backend, everything else is exact polynomial algebra.
Used for high-order radial derivatives of media profiles and for the WKB
series beyond second order, so that a single differentiation scheme feeds
every consumer.
"""

from __future__ import annotations

import math


class Jet:
    """Taylor jet: value and derivatives [f, f', f'', ...] at a point."""

    __slots__ = ("c", "order", "_m")

    def __init__(self, coeffs, math_backend=math):
        self.c = list(coeffs)
        self.order = len(self.c) - 1
        self._m = math_backend

    # -- constructors -------------------------------------------------
    @classmethod
    def variable(cls, x0, order, math_backend=math):
        """The identity function x at x0, as a jet of given order."""
        c = [x0 * 0] * (order + 1)
        c[0] = x0
        if order >= 1:
            c[1] = x0 * 0 + 1
        return cls(c, math_backend)

    @classmethod
    def constant(cls, v, order, math_backend=math):
        c = [v * 0] * (order + 1)
        c[0] = v
        return cls(c, math_backend)

    def _wrap(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order, self._m)

    # -- ring operations ----------------------------------------------
    def __add__(self, other):
        o = self._wrap(other)
        return Jet([a + b for a, b in zip(self.c, o.c)], self._m)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._wrap(other)
        return Jet([a - b for a, b in zip(self.c, o.c)], self._m)

    def __rsub__(self, other):
        o = self._wrap(other)
        return o - self

    def __neg__(self):
        return Jet([-a for a in self.c], self._m)

    def __mul__(self, other):
        o = self._wrap(other)
        n = min(self.order, o.order)
        # Leibniz rule with binomial weights (derivative coefficients).
        out = []
        for k in range(n + 1):
            s = self.c[0] * 0
            for j in range(k + 1):
                s += _binom(k, j) * self.c[j] * o.c[k - j]
            out.append(s)
        return Jet(out, self._m)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._wrap(other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._wrap(other)
        return o * self.reciprocal()

    def reciprocal(self):
        n = self.order
        a = self.c
        inv0 = 1 / a[0]
        out = [inv0]
        # d^k (1/f) from Leibniz on f * (1/f) = 1
        for k in range(1, n + 1):
            s = a[0] * 0
            for j in range(1, k + 1):
                s += _binom(k, j) * a[j] * out[k - j]
            out.append(-inv0 * s)
        return Jet(out, self._m)

    # -- elementary functions -----------------------------------------
    def sqrt(self):
        r0 = self._m.sqrt(self.c[0])
        return self._lift(r0, lambda g: (self - g * g) / (2 * g))

    def exp(self):
        e0 = self._m.exp(self.c[0])
        n = self.order
        a = self.c
        out = [e0]
        # (e^f)^(k) from Leibniz on g' = f' g at derivative order k-1
        for k in range(1, n + 1):
            s = a[0] * 0
            for j in range(k):
                s += _binom(k - 1, j) * a[k - j] * out[j]
            out.append(s)
        return Jet(out, self._m)

    def log(self):
        l0 = self._m.log(self.c[0])
        n = self.order
        out = [l0]
        if n >= 1:
            g = (self.diff() / self.truncate(n - 1)).c  # (log f)' = f'/f
            for k in range(1, n + 1):
                out.append(g[k - 1])
        return Jet(out, self._m)

    def _lift(self, g0, refine):
        """Newton lift: build jet g with given g0 satisfying refine(g)->0."""
        g = Jet.constant(g0, self.order, self._m)
        for _ in range(self.order):
            g = g + refine(g)
        return g

    # -- calculus ------------------------------------------------------
    def diff(self, k=1):
        """Jet of the k-th derivative (order drops by k)."""
        c = self.c
        for _ in range(k):
            c = [c[j + 1] for j in range(len(c) - 1)]
        return Jet(c, self._m)

    def truncate(self, order):
        return Jet(self.c[: order + 1], self._m)

    def __repr__(self):
        return f"Jet({self.c})"


def _binom(n, k):
    return math.comb(n, k)


def jet_from_taylor(derivs_at_point, x_jet):
    """Compose F (given by derivatives at x_jet value) with the jet x_jet.

    derivs_at_point: sequence [F(x0), F'(x0), ...] with x0 == x_jet.c[0].
    Returns the jet of F(x(t)) to the order of x_jet.
    """
    n = x_jet.order
    dx = Jet(list(x_jet.c), x_jet._m)
    dx.c[0] = dx.c[0] * 0  # x - x0
    out = Jet.constant(derivs_at_point[0], n, x_jet._m)
    term = Jet.constant(dx.c[0] * 0 + 1, n, x_jet._m)
    fact = 1
    for k in range(1, min(len(derivs_at_point), n + 1)):
        term = term * dx
        fact *= k
        out = out + term * (derivs_at_point[k] / fact)
    return out
