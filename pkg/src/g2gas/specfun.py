"""Scalar special functions used by the spectral formulas.

All rates are in units of the natural linewidth Gamma, so Gamma == 1 here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import special

SQRT_PI = math.sqrt(math.pi)


class ConvergenceError(RuntimeError):
    """Raised when a quadrature or root solve misses its tolerance."""


def lorentzian(nu, width=0.5):
    """Normalized complex Lorentzian ``width / (width - i nu)``.

    With the default ``width = Gamma/2`` this is L(nu) = (Gamma/2)/(Gamma/2 - i nu).
    Accepts scalars or arrays.
    """
    nu = np.asarray(nu, dtype=float)
    out = width / (width - 1j * nu)
    return out[()] if out.ndim == 0 else out


def lorentzian_derivative(nu, order, width=0.5):
    """``order``-th derivative of :func:`lorentzian` with respect to ``nu``."""
    nu = np.asarray(nu, dtype=float)
    out = math.factorial(order) * (1j ** order) * width / (width - 1j * nu) ** (order + 1)
    return out[()] if out.ndim == 0 else out


def faddeeva(z):
    """Faddeeva function ``w(z) = exp(-z**2) erfc(-i z)`` for ``Im z >= 0``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise ValueError("faddeeva is only defined here for Im(z) >= 0")
    out = special.wofz(z)
    return out[()] if out.ndim == 0 else out


def faddeeva_derivatives(z, order):
    """Return ``[w, w', ..., w^(order)]`` at ``z`` using the w' = -2zw + 2i/sqrt(pi) recursion."""
    w = [faddeeva(z)]
    if order >= 1:
        w.append(-2 * z * w[0] + 2j / SQRT_PI)
    for n in range(1, order):
        w.append(-2 * z * w[n] - 2 * n * w[n - 1])
    return w


def bessel_k_quarter(x):
    """Modified Bessel function of the second kind K_{1/4}(x) for x > 0.

    Complex arguments with positive real part are also accepted, which is what
    the detuned strong-Doppler asymptotics need.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        if np.any(x.real <= 0):
            raise ValueError("bessel_k_quarter needs Re(x) > 0")
    elif np.any(x <= 0):
        raise ValueError("bessel_k_quarter needs x > 0")
    out = special.kv(0.25, x)
    return out[()] if out.ndim == 0 else out


def scaled_bessel_k_quarter(x):
    """``exp(x) * K_{1/4}(x)``, finite for large arguments."""
    x = np.asarray(x)
    if np.any(np.real(x) <= 0):
        raise ValueError("scaled_bessel_k_quarter needs Re(x) > 0")
    out = special.kve(0.25, x)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class HermiteRule:
    """Gauss-Hermite rule for averages over the Maxwell distribution.

    ``nodes`` are velocities in units of v0 and ``weights`` already carry the
    1/sqrt(pi) normalization, so ``sum(weights * f(nodes))`` approximates
    the velocity average of f.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def average(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def hermite_rule(order: int = 64) -> HermiteRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = hermgauss(order)
    # symmetrize so that the rule is exactly even
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1]) / SQRT_PI
    return HermiteRule(nodes=x, weights=w, order=order)


@dataclass(frozen=True)
class VelocityRule:
    """Quadrature for Maxwell averages of integrands with poles at distance ``width`` from the real Delta_D axis."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def average(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


# Trapezoid error ~ exp(-2 pi d / h) for poles a distance d from the real axis.
_TRAPZ_EXPONENT = 38.0
_TRAPZ_HALF_RANGE = 6.5
_HERMITE_POLE_DISTANCE = 4.0


def velocity_rule(kv0: float, width: float = 0.5) -> VelocityRule:
    """Pick a velocity quadrature accurate to ~1e-14 for Lorentzian products of the given width.

    Gauss-Hermite converges slowly once the Lorentzian poles (distance
    ``width / kv0`` in units of v0) approach the real axis, so for Doppler
    widths comparable to or larger than the homogeneous width a truncated
    trapezoid rule is used instead; it converges geometrically for integrands
    analytic in a strip.
    """
    if kv0 < 0:
        raise ValueError("kv0 must be >= 0")
    if kv0 == 0:
        return VelocityRule(np.zeros(1), np.ones(1), "delta")
    d = width / kv0
    if d >= _HERMITE_POLE_DISTANCE:
        r = hermite_rule(64)
        return VelocityRule(r.nodes, r.weights, "hermite")
    h = min(0.35, 2 * math.pi * d / _TRAPZ_EXPONENT)
    m = int(math.ceil(_TRAPZ_HALF_RANGE / h))
    x = h * np.arange(-m, m + 1)
    w = h * np.exp(-x * x) / SQRT_PI
    return VelocityRule(x, w, "trapezoid")


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
