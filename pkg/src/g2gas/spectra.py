"""Biphoton and spontaneous-emission wavefunctions in frequency and delay.

Spectra are functions of the detuning varpi from the pump carrier; the delay
domain uses psi(tau) = (1/2pi) int dvarpi exp(-i varpi tau) psi(varpi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .medium import (
    MediumParams,
    absorption_shape,
    absorption_shape_derivatives,
    alpha0_from_od,
    delta_alpha_over_sq,
)
from .specfun import ConvergenceError, gauss_legendre_panels, lorentzian, velocity_rule


class GridTooCoarseError(ValueError):
    """The sampled spectrum does not decay enough to be transformed reliably."""


@dataclass(frozen=True)
class ComplexSpectrum:
    grid: np.ndarray
    values: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 1 or g.size < 2:
            raise ValueError("grid must be one-dimensional with at least two nodes")
        d = np.diff(g)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
            raise ValueError("grid must be strictly increasing and uniform")
        if np.shape(self.values) != g.shape:
            raise ValueError("values must match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum contains non-finite values")

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class TauFunction:
    tau: np.ndarray
    values: np.ndarray = field(repr=False)
    decayed: bool = True
    """False when the tail at the grid end exceeds 1e-6 of the peak."""

    def at(self, tau):
        """Linear interpolation on the delay grid (psi is even in tau for psi_b)."""
        t = np.abs(np.asarray(tau, dtype=float))
        re = np.interp(t, self.tau, self.values.real)
        im = np.interp(t, self.tau, self.values.imag)
        return re + 1j * im


def _phi1(z):
    """expm1(z)/z, equal to 1 at z = 0."""
    z = np.asarray(z, dtype=complex)
    out = 1.0 + z / 2
    # complex division misbehaves for subnormal z; the series is exact there
    big = np.abs(z) > 1e-8
    out[big] = np.expm1(z[big]) / z[big]
    return out


def _psi_b_values(a0, q, varpi):
    """-[exp(-(a0 - q v^2)) - exp(-a0)] / v^2 for complex a0 = alpha(0)L and q = delta_alpha L / v^2."""
    z = q * varpi ** 2
    out = np.empty(np.broadcast(a0, z).shape, dtype=complex)
    a0b = np.broadcast_to(a0, out.shape)
    qb = np.broadcast_to(q, out.shape)
    zb = np.broadcast_to(z, out.shape)
    vb = np.broadcast_to(varpi, out.shape)
    small = np.abs(zb) < 0.5
    out[small] = -np.exp(-a0b[small]) * qb[small] * _phi1(zb[small])
    big = ~small
    out[big] = -(np.exp(-a0b[big] + zb[big]) - np.exp(-a0b[big])) / vb[big] ** 2
    return out


def psi_b_at(params: MediumParams, varpi):
    """Closed-system biphoton spectrum -Gamma [e^{-(alpha(w)+alpha(-w))L/2} - e^{-alpha(0)L}] / w^2."""
    varpi = np.asarray(varpi, dtype=float)
    if params.od == 0:
        return np.zeros(varpi.shape, complex)
    v = np.abs(varpi)
    a0 = alpha0_from_od(params) * absorption_shape(params.delta, params.kv0, params.width)
    q = delta_alpha_over_sq(params, v)
    return _psi_b_values(a0, q, v)


def psi_b_spectrum(params: MediumParams, grid) -> ComplexSpectrum:
    grid = np.asarray(grid, dtype=float)
    return ComplexSpectrum(grid, psi_b_at(params, grid), "psi_b")


# -- zero-delay integrals ----------------------------------------------------

_MAX_PANELS = 4096


def _tan_map(theta, scale):
    return scale * np.tan(theta), scale / np.cos(theta) ** 2


# rounding error of a sum, per unit of the sum of magnitudes
_ROUNDOFF = 4 * np.finfo(float).eps


def _psi_b_zero_core(delta, kv0, width, a0L, tol=1e-10):
    """psi_b(0) for each resonant alpha0 L in ``a0L`` (same detuning and Doppler width)."""
    a0L = np.atleast_1d(np.asarray(a0L, dtype=float))
    scale = max(width, kv0)
    shape0 = absorption_shape(delta, kv0, width)
    cutoff = 2e-3 * scale

    def integral(panels):
        theta, w = gauss_legendre_panels(0.0, 0.5 * math.pi, panels)
        v, jac = _tan_map(theta, scale)
        qhat = np.empty(v.shape, complex)
        big = v >= cutoff
        qhat[big] = (shape0 - 0.5 * (absorption_shape(delta + v[big], kv0, width)
                                     + absorption_shape(delta - v[big], kv0, width))) / v[big] ** 2
        if np.any(~big):
            der = absorption_shape_derivatives(delta, kv0, width, 4)
            qhat[~big] = -0.5 * der[2] - der[4] / 24.0 * v[~big] ** 2
        vals = _psi_b_values(a0L[:, None] * shape0, a0L[:, None] * qhat[None, :], v[None, :])
        terms = vals * (w * jac)[None, :]
        # even integrand: (1/2pi) * 2 * int_0^inf
        return terms.sum(axis=1) / math.pi, _ROUNDOFF * np.abs(terms).sum(axis=1) / math.pi

    panels = 8
    prev, _ = integral(panels)
    while panels < _MAX_PANELS:
        panels *= 2
        cur, noise = integral(panels)
        err = np.abs(cur - prev) + noise
        if np.all(err <= tol * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    raise ConvergenceError(f"psi_b(0) quadrature did not reach tol={tol} (err={err.max():.3g})")


def psi_b_zero(params: MediumParams, tol: float = 1e-10) -> complex:
    """Biphoton wavefunction at zero delay, closed system."""
    if params.od == 0:
        return 0j
    a0L = alpha0_from_od(params)
    return complex(_psi_b_zero_core(params.delta, params.kv0, params.width, a0L, tol)[0])


def psi_b_low_od_tau(params: MediumParams, tau):
    """Small-OD biphoton wavefunction -alpha0 L <e^{-(G/2 - i D) tau} / (1 - 2 i D/G)^2>_v."""
    tau = np.abs(np.asarray(tau, dtype=float))
    w = params.width
    rule = velocity_rule(params.kv0, w)
    dd = params.delta + params.kv0 * rule.nodes
    a0L = alpha0_from_od(params)
    t = tau.reshape(-1)
    terms = np.exp(-(w - 1j * dd[:, None]) * t[None, :]) / (1 - 1j * dd[:, None] / w) ** 2
    out = -a0L * rule.average(terms)
    return out.reshape(tau.shape)[()] if tau.ndim == 0 else out.reshape(tau.shape)


# -- open-system decomposition -----------------------------------------------

_CHUNK = 4_000_000


def _velocity_average(params: MediumParams, kernel, varpi, width):
    """Average kernel(delta_D[:, None], varpi[None, :]) over velocities, chunked over varpi."""
    rule = velocity_rule(params.kv0, width)
    dd = params.delta + params.kv0 * rule.nodes
    out = np.empty(varpi.shape, complex)
    step = max(1, _CHUNK // dd.size)
    for i in range(0, varpi.size, step):
        sl = slice(i, i + step)
        out[sl] = rule.average(kernel(dd[:, None], varpi[None, sl]))
    return out


def _inv_g0(rates, varpi):
    """1/G0 = (G1 + G2 - Gamma)/(G1 G2), written so the closed limit stays regular at varpi = 0."""
    g1 = rates.gamma1 - 1j * varpi
    g2 = rates.gamma2 - 1j * varpi
    c = rates.gamma2 - 1.0 - rates.gamma1
    if c == 0:
        return 2.0 / g2
    return (2.0 + c / g1) / g2


def psi_b_decomposed(params: MediumParams, grid):
    """Dynamical and Langevin parts of the biphoton spectrum for the general rate set."""
    grid = np.asarray(grid, dtype=float)
    r = params.rates
    if r.gamma1 == 0 and r.gamma2 - 1.0 != 0:
        raise ValueError("gamma1 = 0 requires gamma2 = Gamma (closed limit)")
    if params.od == 0:
        z = np.zeros(grid.shape, complex)
        return ComplexSpectrum(grid, z, "psi_b"), ComplexSpectrum(grid, z.copy(), "psi_b")
    g12 = r.gamma12
    a0L = alpha0_from_od(params)
    a0 = a0L * absorption_shape(params.delta, params.kv0, params.width)
    q = delta_alpha_over_sq(params, np.abs(grid))
    # zeta integral done in closed form: int_0^L e^{-alpha(0) z + delta_alpha (L - z)} dz
    zeta = a0L * np.exp(-a0) * _phi1(q * grid ** 2)
    inv_g0 = _inv_g0(r, grid)
    c_l = r.gamma1 + 1.0 - r.gamma2
    inv_g1 = 1.0 / (r.gamma1 - 1j * grid) if c_l != 0 else None

    rule = velocity_rule(params.kv0, g12)
    dd = (params.delta + params.kv0 * rule.nodes)[:, None]
    g120 = g12 - 1j * dd
    dyn = np.empty(grid.shape, complex)
    lang = np.empty(grid.shape, complex)
    step = max(1, _CHUNK // dd.size)
    for i in range(0, grid.size, step):
        sl = slice(i, i + step)
        w = grid[None, sl]
        ig0 = inv_g0[None, sl]
        g12w = g12 - 1j * dd - 1j * w
        g12m = g12 - 1j * dd + 1j * w
        g21w = g12 + 1j * dd - 1j * w
        dyn[sl] = rule.average(g12 * (g21w + g120) * ig0 / (2 * g120 * g12w * g21w))
        bracket = ig0 * (2 * g12 / g21w + r.gamma2 / g120)
        if c_l != 0:
            bracket = bracket + c_l * inv_g1[None, sl] / g120
        lang[sl] = rule.average(-g12 / (2 * g12m * g12w) * bracket)
    return (ComplexSpectrum(grid, zeta * dyn, "psi_b"),
            ComplexSpectrum(grid, zeta * lang, "psi_b"))


# -- spontaneous emission ----------------------------------------------------

def _spont_prefactor(params: MediumParams) -> float:
    if params.open_rates is None:
        return 4.0 * params.gamma_small
    r = params.rates
    return 2 * r.gamma12 / r.gamma2 - 1.0


def _spont_kernel(params: MediumParams):
    if params.open_rates is None:
        # |L(x)|^2 = Re L(x) for the width-1/2 Lorentzian
        return lambda dd, w: np.real(lorentzian(dd + w)) * np.real(lorentzian(dd))
    g = params.rates.gamma12
    return lambda dd, w: g * g / (((g * g + (dd + w) ** 2)) * (g * g + dd * dd))


def _spont_width(params: MediumParams) -> float:
    return 0.5 if params.open_rates is None else params.rates.gamma12


def _spont_values(params: MediumParams, varpi, a0L, a0re):
    """psi_s at the nodes ``varpi`` (without the zero-prefactor shortcut)."""
    ar = a0L * np.real(absorption_shape(params.delta + varpi, params.kv0, params.width))
    d = a0re - ar
    e = np.exp(-a0re) * np.real(_phi1(d))
    v = _velocity_average(params, _spont_kernel(params), varpi, _spont_width(params)).real
    return _spont_prefactor(params) * a0L * e * v


def psi_s_at(params: MediumParams, varpi):
    """Spectral density of thermal-like spontaneous photons in the pump mode (real)."""
    varpi = np.atleast_1d(np.asarray(varpi, dtype=float))
    if _spont_prefactor(params) == 0 or params.od == 0:
        return np.zeros(varpi.shape)
    return _spont_values(params, varpi, alpha0_from_od(params), params.od)


def psi_s_spectrum(params: MediumParams, grid) -> ComplexSpectrum:
    grid = np.asarray(grid, dtype=float)
    return ComplexSpectrum(grid, psi_s_at(params, grid).astype(complex), "psi_s")


def psi_s_zero(params: MediumParams, tol: float = 1e-10) -> float:
    """psi_s(tau = 0) = (1/2pi) int dvarpi psi_s(varpi)."""
    if _spont_prefactor(params) == 0 or params.od == 0:
        return 0.0
    a0L = alpha0_from_od(params)
    a0re = params.od
    scale = max(_spont_width(params), params.kv0)

    def integral(panels):
        theta, w = gauss_legendre_panels(-0.5 * math.pi, 0.5 * math.pi, 2 * panels)
        v, jac = _tan_map(theta, scale)
        terms = _spont_values(params, v, a0L, a0re) * w * jac
        return float(np.sum(terms)) / (2 * math.pi), _ROUNDOFF * float(np.sum(np.abs(terms))) / (2 * math.pi)

    panels = 8
    prev, _ = integral(panels)
    while panels < _MAX_PANELS // 4:
        panels *= 2
        cur, noise = integral(panels)
        err = abs(cur - prev) + noise
        if err <= tol * max(abs(_spont_prefactor(params)), abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError(f"psi_s(0) quadrature did not reach tol={tol} (err={err:.3g})")


# -- delay domain ------------------------------------------------------------

def inverse_fourier(spec: ComplexSpectrum, tail: bool = True, tail_width: float = 1.0,
                    tail_tol: float = 1e-8, full: bool = False) -> TauFunction:
    """Trapezoid-rule transform psi(tau) = (1/2pi) sum_k h e^{-i w_k tau} psi(w_k), via FFT.

    The grid must be ``w_k = (k - n/2) h``.  With ``tail`` on, the asymptotic
    ``p i w/(w^2+c^2) + q/(w^2+c^2)`` behaviour fitted at the outermost symmetric
    pair of nodes is removed before the FFT and its exact transform added back,
    so spectra with 1/w or 1/w^2 tails transform accurately.  The remainder must
    fall below ``tail_tol`` times the peak over the outer tenth of the grid.
    """
    g = spec.grid
    n = g.size
    h = spec.spacing
    if n % 2 or abs(g[n // 2]) > 1e-9 * h:
        raise ValueError("grid must have even length with node n/2 at zero")
    vals = np.asarray(spec.values, dtype=complex)
    peak = float(np.max(np.abs(vals)))
    tau = 2 * math.pi / (n * h) * np.arange(n // 2 + 1)
    if peak == 0:
        t_out = tau if not full else np.concatenate([-tau[:0:-1], tau])
        return TauFunction(t_out, np.zeros(t_out.shape, complex), True)

    c = tail_width
    p = q = 0j
    resid = vals
    if tail:
        om = g[-1]
        vp, vm = vals[-1], vals[1]
        q = 0.5 * (vp + vm) * (om * om + c * c)
        p = 0.5 * (vp - vm) * (om * om + c * c) / (1j * om)
        resid = vals - (p * 1j * g + q) / (g * g + c * c)
    outer = np.abs(g) >= 0.9 * abs(g[0])
    if np.max(np.abs(resid[outer])) > tail_tol * peak:
        raise GridTooCoarseError(
            f"spectral tail {np.max(np.abs(resid[outer])):.3g} exceeds {tail_tol:g} of peak {peak:.3g}"
        )
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    fft = np.fft.fft(resid)
    pos = h / (2 * math.pi) * sign[: n // 2 + 1] * fft[: n // 2 + 1]
    # negative delays: sum_k r_k e^{+i w_k tau_j}
    ifft = np.fft.ifft(resid) * n
    neg = h / (2 * math.pi) * sign[: n // 2 + 1] * ifft[: n // 2 + 1]

    def model(t):
        return q * np.exp(-c * np.abs(t)) / (2 * c) + p * np.sign(t) * np.exp(-c * np.abs(t)) / 2

    pos = pos + model(tau)
    neg = neg + model(-tau)
    if full:
        t_out = np.concatenate([-tau[:0:-1], tau])
        v_out = np.concatenate([neg[:0:-1], pos])
    else:
        t_out, v_out = tau, pos
    decayed = bool(abs(pos[-1]) <= 1e-6 * np.max(np.abs(pos)))
    return TauFunction(t_out, v_out, decayed)


def tau_spectrum_grid(tau_max: float, n_tau: int = 4096, n: int = 2 ** 16) -> np.ndarray:
    """Detuning grid whose FFT delays land exactly on ``linspace(0, tau_max, n_tau)``."""
    if n_tau > n // 2:
        raise ValueError("n_tau must not exceed n/2")
    dtau = tau_max / (n_tau - 1)
    h = 2 * math.pi / (n * dtau)
    return h * (np.arange(n) - n // 2)
