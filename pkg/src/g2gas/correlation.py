"""Second-order correlation of the transmitted light.

Phi0 (the input photon flux) only sets the scale of the unnormalized
functions and cancels in g2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .medium import MediumParams, absorption_shape, alpha0_from_od, voigt_hwhm
from .spectra import (
    TauFunction,
    _psi_b_zero_core,
    _spont_prefactor,
    inverse_fourier,
    psi_b_spectrum,
    psi_b_zero,
    psi_s_spectrum,
    psi_s_zero,
    tau_spectrum_grid,
)
from .specfun import ConvergenceError


def _alpha0(params: MediumParams) -> complex:
    """Complex alpha(0) L."""
    if params.od == 0:
        return 0j
    return complex(alpha0_from_od(params) * absorption_shape(params.delta, params.kv0, params.width))


def _values(fn):
    return fn.values if isinstance(fn, TauFunction) else np.asarray(fn)


def g2_b(params: MediumParams, psi_b_tau, phi0: float = 1.0):
    """Pump plus biphoton part, Phi0^2 |e^{-alpha(0)L} + beta psi_b(tau)|^2."""
    return phi0 ** 2 * np.abs(np.exp(-_alpha0(params)) + params.beta * _values(psi_b_tau)) ** 2


def g2_s(params: MediumParams, psi_s_tau, psi_s0: float, phi0: float = 1.0):
    """Thermal-like spontaneous part of G2; ``psi_s0`` is psi_s at zero delay."""
    s = _values(psi_s_tau)
    b = params.beta
    return phi0 ** 2 * (
        b * b * (np.abs(s) ** 2 + abs(psi_s0) ** 2)
        + 2 * b * (np.real(s) + np.real(psi_s0)) * math.exp(-params.od)
    )


def g1_zero(params: MediumParams, psi_s0: float, phi0: float = 1.0) -> float:
    return phi0 * (math.exp(-params.od) + params.beta * float(np.real(psi_s0)))


@dataclass(frozen=True)
class CorrelationResult:
    tau_grid: np.ndarray
    g2: np.ndarray = field(repr=False)
    g2_b_part: np.ndarray = field(repr=False)
    g2_s_part: np.ndarray = field(repr=False)
    g1_zero: float
    params_echo: MediumParams
    tail_ok: bool = True

    @property
    def g2_zero(self) -> float:
        return float(self.g2[0])


_MIN_FINE = 4096


def default_tau_max(params: MediumParams) -> float:
    return 20.0 / voigt_hwhm(params.with_(delta=0.0))


def g2_normalized(params: MediumParams, tau_max: Optional[float] = None, n_tau: int = 4096,
                  phi0: float = 1.0, n_fft: int = 2 ** 16) -> CorrelationResult:
    """g2(tau) on ``linspace(0, tau_max, n_tau)`` (default tau_max = 20 / HWHM)."""
    if tau_max is None:
        tau_max = default_tau_max(params)
    if n_tau < 2:
        raise ValueError("n_tau must be >= 2")
    # refine coarse requests so the spectral span does not shrink with n_tau
    m = max(1, -(-(_MIN_FINE - 1) // (n_tau - 1)))
    n_fine = (n_tau - 1) * m + 1
    grid = tau_spectrum_grid(tau_max, n_fine, n_fft)
    psi_b = inverse_fourier(psi_b_spectrum(params, grid))
    tau = psi_b.tau[:n_fine:m]
    pb = psi_b.values[:n_fine:m]
    if _spont_prefactor(params) != 0 and params.od > 0:
        ps_fn = inverse_fourier(psi_s_spectrum(params, grid))
        ps = ps_fn.values[:n_fine:m]
        ps0 = psi_s_zero(params)
    else:
        ps = np.zeros(n_tau, complex)
        ps0 = 0.0
    gb = g2_b(params, pb, phi0)
    gs = g2_s(params, ps, ps0, phi0)
    g1 = g1_zero(params, ps0, phi0)
    g2 = (gb + gs) / g1 ** 2
    tail_ok = bool(abs(g2[-1] - 1.0) <= 1e-3)
    return CorrelationResult(tau, g2, gb, gs, g1, params, tail_ok)


def g2_zero(params: MediumParams, tol: float = 1e-10) -> float:
    """g2(0) from the zero-delay integrals directly (no FFT)."""
    if params.od == 0:
        return 1.0
    pb = psi_b_zero(params, tol)
    a0 = _alpha0(params)
    if _spont_prefactor(params) == 0:
        # |e^{-a0} + beta psi_b|^2 / e^{-2 OD}, written without the small exponential
        return float(abs(1.0 + params.beta * pb * np.exp(a0)) ** 2)
    ps0 = psi_s_zero(params, tol)
    num = g2_b(params, pb) + g2_s(params, ps0, ps0)
    return float(num / g1_zero(params, ps0) ** 2)


@dataclass(frozen=True)
class G2Map:
    od: np.ndarray
    delta: np.ndarray
    values: np.ndarray = field(repr=False)
    """g2(0) indexed [i_od, i_delta]; NaN where a cell failed."""
    converged: np.ndarray = field(repr=False)

    def clamped(self, top: float = 2.0) -> np.ndarray:
        return np.minimum(self.values, top)


def g2_zero_row(base: MediumParams, od_values, tol: float = 1e-10):
    """g2(0) over a set of ODs at fixed detuning; returns (values, converged)."""
    od_values = np.asarray(od_values, dtype=float)
    out = np.full(od_values.shape, np.nan)
    ok = np.zeros(od_values.shape, bool)
    closed = _spont_prefactor(base) == 0
    if closed:
        try:
            p0 = base.with_(od=1.0)
            unit = alpha0_from_od(p0)
            shape0 = absorption_shape(base.delta, base.kv0, base.width)
            a0L = od_values * unit
            pb = _psi_b_zero_core(base.delta, base.kv0, base.width, a0L, tol)
            out[:] = np.abs(1.0 + base.beta * pb * np.exp(a0L * shape0)) ** 2
            ok[:] = np.isfinite(out)
            return out, ok
        except (ConvergenceError, ValueError, FloatingPointError):
            pass
    for i, od in enumerate(od_values):
        try:
            out[i] = g2_zero(base.with_(od=float(od)), tol)
            ok[i] = np.isfinite(out[i])
        except (ConvergenceError, ValueError, FloatingPointError):
            pass
    return out, ok


def g2_zero_map(params_base: MediumParams, od_grid, delta_grid, jobs: int = 1,
                tol: float = 1e-10) -> G2Map:
    """Density map of g2(0) over (OD, Delta); failed cells are NaN and flagged, never fatal."""
    od_grid = np.asarray(od_grid, dtype=float)
    delta_grid = np.asarray(delta_grid, dtype=float)
    if od_grid.size == 0 or delta_grid.size == 0:
        raise ValueError("grids must be non-empty")
    rows = [params_base.with_(delta=float(d)) for d in delta_grid]
    if jobs <= 1:
        results = [g2_zero_row(r, od_grid, tol) for r in rows]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(g2_zero_row, rows, [od_grid] * len(rows), [tol] * len(rows)))
    vals = np.stack([r[0] for r in results], axis=1)
    ok = np.stack([r[1] for r in results], axis=1)
    return G2Map(od_grid, delta_grid, vals, ok)
