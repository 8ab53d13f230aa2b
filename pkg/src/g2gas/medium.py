"""Medium parameters and the Doppler-averaged complex absorption coefficient."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from .specfun import (
    SQRT_PI,
    ConvergenceError,
    faddeeva,
    faddeeva_derivatives,
    lorentzian,
    lorentzian_derivative,
    velocity_rule,
)


@dataclass(frozen=True)
class OpenRates:
    """Relaxation constants of a general open two-level system (units of Gamma)."""

    gamma1: float
    gamma2: float
    gamma12: float
    gamma21: float = 1.0

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.gamma12, self.gamma21) < 0:
            raise ValueError("relaxation rates must be non-negative")
        if self.gamma12 < 0.5 * (self.gamma1 + self.gamma2) - 1e-15:
            raise ValueError("need gamma12 >= (gamma1 + gamma2)/2")
        if self.gamma21 > self.gamma2 + 1e-15:
            raise ValueError("need gamma21 <= gamma2")


@dataclass(frozen=True)
class MediumParams:
    """Everything needed to evaluate the theory, in units of Gamma.

    ``od`` is the detuning-dependent optical depth Re(alpha(0)) L.  When
    ``open_rates`` is None the nearly closed system is used, with rates
    gamma1 = g, gamma2 = 1 + g, gamma12 = 1/2 + g for ``gamma_small = g``.

    ``absorption`` selects the Lorentzian width inside alpha: ``"natural"``
    uses Gamma/2 (the closed-system Voigt profile), ``"rates"`` uses gamma12
    of the rate set.  ``None`` means natural for the nearly closed system and
    rates when ``open_rates`` is given.
    """

    delta: float = 0.0
    kv0: float = 0.0
    beta: float = 1e-2
    od: float = 1.0
    gamma_small: float = 0.0
    open_rates: Optional[OpenRates] = None
    absorption: Optional[str] = None

    def __post_init__(self):
        for name in ("delta", "kv0", "beta", "od", "gamma_small"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.kv0 < 0:
            raise ValueError("kv0 must be >= 0")
        if self.od < 0:
            raise ValueError("od must be >= 0")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.gamma_small < 0:
            raise ValueError("gamma_small must be >= 0")
        if self.absorption not in (None, "natural", "rates"):
            raise ValueError("absorption must be 'natural', 'rates' or None")

    def with_(self, **changes) -> "MediumParams":
        return replace(self, **changes)

    @property
    def rates(self) -> OpenRates:
        if self.open_rates is not None:
            return self.open_rates
        g = self.gamma_small
        return OpenRates(gamma1=g, gamma2=1.0 + g, gamma12=0.5 + g, gamma21=1.0)

    @property
    def is_ideal_closed(self) -> bool:
        r = self.rates
        return 2 * r.gamma12 == r.gamma2

    @property
    def width(self) -> float:
        """Homogeneous half-width used inside alpha."""
        mode = self.absorption
        if mode is None:
            mode = "rates" if self.open_rates is not None else "natural"
        return self.rates.gamma12 if mode == "rates" else 0.5


# Below this kv0/width the Doppler correction, O((kv0/width)^2), is under double precision.
_DOPPLER_NEGLIGIBLE = 1e-8


def _no_doppler(kv0: float, width: float) -> bool:
    return kv0 < _DOPPLER_NEGLIGIBLE * width


def absorption_shape(nu, kv0: float, width: float = 0.5):
    """Velocity-averaged ``width/(width - i(nu + k v))``, i.e. alpha per unit alpha0 L.

    Closed form through the Faddeeva function; reduces to the Lorentzian at
    ``kv0 == 0``.
    """
    nu = np.asarray(nu, dtype=float)
    if _no_doppler(kv0, width):
        return lorentzian(nu, width)
    out = SQRT_PI * width / kv0 * faddeeva((nu + 1j * width) / kv0)
    return out[()] if np.ndim(out) == 0 else out


_RECURSION_MAX_Z = 3.0


def absorption_shape_derivatives(nu: float, kv0: float, width: float = 0.5, order: int = 4):
    """Derivatives ``d^k/dnu^k`` of :func:`absorption_shape`, k = 0..order."""
    if _no_doppler(kv0, width):
        return [lorentzian_derivative(nu, k, width) for k in range(order + 1)]
    z = (nu + 1j * width) / kv0
    if abs(z) > _RECURSION_MAX_Z:
        # upward recursion cancels badly for large |z|; average the exact Lorentzian derivatives instead
        r = velocity_rule(kv0, width)
        x = nu + kv0 * r.nodes
        return [complex(r.average(lorentzian_derivative(x, k, width))) for k in range(order + 1)]
    ws = faddeeva_derivatives(z, order)
    c = SQRT_PI * width / kv0
    return [c * ws[k] / kv0 ** k for k in range(order + 1)]


def alpha0_from_od(params: MediumParams) -> float:
    """Resonant alpha0 L that produces the requested optical depth at detuning Delta."""
    factor = float(np.real(absorption_shape(params.delta, params.kv0, params.width)))
    if not math.isfinite(factor) or factor < 1e-290:
        raise ConvergenceError(
            f"absorption at delta={params.delta} is too small to invert (factor={factor})"
        )
    return params.od / factor


def alpha(params: MediumParams, varpi):
    """Complex alpha(varpi) L for a weak field detuned by Delta + varpi."""
    return alpha0_from_od(params) * absorption_shape(
        np.asarray(varpi, dtype=float) + params.delta, params.kv0, params.width
    )


# Below this |varpi| (relative to the line scale) the Taylor series of delta-alpha is used.
_SERIES_CUTOFF = 2e-3


def _line_scale(params: MediumParams) -> float:
    return max(params.width, params.kv0)


def delta_alpha(params: MediumParams, varpi):
    """``alpha(0) - [alpha(varpi) + alpha(-varpi)]/2`` times L."""
    varpi = np.asarray(varpi, dtype=float)
    return np.asarray(delta_alpha_over_sq(params, varpi)) * varpi ** 2


def delta_alpha_over_sq(params: MediumParams, varpi):
    """``delta_alpha(varpi) L / varpi**2`` with the removable singularity at 0 filled in."""
    varpi = np.asarray(varpi, dtype=float)
    a0L = alpha0_from_od(params)
    shape = lambda nu: absorption_shape(nu, params.kv0, params.width)
    d = params.delta
    out = np.empty(varpi.shape, dtype=complex)
    small = np.abs(varpi) < _SERIES_CUTOFF * _line_scale(params)
    big = ~small
    if np.any(big):
        v = varpi[big]
        out[big] = a0L * (shape(d) - 0.5 * (shape(d + v) + shape(d - v))) / v ** 2
    if np.any(small):
        c = alpha_curvature(params)
        out[small] = c[0] + c[1] * varpi[small] ** 2
    return out[()] if out.ndim == 0 else out


def alpha_curvature(params: MediumParams):
    """Coefficients (c2, c4) with delta_alpha L = c2 varpi^2 + c4 varpi^4 + O(varpi^6)."""
    a0L = alpha0_from_od(params)
    der = absorption_shape_derivatives(params.delta, params.kv0, params.width, 4)
    return (-0.5 * a0L * der[2], -a0L * der[4] / 24.0)


@dataclass(frozen=True)
class AbsorptionProfile:
    alpha0_L: float
    grid: np.ndarray
    values: np.ndarray = field(repr=False)


def absorption_profile(params: MediumParams, grid) -> AbsorptionProfile:
    grid = np.asarray(grid, dtype=float)
    return AbsorptionProfile(alpha0_from_od(params), grid, alpha(params, grid))


def voigt_hwhm(params: MediumParams, tol: float = 1e-10) -> float:
    """Half width at half maximum of Re(alpha) for the line centred at Delta = 0."""
    w = params.width
    peak = float(np.real(absorption_shape(0.0, params.kv0, w)))
    f = lambda x: float(np.real(absorption_shape(x, params.kv0, w))) - 0.5 * peak
    hi = 4.0 * (params.kv0 + 2 * w)
    return optimize.brentq(f, 0.0, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def varpi_grid(params: MediumParams, n: int = 2 ** 14, span: Optional[float] = None) -> np.ndarray:
    """Uniform symmetric detuning grid with a node at 0 (n even, FFT ordering not applied)."""
    if span is None:
        span = max(40.0, 8.0 * (params.kv0 + 1.0))
    h = 2.0 * span / n
    return h * (np.arange(n) - n // 2)
