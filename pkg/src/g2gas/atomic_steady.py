"""Weak-saturation steady state, saturation parameter and Langevin diffusion matrix.

The pump is treated as a c-number: g^2 <a^dag a> is replaced by beta * Phi
(Gamma = 1) and the field amplitude is taken real.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .medium import MediumParams

# index order of the Langevin forces
ORDER = ("12", "21", "11", "22")
STRUCTURAL_ZEROS = ((0, 0), (1, 1), (1, 2), (1, 3), (2, 0), (3, 0))


class SaturationError(ValueError):
    """The weak-saturation expansion is used outside S < 1."""


@dataclass(frozen=True)
class SteadyState:
    s11: float
    s22: float
    s12: complex
    s21: complex
    flux: float


@dataclass(frozen=True)
class DiffusionMatrix:
    values: np.ndarray

    def __getitem__(self, key):
        """Index either by integer pair or by labels such as ("21", "12")."""
        i, j = key
        if isinstance(i, str):
            i, j = ORDER.index(i), ORDER.index(j)
        return self.values[i, j]


def saturation(params: MediumParams, flux: float, warn: bool = True) -> float:
    if flux < 0:
        raise ValueError("flux must be >= 0")
    if params.open_rates is None:
        s = 8.0 * params.beta * flux
    else:
        r = params.open_rates
        if r.gamma1 == 0:
            raise ValueError("open saturation formula needs gamma1 > 0")
        s = 2 * params.beta * (r.gamma1 + r.gamma2 - 1.0) / (r.gamma12 * r.gamma1 * r.gamma2) * flux
    if warn and s >= 0.1:
        warnings.warn(f"saturation S={s:.3g} is not small; weak-saturation results are unreliable",
                      stacklevel=2)
    return s


def _depletion_factor(params: MediumParams) -> float:
    """(1 - Gamma/gamma2)/gamma1, finite along the closed family."""
    r = params.rates
    if params.open_rates is None:
        # gamma1 = g, gamma2 = 1 + g gives exactly 1/(1 + g)
        return 1.0 / (1.0 + params.gamma_small)
    if r.gamma1 == 0:
        if r.gamma2 != 1.0:
            raise ValueError("gamma1 = 0 requires gamma2 = Gamma")
        return 1.0 / r.gamma2
    return (1.0 - 1.0 / r.gamma2) / r.gamma1


def steady_state(params: MediumParams, flux: float, doppler_shift: float = 0.0) -> SteadyState:
    """Populations and coherences for one velocity class; ``doppler_shift`` is k v_z."""
    s = saturation(params, flux, warn=False)
    if s >= 1:
        raise SaturationError(f"S={s:.3g} >= 1")
    r = params.rates
    g12 = r.gamma12 - 1j * (params.delta + doppler_shift)
    mod2 = abs(g12) ** 2
    gg = params.beta * flux
    s11 = 1.0 - gg * 2 * r.gamma12 * _depletion_factor(params) / mod2
    s22 = gg * 2 * r.gamma12 / (r.gamma2 * mod2)
    s12 = 1j * math.sqrt(gg) / g12
    return SteadyState(float(s11), float(s22), complex(s12), complex(np.conj(s12)), flux)


def diffusion_matrix(state: SteadyState, params: MediumParams) -> DiffusionMatrix:
    """Diffusion coefficients D(alpha, alpha') in the order 12, 21, 11, 22."""
    r = params.rates
    g1, g2, g12, G = r.gamma1, r.gamma2, r.gamma12, 1.0
    s11, s22, s12, s21 = state.s11, state.s22, state.s12, state.s21
    d = np.zeros((4, 4), dtype=complex)
    d[0, 1] = 2 * g12 * s11 + G * s22 + g1 * (1 - s11)
    d[0, 2] = -(g1 + G) * s12
    d[0, 3] = g2 * s12
    d[1, 0] = (2 * g12 - g2) * s22
    d[2, 1] = -(g1 + G) * s21
    d[2, 2] = G * s22 + g1 * (1 - s11)
    d[2, 3] = -(g1 + G) * s22
    d[3, 1] = g2 * s21
    d[3, 2] = -(g1 + G) * s22
    d[3, 3] = g2 * s22
    return DiffusionMatrix(d)
