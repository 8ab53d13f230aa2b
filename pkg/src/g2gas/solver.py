"""Antibunching points, asymptotic closed forms and the open-system g2 floor."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special

from .medium import MediumParams, absorption_shape, alpha0_from_od
from .spectra import _spont_prefactor, psi_b_zero, psi_s_zero
from .specfun import ConvergenceError, scaled_bessel_k_quarter


class NoRootError(ValueError):
    """The antibunching condition has no sign change in the search bracket."""


@dataclass(frozen=True)
class AntibunchingPoint:
    od_a: float
    delta_a: float
    branch: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class AsymptoticParams:
    mu: complex
    eta: float


def _cancellation(params: MediumParams, tol: float = 1e-12) -> complex:
    """beta psi_b(0) + e^{-alpha(0) L}; zero at an antibunching point."""
    a0 = alpha0_from_od(params) * absorption_shape(params.delta, params.kv0, params.width)
    return params.beta * psi_b_zero(params, tol) + np.exp(-a0)


def solve_od_a_resonant(params: MediumParams, bracket=(1.0, 30.0), tol: float = 1e-8) -> AntibunchingPoint:
    """OD at which beta |psi_b(0)| = e^{-OD} on resonance, from the exact integral."""
    p = params.with_(delta=0.0)

    def f(od):
        # log form keeps the bracket well scaled at large OD
        return math.log(p.beta * abs(psi_b_zero(p.with_(od=od), 1e-12))) + od

    lo, hi = bracket
    if f(lo) * f(hi) > 0:
        lo, hi = 1e-6, max(hi, 200.0)
        if f(lo) * f(hi) > 0:
            raise NoRootError(f"no sign change for beta={p.beta}, kv0={p.kv0}")
    od = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    res = abs(_cancellation(p.with_(od=od)))
    return AntibunchingPoint(od, 0.0, 0, float(res), bool(res < 1e-8))


def asymptotic_params(params: MediumParams) -> AsymptoticParams:
    """mu^2 = eta^2 alpha0 L (1 - 2 i Delta)/48 with eta = Gamma / k v0."""
    if params.kv0 == 0:
        raise ValueError("asymptotic parameters need kv0 > 0")
    eta = 1.0 / params.kv0
    mu2 = eta ** 2 * alpha0_from_od(params) * (1 - 2j * params.delta) / 48.0
    return AsymptoticParams(complex(np.sqrt(mu2)), eta)


def _check_large_od(params: MediumParams):
    if params.od < 3:
        warnings.warn(f"asymptotic forms assume a large optical depth (od={params.od})", stacklevel=3)


def psi_b_zero_asymptotic(params: MediumParams) -> complex:
    """Large-OD psi_b(0): square-root law without Doppler, K_{1/4} form with it."""
    _check_large_od(params)
    a = alpha0_from_od(params) * (1 - 2j * params.delta)
    if params.kv0 == 0:
        return complex(-1.0 / np.sqrt(math.pi * a))
    ap = asymptotic_params(params)
    mu2 = ap.mu ** 2
    return complex(-ap.eta / (math.sqrt(24.0) * math.pi) * scaled_bessel_k_quarter(mu2))


def psi_b_zero_small_mu(params: MediumParams) -> complex:
    """Small-mu limit of the Doppler form, proportional to (alpha0 L)^{-1/4}."""
    _check_large_od(params)
    eta = 1.0 / params.kv0
    a = alpha0_from_od(params) * (1 - 2j * params.delta)
    return complex(-math.sqrt(eta) / (24 ** 0.25 * special.gamma(0.75) * a ** 0.25))


def psi_s_zero_asymptotic(params: MediumParams) -> float:
    """gamma/sqrt(pi alpha0 L); only for the resonant, Doppler-free medium."""
    if params.kv0 != 0 or params.delta != 0:
        raise ValueError("psi_s asymptotics need kv0 = 0 and delta = 0")
    _check_large_od(params)
    gamma_eff = 0.25 * _spont_prefactor(params)
    return gamma_eff / math.sqrt(math.pi * alpha0_from_od(params))


def _safeguarded_newton(f: Callable[[float], float], lo: float, hi: float, x0: float,
                        tol: float = 1e-12, maxiter: int = 100) -> float:
    """Newton with a finite-difference slope, falling back to bisection when it leaves [lo, hi]."""
    flo = f(lo)
    if flo * f(hi) > 0:
        raise NoRootError("asymptotic condition has no sign change in the bracket")
    x = x0
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        step = 1e-7 * max(1.0, abs(x))
        slope = (f(x + step) - fx) / step
        x_new = x - fx / slope if slope != 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    raise ConvergenceError("Newton iteration did not converge")


def solve_od_a_asymptotic(params: MediumParams, bracket=(1.0, 60.0)) -> AntibunchingPoint:
    """Resonant antibunching OD with psi_b(0) replaced by its large-OD form."""
    p = params.with_(delta=0.0)

    def f(od):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return math.log(p.beta * abs(psi_b_zero_asymptotic(p.with_(od=od)))) + od

    x0 = -math.log(p.beta)
    od = _safeguarded_newton(f, bracket[0], bracket[1], min(max(x0, bracket[0] + 1e-3), bracket[1] - 1e-3))
    return AntibunchingPoint(od, 0.0, 0, abs(f(od)), True)


def _detuned_equations(beta: float, n: int):
    def f(x):
        od, d = x
        r = math.sqrt(1 + 4 * d * d)
        f1 = math.log(beta) + od - 0.5 * math.log(math.pi * od) - 0.75 * math.log(1 + 4 * d * d)
        f2 = 2 * d * od - 2 * math.pi * n + math.atan(2 * d / (1 + r))
        return np.array([f1, f2])

    return f


def _newton2d(f, x0, tol=1e-12, maxiter=60, step=1e-6):
    x = np.asarray(x0, dtype=float)
    for _ in range(maxiter):
        fx = f(x)
        if np.max(np.abs(fx)) < tol:
            return x, fx, True
        jac = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = step * max(1.0, abs(x[k]))
            jac[:, k] = (f(x + e) - fx) / e[k]
        dx = np.linalg.solve(jac, -fx)
        # damp steps that would leave the physical domain
        lam = 1.0
        while x[0] + lam * dx[0] <= 0 and lam > 1e-6:
            lam *= 0.5
        x = x + lam * dx
    fx = f(x)
    return x, fx, bool(np.max(np.abs(fx)) < tol)


def solve_detuned_branch(beta: float, n: int) -> AntibunchingPoint:
    """Branch n >= 1 of the large-OD, Doppler-free detuned antibunching condition."""
    if n < 1:
        raise ValueError("branch index must be >= 1")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    od0 = solve_od_a_asymptotic(MediumParams(beta=beta, od=5.0)).od_a
    x, fx, ok = _newton2d(_detuned_equations(beta, n), [od0, math.pi * n / od0], tol=1e-10)
    return AntibunchingPoint(float(x[0]), float(x[1]), n, float(np.max(np.abs(fx))), ok)


def solve_detuned_exact(params: MediumParams, n: int, seed: Optional[tuple] = None) -> AntibunchingPoint:
    """Zero of beta psi_b(0) + e^{-alpha(0)L} in (OD, Delta) near branch n, using the exact integral."""
    if seed is None:
        a = solve_detuned_branch(params.beta, n)
        seed = (a.od_a, a.delta_a)

    def f(x):
        od, d = x
        if od <= 0:
            return np.array([1e3, 1e3])
        p = params.with_(od=float(od), delta=float(d))
        a0 = alpha0_from_od(p) * absorption_shape(p.delta, p.kv0, p.width)
        c = 1.0 + p.beta * psi_b_zero(p, 1e-13) * np.exp(a0)
        return np.array([c.real, c.imag])

    x, fx, ok = _newton2d(f, seed, tol=1e-10)
    return AntibunchingPoint(float(x[0]), float(x[1]), n, float(np.max(np.abs(fx))), ok)


def g2_floor_open(params: MediumParams, asymptotic: bool = False) -> float:
    """Residual g2(0) at the resonant antibunching OD, 4 psi_s(0)/|psi_b(0)|."""
    if _spont_prefactor(params) == 0:
        return 0.0
    p = params.with_(delta=0.0)
    if asymptotic:
        if p.kv0 != 0:
            raise ValueError("asymptotic floor is only available for kv0 = 0")
        # both asymptotic forms scale as (alpha0 L)^{-1/2}, so the ratio is OD independent
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            q = p.with_(od=10.0)
            return 4.0 * psi_s_zero_asymptotic(q) / abs(psi_b_zero_asymptotic(q))
    closed = p.with_(gamma_small=0.0) if p.open_rates is None else p
    od_a = solve_od_a_resonant(closed).od_a
    q = p.with_(od=od_a)
    return 4.0 * psi_s_zero(q) / abs(psi_b_zero(q))
