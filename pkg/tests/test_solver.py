import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

import oracles
from g2gas.medium import MediumParams
from g2gas.solver import (
    NoRootError,
    asymptotic_params,
    g2_floor_open,
    psi_b_zero_asymptotic,
    psi_b_zero_small_mu,
    psi_s_zero_asymptotic,
    solve_detuned_branch,
    solve_detuned_exact,
    solve_od_a_asymptotic,
    solve_od_a_resonant,
)


@pytest.mark.parametrize("beta,expected", [(1e-2, 5.88), (1e-3, 8.44)])
def test_resonant_depth_quoted(beta, expected):
    pt = solve_od_a_resonant(MediumParams(beta=beta))
    assert pt.converged and pt.residual < 1e-8
    assert pt.od_a == pytest.approx(expected, abs=0.02)


def test_resonant_depth_with_doppler_against_oracle():
    beta = 1e-2
    f = lambda od: beta * abs(oracles.psi_b_zero(od, 0.0, 10.0)) - math.exp(-od)
    ref = optimize.brentq(f, 7.5, 9.5, xtol=1e-7)
    got = solve_od_a_resonant(MediumParams(beta=beta, kv0=10.0)).od_a
    assert got == pytest.approx(ref, abs=1e-6)
    assert got > solve_od_a_resonant(MediumParams(beta=beta)).od_a


def test_bracket_widens_for_large_beta():
    pt = solve_od_a_resonant(MediumParams(beta=0.9))
    assert pt.converged and pt.od_a < 1.0


def test_no_root_error_when_bracket_fails(monkeypatch):
    import g2gas.solver as s

    monkeypatch.setattr(s, "psi_b_zero", lambda p, tol=1e-12: 1e-300)
    with pytest.raises(NoRootError):
        solve_od_a_resonant(MediumParams())


@pytest.mark.parametrize("beta,expected", [(1e-2, 6.08), (1e-3, 8.55)])
def test_asymptotic_depth_quoted(beta, expected):
    assert solve_od_a_asymptotic(MediumParams(beta=beta)).od_a == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("beta,gap", [(1e-2, 0.2), (1e-3, 0.11)])
def test_asymptotic_overshoots_exact(beta, gap):
    exact = solve_od_a_resonant(MediumParams(beta=beta)).od_a
    approx = solve_od_a_asymptotic(MediumParams(beta=beta)).od_a
    assert approx > exact
    assert approx - exact == pytest.approx(gap, abs=0.05)


def test_asymptotic_depth_reduces_to_square_root_law():
    beta = 1e-2
    od = solve_od_a_asymptotic(MediumParams(beta=beta)).od_a
    assert beta * math.exp(od) == pytest.approx(math.sqrt(math.pi * od), rel=1e-10)


def test_asymptotic_depth_doppler_limit():
    a = solve_od_a_asymptotic(MediumParams(beta=1e-2)).od_a
    b = solve_od_a_asymptotic(MediumParams(beta=1e-2, kv0=1e-3)).od_a
    assert b == pytest.approx(a, abs=1e-3)


@pytest.mark.parametrize("n,od,delta", [(1, 6.56, 0.450), (2, 7.16, 0.841)])
def test_detuned_branches_quoted(n, od, delta):
    pt = solve_detuned_branch(1e-2, n)
    assert pt.converged and pt.residual < 1e-10
    assert pt.od_a == pytest.approx(od, abs=0.02)
    assert pt.delta_a == pytest.approx(delta, abs=0.002)


def test_detuned_branch_mirror():
    pt = solve_detuned_branch(1e-2, 1)
    x = (pt.od_a, -pt.delta_a)
    r = math.sqrt(1 + 4 * x[1] ** 2)
    # magnitude equation is even in delta; phase equation flips sign with n
    f1 = math.log(1e-2) + x[0] - 0.5 * math.log(math.pi * x[0]) - 0.75 * math.log(r * r)
    f2 = 2 * x[1] * x[0] + 2 * math.pi - math.atan(-2 * x[1] / (1 + r))
    assert abs(f1) < 1e-10 and abs(f2) < 1e-10


def test_branch_ordering():
    a, b = solve_detuned_branch(1e-2, 1), solve_detuned_branch(1e-2, 2)
    assert a.od_a < b.od_a and a.delta_a < b.delta_a


@pytest.mark.parametrize("n", [0, -1])
def test_branch_index_validated(n):
    with pytest.raises(ValueError):
        solve_detuned_branch(1e-2, n)


def test_exact_detuned_branch_near_asymptotic():
    exact = solve_detuned_exact(MediumParams(beta=1e-2), 1)
    approx = solve_detuned_branch(1e-2, 1)
    assert exact.converged
    assert exact.od_a == pytest.approx(approx.od_a, abs=0.05)
    assert exact.delta_a == pytest.approx(approx.delta_a, abs=0.01)


def test_d4_value():
    assert psi_b_zero_asymptotic(MediumParams(od=10.0)) == pytest.approx(-1 / math.sqrt(10 * math.pi), rel=1e-14)
    assert psi_b_zero_asymptotic(MediumParams(od=10.0)) == pytest.approx(-0.1784, abs=1e-4)


def test_d4_warns_at_small_od():
    with pytest.warns(UserWarning):
        psi_b_zero_asymptotic(MediumParams(od=1.0))


def test_d5_tends_to_d4():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d4 = psi_b_zero_asymptotic(MediumParams(od=20.0))
        d5 = psi_b_zero_asymptotic(MediumParams(od=20.0, kv0=1e-2))
    assert abs(d5 - d4) < 1e-3 * abs(d4)


def test_d5_uses_complex_mu_off_resonance():
    p = MediumParams(od=10.0, kv0=5.0, delta=0.3)
    mu = asymptotic_params(p).mu
    assert mu.imag != 0
    assert np.isfinite(psi_b_zero_asymptotic(p))


def test_d6_closed_form():
    p = MediumParams(od=10.0, kv0=20.0)
    from g2gas.medium import alpha0_from_od
    from scipy.special import gamma

    a = alpha0_from_od(p)
    ref = -math.sqrt(1 / 20.0) / (24 ** 0.25 * gamma(0.75) * a ** 0.25)
    assert psi_b_zero_small_mu(p).real == pytest.approx(ref, rel=1e-13)


def test_asymptotic_params_need_doppler():
    with pytest.raises(ValueError):
        asymptotic_params(MediumParams())


def test_e2_value_and_zero_gamma():
    assert psi_s_zero_asymptotic(MediumParams(od=10.0, gamma_small=0.01)) == pytest.approx(1.784e-3, rel=1e-3)
    assert psi_s_zero_asymptotic(MediumParams(od=10.0)) == 0.0
    with pytest.raises(ValueError):
        psi_s_zero_asymptotic(MediumParams(od=10.0, kv0=1.0, gamma_small=0.01))


def test_floor_limits():
    assert g2_floor_open(MediumParams(gamma_small=0.01), asymptotic=True) == pytest.approx(0.04, rel=1e-14)
    assert g2_floor_open(MediumParams()) == 0.0
    with pytest.raises(ValueError):
        g2_floor_open(MediumParams(kv0=1.0, gamma_small=0.01), asymptotic=True)


def test_floor_matches_leading_g2():
    from g2gas.correlation import g2_zero

    p = MediumParams(beta=1e-2, gamma_small=1e-3)
    od_a = solve_od_a_resonant(p.with_(gamma_small=0.0)).od_a
    assert g2_zero(p.with_(od=od_a)) == pytest.approx(g2_floor_open(p), rel=0.02)


def test_od_a_nondecreasing_in_doppler_width():
    kvs = np.linspace(0, 20, 9)
    ods = [solve_od_a_resonant(MediumParams(beta=1e-2, kv0=k)).od_a for k in kvs]
    assert np.all(np.diff(ods) >= -1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-4, 0.1), st.floats(0.0, 20.0))
def test_resonant_root_cancels(beta, kv0):
    pt = solve_od_a_resonant(MediumParams(beta=beta, kv0=kv0))
    assert pt.converged and pt.residual < 1e-8
