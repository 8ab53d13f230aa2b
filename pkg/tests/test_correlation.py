import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from g2gas.correlation import (
    default_tau_max,
    g1_zero,
    g2_b,
    g2_normalized,
    g2_s,
    g2_zero,
    g2_zero_map,
)
from g2gas.medium import MediumParams, alpha
from g2gas.solver import solve_detuned_exact, solve_od_a_resonant
from g2gas.spectra import psi_b_zero, psi_s_zero


def test_g2_b_vanishes_on_exact_cancellation():
    p = MediumParams(od=3.0, beta=0.02, delta=0.4)
    psi = -np.exp(-complex(alpha(p, 0.0))) / p.beta
    assert g2_b(p, np.array([psi]))[0] < 1e-30


def test_g2_b_zero_od_is_flux_squared():
    assert g2_b(MediumParams(od=0.0), np.zeros(1), phi0=3.0)[0] == 9.0


def test_g1_zero_closed():
    assert g1_zero(MediumParams(od=2.0), 0.0) == pytest.approx(math.exp(-2.0))


def test_g2_s_composition_against_oracle():
    p = MediumParams(od=1.0, gamma_small=0.01)
    ps0 = oracles.psi_s_zero(1.0, 0.0, 0.0, 0.01)
    val = g2_s(p, np.array([0.3 * ps0]), ps0)[0]
    ref = p.beta ** 2 * (0.09 * ps0 ** 2 + ps0 ** 2) + 2 * p.beta * (1.3 * ps0) * math.exp(-1.0)
    assert val == pytest.approx(ref, rel=1e-12)
    assert psi_s_zero(p) == pytest.approx(ps0, rel=1e-8)


def test_g2_s_zero_for_ideal_closed_system():
    res = g2_normalized(MediumParams(od=2.0))
    assert np.all(res.g2_s_part == 0)


def test_g2_at_resonant_antibunching_depth():
    p = MediumParams(beta=1e-2)
    od_a = solve_od_a_resonant(p).od_a
    res = g2_normalized(p.with_(od=od_a))
    assert res.g2_zero < 1e-4
    assert res.tail_ok and abs(res.g2[-1] - 1) < 1e-3
    assert np.all(res.g2 >= 0)


def test_open_floor_close_to_four_gamma():
    p = MediumParams(beta=1e-2, gamma_small=0.01)
    od_a = solve_od_a_resonant(p.with_(gamma_small=0.0)).od_a
    res = g2_normalized(p.with_(od=od_a))
    assert res.g2_zero == pytest.approx(0.04, rel=0.15)
    assert res.g2_zero == pytest.approx(g2_zero(p.with_(od=od_a)), rel=1e-6)


def test_low_od_g2_linearization():
    p = MediumParams(od=1e-3, beta=1e-3, delta=0.2)
    res = g2_normalized(p, tau_max=10.0, n_tau=256)
    from g2gas.spectra import psi_b_low_od_tau

    psi0 = psi_b_low_od_tau(p, res.tau_grid)
    approx = 1 + 2 * p.beta * np.real(psi0)
    assert np.max(np.abs(res.g2 - approx)) < 5e-6


def test_fft_and_direct_zero_delay_agree():
    p = MediumParams(od=4.0, kv0=2.0, delta=0.5, beta=0.05)
    assert g2_normalized(p).g2_zero == pytest.approx(g2_zero(p), rel=1e-7)


def test_width_collapse_under_hwhm_scaling():
    x = np.linspace(0, 20, 4001)
    halves = []
    for kv0 in (0.0, 1.0, 10.0):
        p = MediumParams(beta=1e-2, kv0=kv0)
        p = p.with_(od=solve_od_a_resonant(p).od_a)
        res = g2_normalized(p)
        dev = np.abs(res.g2 - 1)
        scaled = res.tau_grid / default_tau_max(p) * 20
        target = 0.5 * dev[0]
        k = np.argmax(dev <= target)
        halves.append(np.interp(target, [dev[k], dev[k - 1]], [scaled[k], scaled[k - 1]]))
    halves = np.array(halves)
    assert np.ptp(halves) / halves.mean() < 0.10


def test_map_od_zero_row_and_flags():
    m = g2_zero_map(MediumParams(beta=1e-2), np.array([0.0, 2.0]), np.linspace(-1, 1, 5))
    assert np.all(m.values[0] == 1.0)
    assert m.converged.all()
    assert np.all(m.clamped() <= 2.0)


def test_map_parallel_matches_serial():
    ods, ds = np.linspace(0, 8, 5), np.array([-0.6, 0.0, 0.6])
    a = g2_zero_map(MediumParams(), ods, ds)
    b = g2_zero_map(MediumParams(), ods, ds, jobs=2)
    assert np.array_equal(a.values, b.values)


def test_map_rejects_empty_grid():
    with pytest.raises(ValueError):
        g2_zero_map(MediumParams(), [], [0.0])


@pytest.mark.parametrize("n", [1, 2])
def test_exact_detuned_roots_are_deep_minima(n):
    p = MediumParams(beta=1e-2)
    pt = solve_detuned_exact(p, n)
    assert pt.converged
    assert g2_zero(p.with_(od=pt.od_a, delta=pt.delta_a)) < 1e-3
    assert g2_zero(p.with_(od=pt.od_a, delta=-pt.delta_a)) < 1e-3


def test_map_row_matches_pointwise_with_spontaneous_part():
    base = MediumParams(beta=1e-2, gamma_small=0.01, delta=0.3)
    m = g2_zero_map(base, np.array([1.0, 4.0]), np.array([0.3]))
    assert m.values[1, 0] == pytest.approx(g2_zero(base.with_(od=4.0)), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 2.0), st.floats(0.0, 10.0), st.floats(0.1, 100.0))
def test_phi0_cancels(od, delta, kv0, phi0):
    p = MediumParams(od=od, delta=delta, kv0=kv0, gamma_small=0.01)
    pb, ps = psi_b_zero(p), psi_s_zero(p)

    def g(scale):
        return (g2_b(p, np.array([pb]), scale)[0] + g2_s(p, np.array([ps]), ps, scale)[0]) / g1_zero(p, ps, scale) ** 2

    assert g(phi0) == pytest.approx(g(1.0), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 1.5), st.floats(0.0, 10.0))
def test_delta_parity_of_zero_delay(od, delta, kv0):
    p = MediumParams(od=od, delta=delta, kv0=kv0)
    assert g2_zero(p) == pytest.approx(g2_zero(p.with_(delta=-delta)), rel=1e-9, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(-1.5, 1.5), st.floats(0.0, 10.0))
def test_closed_zero_delay_nonnegative(od, delta, kv0):
    assert g2_zero(MediumParams(od=od, delta=delta, kv0=kv0)) >= 0


def test_coarse_delay_grid_samples_the_fine_one():
    from g2gas.correlation import g2_normalized

    p = MediumParams(beta=1e-2, od=4.0, kv0=1.0)
    fine = g2_normalized(p, tau_max=20.0, n_tau=4096)
    coarse = g2_normalized(p, tau_max=20.0, n_tau=6)
    assert coarse.tau_grid == pytest.approx(np.linspace(0, 20.0, 6), rel=1e-12)
    assert coarse.g2 == pytest.approx(fine.g2[::819], abs=1e-10)
