import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import g2gas.sweep as sweep
from g2gas.correlation import g2_zero
from g2gas.medium import MediumParams, OpenRates
from g2gas.specfun import ConvergenceError
from g2gas.sweep import CapExceededError, SweepSpec, cache_lookup, run_sweep


def _small_map(**kw):
    return SweepSpec.build("g2_zero", {"delta": [-0.5, 0.0, 0.5], "od": [0.0, 2.0, 5.0, 6.0]},
                           MediumParams(beta=1e-2), **kw)


def test_single_cell_at_zero_depth_is_one():
    r = run_sweep(SweepSpec.build("g2_zero", {"od": [0.0]}), use_cache=False)
    assert r.values[0, 0] == 1.0 and r.all_converged


def test_batched_lines_match_cellwise_evaluation():
    spec = _small_map()
    r = run_sweep(spec, use_cache=False)
    for i in range(spec.n_cells):
        assert r.values[i, 0] == pytest.approx(g2_zero(spec.cell_params(i)), rel=1e-10)


def test_grid_layout_follows_axis_order():
    spec = _small_map()
    g = run_sweep(spec, use_cache=False).grid()
    assert g.shape == (3, 4)
    assert np.all(g[:, 0] == 1.0)
    assert g[0, 2] == pytest.approx(g[2, 2], rel=1e-9)


@pytest.mark.parametrize("jobs", [2, 3, 8])
def test_output_independent_of_jobs(jobs):
    spec = _small_map()
    a = run_sweep(spec, jobs=1, use_cache=False)
    b = run_sweep(spec, jobs=jobs, use_cache=False)
    assert a.to_bytes() == b.to_bytes() and a == b


def test_wall_time_not_in_identity():
    r = run_sweep(_small_map(), use_cache=False)
    other = sweep.SweepResult(r.spec, r.values, r.converged, r.wall_time + 1.0)
    assert other == r


def test_cache_round_trip_and_hit_skips_work(tmp_path, monkeypatch):
    spec = _small_map()
    first = run_sweep(spec, cache_dir=tmp_path)
    assert (tmp_path / f"{spec.spec_hash()}.g2s").exists()

    def boom(*a, **k):
        raise AssertionError("recomputed on a cache hit")

    monkeypatch.setattr(sweep, "_run_units", boom)
    assert run_sweep(spec, cache_dir=tmp_path) == first


def test_cache_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(sweep.CACHE_ENV, str(tmp_path))
    spec = SweepSpec.build("psi_s_zero", {"od": [1.0]}, MediumParams(gamma_small=0.01))
    run_sweep(spec)
    assert cache_lookup(spec.spec_hash()) is not None


@pytest.mark.parametrize("damage", [lambda b: b[:-3], lambda b: b"junk" + b, lambda b: b""])
def test_corrupt_entry_is_evicted(tmp_path, damage):
    spec = _small_map()
    ref = run_sweep(spec, cache_dir=tmp_path)
    path = tmp_path / f"{spec.spec_hash()}.g2s"
    path.write_bytes(damage(path.read_bytes()))
    assert cache_lookup(spec.spec_hash(), tmp_path) is None
    assert not path.exists()
    assert run_sweep(spec, cache_dir=tmp_path) == ref


def test_engine_version_changes_the_key(tmp_path, monkeypatch):
    spec = _small_map()
    old = spec.spec_hash()
    run_sweep(spec, cache_dir=tmp_path)
    monkeypatch.setattr(sweep, "ENGINE_VERSION", "9.9.9")
    assert spec.spec_hash() != old
    assert cache_lookup(spec.spec_hash(), tmp_path) is None


def test_hash_depends_on_base_parameters():
    a = _small_map().spec_hash()
    b = SweepSpec.build("g2_zero", {"delta": [-0.5, 0.0, 0.5], "od": [0.0, 2.0, 5.0, 6.0]},
                        MediumParams(beta=2e-2)).spec_hash()
    assert a != b


def test_spec_json_round_trip_with_open_rates():
    spec = SweepSpec.build("psi_s_zero", {"od": [1.0, 2.0]},
                           MediumParams(open_rates=OpenRates(0.1, 1.1, 0.9)))
    assert SweepSpec.from_json(spec.to_json()) == spec


def test_cap_enforced():
    spec = SweepSpec.build("g2_zero", {"od": range(10), "delta": range(10)}, cap=99)
    with pytest.raises(CapExceededError):
        run_sweep(spec, use_cache=False)


@pytest.mark.parametrize("kwargs", [dict(quantity="nope"), dict(axes={"gamma": [1.0]}), dict(axes={"od": []}),
                                    dict(quantity="g2_tau")])
def test_spec_validation(kwargs):
    quantity = kwargs.get("quantity", "g2_zero")
    axes = kwargs.get("axes", {"od": [1.0]})
    with pytest.raises(ValueError):
        SweepSpec.build(quantity, axes)


def test_failed_cells_are_flagged_not_fatal(monkeypatch):
    real = sweep._cell_value

    def flaky(spec, p):
        if p.od == 2.0:
            raise ConvergenceError("forced")
        return real(spec, p)

    monkeypatch.setattr(sweep, "_cell_value", flaky)
    r = run_sweep(SweepSpec.build("psi_b_zero", {"od": [1.0, 2.0, 3.0]}), use_cache=False)
    assert list(r.converged) == [True, False, True]
    assert np.isnan(r.values[1]).all() and np.isfinite(r.values[[0, 2]]).all()
    assert not r.all_converged


def test_od_a_sweep_against_oracle():
    spec = SweepSpec.build("od_a", {"kv0": [0.0, 1.0, 10.0]}, MediumParams(beta=1e-2))
    r = run_sweep(spec, use_cache=False)
    for i, kv0 in enumerate([0.0, 1.0, 10.0]):
        od = r.values[i, 0]
        assert 1e-2 * abs(oracles.psi_b_zero(od, 0.0, kv0)) == pytest.approx(np.exp(-od), rel=1e-7)


def test_g2_tau_sweep_starts_at_zero_delay_value():
    p = MediumParams(beta=1e-2, od=3.0)
    r = run_sweep(SweepSpec.build("g2_tau", {"od": [3.0]}, p, tau=(0.0, 1.0)), use_cache=False)
    assert r.values[0, 0] == pytest.approx(g2_zero(p), rel=1e-3)


def test_csv_layout():
    text = run_sweep(SweepSpec.build("psi_b_zero", {"od": [0.0, 1.0]}), use_cache=False).to_csv()
    lines = text.splitlines()
    assert lines[0] == "od,psi_b_zero_re,psi_b_zero_im,converged"
    assert lines[1] == "0.0,0.0,0.0,1"


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.0, 8.0), min_size=1, max_size=5), st.integers(1, 4))
def test_determinism_property(ods, jobs):
    spec = SweepSpec.build("g2_zero", {"od": ods}, MediumParams(beta=1e-2, delta=0.3))
    assert run_sweep(spec, jobs=jobs, use_cache=False) == run_sweep(spec, jobs=1, use_cache=False)
