"""Command-line driver: figure CSVs, single evaluations and a self-test.

Exit codes: 0 success, 1 configuration error, 2 some cells did not converge,
3 self-test failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import atomic_steady, correlation, medium, solver, spectra, sweep
from .medium import MediumParams, OpenRates
from .specfun import ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_SELFTEST = 0, 1, 2, 3
CSV_SCHEMA_VERSION = 1

FLOAT_KEYS = ("delta", "kv0", "beta", "od", "gamma", "gamma1", "gamma2", "gamma12", "gamma21",
              "flux", "varpi", "od_min", "od_max", "delta_min", "delta_max", "kv0_max",
              "tau_max", "tol")
INT_KEYS = ("od_n", "delta_n", "kv0_n", "n_tau", "jobs")
LIST_KEYS = ("kv0_values", "beta_values")
STR_KEYS = ("absorption", "out", "cache_dir")
BOOL_KEYS = ("clamp", "asymptotic", "quick")
ALL_KEYS = FLOAT_KEYS + INT_KEYS + LIST_KEYS + STR_KEYS + BOOL_KEYS

FIGURES = ("fig3", "fig4", "fig5a", "fig5b", "fig6", "fig7", "fig8", "fig9b")
EVAL_QUANTITIES = ("alpha", "psi_b_zero", "psi_s_zero", "g2_zero", "od_a", "g2_floor", "saturation")

FIGURE_DEFAULTS: Dict[str, Dict[str, object]] = {
    "fig3": dict(od_min=0.0, od_max=10.0, od_n=101, kv0_values=(0.0, 1.0, 10.0), gamma=0.01),
    "fig4": dict(kv0_max=20.0, kv0_n=41),
    "fig5a": dict(beta=1e-2, kv0=0.0, od_min=0.0, od_max=10.0, od_n=200,
                  delta_min=-1.5, delta_max=1.5, delta_n=200, clamp=True),
    "fig5b": dict(beta=1e-2, kv0=10.0, od_min=0.0, od_max=15.0, od_n=200,
                  delta_min=-15.0, delta_max=15.0, delta_n=200, clamp=True),
    "fig6": dict(kv0_max=20.0, kv0_n=41, beta_values=(1e-2, 1e-3, 1e-4)),
    "fig7": dict(beta=1e-2, kv0_values=(0.0, 1.0, 10.0), tau_max=20.0, n_tau=4096),
    "fig8": dict(kv0_max=20.0, kv0_n=21, beta_values=(1e-2, 1e-3), gamma=1e-3),
    "fig9b": dict(beta=0.007, kv0=0.0, od_min=0.0, od_max=7.0, od_n=100,
                  delta_min=-1.0, delta_max=1.0, delta_n=100, clamp=True),
}


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------

def _convert(key: str, raw, where: str):
    try:
        if key in FLOAT_KEYS:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if key in INT_KEYS:
            return int(raw)
        if key in LIST_KEYS:
            if isinstance(raw, (list, tuple)):
                return tuple(float(x) for x in raw)
            return tuple(float(x) for x in str(raw).replace(",", " ").split())
        if key in BOOL_KEYS:
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {raw!r} for {key!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, object]:
    out: Dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{n}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        out[key] = _convert(key, value, where)
    return out


@dataclass
class RunConfig:
    values: Dict[str, object] = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def medium(self) -> MediumParams:
        v = self.values
        rate_keys = ("gamma1", "gamma2", "gamma12")
        try:
            rates = None
            if any(k in v for k in rate_keys):
                missing = [k for k in rate_keys if k not in v]
                if missing:
                    raise ConfigError(f"open rates need all of gamma1, gamma2, gamma12 (missing {missing})")
                rates = OpenRates(v["gamma1"], v["gamma2"], v["gamma12"], v.get("gamma21", 1.0))
            return MediumParams(delta=v.get("delta", 0.0), kv0=v.get("kv0", 0.0),
                                beta=v.get("beta", 1e-2), od=v.get("od", 1.0),
                                gamma_small=v.get("gamma", 0.0), open_rates=rates,
                                absorption=v.get("absorption"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid parameters: {exc}") from None


def build_config(args, figure: Optional[str] = None) -> RunConfig:
    values: Dict[str, object] = {}
    if figure:
        values.update(FIGURE_DEFAULTS[figure])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        values.update(parse_config_text(text, args.config))
    for key in ALL_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _convert(key, flag, f"--{key.replace('_', '-')}")
    return RunConfig(values)


# -- output ----------------------------------------------------------------------

def fmt(x) -> str:
    return repr(float(x))


def write_csv(header: Sequence[str], rows, out: Optional[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _label(x: float) -> str:
    return f"{x:g}"


# -- figures -----------------------------------------------------------------------

def _grid(cfg: RunConfig, name: str):
    return np.linspace(cfg.get(f"{name}_min"), cfg.get(f"{name}_max"), cfg.get(f"{name}_n"))


def _kv0_axis(cfg: RunConfig):
    return np.linspace(0.0, cfg.get("kv0_max"), cfg.get("kv0_n"))


def _sweep(cfg: RunConfig, quantity, axes, base, **kw):
    spec = sweep.SweepSpec.build(quantity, axes, base, **kw)
    return sweep.run_sweep(spec, jobs=cfg.get("jobs", 1), cache_dir=cfg.get("cache_dir"))


def fig3(cfg: RunConfig):
    """psi_b(0) and psi_s(0)/(2 gamma) against OD at resonance."""
    base = cfg.medium().with_(delta=0.0)
    ods = _grid(cfg, "od")
    kvs = cfg.get("kv0_values")
    gamma = base.gamma_small
    if gamma <= 0:
        raise ConfigError("fig3 needs gamma > 0")
    rb = _sweep(cfg, "psi_b_zero", {"kv0": kvs, "od": ods}, base)
    rs = _sweep(cfg, "psi_s_zero", {"kv0": kvs, "od": ods}, base)
    header = ["od"]
    for k in kvs:
        header += [f"psi_b_zero_kv0_{_label(k)}", f"psi_s_zero_per_2gamma_kv0_{_label(k)}"]
    b, s = rb.grid(0), rs.grid(0)
    rows = [[ods[i]] + [v for j in range(len(kvs)) for v in (b[j, i], s[j, i] / (2 * gamma))]
            for i in range(len(ods))]
    return header, rows, rb.all_converged and rs.all_converged


def _tau_half(p: MediumParams) -> float:
    f0 = abs(spectra.psi_b_low_od_tau(p, 0.0))
    f = lambda t: abs(spectra.psi_b_low_od_tau(p, t)) - 0.5 * f0
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
    return optimize.brentq(f, 0.0, hi, xtol=1e-12)


def fig4(cfg: RunConfig):
    """Low-OD psi_0(0) per unit alpha0 L and the inverse temporal half-width."""
    ok = True
    rows = []
    for k in _kv0_axis(cfg):
        p = MediumParams(kv0=float(k), od=1.0)
        try:
            a0L = medium.alpha0_from_od(p)
            v = spectra.psi_b_low_od_tau(p, 0.0) / a0L
            rows.append([k, float(np.real(v)), 1.0 / _tau_half(p)])
        except (ConvergenceError, ValueError):
            rows.append([k, float("nan"), float("nan")])
            ok = False
    return ["kv0", "psi0_zero_per_alpha0L", "inv_tau_half"], rows, ok


def _map(cfg: RunConfig):
    base = cfg.medium()
    ods, deltas = _grid(cfg, "od"), _grid(cfg, "delta")
    r = _sweep(cfg, "g2_zero", {"od": ods, "delta": deltas}, base)
    g = r.grid(0)
    if cfg.get("clamp", True):
        g = np.minimum(g, 2.0)
    conv = r.converged.reshape(r.spec.shape)
    rows = [[ods[i], deltas[j], g[i, j], int(conv[i, j])]
            for i in range(len(ods)) for j in range(len(deltas))]
    return ["od", "delta", "g2_zero", "converged"], rows, r.all_converged


def fig6(cfg: RunConfig):
    kvs = _kv0_axis(cfg)
    betas = cfg.get("beta_values")
    r = _sweep(cfg, "od_a", {"beta": betas, "kv0": kvs}, MediumParams())
    g = r.grid(0)
    header = ["kv0"] + [f"od_a_beta_{_label(b)}" for b in betas]
    rows = [[k] + [g[j, i] for j in range(len(betas))] for i, k in enumerate(kvs)]
    return header, rows, r.all_converged


def fig7(cfg: RunConfig):
    """g2 against tau * HWHM at the resonant antibunching OD."""
    kvs = cfg.get("kv0_values")
    x = np.linspace(0.0, cfg.get("tau_max"), cfg.get("n_tau"))
    cols, ok = [], True
    for k in kvs:
        p = MediumParams(beta=cfg.get("beta", 1e-2), kv0=float(k))
        try:
            od_a = solver.solve_od_a_resonant(p)
            hw = medium.voigt_hwhm(p)
            res = correlation.g2_normalized(p.with_(od=od_a.od_a), tau_max=x[-1] / hw, n_tau=x.size)
            cols.append(res.g2)
            ok = ok and od_a.converged and res.tail_ok
        except (ConvergenceError, ValueError):
            cols.append(np.full(x.size, np.nan))
            ok = False
    header = ["tau_times_hwhm"] + [f"g2_kv0_{_label(k)}" for k in kvs]
    rows = [[x[i]] + [c[i] for c in cols] for i in range(x.size)]
    return header, rows, ok


def fig8(cfg: RunConfig):
    gamma = cfg.get("gamma")
    betas = cfg.get("beta_values")
    ok = True
    rows = []
    for k in _kv0_axis(cfg):
        row = [k]
        for b in betas:
            try:
                row.append(solver.g2_floor_open(MediumParams(beta=b, kv0=float(k), gamma_small=gamma)) / gamma)
            except (ConvergenceError, ValueError):
                row.append(float("nan"))
                ok = False
        rows.append(row)
    return ["kv0"] + [f"g2_floor_per_gamma_beta_{_label(b)}" for b in betas], rows, ok


FIGURE_FUNCS: Dict[str, Callable] = {"fig3": fig3, "fig4": fig4, "fig5a": _map, "fig5b": _map,
                                     "fig6": fig6, "fig7": fig7, "fig8": fig8, "fig9b": _map}


def cmd_figure(args) -> int:
    cfg = build_config(args, args.name)
    header, rows, ok = FIGURE_FUNCS[args.name](cfg)
    write_csv(header, rows, cfg.get("out"))
    return EXIT_OK if ok else EXIT_PARTIAL


# -- eval ---------------------------------------------------------------------------

def evaluate(quantity: str, cfg: RunConfig) -> Dict[str, float]:
    p = cfg.medium()
    tol = cfg.get("tol", 1e-10)
    if quantity == "alpha":
        a = complex(medium.alpha(p, cfg.get("varpi", 0.0)))
        return {"alpha_re": a.real, "alpha_im": a.imag}
    if quantity == "psi_b_zero":
        v = spectra.psi_b_zero(p, tol)
        return {"psi_b_zero_re": v.real, "psi_b_zero_im": v.imag}
    if quantity == "psi_s_zero":
        return {"psi_s_zero": spectra.psi_s_zero(p, tol)}
    if quantity == "g2_zero":
        return {"g2_zero": correlation.g2_zero(p, tol)}
    if quantity == "od_a":
        if cfg.get("asymptotic"):
            return {"od_a": solver.solve_od_a_asymptotic(p).od_a}
        return {"od_a": solver.solve_od_a_resonant(p).od_a}
    if quantity == "g2_floor":
        return {"g2_floor": solver.g2_floor_open(p, asymptotic=bool(cfg.get("asymptotic")))}
    if "flux" not in cfg.values:
        raise ConfigError("saturation needs --flux")
    return {"S": atomic_steady.saturation(p, cfg.get("flux"))}


def cmd_eval(args) -> int:
    cfg = build_config(args)
    try:
        values = evaluate(args.quantity, cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    for k, v in values.items():
        print(f"{k}={v:.12g}")
    return EXIT_OK


# -- selftest ------------------------------------------------------------------------

def _quad_oracle(fn, a=0.0, b=np.inf):
    re = integrate.quad(lambda x: float(np.real(fn(x))), a, b, limit=500, epsabs=1e-13, epsrel=1e-11)[0]
    im = integrate.quad(lambda x: float(np.imag(fn(x))), a, b, limit=500, epsabs=1e-13, epsrel=1e-11)[0]
    return complex(re, im)


def _selftest_checks(tol: float, quick: bool):
    def psi_b_quad():
        p = MediumParams(od=2.0, kv0=1.0, delta=0.3)
        ref = _quad_oracle(lambda w: spectra.psi_b_at(p, w)) / math.pi
        return abs(spectra.psi_b_zero(p, tol) - ref) <= 1e-7 * abs(ref)

    def psi_s_quad():
        p = MediumParams(od=2.0, gamma_small=0.01)
        ref = _quad_oracle(lambda w: spectra.psi_s_at(p, w)[0],
                           -np.inf, np.inf).real / (2 * math.pi)
        return abs(spectra.psi_s_zero(p, tol) - ref) <= 1e-7 * abs(ref)

    def hwhm():
        return abs(medium.voigt_hwhm(MediumParams()) - 0.5) < 1e-9

    def shape_parity():
        nu = np.linspace(-5, 5, 41)
        s = medium.absorption_shape(nu, 2.0)
        return np.allclose(s[::-1], np.conj(s), rtol=0, atol=1e-14)

    def decomposition():
        p = MediumParams(od=2.0, kv0=1.0)
        g = np.linspace(-20, 20, 512)
        d, l = spectra.psi_b_decomposed(p, g)
        ref = spectra.psi_b_spectrum(p, g).values
        return np.max(np.abs(d.values + l.values - ref)) < 1e-7 * np.max(np.abs(ref))

    def low_od():
        p = MediumParams(od=1e-3)
        tau = np.linspace(0, 10, 50)
        f = spectra.inverse_fourier(spectra.psi_b_spectrum(p, spectra.tau_spectrum_grid(40.0)))
        ref = spectra.psi_b_low_od_tau(p, tau)
        got = f.at(tau)
        return np.max(np.abs(got - ref) / np.abs(ref)) < 5e-3

    def od_a():
        a = solver.solve_od_a_resonant(MediumParams(beta=1e-2))
        return a.converged and abs(a.od_a - 5.88) < 0.02

    def branches():
        a, b = solver.solve_detuned_branch(1e-2, 1), solver.solve_detuned_branch(1e-2, 2)
        return a.converged and b.converged and a.od_a < b.od_a and a.delta_a < b.delta_a

    def parity():
        p = MediumParams(od=4.0, delta=0.7, kv0=1.0)
        return abs(correlation.g2_zero(p, tol) - correlation.g2_zero(p.with_(delta=-0.7), tol)) < 1e-10

    def phi0():
        p = MediumParams(od=3.0, gamma_small=0.01)
        pb, ps = spectra.psi_b_zero(p, tol), spectra.psi_s_zero(p, tol)
        g = lambda s: (correlation.g2_b(p, pb, s) + correlation.g2_s(p, ps, ps, s)) / correlation.g1_zero(p, ps, s) ** 2
        return abs(g(1.0) - g(7.5)) <= 1e-13 * abs(g(1.0))

    def zeros():
        p = MediumParams(gamma_small=0.01)
        d = atomic_steady.diffusion_matrix(atomic_steady.steady_state(p, 1.0), p)
        return all(d.values[i, j] == 0 for i, j in atomic_steady.STRUCTURAL_ZEROS)

    def determinism():
        spec = sweep.SweepSpec.build("g2_zero", {"od": np.linspace(0, 8, 6), "delta": [-0.5, 0.0, 0.5]},
                                     MediumParams())
        a = sweep.run_sweep(spec, jobs=1, use_cache=False)
        b = sweep.run_sweep(spec, jobs=2, use_cache=False)
        return a.to_bytes() == b.to_bytes()

    checks = [
        ("quadrature.psi_b_zero_convergence", psi_b_quad),
        ("quadrature.psi_s_zero_convergence", psi_s_quad),
        ("medium.voigt_hwhm_lorentz", hwhm),
        ("medium.shape_parity", shape_parity),
        ("solver.od_a_resonant", od_a),
        ("correlation.delta_parity", parity),
        ("correlation.phi0_independence", phi0),
        ("atomic_steady.structural_zeros", zeros),
    ]
    if not quick:
        checks += [
            ("spectra.decomposition_identity", decomposition),
            ("spectra.low_od_limit", low_od),
            ("solver.branch_ordering", branches),
            ("sweep.determinism", determinism),
        ]
    return checks


def run_selftest(tol: float = 1e-10, quick: bool = False, stream=sys.stdout) -> List[str]:
    failed = []
    for name, check in _selftest_checks(tol, quick):
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ok = bool(check())
            note = ""
        except Exception as exc:  # a crashing check is a failed check
            ok, note = False, f" ({type(exc).__name__}: {exc})"
        dt = time.perf_counter() - t0
        print(f"{'PASS' if ok else 'FAIL'} {name} {dt:.3f}s{note}", file=stream)
        if not ok:
            failed.append(name)
    return failed


def cmd_selftest(args) -> int:
    cfg = build_config(args)
    failed = run_selftest(cfg.get("tol", 1e-10), bool(cfg.get("quick", False)))
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_SELFTEST
    print("all checks passed")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override it")
    for key in ALL_KEYS:
        flag = "--" + key.replace("_", "-")
        if key in BOOL_KEYS:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=key, default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2gas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    f = sub.add_parser("figure", help="write the data behind one figure as CSV")
    f.add_argument("name", choices=FIGURES)
    _add_common(f)
    f.set_defaults(func=cmd_figure)
    e = sub.add_parser("eval", help="evaluate one quantity")
    e.add_argument("quantity", choices=EVAL_QUANTITIES)
    _add_common(e)
    e.set_defaults(func=cmd_eval)
    s = sub.add_parser("selftest", help="run invariant checks")
    _add_common(s)
    s.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sweep.CapExceededError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
