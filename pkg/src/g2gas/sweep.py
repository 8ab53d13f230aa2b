"""Deterministic parallel parameter sweeps with an on-disk cache."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .correlation import g2_normalized, g2_zero, g2_zero_row
from .medium import MediumParams, OpenRates
from .solver import solve_od_a_resonant
from .specfun import ConvergenceError
from .spectra import psi_b_zero, psi_s_zero

ENGINE_VERSION = "1.0.0"
AXIS_NAMES = ("od", "delta", "kv0", "beta", "gamma_small")
QUANTITIES = ("g2_zero", "psi_b_zero", "psi_s_zero", "od_a", "g2_tau")
CACHE_ENV = "G2GAS_CACHE_DIR"
_MAGIC = b"G2SWEEP\n"


class CapExceededError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """Grid over named ``MediumParams`` fields; cells are ordered lexicographically over ``axes``."""

    quantity: str
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]
    base: MediumParams = MediumParams()
    tau: Tuple[float, ...] = ()
    cap: int = 1_000_000

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        axes = tuple((str(n), tuple(float(v) for v in vals)) for n, vals in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        names = [n for n, _ in axes]
        if not axes:
            raise ValueError("at least one axis is required")
        if len(set(names)) != len(names):
            raise ValueError("axis names must be unique")
        for n, vals in axes:
            if n not in AXIS_NAMES:
                raise ValueError(f"unknown axis {n!r}")
            if not vals:
                raise ValueError(f"axis {n!r} is empty")
        if self.quantity == "g2_tau" and not self.tau:
            raise ValueError("g2_tau needs a tau grid")

    @classmethod
    def build(cls, quantity: str, axes: Dict[str, Sequence[float]], base: MediumParams = MediumParams(),
              **kw) -> "SweepSpec":
        return cls(quantity, tuple((k, tuple(v)) for k, v in axes.items()), base, **kw)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(v) for _, v in self.axes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def width(self) -> int:
        return {"psi_b_zero": 2, "g2_tau": len(self.tau)}.get(self.quantity, 1)

    def to_json(self) -> str:
        base = dataclasses.asdict(self.base)
        doc = {"quantity": self.quantity, "axes": [[n, list(v)] for n, v in self.axes],
               "base": base, "tau": list(self.tau)}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SweepSpec":
        doc = json.loads(text)
        base = dict(doc["base"])
        if base.get("open_rates") is not None:
            base["open_rates"] = OpenRates(**base["open_rates"])
        return cls(doc["quantity"], tuple((n, tuple(v)) for n, v in doc["axes"]),
                   MediumParams(**base), tuple(doc["tau"]))

    def spec_hash(self) -> str:
        return hashlib.sha256((ENGINE_VERSION + "\n" + self.to_json()).encode()).hexdigest()

    def cell_params(self, index: int) -> MediumParams:
        idx = np.unravel_index(index, self.shape)
        return self.base.with_(**{n: vals[i] for (n, vals), i in zip(self.axes, idx)})

    def column_names(self):
        if self.quantity == "psi_b_zero":
            return ["psi_b_zero_re", "psi_b_zero_im"]
        if self.quantity == "g2_tau":
            return [f"g2_tau_{j}" for j in range(len(self.tau))]
        return [self.quantity]


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    values: np.ndarray = field(repr=False)
    """Row-major (n_cells, width) float64; NaN where a cell failed."""
    converged: np.ndarray = field(repr=False)
    wall_time: np.ndarray = field(repr=False, compare=False)
    """Seconds per cell; diagnostic only, excluded from bytes and equality."""

    @property
    def spec_hash(self) -> str:
        return self.spec.spec_hash()

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def grid(self, column: int = 0) -> np.ndarray:
        return self.values[:, column].reshape(self.spec.shape)

    def to_bytes(self) -> bytes:
        header = json.dumps({"engine": ENGINE_VERSION, "hash": self.spec_hash,
                             "spec": self.spec.to_json(), "n_cells": self.spec.n_cells,
                             "width": self.spec.width}, sort_keys=True)
        return (_MAGIC + header.encode() + b"\n"
                + np.ascontiguousarray(self.values, "<f8").tobytes()
                + np.ascontiguousarray(self.converged, "u1").tobytes())

    def __eq__(self, other):
        return isinstance(other, SweepResult) and self.to_bytes() == other.to_bytes()

    __hash__ = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = [n for n, _ in self.spec.axes]
        w.writerow(names + self.spec.column_names() + ["converged"])
        for i, idx in enumerate(np.ndindex(*self.spec.shape)):
            row = [repr(vals[j]) for (_, vals), j in zip(self.spec.axes, idx)]
            row += [repr(float(v)) for v in self.values[i]]
            row.append(int(self.converged[i]))
            w.writerow(row)
        return buf.getvalue()


def _read_entry(path: Path, expected_hash: str) -> Optional[SweepResult]:
    data = path.read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError("bad magic")
    end = data.index(b"\n", len(_MAGIC))
    header = json.loads(data[len(_MAGIC):end])
    if header["engine"] != ENGINE_VERSION or header["hash"] != expected_hash:
        raise ValueError("header mismatch")
    spec = SweepSpec.from_json(header["spec"])
    if spec.spec_hash() != expected_hash:
        raise ValueError("spec echo does not hash to the file name")
    n, w = header["n_cells"], header["width"]
    payload = data[end + 1:]
    if len(payload) != n * w * 8 + n:
        raise ValueError("truncated payload")
    vals = np.frombuffer(payload[: n * w * 8], "<f8").reshape(n, w).copy()
    ok = np.frombuffer(payload[n * w * 8:], "u1").astype(bool)
    return SweepResult(spec, vals, ok, np.zeros(n))


def resolve_cache_dir(cache_dir=None) -> Optional[Path]:
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    return Path(cache_dir) if cache_dir else None


def cache_lookup(spec_hash: str, cache_dir=None) -> Optional[SweepResult]:
    root = resolve_cache_dir(cache_dir)
    if root is None:
        return None
    path = root / f"{spec_hash}.g2s"
    if not path.exists():
        return None
    try:
        return _read_entry(path, spec_hash)
    except OSError as exc:
        raise OSError(f"cannot read cache entry {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError, json.JSONDecodeError):
        path.unlink(missing_ok=True)
        return None


def cache_store(result: SweepResult, cache_dir=None) -> Optional[Path]:
    root = resolve_cache_dir(cache_dir)
    if root is None:
        return None
    try:
        root.mkdir(parents=True, exist_ok=True)
        path = root / f"{result.spec_hash}.g2s"
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_bytes(result.to_bytes())
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write cache entry in {root}: {exc}") from exc
    return path


# -- evaluation ----------------------------------------------------------------

_FAILURES = (ConvergenceError, ValueError, FloatingPointError, ZeroDivisionError)


def _cell_value(spec: SweepSpec, p: MediumParams) -> np.ndarray:
    q = spec.quantity
    if q == "g2_zero":
        return np.array([g2_zero(p)])
    if q == "psi_b_zero":
        v = psi_b_zero(p)
        return np.array([v.real, v.imag])
    if q == "psi_s_zero":
        return np.array([psi_s_zero(p)])
    if q == "od_a":
        a = solve_od_a_resonant(p)
        return np.array([a.od_a if a.converged else np.nan])
    res = g2_normalized(p, tau_max=max(spec.tau) if max(spec.tau) > 0 else None)
    return np.interp(spec.tau, res.tau_grid, res.g2)


def _units(spec: SweepSpec):
    """Work units as lists of flat cell indices; OD lines are batched for g2_zero."""
    names = [n for n, _ in spec.axes]
    if spec.quantity != "g2_zero" or "od" not in names:
        return [[i] for i in range(spec.n_cells)]
    ax = names.index("od")
    flat = np.arange(spec.n_cells).reshape(spec.shape)
    lines = np.moveaxis(flat, ax, -1).reshape(-1, spec.shape[ax])
    return [list(map(int, line)) for line in lines]


def _run_units(spec: SweepSpec, units):
    out = []
    for unit in units:
        t0 = time.perf_counter()
        if len(unit) > 1:
            p = spec.cell_params(unit[0])
            ods = [spec.cell_params(i).od for i in unit]
            vals, ok = g2_zero_row(p, ods)
            dt = (time.perf_counter() - t0) / len(unit)
            out.extend((i, np.array([v]), bool(k), dt) for i, v, k in zip(unit, vals, ok))
            continue
        i = unit[0]
        try:
            v = _cell_value(spec, spec.cell_params(i))
            ok = bool(np.all(np.isfinite(v)))
        except _FAILURES:
            v, ok = np.full(spec.width, np.nan), False
        out.append((i, v, ok, time.perf_counter() - t0))
    return out


def run_sweep(spec: SweepSpec, jobs: int = 1, cache_dir=None, use_cache: bool = True) -> SweepResult:
    """Evaluate every cell; output is independent of ``jobs`` bit for bit."""
    if spec.n_cells > spec.cap:
        raise CapExceededError(f"{spec.n_cells} cells exceed the cap of {spec.cap}")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    h = spec.spec_hash()
    if use_cache:
        hit = cache_lookup(h, cache_dir)
        if hit is not None:
            return hit
    units = _units(spec)
    blocks = [list(b) for b in np.array_split(np.arange(len(units)), min(jobs, len(units)))]
    blocks = [[units[k] for k in b] for b in blocks if len(b)]
    if jobs == 1 or len(blocks) == 1:
        parts = [_run_units(spec, b) for b in blocks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=len(blocks)) as ex:
            parts = list(ex.map(_run_units, itertools.repeat(spec), blocks))
    vals = np.full((spec.n_cells, spec.width), np.nan)
    ok = np.zeros(spec.n_cells, bool)
    times = np.zeros(spec.n_cells)
    for part in parts:
        for i, v, k, dt in part:
            vals[i] = v
            ok[i] = k
            times[i] = dt
    result = SweepResult(spec, vals, ok, times)
    if use_cache:
        cache_store(result, cache_dir)
    return result
