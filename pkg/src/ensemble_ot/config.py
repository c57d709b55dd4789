"""JSON run configurations: parsing and validation before any solver runs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import EnsembleOTError
from .lti_systems import LinearSystem, PiecewiseConstant
from .measures import DiscreteMeasure, GaussianMeasure, Grid

COMMANDS = ("gramian", "min-energy", "wasserstein", "track", "track-gaussian", "observability", "ctrl-measure")
COMMON_KEYS = {"command", "out_dir", "seed", "steps_per_unit"}
COMMAND_KEYS = {
    "gramian": {"system", "t0", "t1"},
    "min-energy": {"system", "x0", "x1", "t0", "t1"},
    "wasserstein": {"source", "target", "p"},
    "track": {"system", "outputs", "grid", "mode", "samples_per_interval", "lp_method"},
    "track-gaussian": {"system", "outputs", "samples_per_interval"},
    "observability": {"system", "A", "C", "points", "time_grid"},
    "ctrl-measure": {"field", "region", "mu0", "mu1", "t_max", "steps", "pairing"},
}


class ConfigError(ValueError):
    """Malformed or dimension-inconsistent configuration (exit status 2)."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    raw: dict
    base_dir: Path
    out_dir: Path
    seed: int = 0
    steps_per_unit: Optional[int] = None
    extras: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.raw.get(key, default)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def parse_array(value, name, ndim=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric array ({exc})") from None
    if ndim is not None:
        if ndim == 2 and arr.ndim == 1:
            arr = arr[None, :]
        if ndim == 2 and arr.ndim == 0:
            arr = arr.reshape(1, 1)
        _require(arr.ndim == ndim, f"{name}: expected {ndim}-D array, got shape {arr.shape}")
    _require(np.all(np.isfinite(arr)), f"{name}: entries must be finite")
    return arr


def _matrix_spec(value, name):
    if isinstance(value, dict):
        unknown = set(value) - {"times", "values"}
        _require(not unknown, f"{name}: unknown keys {sorted(unknown)}")
        _require("times" in value and "values" in value, f"{name}: table needs 'times' and 'values'")
        times = parse_array(value["times"], f"{name}.times", 1)
        vals = parse_array(value["values"], f"{name}.values")
        if vals.ndim == 2:
            vals = vals[:, None, :]
        _require(vals.ndim == 3 and len(vals) == len(times), f"{name}: one matrix per breakpoint time")
        _require(np.all(np.diff(times) > 0), f"{name}.times must be strictly increasing")
        return PiecewiseConstant(times, vals)
    return parse_array(value, name, 2)


def parse_system(spec, steps_per_unit=None) -> LinearSystem:
    _require(isinstance(spec, dict), "system must be an object with A, B and optional C")
    unknown = set(spec) - {"A", "B", "C"}
    _require(not unknown, f"system: unknown keys {sorted(unknown)}")
    _require("A" in spec and "B" in spec, "system needs A and B")
    A = _matrix_spec(spec["A"], "system.A")
    B = _matrix_spec(spec["B"], "system.B")
    C = _matrix_spec(spec["C"], "system.C") if "C" in spec else None
    kwargs = {"steps_per_unit": int(steps_per_unit)} if steps_per_unit else {}
    try:
        return LinearSystem(A, B, C, **kwargs)
    except (EnsembleOTError, ValueError) as exc:
        raise ConfigError(f"system: {exc}") from None


def parse_measure(spec, name, base_dir: Path):
    """Inline atoms, a CSV file, or an inline Gaussian."""
    from .csvio import read_measure

    _require(isinstance(spec, dict), f"{name}: measure must be an object")
    keys = set(spec)
    try:
        if keys == {"csv"}:
            return read_measure(base_dir / spec["csv"])
        if keys <= {"atoms", "weights"} and "atoms" in keys:
            atoms = parse_array(spec["atoms"], f"{name}.atoms")
            if atoms.ndim == 1:
                atoms = atoms[:, None]
            weights = spec.get("weights")
            if weights is None:
                return DiscreteMeasure.uniform(atoms)
            return DiscreteMeasure.from_unnormalized(atoms, parse_array(weights, f"{name}.weights", 1))
        if keys == {"mean", "cov"}:
            mean = parse_array(spec["mean"], f"{name}.mean")
            mean = np.atleast_1d(mean)
            return GaussianMeasure(mean, parse_array(spec["cov"], f"{name}.cov", 2))
    except (OSError, EnsembleOTError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    raise ConfigError(f"{name}: expected {{'csv'}}, {{'atoms', 'weights'}} or {{'mean', 'cov'}}, got {sorted(keys)}")


def parse_grid(spec, n: int, seed: int = 0) -> Grid:
    _require(isinstance(spec, dict), "grid must be an object")
    unknown = set(spec) - {"min", "max", "nodes", "jitter"}
    _require(not unknown, f"grid: unknown keys {sorted(unknown)}")
    lo = np.atleast_1d(parse_array(spec.get("min"), "grid.min"))
    hi = np.atleast_1d(parse_array(spec.get("max"), "grid.max"))
    nodes = np.broadcast_to(np.atleast_1d(np.asarray(spec.get("nodes", 41), dtype=int)), lo.shape)
    _require(lo.size == n and hi.size == n, f"grid has {lo.size} axes, state dimension is {n}")
    _require(np.all(hi > lo) and np.all(nodes >= 1), "grid needs max > min and nodes >= 1")
    grid = Grid.uniform(lo, hi, nodes)
    jitter = float(spec.get("jitter", 0.0))
    if jitter:
        rng = np.random.default_rng(seed)
        axes = []
        for a in grid.axes:
            if a.size > 2:
                step = a[1] - a[0]
                a = a.copy()
                a[1:-1] += jitter * step * (rng.random(a.size - 2) - 0.5)
            axes.append(a)
        grid = Grid(tuple(axes))
    return grid


def load_config(path, out_dir=None, command=None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return build_config(raw, path.parent, out_dir, command)


def build_config(raw: Any, base_dir=Path("."), out_dir=None, command=None) -> RunConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    cmd = raw.get("command", command)
    _require(cmd in COMMANDS, f"command must be one of {COMMANDS}, got {cmd!r}")
    _require(command is None or cmd == command, f"config is for {cmd!r}, not {command!r}")
    unknown = set(raw) - COMMON_KEYS - COMMAND_KEYS[cmd]
    _require(not unknown, f"unknown keys for {cmd}: {sorted(unknown)}")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2 ** 64, "seed must be a 64-bit nonnegative integer")
    spu = raw.get("steps_per_unit")
    _require(spu is None or (isinstance(spu, int) and spu >= 1), "steps_per_unit must be a positive integer")
    base_dir = Path(base_dir)
    target = Path(out_dir) if out_dir else base_dir / raw.get("out_dir", "out")
    return RunConfig(cmd, raw, base_dir, target, seed, spu)
