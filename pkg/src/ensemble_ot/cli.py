"""Command-line front end.

Every pipeline runs from a JSON config; artifacts go to ``out_dir`` as CSV
(plus JSON summaries and an SVG plot for ``track-gaussian``). Exit status is
0 on success, 2 on a configuration error and 3 on a numerical failure; the
two failure kinds also print a one-line JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.stats import multivariate_normal

from . import __version__
from . import csvio
from .config import COMMANDS, ConfigError, RunConfig, build_config, load_config, parse_array, parse_grid, parse_measure, parse_system
from .errors import EnsembleOTError
from .measures import DiscreteMeasure, GaussianMeasure, Grid, grid_discretize

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DOUBLE_INTEGRATOR = {"A": [[0.0, 1.0], [0.0, 0.0]], "B": [[0.0], [1.0]], "C": [[1.0, 0.0]]}
EXAMPLE1_MEANS = [-1.0, 3.0, 5.0, -4.0, -7.0]
EXAMPLE1_VARIANCES = {1: [3.0, 3.0, 3.0, 3.0, 4.0], 2: [6.0, 7.0, 3.0, 2.0, 5.0]}


def example1_config(case: int, out_dir="out") -> dict:
    """Double integrator observed in position at t = 0..4 (scalar Gaussians)."""
    return {
        "command": "track-gaussian",
        "system": DOUBLE_INTEGRATOR,
        "outputs": [{"mean": [m], "cov": [[v]]} for m, v in zip(EXAMPLE1_MEANS, EXAMPLE1_VARIANCES[case])],
        "samples_per_interval": 200,
        "out_dir": str(out_dir),
    }


# ---------------------------------------------------------------------------
# helpers


def _need(cfg: RunConfig, key):
    if key not in cfg.raw:
        raise ConfigError(f"{cfg.command}: missing required key {key!r}")
    return cfg.raw[key]


def _float(cfg: RunConfig, key, default=None):
    value = cfg.raw.get(key, default)
    if value is None:
        raise ConfigError(f"{cfg.command}: missing required key {key!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"{key} must be a finite number")
    return float(value)


def _int(cfg: RunConfig, key, default, lo=1):
    value = cfg.raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}")
    return value


def _vector(value, name, size):
    try:
        v = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be numeric") from None
    if v.ndim != 1 or v.size != size or not np.all(np.isfinite(v)):
        raise ConfigError(f"{name} must be a finite vector of length {size}")
    return v


def _system(cfg: RunConfig):
    return parse_system(_need(cfg, "system"), cfg.steps_per_unit)


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _interval(cfg):
    t0, t1 = _float(cfg, "t0", 0.0), _float(cfg, "t1", 1.0)
    if not t1 > t0:
        raise ConfigError("need t1 > t0")
    return t0, t1


# ---------------------------------------------------------------------------
# subcommands; each returns a JSON-serialisable summary


def run_gramian(cfg: RunConfig) -> dict:
    from .lti_systems import controllability_gramian, observability_gramian

    sys_ = _system(cfg)
    t0, t1 = _interval(cfg)
    W = controllability_gramian(sys_, t1, t0)
    M = observability_gramian(sys_, t0, t1)
    csvio.write_matrix(cfg.out_dir / "W.csv", W)
    csvio.write_matrix(cfg.out_dir / "M.csv", M)
    return {"W": W.tolist(), "M": M.tolist(), "files": ["W.csv", "M.csv"]}


def run_min_energy(cfg: RunConfig) -> dict:
    from .lti_systems import min_energy_control, min_energy_cost

    sys_ = _system(cfg)
    t0, t1 = _interval(cfg)
    x0 = _vector(_need(cfg, "x0"), "x0", sys_.n)
    x1 = _vector(_need(cfg, "x1"), "x1", sys_.n)
    cost = min_energy_cost(sys_, x0, x1, t0, t1)
    traj = min_energy_control(sys_, x0, x1, t0, t1).simulate(x0)
    header = ["t"] + [f"x_{i + 1}" for i in range(sys_.n)] + [f"u_{j + 1}" for j in range(sys_.m)]
    rows = [[float(t)] + list(map(float, x)) + list(map(float, u))
            for t, x, u in zip(traj.times, traj.states, traj.controls)]
    csvio.write_rows(cfg.out_dir / "trajectory.csv", header, rows)
    summary = {
        "cost": cost,
        "simulated_energy": traj.energy,
        "endpoint_error": float(np.linalg.norm(traj.endpoint - x1)),
        "files": ["trajectory.csv", "summary.json"],
    }
    _write_json(cfg.out_dir / "summary.json", summary)
    return summary


def run_wasserstein(cfg: RunConfig) -> dict:
    from scipy.spatial.distance import cdist

    from .transport import solve_kantorovich

    mu = parse_measure(_need(cfg, "source"), "source", cfg.base_dir)
    nu = parse_measure(_need(cfg, "target"), "target", cfg.base_dir)
    if not isinstance(mu, DiscreteMeasure) or not isinstance(nu, DiscreteMeasure):
        raise ConfigError("wasserstein needs discrete source and target measures")
    if mu.dim != nu.dim:
        raise ConfigError(f"source lives in R^{mu.dim}, target in R^{nu.dim}")
    p = _float(cfg, "p", 2.0)
    if p < 1:
        raise ConfigError("p must be >= 1")
    plan, value = solve_kantorovich(mu, nu, cdist(mu.atoms, nu.atoms) ** p)
    csvio.write_plan(cfg.out_dir / "plan.csv", plan.coupling)
    summary = {"p": p, "distance": max(value, 0.0) ** (1.0 / p), "files": ["plan.csv", "summary.json"]}
    _write_json(cfg.out_dir / "summary.json", summary)
    return summary


def _output_measures(cfg: RunConfig, p: int):
    spec = _need(cfg, "outputs")
    if isinstance(spec, dict) and set(spec) == {"csv"}:
        try:
            _, means, covs = csvio.read_timeseries(cfg.base_dir / spec["csv"])
            measures = [GaussianMeasure(m, S) for m, S in zip(means, covs)]
        except (OSError, EnsembleOTError, ValueError) as exc:
            raise ConfigError(f"outputs: {exc}") from None
    elif isinstance(spec, list):
        measures = [parse_measure(s, f"outputs[{k}]", cfg.base_dir) for k, s in enumerate(spec)]
    else:
        raise ConfigError("outputs must be a list of measures or {'csv': path}")
    if len(measures) < 2:
        raise ConfigError("need outputs at two or more observation times")
    for k, mu in enumerate(measures):
        if mu.dim != p:
            raise ConfigError(f"outputs[{k}] lives in R^{mu.dim}; the output dimension is {p}")
    return measures


def discretize_on_output_images(g: GaussianMeasure, images) -> DiscreteMeasure:
    """Gaussian output law restricted to the distinct output values of the grid.

    Every image value becomes an atom, so each output bin of the tracking LP
    has its own mass; scalar outputs weight atoms by their Voronoi widths.
    """
    atoms = np.unique(np.round(np.atleast_2d(images), 12), axis=0)
    grid = Grid((atoms[:, 0],)) if atoms.shape[1] == 1 and len(atoms) > 1 else None
    if grid is not None:
        return grid_discretize(g, grid)
    logp = np.atleast_1d(multivariate_normal(g.mean, g.cov, allow_singular=True).logpdf(atoms))
    w = np.exp(logp - logp.max())
    return DiscreteMeasure(atoms, w / w.sum())


def run_track(cfg: RunConfig) -> dict:
    from .discrete_tracking import TrackingProblem, displacement_interpolate, solve_tracking

    sys_ = _system(cfg)
    outputs = _output_measures(cfg, sys_.p)
    grid = parse_grid(_need(cfg, "grid"), sys_.n, cfg.seed)
    nodes = grid.nodes()
    outputs = [discretize_on_output_images(g, nodes @ sys_.C_at(float(k)).T) if isinstance(g, GaussianMeasure) else g
               for k, g in enumerate(outputs)]
    mode = cfg.raw.get("mode", "coupled")
    if mode not in ("coupled", "fixed_marginal"):
        raise ConfigError("mode must be 'coupled' or 'fixed_marginal'")
    lp_method = cfg.raw.get("lp_method", "auto")
    if lp_method not in ("auto", "dense", "highs"):
        raise ConfigError("lp_method must be 'auto', 'dense' or 'highs'")
    samples = _int(cfg, "samples_per_interval", 4)
    sol = solve_tracking(TrackingProblem(sys_, outputs, grid, mode, lp_method))
    files = []
    for k in range(sol.horizon + 1):
        files.append(csvio.write_measure(cfg.out_dir / f"marginal_{k}.csv", sol.marginal(k)).name)
    for k, plan in enumerate(sol.plans):
        files.append(csvio.write_plan(cfg.out_dir / f"plan_{k}.csv", plan, threshold=1e-14).name)
    header = ["t"] + [f"x_{i + 1}" for i in range(sys_.n)] + ["weight"]
    rows = []
    for k in range(sol.horizon):
        for j in range(samples + (k == sol.horizon - 1)):
            t = k + j / samples
            mu = displacement_interpolate(sol, sys_, t)
            rows += [[float(t)] + list(map(float, a)) + [float(w)] for a, w in zip(mu.atoms, mu.weights)]
    files.append(csvio.write_rows(cfg.out_dir / "interpolant.csv", header, rows).name)
    summary = {"objective": sol.objective, "mode": mode, "grid_nodes": int(grid.size),
               "files": files + ["summary.json"]}
    _write_json(cfg.out_dir / "summary.json", summary)
    return summary


def run_track_gaussian(cfg: RunConfig) -> dict:
    from .gaussian_tracking import track_gaussian
    from .svgplot import write_ribbon_svg

    sys_ = _system(cfg)
    outputs = _output_measures(cfg, sys_.p)
    if not all(isinstance(g, GaussianMeasure) for g in outputs):
        raise ConfigError("track-gaussian needs Gaussian outputs ({'mean', 'cov'})")
    samples = _int(cfg, "samples_per_interval", 200)
    track = track_gaussian(sys_, outputs, samples)
    csvio.write_timeseries(cfg.out_dir / "track.csv", track.times, track.means, track.covariances)
    write_ribbon_svg(cfg.out_dir / "plot.svg", track.times, track.means, track.covariances,
                     title="state mean and +-2 sd ribbons")
    min_eig = min(float(np.linalg.eigvalsh(S).min()) for S in track.covariances)
    summary = {
        "transport_cost": track.transport_cost,
        "state_means": track.state_means.tolist(),
        "state_covariances": track.state_covariances.tolist(),
        "min_covariance_eigenvalue": min_eig,
        "files": ["track.csv", "plot.svg", "summary.json"],
    }
    _write_json(cfg.out_dir / "summary.json", summary)
    return summary


def run_observability(cfg: RunConfig) -> dict:
    from .observability import ensemble_observable_lti, kernel_intersection_time, unobservable_counterexample

    if "system" in cfg.raw:
        if "A" in cfg.raw or "C" in cfg.raw:
            raise ConfigError("give either 'system' or 'A'/'C', not both")
        sys_ = _system(cfg)
        if not all(isinstance(cfg.raw["system"].get(k), list) for k in ("A", "C")):
            raise ConfigError("observability needs a constant system with C")
        A, C = sys_.A_at(0.0), sys_.C_at(0.0)
    else:
        A = parse_array(_need(cfg, "A"), "A", 2)
        C = parse_array(_need(cfg, "C"), "C", 2)
    if A.shape[0] != A.shape[1] or C.shape[1] != A.shape[0]:
        raise ConfigError(f"incompatible shapes A{A.shape}, C{C.shape}")
    report = ensemble_observable_lti(A, C).as_dict()
    if not report["observable"]:
        d0, d1 = unobservable_counterexample(A, C)
        report["counterexample"] = {"first": d0.atoms[0].tolist(), "second": d1.atoms[0].tolist()}
    if "points" in cfg.raw:
        pts = parse_array(cfg.raw["points"], "points", 2)
        if pts.shape[1] != A.shape[0]:
            raise ConfigError("points must live in the state space")
        grid = cfg.raw.get("time_grid")
        grid = None if grid is None else parse_array(grid, "time_grid", 1)
        report["kernel_intersection_time"] = kernel_intersection_time(A, C, pts, grid)
    _write_json(cfg.out_dir / "report.json", report)
    report["files"] = ["report.json"]
    return report


def _field(spec):
    from .ctrl_measure import ConstantField, GridField, LinearField

    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("field must be an object with a 'type'")
    kind, keys = spec["type"], set(spec) - {"type"}
    allowed = {"constant": {"value"}, "linear": {"M", "b"}, "grid": {"axes", "values"}}
    if kind not in allowed:
        raise ConfigError(f"field type must be one of {sorted(allowed)}")
    if keys - allowed[kind]:
        raise ConfigError(f"field: unknown keys {sorted(keys - allowed[kind])}")
    try:
        if kind == "constant":
            return ConstantField(parse_array(spec.get("value"), "field.value", 1))
        if kind == "linear":
            b = spec.get("b")
            return LinearField(parse_array(spec.get("M"), "field.M", 2), None if b is None else parse_array(b, "field.b", 1))
        return GridField([parse_array(a, "field.axes", 1) for a in spec.get("axes", [])], parse_array(spec.get("values"), "field.values"))
    except (EnsembleOTError, ValueError) as exc:
        raise ConfigError(f"field: {exc}") from None


def _region(spec):
    from .ctrl_measure import BallRegion, BoxRegion

    if not isinstance(spec, dict) or spec.get("type") not in ("box", "ball"):
        raise ConfigError("region must be {'type': 'box'|'ball', ...}")
    keys = set(spec) - {"type"}
    need = {"box": {"lo", "hi"}, "ball": {"center", "radius"}}[spec["type"]]
    if keys != need:
        raise ConfigError(f"region {spec['type']} needs exactly {sorted(need)}")
    try:
        if spec["type"] == "box":
            return BoxRegion(parse_array(spec["lo"], "region.lo", 1), parse_array(spec["hi"], "region.hi", 1))
        return BallRegion(parse_array(spec["center"], "region.center", 1), float(spec["radius"]))
    except (EnsembleOTError, ValueError, TypeError) as exc:
        raise ConfigError(f"region: {exc}") from None


def run_ctrl_measure(cfg: RunConfig) -> dict:
    from .ctrl_measure import controllability_measure

    V = _field(_need(cfg, "field"))
    D = _region(_need(cfg, "region"))
    mu0 = parse_measure(_need(cfg, "mu0"), "mu0", cfg.base_dir)
    mu1 = parse_measure(_need(cfg, "mu1"), "mu1", cfg.base_dir)
    if not isinstance(mu0, DiscreteMeasure) or not isinstance(mu1, DiscreteMeasure):
        raise ConfigError("ctrl-measure needs discrete mu0 and mu1")
    dims = {V.dim, D.dim, mu0.dim, mu1.dim}
    if len(dims) != 1:
        raise ConfigError(f"field, region and measures disagree on dimension: {sorted(dims)}")
    t_max = _float(cfg, "t_max", 10.0)
    if t_max <= 0:
        raise ConfigError("t_max must be positive")
    steps = _int(cfg, "steps", 10_000)
    pairing = cfg.raw.get("pairing")
    if pairing is not None:
        if len(mu0) != len(mu1) or sorted(pairing) != list(range(len(mu1))):
            raise ConfigError("pairing must be a permutation of the target atom indices")
    res = controllability_measure(V, D, mu0, mu1, t_max, steps, pairing)
    csvio.write_cdf(cfg.out_dir / "cdf_forward.csv", res.forward)
    csvio.write_cdf(cfg.out_dir / "cdf_backward.csv", res.backward)
    summary = {"S": res.value, "paired_max": res.paired_max, "agrees": res.agrees,
               "files": ["cdf_forward.csv", "cdf_backward.csv", "summary.json"]}
    _write_json(cfg.out_dir / "summary.json", summary)
    return summary


RUNNERS = {
    "gramian": run_gramian,
    "min-energy": run_min_energy,
    "wasserstein": run_wasserstein,
    "track": run_track,
    "track-gaussian": run_track_gaussian,
    "observability": run_observability,
    "ctrl-measure": run_ctrl_measure,
}


def run(cfg: RunConfig) -> dict:
    return RUNNERS[cfg.command](cfg)


# ---------------------------------------------------------------------------
# entry point


def _error(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("bin_index", "unreached"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ensemble-ot", description="Ensemble tracking and transport pipelines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("run",):
        p = sub.add_parser(name, help="run the command named in the config" if name == "run" else f"{name} pipeline")
        p.add_argument("config", type=Path, help="JSON configuration file")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides out_dir)")
        p.add_argument("--quiet", action="store_true", help="do not print the summary")
    ex = sub.add_parser("example1", help="double-integrator tracking of scalar Gaussian outputs at t = 0..4")
    ex.add_argument("--case", type=int, choices=(1, 2), default=1)
    ex.add_argument("--out", type=Path, default=Path("out/example1"))
    ex.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "example1":
            cfg = build_config(example1_config(args.case), Path("."), args.out)
        else:
            cfg = load_config(args.config, args.out, None if args.command == "run" else args.command)
        summary = run(cfg)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except (EnsembleOTError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _error("numerical", exc, EXIT_NUMERIC)
    if not args.quiet:
        print(json.dumps({"command": cfg.command, "out_dir": str(cfg.out_dir), **summary}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
