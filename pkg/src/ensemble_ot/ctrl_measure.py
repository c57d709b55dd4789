"""Minimal-time controllability measure for ensembles drifting under a flow.

Atoms of the initial measure drift forward under ``x' = V(x)`` until they
enter the control region ``D``; atoms of the target measure are traced
backward (``x' = -V(x)``). The reach CDFs of these hitting times and their
generalised inverses define ``S(mu0, mu1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import numerics as nm
from .errors import DimensionMismatch, MassNotAttained, NonFiniteState, NotReachable
from .measures import DiscreteMeasure

UNREACHED = math.inf
DEFAULT_STEPS = 10_000
TIME_RESOLUTION = 1e-9
MASS_TOL = 1e-12
AGREEMENT_TOL = 1e-6


# ---------------------------------------------------------------------------
# vector fields; each evaluates a batch of points (N, n) -> (N, n)


@dataclass(frozen=True)
class ConstantField:
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", nm.as_vector(self.value, "field value"))

    @property
    def dim(self) -> int:
        return self.value.size

    def __call__(self, X):
        return np.broadcast_to(self.value, np.shape(X)).copy()


@dataclass(frozen=True)
class LinearField:
    """``V(x) = M x + b``."""

    M: np.ndarray
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        M = nm.as_matrix(self.M, "M")
        b = np.zeros(M.shape[0]) if self.b is None else nm.as_vector(self.b, "b")
        if M.shape != (b.size, b.size):
            raise DimensionMismatch("linear field needs square M matching b")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.size

    def __call__(self, X):
        return X @ self.M.T + self.b


class GridField:
    """Multilinear interpolation of sampled field values on a tensor grid.

    ``values`` has shape ``grid.shape + (n,)``; outside the grid the nearest
    boundary cell is extrapolated linearly.
    """

    def __init__(self, axes, values):
        self.axes = tuple(nm.as_vector(a, "axis") for a in axes)
        vals = np.asarray(values, dtype=float)
        n = len(self.axes)
        if vals.shape != tuple(a.size for a in self.axes) + (n,):
            raise DimensionMismatch(f"field samples have shape {vals.shape}")
        self._interp = RegularGridInterpolator(self.axes, vals, bounds_error=False, fill_value=None)

    @property
    def dim(self) -> int:
        return len(self.axes)

    def __call__(self, X):
        return self._interp(X)


class TransformedField:
    """``V~(x) = P V(P^{-1} x)``: the field seen in coordinates ``x~ = P x``."""

    def __init__(self, field, P):
        self.field = field
        self.P = nm.as_matrix(P, "P")
        self.P_inv = np.linalg.inv(self.P)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def __call__(self, X):
        return self.field(X @ self.P_inv.T) @ self.P.T


# ---------------------------------------------------------------------------
# regions (open sets); ``contains`` works on batches


@dataclass(frozen=True)
class BoxRegion:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = nm.as_vector(self.lo, "lo"), nm.as_vector(self.hi, "hi")
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X > self.lo) & (X < self.hi), axis=1)


@dataclass(frozen=True)
class BallRegion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", nm.as_vector(self.center, "center"))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.linalg.norm(X - self.center, axis=1) < self.radius


class TransformedRegion:
    """Image ``P(D)``; membership is tested through the pre-image."""

    def __init__(self, region, P):
        self.region = region
        self.P = nm.as_matrix(P, "P")
        self.P_inv = np.linalg.inv(self.P)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def contains(self, X) -> np.ndarray:
        return self.region.contains(np.atleast_2d(X) @ self.P_inv.T)


# ---------------------------------------------------------------------------
# hitting times


def _signed(V, direction):
    if direction == "forward":
        return V
    if direction == "backward":
        return lambda X: -V(X)
    raise ValueError("direction must be 'forward' or 'backward'")


def _rk4(field, X, h):
    k1 = field(X)
    k2 = field(X + 0.5 * h * k1)
    k3 = field(X + 0.5 * h * k2)
    k4 = field(X + h * k3)
    return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hitting_times(V, D, points, direction: str = "forward", t_max: float = 10.0,
                  steps: int = DEFAULT_STEPS) -> np.ndarray:
    """First entrance times into ``D`` for a batch of starting points.

    RK4 with ``h = t_max / steps``; the crossing step is refined by bisection
    on the sub-step length until the bracket is below 1e-9. Points that never
    enter get ``inf``.
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    X = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    if X.shape[1] != V.dim or X.shape[1] != D.dim:
        raise DimensionMismatch("points, field and region dimensions differ")
    field = _signed(V, direction)
    times = np.full(len(X), UNREACHED)
    inside = D.contains(X)
    times[inside] = 0.0
    active = np.nonzero(~inside)[0]
    h = t_max / steps
    for step in range(steps):
        if active.size == 0:
            break
        prev = X[active]
        nxt = _rk4(field, prev, h)
        if not np.all(np.isfinite(nxt)):
            raise NonFiniteState(f"flow became non-finite at t={(step + 1) * h:.6g}")
        X[active] = nxt
        hit = D.contains(nxt)
        if np.any(hit):
            lo = np.zeros(hit.sum())
            hi = np.full(hit.sum(), h)
            start = prev[hit]
            while np.max(hi - lo) > TIME_RESOLUTION:
                mid = 0.5 * (lo + hi)
                ins = D.contains(_rk4(field, start, mid[:, None]))
                hi = np.where(ins, mid, hi)
                lo = np.where(ins, lo, mid)
            times[active[hit]] = step * h + hi
            active = active[~hit]
    return times


def hitting_time(V, D, x, direction: str = "forward", t_max: float = 10.0,
                 steps: int = DEFAULT_STEPS) -> float:
    """Entrance time of a single point; ``inf`` (UNREACHED) if it never enters."""
    return float(hitting_times(V, D, nm.as_vector(x, "x")[None, :], direction, t_max, steps)[0])


# ---------------------------------------------------------------------------
# reach CDFs


@dataclass(frozen=True)
class ReachCdf:
    """Right-continuous step function: ``masses[i]`` reached by ``times[i]``."""

    times: np.ndarray
    masses: np.ndarray
    atom_times: np.ndarray  # per-atom hitting time (inf if unreached)

    def __post_init__(self):
        if np.any(np.diff(self.masses) < 0) or np.any(self.masses < -MASS_TOL) or np.any(self.masses > 1 + 1e-9):
            raise ValueError("reach CDF must be nondecreasing with values in [0, 1]")

    def __call__(self, t: float) -> float:
        i = int(np.searchsorted(self.times, t, side="right"))
        return float(self.masses[i - 1]) if i else 0.0

    @property
    def total(self) -> float:
        return float(self.masses[-1]) if self.masses.size else 0.0


def reach_cdf(V, D, mu: DiscreteMeasure, direction: str = "forward", t_max: float = 10.0,
              steps: int = DEFAULT_STEPS) -> ReachCdf:
    ht = hitting_times(V, D, mu.atoms, direction, t_max, steps)
    return cdf_from_times(ht, mu.weights)


def cdf_from_times(atom_times, weights) -> ReachCdf:
    atom_times = np.asarray(atom_times, dtype=float)
    weights = np.asarray(weights, dtype=float)
    finite = np.isfinite(atom_times)
    steps, inverse = np.unique(atom_times[finite], return_inverse=True)
    mass = np.zeros(steps.size)
    np.add.at(mass, inverse, weights[finite])
    return ReachCdf(steps, np.cumsum(mass), atom_times)


def quantile(cdf: ReachCdf, m: float) -> float:
    """``inf{t >= 0 : F(t) >= m}``; zero mass needs zero time."""
    if not 0.0 <= m <= 1.0:
        raise ValueError("mass level must lie in [0, 1]")
    if m <= 0.0:
        return 0.0
    idx = np.nonzero(cdf.masses >= m - MASS_TOL)[0]
    if idx.size == 0:
        raise MassNotAttained(f"reach CDF tops out at {cdf.total:.12g} < {m:.12g}")
    return float(cdf.times[idx[0]])


# ---------------------------------------------------------------------------
# controllability measure


def sup_over_masses(F: ReachCdf, H: ReachCdf, masses) -> float:
    """``max_m F^{-1}(m) + H^{-1}(1 - m)`` over the given mass levels."""
    return max(quantile(F, m) + quantile(H, max(0.0, 1.0 - m)) for m in masses)


def breakpoint_masses(F: ReachCdf, H: ReachCdf) -> np.ndarray:
    """Mass levels at which the supremum is attained.

    Both quantile terms are constant between consecutive points of
    ``{0, 1, F-steps, 1 - H-steps}``; each open gap is represented by its
    midpoint, the endpoints by themselves.
    """
    pts = np.concatenate([[0.0, 1.0], F.masses, 1.0 - H.masses])
    pts = np.unique(np.clip(pts, 0.0, 1.0))
    return np.unique(np.concatenate([pts, 0.5 * (pts[:-1] + pts[1:])]))


@dataclass(frozen=True)
class ControllabilityMeasure:
    value: float  # S(mu0, mu1)
    forward: ReachCdf
    backward: ReachCdf
    paired_max: Optional[float] = None  # M = max_i t0_i + t1_pair(i)
    agrees: Optional[bool] = None


def controllability_measure(V, D, mu0: DiscreteMeasure, mu1: DiscreteMeasure, t_max: float = 10.0,
                            steps: int = DEFAULT_STEPS, pairing=None) -> ControllabilityMeasure:
    """``S = sup_m F^{-1}(m) + H^{-1}(1 - m)`` evaluated exactly.

    For equal atom counts the paired form ``M`` is reported as well, using
    ``pairing`` (``pairing[i]`` = index of the target atom paired with source
    atom ``i``) or, by default, the anti-monotone pairing of hitting times.
    """
    F = reach_cdf(V, D, mu0, "forward", t_max, steps)
    H = reach_cdf(V, D, mu1, "backward", t_max, steps)
    missing0 = np.nonzero(~np.isfinite(F.atom_times))[0]
    missing1 = np.nonzero(~np.isfinite(H.atom_times))[0]
    if missing0.size or missing1.size:
        raise NotReachable(
            f"atoms never reach the control region within t_max={t_max}: "
            f"initial {missing0.tolist()}, target {missing1.tolist()}",
            {"initial": missing0.tolist(), "target": missing1.tolist()},
        )
    S = sup_over_masses(F, H, breakpoint_masses(F, H))
    M = agrees = None
    if len(mu0) == len(mu1):
        t0, t1 = F.atom_times, H.atom_times
        if pairing is None:
            M = float(np.max(np.sort(t0) + np.sort(t1)[::-1]))
        else:
            M = float(np.max(t0 + t1[np.asarray(pairing)]))
        agrees = abs(M - S) <= AGREEMENT_TOL
    return ControllabilityMeasure(S, F, H, M, agrees)
