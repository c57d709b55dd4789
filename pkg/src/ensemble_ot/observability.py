"""Ensemble observability certificates for time-invariant structural dynamics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nm
from .errors import DimensionMismatch, NotFound
from .lti_systems import LinearSystem, observability_matrix, pivoted_elimination, state_transition
from .measures import DiscreteMeasure, pushforward_linear

KERNEL_TOL = 1e-8
DEFAULT_TIME_GRID = np.linspace(0.0, 10.0, 101)[1:]
SCOPE = "rank test; ensemble equivalence holds for discrete ensembles"


@dataclass(frozen=True)
class EnsembleObservabilityReport:
    verdict: bool
    method: str
    pivot_columns: tuple = ()
    witness: Optional[np.ndarray] = None  # unobservable direction when verdict is False

    def as_dict(self) -> dict:
        out = {"observable": self.verdict, "method": self.method}
        if self.verdict:
            out["pivot_columns"] = list(self.pivot_columns)
        else:
            out["unobservable_direction"] = self.witness.tolist()
        return out


def _pair(A, C):
    A = nm.as_matrix(A, "A")
    C = nm.as_matrix(C, "C")
    n = A.shape[0]
    if A.shape != (n, n) or C.shape[1] != n:
        raise DimensionMismatch(f"incompatible shapes A{A.shape}, C{C.shape}")
    return A, C


def unobservable_direction(A, C) -> Optional[np.ndarray]:
    """Unit vector in the kernel of the observability matrix, or None."""
    A, C = _pair(A, C)
    O = observability_matrix(A, C)
    rank, _ = pivoted_elimination(O)
    if rank == A.shape[0]:
        return None
    v = np.linalg.svd(O)[2][-1]
    v = v / np.linalg.norm(v)
    return v if v[np.argmax(np.abs(v))] > 0 else -v


def ensemble_observable_lti(A, C) -> EnsembleObservabilityReport:
    A, C = _pair(A, C)
    rank, pivots = pivoted_elimination(observability_matrix(A, C))
    if rank == A.shape[0]:
        return EnsembleObservabilityReport(True, SCOPE, tuple(pivots))
    return EnsembleObservabilityReport(False, SCOPE, tuple(pivots), unobservable_direction(A, C))


def _free_system(A):
    return LinearSystem(A, np.zeros((A.shape[0], 1)))


def output_map(A, C, t: float) -> np.ndarray:
    """``C exp(A t)`` with the exponential from :func:`state_transition`."""
    A, C = _pair(A, C)
    return C @ state_transition(_free_system(A), t, 0.0)


def kernel_intersection_time(A, C, points, time_grid=None) -> float:
    """First grid time at which no point lies in the kernel of ``C exp(A t)``."""
    A, C = _pair(A, C)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("point set must be nonempty")
    if pts.shape[1] != A.shape[0]:
        raise DimensionMismatch("points must live in the state space")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0):
        raise ValueError("points must be nonzero")
    grid = DEFAULT_TIME_GRID if time_grid is None else np.asarray(time_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be nonempty and increasing")
    sys = _free_system(A)
    E = state_transition(sys, grid[0], 0.0)
    for idx, t in enumerate(grid):
        if idx:
            E = state_transition(sys, t, grid[idx - 1]) @ E
        residual = np.linalg.norm(pts @ (C @ E).T, axis=1)
        if np.all(residual > KERNEL_TOL * norms):
            return float(t)
    raise NotFound("every grid time leaves some point in the output kernel; enlarge the grid")


def unobservable_counterexample(A, C):
    """Two distinct point masses with identical output laws, or None if the pair is observable.

    Returns ``(delta_0, delta_{-v})`` for an unobservable direction ``v``;
    ``C exp(At)`` maps both to ``delta_0`` for every ``t``.
    """
    v = unobservable_direction(A, C)
    if v is None:
        return None
    zero = np.zeros_like(v)
    return DiscreteMeasure.dirac(zero), DiscreteMeasure.dirac(0.0 - v)


def output_pushforward(A, C, mu: DiscreteMeasure, t: float) -> DiscreteMeasure:
    return pushforward_linear(mu, output_map(A, C, t))
