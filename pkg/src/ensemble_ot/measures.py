"""Discrete and Gaussian probability measures, grids and linear push-forwards."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import multivariate_normal

from . import numerics as nm
from .errors import DimensionMismatch, NotPsd, ZeroMass

MERGE_TOL = 1e-12
MASS_TOL = 1e-9
LOG_TINY = float(np.log(np.finfo(float).tiny))  # densities below this underflow


def _merge_atoms(atoms: np.ndarray, weights: np.ndarray, tol: float = MERGE_TOL):
    """Collapse atoms closer than ``tol``; the first occurrence keeps its slot."""
    if len(atoms) < 2:
        return atoms, weights
    pairs = cKDTree(atoms).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return atoms, weights
    parent = np.arange(len(atoms))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(atoms))])
    keep = np.unique(roots)
    slot = np.searchsorted(keep, roots)
    merged = np.zeros(len(keep))
    np.add.at(merged, slot, weights)
    return atoms[keep], merged


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted atoms; ``atoms[i]`` carries mass ``weights[i]``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = nm.as_vector(self.weights, "weights")
        if atoms.ndim != 2 or atoms.shape[0] != weights.size or weights.size == 0:
            raise DimensionMismatch("need one weight per atom and at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise nm.NonFiniteState("atoms must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {weights.sum():.12g}, expected 1")
        atoms, weights = _merge_atoms(atoms, weights)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_unnormalized(cls, atoms, weights) -> "DiscreteMeasure":
        w = nm.as_vector(weights, "weights")
        total = w.sum()
        if not total > 0:
            raise ZeroMass("total mass is zero")
        return cls(atoms, w / total)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(len(atoms), 1.0 / len(atoms)))

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(nm.as_vector(point, "point")[None, :], np.ones(1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def covariance(self) -> np.ndarray:
        d = self.atoms - self.mean()
        return nm.symmetrize((d * self.weights[:, None]).T @ d)


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = nm.as_vector(self.mean, "mean")
        cov = nm.check_symmetric(self.cov)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        w = np.linalg.eigvalsh(cov)
        if w[0] < -nm.PSD_TOL:
            raise NotPsd(f"covariance has eigenvalue {w[0]:.3g}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class Grid:
    """Tensor grid; nodes are enumerated lexicographically (last axis fastest)."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(nm.as_vector(a, "grid axis") for a in self.axes)
        if not axes:
            raise DimensionMismatch("grid needs at least one axis")
        for a in axes:
            if np.any(np.diff(a) <= 0):
                raise ValueError("grid breakpoints must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lo, hi, nodes) -> "Grid":
        lo, hi = nm.as_vector(lo), nm.as_vector(hi)
        nodes = np.broadcast_to(np.asarray(nodes, dtype=int), lo.shape)
        return cls(tuple(np.linspace(a, b, k) if k > 1 else np.array([0.5 * (a + b)])
                         for a, b, k in zip(lo, hi, nodes)))

    @classmethod
    def around(cls, g: GaussianMeasure, nodes=41, width: float = 4.0) -> "Grid":
        """Per-axis range ``mean +- width`` marginal standard deviations."""
        sd = np.sqrt(np.clip(np.diag(g.cov), 0.0, None))
        sd = np.where(sd > 0, sd, 1.0)
        return cls.uniform(g.mean - width * sd, g.mean + width * sd, nodes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_volumes(self) -> np.ndarray:
        """Volume of each node's cell (half-way to its neighbours, per axis)."""
        widths = []
        for a in self.axes:
            if a.size == 1:
                widths.append(np.ones(1))
                continue
            edges = np.concatenate([[a[0]], 0.5 * (a[1:] + a[:-1]), [a[-1]]])
            w = np.diff(edges)
            w[0] *= 2.0
            w[-1] *= 2.0
            widths.append(w)
        vol = widths[0]
        for w in widths[1:]:
            vol = np.multiply.outer(vol, w)
        return np.asarray(vol).ravel()


def pushforward_linear(mu: DiscreteMeasure, L) -> DiscreteMeasure:
    L = nm.as_matrix(L, "L")
    if L.shape[1] != mu.dim:
        raise DimensionMismatch(f"map has {L.shape[1]} columns, atoms have dimension {mu.dim}")
    return DiscreteMeasure(mu.atoms @ L.T, mu.weights)


def gaussian_pushforward(g: GaussianMeasure, L) -> GaussianMeasure:
    L = nm.as_matrix(L, "L")
    if L.shape[1] != g.dim:
        raise DimensionMismatch(f"map has {L.shape[1]} columns, measure has dimension {g.dim}")
    return GaussianMeasure(L @ g.mean, nm.symmetrize(L @ g.cov @ L.T))


def grid_discretize(g: GaussianMeasure, grid: Grid) -> DiscreteMeasure:
    """Node density times cell volume, renormalised."""
    if grid.dim != g.dim:
        raise DimensionMismatch(f"grid dimension {grid.dim} != measure dimension {g.dim}")
    nodes = grid.nodes()
    logp = np.atleast_1d(multivariate_normal(g.mean, g.cov, allow_singular=True).logpdf(nodes))
    logp = logp + np.log(grid.cell_volumes())
    if not np.max(logp) > LOG_TINY:
        raise ZeroMass("Gaussian density underflows on every grid node")
    w = np.exp(logp - np.max(logp))
    return DiscreteMeasure(nodes, w / w.sum())


def gaussian_fit(mu: DiscreteMeasure) -> GaussianMeasure:
    cov = mu.covariance()
    w, V = np.linalg.eigh(cov)
    return GaussianMeasure(mu.mean(), nm.symmetrize((V * np.clip(w, 0.0, None)) @ V.T))

