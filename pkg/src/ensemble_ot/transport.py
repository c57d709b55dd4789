"""Discrete optimal transport: transportation simplex, Wasserstein distances,
the Gramian-weighted minimum-energy cost and an enumeration oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial.distance import cdist

from . import _tsimplex
from . import numerics as nm
from .errors import DimensionMismatch, NoConvergence, TooLarge, Unbalanced
from .lti_systems import LinearSystem, controllability_gramian, gramian_inverse, state_transition
from .measures import DiscreteMeasure, pushforward_linear

BALANCE_TOL = 1e-8
PERTURBATION = 1e-11
BLAND_MAX_CELLS = 10_000


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between ``source`` and ``target`` plus the simplex certificate.

    ``row_potential``/``col_potential`` are the dual variables of the final
    basis (``u_i + v_j <= c_ij`` with equality on basic cells).
    """

    coupling: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure
    row_potential: np.ndarray
    col_potential: np.ndarray
    pivots: int = 0

    def dual_value(self) -> float:
        return float(self.source.weights @ self.row_potential + self.target.weights @ self.col_potential)

    def entries(self, threshold: float = 0.0):
        """Nonzero entries as ``(i, j, mass)`` rows."""
        i, j = np.nonzero(self.coupling > threshold)
        return i, j, self.coupling[i, j]


def _check_cost(cost, shape) -> np.ndarray:
    cost = nm.as_matrix(cost, "cost")
    if cost.shape != shape:
        raise DimensionMismatch(f"cost has shape {cost.shape}, expected {shape}")
    if np.any(cost < 0):
        raise ValueError("cost entries must be nonnegative")
    return cost


def transport_simplex(a, b, cost, rule: str = "auto"):
    """Solve ``min <C, X>`` over couplings of marginals ``a``, ``b``.

    Returns ``(plan_matrix, value, u, v, pivots)``.
    """
    a = nm.as_vector(a, "a")
    b = nm.as_vector(b, "b")
    C = np.ascontiguousarray(_check_cost(cost, (a.size, b.size)))
    if abs(a.sum() - b.sum()) > BALANCE_TOL:
        raise Unbalanced(f"marginal totals differ: {a.sum():.12g} vs {b.sum():.12g}")
    b = b * (a.sum() / b.sum())
    m, n = C.shape
    if rule == "auto":
        rule = "bland" if m * n <= BLAND_MAX_CELLS else "block"
    code = {"bland": _tsimplex.RULE_BLAND, "block": _tsimplex.RULE_BLOCK}[rule]
    # anti-degeneracy perturbation; removed by recomputing tree flows below
    ap = a + PERTURBATION
    bp = b.copy()
    bp[-1] += m * PERTURBATION
    scale = max(float(np.max(np.abs(C))), 1.0) if C.size else 1.0
    bi, bj, _, u, v, status, pivots = _tsimplex.solve_transport(
        ap, bp, C, code, 10 * m * n, 1e-12 * scale
    )
    if status != _tsimplex.STATUS_OPTIMAL:
        raise NoConvergence(f"transportation simplex hit the pivot cap ({pivots} pivots)")
    xb = _tsimplex.tree_flows(a, b, bi, bj)
    xb = np.where(xb < 0, 0.0, xb)
    X = np.zeros((m, n))
    np.add.at(X, (bi, bj), xb)
    return X, float(np.sum(C * X)), u, v, int(pivots)


def solve_kantorovich(mu: DiscreteMeasure, nu: DiscreteMeasure, cost, rule: str = "auto"):
    """Optimal coupling and value of the Kantorovich problem."""
    X, value, u, v, pivots = transport_simplex(mu.weights, nu.weights, cost, rule)
    return TransportPlan(X, mu, nu, u, v, pivots), value


# ---------------------------------------------------------------------------
# enumeration oracle


@lru_cache(maxsize=None)
def _tree_bases(m: int, n: int):
    """All spanning-tree bases of the m x n transportation polytope.

    Each basis comes with the linear map from stacked marginals ``[a; b]`` to
    its basic flows (the incidence system has a unique solution on a tree).
    """
    cells = [(i, j) for i in range(m) for j in range(n)]
    k = m + n - 1
    bases, maps = [], []
    for combo in itertools.combinations(range(len(cells)), k):
        inc = np.zeros((m + n, k))
        for col, c in enumerate(combo):
            i, j = cells[c]
            inc[i, col] = 1.0
            inc[m + j, col] = 1.0
        if np.linalg.matrix_rank(inc) != k:
            continue
        bases.append(combo)
        maps.append(np.linalg.pinv(inc))
    return np.array(bases, dtype=np.int64), np.array(maps)


def brute_force_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, cost) -> float:
    """Exact optimum by exhaustive enumeration.

    Uniform equal-size marginals (up to 6 atoms) enumerate permutation
    couplings; otherwise, for at most 4 atoms per side, every basic solution
    of the transportation polytope is enumerated.
    """
    m, n = len(mu), len(nu)
    C = _check_cost(cost, (m, n))
    uniform = (m == n and np.allclose(mu.weights, 1.0 / m, atol=1e-15, rtol=0)
               and np.allclose(nu.weights, 1.0 / n, atol=1e-15, rtol=0))
    if uniform and m <= 6:
        best = math.inf
        for perm in itertools.permutations(range(n)):
            best = min(best, float(C[np.arange(m), list(perm)].sum()) / m)
        return best
    if m <= 4 and n <= 4:
        bases, maps = _tree_bases(m, n)
        rhs = np.concatenate([mu.weights, nu.weights])
        flows = maps @ rhs
        feasible = np.all(flows >= -1e-13, axis=1)
        values = np.sum(C.ravel()[bases] * flows, axis=1)
        return float(np.min(values[feasible]))
    raise TooLarge(f"{m} x {n} instance exceeds enumeration limits")


# ---------------------------------------------------------------------------
# distances and minimum-energy costs


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"ambient dimensions differ: {mu.dim} vs {nu.dim}")
    cost = cdist(mu.atoms, nu.atoms) ** p
    _, value = solve_kantorovich(mu, nu, cost)
    return float(max(value, 0.0) ** (1.0 / p))


def lqr_cost_matrix(sys: LinearSystem, t0: float, t1: float, source_atoms, target_atoms) -> np.ndarray:
    """``c_ij = 1/2 (z_j - Phi z_i)' W^{-1} (z_j - Phi z_i)`` with ``W = W(t1, t0)``."""
    src = np.atleast_2d(np.asarray(source_atoms, dtype=float))
    tgt = np.atleast_2d(np.asarray(target_atoms, dtype=float))
    if src.shape[1] != sys.n or tgt.shape[1] != sys.n:
        raise DimensionMismatch("atoms must live in the state space")
    Winv = gramian_inverse(controllability_gramian(sys, t1, t0))
    Phi = state_transition(sys, t1, t0)
    diff = tgt[None, :, :] - (src @ Phi.T)[:, None, :]
    cost = 0.5 * np.einsum("ijk,kl,ijl->ij", diff, Winv, diff, optimize=True)
    return np.clip(cost, 0.0, None)


def hatted_maps(sys: LinearSystem, t0: float = 0.0, t1: float = 1.0):
    """Linear maps sending endpoint measures to the whitened coordinates.

    Source atoms go through ``W^{-1/2} Phi(t1, t0)``, target atoms through
    ``W^{-1/2}``, with ``W = W(t1, t0)``.
    """
    W = controllability_gramian(sys, t1, t0)
    gramian_inverse(W)  # controllability check
    Wih = nm.psd_inv_sqrt(W)
    return Wih @ state_transition(sys, t1, t0), Wih


def transformed_w2(sys: LinearSystem, mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                   t0: float = 0.0, t1: float = 1.0) -> float:
    """Squared W2 between the whitened endpoint measures.

    Equals twice the optimum of the Kantorovich problem under
    :func:`lqr_cost_matrix` (whose entries carry the 1/2 energy factor).
    """
    L0, L1 = hatted_maps(sys, t0, t1)
    return wasserstein_p(pushforward_linear(mu0, L0), pushforward_linear(mu1, L1), 2.0) ** 2


def approximately_reached(reached: DiscreteMeasure, target: DiscreteMeasure, eps: float, p: float = 2.0) -> bool:
    """True when ``W_p(reached, target) <= eps``."""
    return wasserstein_p(reached, target, p) <= eps
