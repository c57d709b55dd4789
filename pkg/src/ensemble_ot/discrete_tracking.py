"""Grid-discretised tracking: chained transport LPs under output push-forward
constraints, and displacement interpolation along minimum-energy paths."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, EmptyBin
from .lp import solve_lp
from .lti_systems import LinearSystem, min_energy_maps
from .measures import DiscreteMeasure, Grid
from .transport import lqr_cost_matrix, transport_simplex

PLAN_THRESHOLD = 1e-14
MODES = ("coupled", "fixed_marginal")


@dataclass(frozen=True)
class BinConstraints:
    """Output bin of every grid node and the mass each bin must carry."""

    bin_of_node: np.ndarray
    totals: np.ndarray

    def matrix(self) -> sparse.csr_matrix:
        """Rows are bins, columns grid nodes (0/1 membership)."""
        n_nodes = self.bin_of_node.size
        return sparse.csr_matrix(
            (np.ones(n_nodes), (self.bin_of_node, np.arange(n_nodes))),
            shape=(self.totals.size, n_nodes),
        )

    def counts(self) -> np.ndarray:
        return np.bincount(self.bin_of_node, minlength=self.totals.size)


def output_bin_constraints(sys: LinearSystem, k: float, grid: Grid, mu_k: DiscreteMeasure) -> BinConstraints:
    """Voronoi bins of the output atoms, pulled back to the state grid.

    Each node joins the bin of the output atom nearest to ``C(k) z``; exact
    ties go to the lowest atom index.
    """
    if grid.dim != sys.n:
        raise DimensionMismatch(f"grid dimension {grid.dim} != state dimension {sys.n}")
    C = sys.C_at(float(k))
    if mu_k.dim != C.shape[0]:
        raise DimensionMismatch(f"output measure dimension {mu_k.dim} != output dimension {C.shape[0]}")
    outputs = grid.nodes() @ C.T
    bins = np.empty(len(outputs), dtype=np.int64)
    chunk = 4096
    for s in range(0, len(outputs), chunk):
        bins[s:s + chunk] = np.argmin(cdist(outputs[s:s + chunk], mu_k.atoms), axis=1)
    cons = BinConstraints(bins, mu_k.weights.copy())
    empty = np.nonzero((cons.counts() == 0) & (cons.totals > 0))[0]
    if empty.size:
        b = int(empty[0])
        raise EmptyBin(f"output atom {b} at {mu_k.atoms[b].tolist()} receives no grid node", b)
    return cons


@dataclass(frozen=True)
class TrackingProblem:
    system: LinearSystem
    outputs: tuple  # DiscreteMeasure per observation time 0..T
    grid: Grid
    mode: str = "coupled"
    lp_method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(self.outputs) < 2:
            raise ValueError("need at least two observation times")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.grid.dim != self.system.n:
            raise DimensionMismatch("grid dimension must equal the state dimension")

    @property
    def horizon(self) -> int:
        return len(self.outputs) - 1


@dataclass(frozen=True)
class TrackingSolution:
    nodes: np.ndarray  # grid nodes (N, n)
    marginals: np.ndarray  # (T+1, N) state masses on the nodes
    plans: tuple  # (N, N) coupling per interval
    objective: float
    mode: str

    def marginal(self, k: int) -> DiscreteMeasure:
        return DiscreteMeasure.from_unnormalized(self.nodes, self.marginals[k])

    @property
    def horizon(self) -> int:
        return len(self.plans)


def _fixed_marginals(problem: TrackingProblem, constraints):
    out = []
    for cons in constraints:
        counts = cons.counts()
        share = np.where(counts > 0, cons.totals / np.maximum(counts, 1), 0.0)
        out.append(share[cons.bin_of_node])
    return np.stack(out)


def _coupled_lp(costs, constraints, N, T):
    """Variables ``[pi_0, ..., pi_{T-1}, m_0, ..., m_T]`` (plans row-major)."""
    n_pi = T * N * N
    n_var = n_pi + (T + 1) * N
    row_sum = sparse.kron(sparse.identity(N), np.ones((1, N)))  # pi 1
    col_sum = sparse.kron(np.ones((1, N)), sparse.identity(N))  # pi' 1
    blocks, rhs = [], []

    def place(mat, offset):
        mat = sparse.csr_matrix(mat)
        left = sparse.csr_matrix((mat.shape[0], offset))
        right = sparse.csr_matrix((mat.shape[0], n_var - offset - mat.shape[1]))
        return sparse.hstack([left, mat, right])

    for k in range(T):
        off = k * N * N
        blocks.append(place(row_sum, off) - place(sparse.identity(N), n_pi + k * N))
        rhs.append(np.zeros(N))
        blocks.append(place(col_sum, off) - place(sparse.identity(N), n_pi + (k + 1) * N))
        rhs.append(np.zeros(N))
    for k, cons in enumerate(constraints):
        blocks.append(place(cons.matrix(), n_pi + k * N))
        rhs.append(cons.totals)
    A = sparse.vstack(blocks).tocsr()
    c = np.concatenate([C.ravel() for C in costs] + [np.zeros((T + 1) * N)])
    return c, A, np.concatenate(rhs)


def solve_tracking(problem: TrackingProblem) -> TrackingSolution:
    sys, grid, T = problem.system, problem.grid, problem.horizon
    nodes = grid.nodes()
    N = len(nodes)
    constraints = [output_bin_constraints(sys, k, grid, mu) for k, mu in enumerate(problem.outputs)]
    costs = [lqr_cost_matrix(sys, k, k + 1, nodes, nodes) for k in range(T)]
    if problem.mode == "fixed_marginal":
        marg = _fixed_marginals(problem, constraints)
        plans, total = [], 0.0
        for k in range(T):
            X, value, *_ = transport_simplex(marg[k], marg[k + 1], costs[k])
            plans.append(X)
            total += value
        return TrackingSolution(nodes, marg, tuple(plans), float(total), problem.mode)
    c, A, b = _coupled_lp(costs, constraints, N, T)
    res = solve_lp(c, A, b, problem.lp_method)
    n_pi = T * N * N
    plans = tuple(res.x[k * N * N:(k + 1) * N * N].reshape(N, N) for k in range(T))
    marg = res.x[n_pi:].reshape(T + 1, N)
    return TrackingSolution(nodes, marg, plans, res.value, problem.mode)


def displacement_interpolate(solution: TrackingSolution, sys: LinearSystem, t: float,
                             threshold: float = PLAN_THRESHOLD) -> DiscreteMeasure:
    """Mass ``pi_k(i, j)`` carried to the minimum-energy path point at time ``t``.

    The path from ``(z_i, k)`` to ``(z_j, k+1)`` is ``P(t) z_i + Q(t) z_j``,
    the closed form of the feedback-law trajectory.
    """
    T = solution.horizon
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    k = min(int(np.floor(t)), T - 1)
    if t == k:
        return solution.marginal(k)
    if t == k + 1:
        return solution.marginal(k + 1)
    plan = solution.plans[k]
    i, j = np.nonzero(plan > threshold)
    P, Q = min_energy_maps(sys, float(k), float(k + 1), float(t))
    atoms = solution.nodes[i] @ P.T + solution.nodes[j] @ Q.T
    return DiscreteMeasure.from_unnormalized(atoms, plan[i, j])


def grid_fit_gaussian_marginals(solution: TrackingSolution):
    """Moment fits of the state marginals (helper for grid-convergence studies)."""
    from .measures import gaussian_fit

    return [gaussian_fit(solution.marginal(k)) for k in range(solution.horizon + 1)]


def variable_count(problem: TrackingProblem, mode: Optional[str] = None) -> int:
    """Number of LP variables: ``T N^2`` plans plus ``(T+1) N`` marginals when coupled."""
    N = problem.grid.size
    T = problem.horizon
    mode = mode or problem.mode
    return T * N * N + ((T + 1) * N if mode == "coupled" else 0)
