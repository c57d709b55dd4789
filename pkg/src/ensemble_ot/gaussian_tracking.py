"""Gaussian displacement interpolation between linear-system marginals and
two-stage inference of state marginals from Gaussian output marginals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from . import numerics as nm
from .errors import BlowUp, DimensionMismatch, InfeasibleConstraint, NoConvergence, NotPsd
from .lti_systems import (
    LinearSystem,
    controllability_gramian,
    gramian_inverse,
    pivoted_elimination,
    state_transition,
)
from .measures import GaussianMeasure

BLOWUP_NORM = 1e12
NESTED_ROOT_TOL = 1e-8
SAMPLES_PER_INTERVAL = 200
BARRIER_GAP = 1e-8


def _nested_sqrt(M: np.ndarray) -> np.ndarray:
    """PSD root of a product expression; round-off asymmetry is expected."""
    M = nm.symmetrize(M)
    scale = max(1.0, float(np.max(np.abs(M))))
    w = np.linalg.eigvalsh(M)
    if w[0] < -NESTED_ROOT_TOL * scale:
        raise NotPsd(f"nested square-root argument has eigenvalue {w[0]:.3g}")
    return nm.psd_sqrt(M, tol=NESTED_ROOT_TOL * scale)


def _positive_definite(S, name):
    S = nm.check_symmetric(S)
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0:
        raise NotPsd(f"{name} must be positive definite (smallest eigenvalue {w[0]:.3g})")
    return S


def riccati_initial(sys: LinearSystem, S0, S1, t0: float = 0.0, t1: float = 1.0) -> np.ndarray:
    """Initial condition of the covariance-steering Riccati equation."""
    S0 = _positive_definite(S0, "S0")
    S1 = _positive_definite(S1, "S1")
    Wi = gramian_inverse(controllability_gramian(sys, t0, t1))
    Phi01 = state_transition(sys, t0, t1)
    h = nm.psd_sqrt(S0)
    hi = nm.psd_inv_sqrt(S0)
    inner = _nested_sqrt(h @ Wi @ Phi01 @ S1 @ Phi01.T @ Wi @ h)
    return nm.symmetrize(hi @ (h @ Wi @ h - inner) @ hi)


# ---------------------------------------------------------------------------
# joint flow: K, closed-loop transition, its Gramian, open-loop transition, Gramian

_K, _PSI, _J, _PHI, _V = range(5)


def _flow_rhs(Afn, Bfn):
    def rhs(t, Y):
        A, B = Afn(t), Bfn(t)
        Q = B @ B.T
        K, Psi, _, Phi, _ = Y
        Psi_inv_B = np.linalg.solve(Psi, B)
        Phi_inv_B = np.linalg.solve(Phi, B)
        return np.stack([
            -A.T @ K - K @ A + K @ Q @ K,
            (A - Q @ K) @ Psi,
            Psi_inv_B @ Psi_inv_B.T,
            A @ Phi,
            Phi_inv_B @ Phi_inv_B.T,
        ])

    return rhs


def _joint_flow(sys: LinearSystem, K0, t0: float, t1: float):
    n = sys.n
    Y = np.stack([K0, np.eye(n), np.zeros((n, n)), np.eye(n), np.zeros((n, n))])
    times, states, rhs_list = [t0], [Y.copy()], []
    for a, b in sys.segments(t0, t1):
        k = sys.steps_for(b - a)
        h = (b - a) / k
        rhs = _flow_rhs(*sys.local(a, b))
        for i in range(k):
            t = a + i * h
            Y = nm.rk4_step(rhs, t, Y, h)
            for s in (_K, _J, _V):
                Y[s] = nm.symmetrize(Y[s])
            if not np.all(np.isfinite(Y)):
                raise BlowUp(f"Riccati flow became non-finite at t={t + h:.6g}")
            if np.linalg.norm(Y[_K]) > BLOWUP_NORM:
                raise BlowUp(f"|K(t)| exceeded {BLOWUP_NORM:g} at t={t + h:.6g}")
            times.append(a + (i + 1) * h)
            states.append(Y.copy())
            rhs_list.append(rhs)
    return np.asarray(times), np.stack(states), rhs_list


@dataclass(frozen=True)
class RiccatiSolution:
    times: np.ndarray
    K: np.ndarray  # K[i] at times[i]
    K0: np.ndarray

    def at(self, t: float) -> np.ndarray:
        """Grid value, linearly interpolated between nodes."""
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        s = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - s) * self.K[i] + s * self.K[i + 1]


def riccati_solve(sys: LinearSystem, S0, S1, t_span=(0.0, 1.0)) -> RiccatiSolution:
    """``K' = -A'K - KA + K B B' K`` from the steering initial condition."""
    t0, t1 = t_span
    K0 = riccati_initial(sys, S0, S1, t0, t1)
    times, states, _ = _joint_flow(sys, K0, t0, t1)
    return RiccatiSolution(times, states[:, _K].copy(), K0)


class GaussianInterpolant:
    """Displacement interpolation ``N(nu_t, Sigma_t)`` between two Gaussians.

    The feedback ``u = -B'K x + B'm(t)`` moves ``N(nu0, S0)`` at ``t0`` onto
    ``N(nu1, S1)`` at ``t1`` with minimum expected energy.
    """

    def __init__(self, sys: LinearSystem, g0: GaussianMeasure, g1: GaussianMeasure,
                 t0: float = 0.0, t1: float = 1.0):
        if g0.dim != sys.n or g1.dim != sys.n:
            raise DimensionMismatch("endpoint Gaussians must live in the state space")
        if not t0 < t1:
            raise ValueError("interpolant needs t0 < t1")
        self.sys, self.g0, self.g1 = sys, g0, g1
        self.t0, self.t1 = float(t0), float(t1)
        S0 = _positive_definite(g0.cov, "S0")
        S1 = _positive_definite(g1.cov, "S1")
        K0 = riccati_initial(sys, S0, S1, t0, t1)
        self._times, self._states, self._rhs = _joint_flow(sys, K0, t0, t1)
        self.riccati = RiccatiSolution(self._times, self._states[:, _K].copy(), K0)
        end = self._states[-1]
        self._c = np.linalg.solve(end[_J], np.linalg.solve(end[_PSI], g1.mean) - g0.mean)
        # constant pieces of the closed-form covariance
        Wi = gramian_inverse(controllability_gramian(sys, t0, t1))
        Phi01 = state_transition(sys, t0, t1)
        self._h = nm.psd_sqrt(S0)
        self._hi = nm.psd_inv_sqrt(S0)
        self._fixed = -self._h @ Wi @ self._h + _nested_sqrt(
            self._h @ Wi @ Phi01 @ S1 @ Phi01.T @ Wi @ self._h
        )

    def _state(self, t: float) -> np.ndarray:
        if not self.t0 <= t <= self.t1:
            raise ValueError(f"t={t} outside [{self.t0}, {self.t1}]")
        i = int(np.searchsorted(self._times, t, side="right")) - 1
        i = min(i, len(self._times) - 1)
        if self._times[i] == t or i == len(self._times) - 1:
            return self._states[i]
        return nm.rk4_step(self._rhs[i], self._times[i], self._states[i], t - self._times[i])

    def K(self, t: float) -> np.ndarray:
        return nm.symmetrize(self._state(t)[_K])

    def closed_loop_transition(self, t: float) -> np.ndarray:
        """Transition matrix of ``A - B B' K`` from ``t0`` to ``t``."""
        return self._state(t)[_PSI]

    def m(self, t: float) -> np.ndarray:
        """Feed-forward term of the optimal control law."""
        return np.linalg.solve(self._state(t)[_PSI].T, self._c)

    def mean(self, t: float) -> np.ndarray:
        Y = self._state(t)
        return Y[_PSI] @ (self.g0.mean + Y[_J] @ self._c)

    def covariance(self, t: float) -> np.ndarray:
        """Closed-form covariance (Gramian bracket, squared)."""
        if t == self.t0:
            return self.g0.cov.copy()
        Y = self._state(t)
        V = Y[_V]
        bracket = self._fixed + self._h @ np.linalg.solve(V, self._h)
        left = Y[_PHI] @ V @ self._hi @ bracket
        return nm.symmetrize(left @ left.T)

    def __call__(self, t: float) -> GaussianMeasure:
        return GaussianMeasure(self.mean(t), self.covariance(t))


def gaussian_interpolant(sys: LinearSystem, g0: GaussianMeasure, g1: GaussianMeasure,
                         t0: float = 0.0, t1: float = 1.0) -> GaussianInterpolant:
    return GaussianInterpolant(sys, g0, g1, t0, t1)


# ---------------------------------------------------------------------------
# two-stage inference


def _interval_data(sys: LinearSystem, T: int):
    Phis, Wis = [], []
    for k in range(T):
        Phis.append(state_transition(sys, k + 1, k))
        Wis.append(gramian_inverse(controllability_gramian(sys, k + 1, k)))
    return Phis, Wis


def _output_maps(sys: LinearSystem, T: int):
    Cs = []
    for k in range(T + 1):
        C = sys.C_at(float(k))
        if pivoted_elimination(C)[0] < C.shape[0]:
            raise InfeasibleConstraint(f"C({k}) is rank deficient")
        Cs.append(C)
    return Cs


def infer_state_means(sys: LinearSystem, output_means) -> np.ndarray:
    """State means minimising the chained minimum-energy cost under ``C(k) nu_k = y_k``."""
    ys = [nm.as_vector(y, "output mean") for y in output_means]
    T = len(ys) - 1
    if T < 1:
        raise ValueError("need at least two observation times")
    n = sys.n
    Cs = _output_maps(sys, T)
    for k, (C, y) in enumerate(zip(Cs, ys)):
        if y.size != C.shape[0]:
            raise DimensionMismatch(f"output mean {k} has size {y.size}, expected {C.shape[0]}")
    Phis, Wis = _interval_data(sys, T)
    N = n * (T + 1)
    Q = np.zeros((N, N))
    for k in range(T):
        D = np.zeros((n, N))
        D[:, k * n:(k + 1) * n] = -Phis[k]
        D[:, (k + 1) * n:(k + 2) * n] = np.eye(n)
        Q += D.T @ Wis[k] @ D
    Aeq = sla.block_diag(*Cs)
    beq = np.concatenate(ys)
    x = nm.solve_equality_qp(Q, np.zeros(N), Aeq, beq).reshape(T + 1, n)
    # minimal-norm correction removes the KKT round-off from C(k) nu_k = y_k;
    # for coordinate outputs it makes the observed components exact
    for k, (C, y) in enumerate(zip(Cs, ys)):
        x[k] += C.T @ np.linalg.solve(C @ C.T, y - C @ x[k])
    return x


def bures_cost(S0, S1) -> float:
    """``Tr S0 + Tr S1 - 2 Tr (S0^{1/2} S1 S0^{1/2})^{1/2}``.

    The middle trace is the nuclear norm of ``S1^{1/2} S0^{1/2}``; taking
    singular values of that product avoids square roots of round-off noise
    when either covariance is close to singular.
    """
    h0 = nm.psd_sqrt(nm.symmetrize(S0), tol=1e-8)
    h1 = nm.psd_sqrt(nm.symmetrize(S1), tol=1e-8)
    nuclear = np.sum(np.linalg.svd(h1 @ h0, compute_uv=False))
    return float(np.trace(S0) + np.trace(S1) - 2.0 * nuclear)


def bures_with_gradients(S0, S1):
    """Bures cost with its gradients in ``S0`` and ``S1`` (both PD).

    The gradient in ``S0`` is ``I - T`` with ``T`` the linear optimal transport
    map from ``N(0, S0)`` to ``N(0, S1)``; symmetrically ``I - T^{-1}`` in ``S1``.
    """
    w, V = np.linalg.eigh(nm.symmetrize(S0))
    w = np.clip(w, 1e-300, None)
    h = (V * np.sqrt(w)) @ V.T
    hi = (V / np.sqrt(w)) @ V.T
    mw, mV = np.linalg.eigh(nm.symmetrize(h @ S1 @ h))
    mw = np.clip(mw, 1e-300, None)
    mid = (mV * np.sqrt(mw)) @ mV.T
    mid_inv = (mV / np.sqrt(mw)) @ mV.T
    value = bures_cost(S0, S1)
    eye = np.eye(len(S0))
    return value, nm.symmetrize(eye - hi @ mid @ hi), nm.symmetrize(eye - h @ mid_inv @ h)


def whitening(sys: LinearSystem, T: int):
    """Per-interval maps ``(W^{-1/2} Phi, W^{-1/2})`` with ``W = W(k+1, k)``."""
    maps = []
    for k in range(T):
        W = controllability_gramian(sys, k + 1, k)
        gramian_inverse(W)
        Wih = nm.psd_inv_sqrt(W)
        maps.append((Wih @ state_transition(sys, k + 1, k), Wih))
    return maps


@dataclass(frozen=True)
class CovarianceParametrization:
    """``Sigma_k = T^{-1} R R' T^{-T}`` with ``T = [C; N']`` and
    ``R = [[chol(Sigma_y), 0], [F, G]]`` (G lower triangular), so that
    ``C Sigma_k C' = Sigma_y`` holds for every parameter value."""

    C: np.ndarray
    output_cov: np.ndarray
    Tinv: np.ndarray = field(init=False)
    L: np.ndarray = field(init=False)

    def __post_init__(self):
        p, n = self.C.shape
        null = sla.null_space(self.C)
        T = np.vstack([self.C, null.T])
        object.__setattr__(self, "Tinv", np.linalg.inv(T))
        object.__setattr__(self, "L", np.linalg.cholesky(self.output_cov))

    @property
    def free(self) -> int:
        p, n = self.C.shape
        r = n - p
        return r * p + r * (r + 1) // 2

    def covariance(self, theta) -> np.ndarray:
        p, n = self.C.shape
        r = n - p
        R = np.zeros((n, n))
        R[:p, :p] = self.L
        if r:
            R[p:, :p] = np.reshape(theta[:r * p], (r, p))
            G = np.zeros((r, r))
            G[np.tril_indices(r)] = theta[r * p:]
            R[p:, p:] = G
        M = self.Tinv @ R
        return nm.symmetrize(M @ M.T)

    def gradient(self, theta, grad_cov) -> np.ndarray:
        """Chain rule from a symmetric gradient in Sigma to the free parameters."""
        p, n = self.C.shape
        r = n - p
        R = np.zeros((n, n))
        R[:p, :p] = self.L
        R[p:, :p] = np.reshape(theta[:r * p], (r, p))
        G = np.zeros((r, r))
        G[np.tril_indices(r)] = theta[r * p:]
        R[p:, p:] = G
        M = self.Tinv @ R
        grad_R = self.Tinv.T @ (2.0 * grad_cov @ M)
        return np.concatenate([grad_R[p:, :p].ravel(), grad_R[p:, p:][np.tril_indices(r)]])

    def parameters(self, cov) -> np.ndarray:
        """Free parameters of a covariance that already satisfies the constraint."""
        p, n = self.C.shape
        r = n - p
        T = np.linalg.inv(self.Tinv)
        R = np.linalg.cholesky(nm.symmetrize(T @ cov @ T.T))
        return np.concatenate([R[p:, :p].ravel(), R[p:, p:][np.tril_indices(r)]])

    def initial(self) -> np.ndarray:
        p, n = self.C.shape
        r = n - p
        G = np.eye(r)
        return np.concatenate([np.zeros(r * p), G[np.tril_indices(r)]])


def covariance_objective(sys: LinearSystem, covs, maps=None) -> float:
    """Sum over intervals of the Bures cost between whitened consecutive covariances."""
    T = len(covs) - 1
    maps = whitening(sys, T) if maps is None else maps
    total = 0.0
    for k, (L0, L1) in enumerate(maps):
        total += bures_cost(L0 @ covs[k] @ L0.T, L1 @ covs[k + 1] @ L1.T)
    return total


def _chain_problem(sys: LinearSystem, Cs, maps):
    """Joint cost matrix ``Q`` over the stacked states and the stacked output map ``G``."""
    n = sys.n
    T = len(maps)
    N = n * (T + 1)
    Q = np.zeros((N, N))
    for k, (L0, L1) in enumerate(maps):
        D = np.zeros((n, N))
        D[:, k * n:(k + 1) * n] = -L0
        D[:, (k + 1) * n:(k + 2) * n] = L1
        Q += D.T @ D
    return nm.symmetrize(Q), sla.block_diag(*Cs)


def _match_outputs(C, S, Y):
    """Congruence ``J S J'`` with ``C J = M C`` mapping ``C S C'`` exactly onto ``Y``."""
    Yc = nm.symmetrize(C @ S @ C.T)
    M = nm.psd_sqrt(Y) @ nm.psd_inv_sqrt(Yc)
    J = np.eye(C.shape[1]) + np.linalg.pinv(C) @ (M - np.eye(len(M))) @ C
    return nm.symmetrize(J @ S @ J.T)


def _covariances_barrier(Q, G, sizes, Ys, gap_tol, mu=20.0, max_newton=500):
    """Log-barrier Newton method on the dual of the joint covariance problem

        min Tr(Q S)  s.t.  S >= 0,  G_k S G_k' = Y_k,

    whose dual is  max sum <Lam_k, Y_k>  s.t.  Q - sum G_k' Lam_k G_k >= 0.
    Each centring point gives the primal iterate ``S = (Q - G' Lam G)^{-1} / t``.
    """
    # directions that are costless and invisible in every output carry no
    # information; drop them so that the dual has an interior
    U = sla.null_space(np.vstack([Q, G]))
    if U.shape[1]:
        R = sla.null_space(U.T)
        Q, G = R.T @ Q @ R, G @ R
    else:
        R = None
    N = len(Q)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    # full within-block entries (i, j) and the symmetric coordinates behind them
    I, J, cols = [], [], []
    col = 0
    for k, p in enumerate(sizes):
        o = offs[k]
        index = {}
        for i in range(p):
            for j in range(i, p):
                index[i, j] = index[j, i] = col
                col += 1
        for i in range(p):
            for j in range(p):
                I.append(o + i)
                J.append(o + j)
                cols.append(index[i, j])
    I, J = np.asarray(I), np.asarray(J)
    P = np.zeros((len(I), col))
    P[np.arange(len(I)), cols] = 1.0
    b = P.T @ np.concatenate([Y.ravel() for Y in Ys])
    diag = P.T @ (I == J).astype(float)

    def mat(y):
        lam = np.zeros((len(G), len(G)))
        lam[I, J] = P @ y
        return nm.symmetrize(Q - G.T @ lam @ G)

    def chol(y):
        try:
            return np.linalg.cholesky(mat(y))
        except np.linalg.LinAlgError:
            return None

    scale = max(np.trace(Q) / N, 1e-12)
    y = -scale * diag
    while chol(y) is None:
        y *= 2.0
        if np.max(np.abs(y)) > 1e12 * scale:
            raise InfeasibleConstraint("no interior point for the covariance problem")
    t = 1.0 / scale
    newton = 0
    floor = False
    centre = None
    while not floor:
        for _ in range(max_newton):
            L = chol(y)
            Lg = sla.solve_triangular(L, G.T, lower=True)
            Z = Lg.T @ Lg
            grad = t * b - P.T @ Z[I, J]
            A = Z[np.ix_(J, I)]
            H = -P.T @ (A * A.T) @ P
            d = -np.linalg.solve(H, grad)
            dec = float(grad @ d)
            newton += 1
            if dec < 1e-8:
                break
            f0 = t * b @ y + 2.0 * np.sum(np.log(np.diag(L)))
            s = 1.0
            for _ in range(60):
                Ln = chol(y + s * d)
                fn = -np.inf if Ln is None else t * b @ (y + s * d) + 2.0 * np.sum(np.log(np.diag(Ln)))
                if fn >= f0 + 0.25 * s * dec:
                    break
                s *= 0.5
            if not fn > f0 + 0.25 * s * dec:
                # round-off: the barrier cannot be resolved further at this t
                floor = dec > 1e-5
                break
            y = y + s * d
        else:
            raise NoConvergence(f"barrier centring did not settle in {max_newton} Newton steps")
        if floor:
            break
        centre = (t, y.copy())
        if N / t < gap_tol * max(1.0, abs(float(b @ y))):
            break
        t *= mu
    if centre is None:
        raise NoConvergence("barrier centring hit round-off before the first centre")
    # the primal point is only accurate at a well-centred iterate
    t, y = centre
    L = chol(y)
    Li = sla.solve_triangular(L, np.eye(N), lower=True)
    S = Li.T @ Li / t
    if R is not None:
        S = R @ S @ R.T
    return nm.symmetrize(S), newton


def _covariance_descent(params, maps, theta, tol, max_sweeps):
    """Block coordinate descent: each block (one time index) is minimised by
    BFGS over its free Cholesky-factor entries with the others fixed."""
    T = len(maps)
    covs = [par.covariance(th) for par, th in zip(params, theta)]

    def local(k, cov_k):
        val = 0.0
        grad = np.zeros_like(cov_k)
        if k > 0:
            L0, L1 = maps[k - 1]
            v, _, g1 = bures_with_gradients(L0 @ covs[k - 1] @ L0.T, L1 @ cov_k @ L1.T)
            val += v
            grad += L1.T @ g1 @ L1
        if k < T:
            L0, L1 = maps[k]
            v, g0, _ = bures_with_gradients(L0 @ cov_k @ L0.T, L1 @ covs[k + 1] @ L1.T)
            val += v
            grad += L0.T @ g0 @ L0
        return val, grad

    obj = _chain_cost(covs, maps)
    for _ in range(max_sweeps):
        for k, par in enumerate(params):
            if par.free == 0:
                continue

            def f(th, k=k, par=par):
                val, grad = local(k, par.covariance(th))
                return val, par.gradient(th, grad)

            res = minimize(f, theta[k], jac=True, method="BFGS", options={"gtol": 1e-10})
            if np.isfinite(res.fun) and res.fun <= f(theta[k])[0]:
                theta[k] = res.x
            covs[k] = par.covariance(theta[k])
        new = _chain_cost(covs, maps)
        improvement = obj - new
        obj = new
        if improvement < tol:
            return np.stack(covs), obj
    raise NoConvergence(f"covariance descent did not settle in {max_sweeps} sweeps")


def _chain_cost(covs, maps) -> float:
    return sum(bures_cost(L0 @ covs[k] @ L0.T, L1 @ covs[k + 1] @ L1.T) for k, (L0, L1) in enumerate(maps))


def infer_state_covariances(sys: LinearSystem, output_covs, *, method: str = "barrier", tol: float = 1e-9,
                            max_sweeps: int = 10_000, return_objective: bool = False):
    """State covariances minimising the chained whitened Bures cost under
    ``C(k) Sigma_k C(k)' = output_covs[k]``.

    ``method="descent"`` runs block coordinate descent over Cholesky-factor
    parameters that satisfy the constraints by construction, starting from
    the minimal completion; it stops when a full sweep improves the objective
    by less than ``tol``. From a poor start it can stall on the non-smooth
    boundary of the cone.

    ``method="barrier"`` (default) first solves the equivalent joint
    semidefinite problem over the stacked chain covariance (a chain is
    chordal, so positivity of consecutive pairs is enough) by a dual
    log-barrier Newton method, then runs the same descent from that point.
    """
    if method not in ("barrier", "descent"):
        raise ValueError(f"unknown method {method!r}")
    Ys = [nm.as_matrix(S, "output covariance") for S in output_covs]
    T = len(Ys) - 1
    if T < 1:
        raise ValueError("need at least two observation times")
    Cs = _output_maps(sys, T)
    params = []
    for k, (C, Y) in enumerate(zip(Cs, Ys)):
        if Y.shape != (C.shape[0], C.shape[0]):
            raise DimensionMismatch(f"output covariance {k} has shape {Y.shape}")
        params.append(CovarianceParametrization(C, _positive_definite(Y, f"output covariance {k}")))
    maps = whitening(sys, T)
    n = sys.n
    theta = [par.initial() for par in params]
    if method == "barrier":
        Q, G = _chain_problem(sys, Cs, maps)
        S, _ = _covariances_barrier(Q, G, [C.shape[0] for C in Cs], Ys, gap_tol=BARRIER_GAP)
        start = []
        for k, (C, Y, par) in enumerate(zip(Cs, Ys, params)):
            try:
                start.append(par.parameters(_match_outputs(C, S[k * n:(k + 1) * n, k * n:(k + 1) * n], Y)))
            except (np.linalg.LinAlgError, NotPsd):
                start.append(par.initial())
        if _chain_cost([par.covariance(th) for par, th in zip(params, start)], maps) < \
                _chain_cost([par.covariance(th) for par, th in zip(params, theta)], maps):
            theta = start
    covs, obj = _covariance_descent(params, maps, theta, tol, max_sweeps)
    return (covs, obj) if return_objective else covs


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class GaussianTrack:
    times: np.ndarray
    means: np.ndarray  # (len(times), n)
    covariances: np.ndarray  # (len(times), n, n)
    state_means: np.ndarray  # per observation time
    state_covariances: np.ndarray
    interpolants: tuple
    transport_cost: float

    def output(self, C) -> tuple:
        C = nm.as_matrix(C, "C")
        return self.means @ C.T, C @ self.covariances @ C.T


def track_gaussian(sys: LinearSystem, outputs, samples_per_interval: int = SAMPLES_PER_INTERVAL) -> GaussianTrack:
    """Two-stage inference followed by per-interval Gaussian interpolation."""
    outputs = list(outputs)
    T = len(outputs) - 1
    means = infer_state_means(sys, [g.mean for g in outputs])
    covs, _ = infer_state_covariances(sys, [g.cov for g in outputs], return_objective=True)
    interps = []
    cost = 0.0
    maps = whitening(sys, T)
    for k in range(T):
        g0 = GaussianMeasure(means[k], covs[k])
        g1 = GaussianMeasure(means[k + 1], covs[k + 1])
        interps.append(gaussian_interpolant(sys, g0, g1, float(k), float(k + 1)))
        L0, L1 = maps[k]
        d = L1 @ means[k + 1] - L0 @ means[k]
        cost += 0.5 * (d @ d + bures_cost(L0 @ covs[k] @ L0.T, L1 @ covs[k + 1] @ L1.T))
    times, mus, sigmas = [], [], []
    for k, ip in enumerate(interps):
        for j in range(samples_per_interval):
            t = k + j / samples_per_interval
            times.append(t)
            mus.append(ip.mean(t))
            sigmas.append(ip.covariance(t))
    times.append(float(T))
    mus.append(interps[-1].mean(float(T)))
    sigmas.append(interps[-1].covariance(float(T)))
    return GaussianTrack(np.asarray(times), np.stack(mus), np.stack(sigmas), means, covs,
                         tuple(interps), float(cost))
