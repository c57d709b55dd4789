"""Linear time-varying system primitives.

Time-varying coefficient matrices are given as constants, as
:class:`PiecewiseConstant` tables, or as plain callables ``t -> ndarray``.
Integration grids are split at table breakpoints so each RK4 step sees a
single constant value (right limits apply exactly at a breakpoint).

Gramian convention: ``controllability_gramian(sys, t, t')`` integrates
``Phi(t, tau) B B' Phi(t, tau)'`` over ``[min(t, t'), max(t, t')]`` with the
evaluation point ``t``, so every Gramian is PSD. The minimum energy between
``(x0, t0)`` and ``(x1, t1)`` is then the same number whether it is written
with ``W(t1, t0)`` and ``Phi(t1, t0)`` or with ``W(t0, t1)`` and ``Phi(t0, t1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import numerics as nm
from .errors import DimensionMismatch, NonFiniteState, NotControllable

CONTROLLABILITY_RTOL = 1e-12
RANK_RTOL = 1e-10


class PiecewiseConstant:
    """Matrix-valued step function.

    ``values[i]`` holds on ``[times[i], times[i+1])``; before ``times[0]`` the
    first value is used and after the last breakpoint the last value.
    """

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float).ravel()
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 2:
            vals = vals[:, None, :]
        if vals.ndim != 3 or vals.shape[0] != self.times.size or self.times.size == 0:
            raise DimensionMismatch("piecewise table needs one matrix per breakpoint time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("piecewise table times must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteState("piecewise table has non-finite entries")
        self.values = vals

    @property
    def shape(self):
        return self.values.shape[1:]

    @property
    def breakpoints(self) -> np.ndarray:
        return self.times[1:]

    def __call__(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[min(max(idx, 0), len(self.values) - 1)]

    def __repr__(self):
        return f"PiecewiseConstant(times={self.times.tolist()}, shape={self.shape})"


MatrixSpec = Union[np.ndarray, PiecewiseConstant, Callable[[float], np.ndarray]]


def _coerce(value, name):
    if isinstance(value, PiecewiseConstant) or (callable(value) and not isinstance(value, np.ndarray)):
        return value
    return nm.as_matrix(value, name)


def _shape_of(fn):
    if isinstance(fn, np.ndarray):
        return fn.shape
    if isinstance(fn, PiecewiseConstant):
        return fn.shape
    return np.atleast_2d(np.asarray(fn(0.0), dtype=float)).shape


def _evaluate(fn, t):
    if isinstance(fn, np.ndarray):
        return fn
    if isinstance(fn, PiecewiseConstant):
        return fn(t)
    return np.atleast_2d(np.asarray(fn(t), dtype=float))


def _is_stepwise(fn) -> bool:
    return isinstance(fn, (np.ndarray, PiecewiseConstant))


@dataclass(frozen=True)
class LinearSystem:
    """``x' = A(t) x + B(t) u``, ``y = C(t) x``.

    ``C`` defaults to the identity (full-state output).
    """

    A: MatrixSpec
    B: MatrixSpec
    C: MatrixSpec = None
    steps_per_unit: int = nm.DEFAULT_STEPS_PER_UNIT

    def __post_init__(self):
        A = _coerce(self.A, "A")
        B = _coerce(self.B, "B")
        n = _shape_of(A)[0]
        C = np.eye(n) if self.C is None else _coerce(self.C, "C")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        sa, sb, sc = _shape_of(A), _shape_of(B), _shape_of(C)
        if sa != (n, n):
            raise DimensionMismatch(f"A must be square, got {sa}")
        if sb[0] != n:
            raise DimensionMismatch(f"B has {sb[0]} rows, expected {n}")
        if sc[1] != n:
            raise DimensionMismatch(f"C has {sc[1]} columns, expected {n}")
        if self.steps_per_unit < 1:
            raise ValueError("steps_per_unit must be positive")

    @property
    def n(self) -> int:
        return _shape_of(self.A)[0]

    @property
    def m(self) -> int:
        return _shape_of(self.B)[1]

    @property
    def p(self) -> int:
        return _shape_of(self.C)[0]

    def A_at(self, t: float) -> np.ndarray:
        return _evaluate(self.A, t)

    def B_at(self, t: float) -> np.ndarray:
        return _evaluate(self.B, t)

    def C_at(self, t: float) -> np.ndarray:
        return _evaluate(self.C, t)

    @property
    def is_stepwise(self) -> bool:
        """True when A and B are constant or piecewise-constant tables."""
        return _is_stepwise(self.A) and _is_stepwise(self.B)

    def breakpoints_in(self, lo: float, hi: float) -> np.ndarray:
        pts = [fn.breakpoints for fn in (self.A, self.B, self.C) if isinstance(fn, PiecewiseConstant)]
        if not pts:
            return np.empty(0)
        allpts = np.unique(np.concatenate(pts))
        return allpts[(allpts > lo) & (allpts < hi)]

    def segments(self, lo: float, hi: float):
        edges = np.concatenate([[lo], self.breakpoints_in(lo, hi), [hi]])
        return list(zip(edges[:-1], edges[1:]))

    def local(self, a: float, b: float):
        """Evaluators of (A, B) valid on the step ``[a, b]``.

        Tables are read at the step midpoint so a step that ends on a
        breakpoint keeps the value of the segment it belongs to.
        """
        mid = 0.5 * (a + b)

        def freeze(fn):
            if _is_stepwise(fn):
                value = _evaluate(fn, mid)
                return lambda t: value
            return lambda t: _evaluate(fn, t)

        return freeze(self.A), freeze(self.B)

    def steps_for(self, length: float, even: bool = False) -> int:
        k = max(1, int(math.ceil(self.steps_per_unit * abs(length) - 1e-9)))
        if even and k % 2:
            k += 1
        return max(k, 2) if even else k

    def shifted(self, offset: float) -> "LinearSystem":
        """The same system with time origin moved to ``offset``."""

        def shift(fn):
            if isinstance(fn, np.ndarray):
                return fn
            if isinstance(fn, PiecewiseConstant):
                return PiecewiseConstant(fn.times - offset, fn.values)
            return lambda t: fn(t + offset)

        return LinearSystem(shift(self.A), shift(self.B), shift(self.C), self.steps_per_unit)


# ---------------------------------------------------------------------------
# transition matrices on grids


def _transition_nodes(sys: LinearSystem, lo: float, hi: float, even: bool = False):
    """Per-segment grids ``taus`` and ``Psi[i] = Phi(taus[i], lo)``."""
    out = []
    start = np.eye(sys.n)
    for a, b in sys.segments(lo, hi):
        k = sys.steps_for(b - a, even=even)
        taus = np.linspace(a, b, k + 1)
        h = (b - a) / k
        if _is_stepwise(sys.A):
            M = nm.rk4_propagator(sys.A_at(0.5 * (a + b)), h)
            psi = np.empty((k + 1, sys.n, sys.n))
            psi[0] = start
            for i in range(k):
                psi[i + 1] = M @ psi[i]
            if not np.all(np.isfinite(psi)):
                raise NonFiniteState("state transition matrix became non-finite")
        else:
            Afn, _ = sys.local(a, b)
            psi = nm.integrate_ode(lambda t, X: Afn(t) @ X, start, a, b, k).states
        out.append((taus, psi))
        start = psi[-1]
    return out


def state_transition(sys: LinearSystem, t: float, t_prime: float) -> np.ndarray:
    """``Phi(t, t')``: maps the state at ``t'`` to the state at ``t``."""
    if t == t_prime:
        return np.eye(sys.n)
    if t > t_prime:
        if isinstance(sys.A, np.ndarray):
            k = sys.steps_for(t - t_prime)
            return np.linalg.matrix_power(nm.rk4_propagator(sys.A, (t - t_prime) / k), k)
        return _transition_nodes(sys, t_prime, t)[-1][1][-1].copy()
    return np.linalg.inv(state_transition(sys, t_prime, t))


def _simpson_weights(k: int, h: float) -> np.ndarray:
    w = np.ones(k + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _values_on(fn, taus, a, b):
    if _is_stepwise(fn):
        return np.broadcast_to(_evaluate(fn, 0.5 * (a + b)), (len(taus),) + _shape_of(fn))
    return np.stack([_evaluate(fn, t) for t in taus])


def controllability_gramian(sys: LinearSystem, t: float, t_prime: float) -> np.ndarray:
    """``W(t, t')`` over ``[min, max]`` evaluated at ``t`` (composite Simpson)."""
    if t == t_prime:
        raise ValueError("controllability Gramian needs t != t'")
    lo, hi = min(t, t_prime), max(t, t_prime)
    acc = np.zeros((sys.n, sys.n))
    psi_end = None
    for taus, psi in _transition_nodes(sys, lo, hi, even=True):
        a, b = taus[0], taus[-1]
        G = np.linalg.solve(psi, _values_on(sys.B, taus, a, b))  # Phi(lo, tau) B(tau)
        F = G @ np.swapaxes(G, 1, 2)
        acc += np.tensordot(_simpson_weights(len(taus) - 1, taus[1] - taus[0]), F, axes=1)
        psi_end = psi[-1]
    if t == hi:
        acc = psi_end @ acc @ psi_end.T
    return nm.symmetrize(acc)


def observability_gramian(sys: LinearSystem, t0: float, t1: float) -> np.ndarray:
    """``M(t0, t1) = int Phi(tau, t0)' C' C Phi(tau, t0) dtau``."""
    if not t0 < t1:
        raise ValueError("observability Gramian needs t0 < t1")
    acc = np.zeros((sys.n, sys.n))
    for taus, psi in _transition_nodes(sys, t0, t1, even=True):
        a, b = taus[0], taus[-1]
        H = _values_on(sys.C, taus, a, b) @ psi
        F = np.swapaxes(H, 1, 2) @ H
        acc += np.tensordot(_simpson_weights(len(taus) - 1, taus[1] - taus[0]), F, axes=1)
    return nm.symmetrize(acc)


def gramian_inverse(W: np.ndarray, rtol: float = CONTROLLABILITY_RTOL) -> np.ndarray:
    """Inverse of a controllability Gramian, or NotControllable if it is singular."""
    w, V = np.linalg.eigh(nm.symmetrize(W))
    if w[-1] <= 0 or w[0] < rtol * w[-1]:
        raise NotControllable(
            f"Gramian is numerically singular (eigenvalues {w[0]:.3g} .. {w[-1]:.3g})"
        )
    return nm.symmetrize((V / w) @ V.T)


def min_energy_cost(sys: LinearSystem, x0, x1, t0: float, t1: float) -> float:
    x0 = nm.as_vector(x0, "x0")
    x1 = nm.as_vector(x1, "x1")
    if x0.size != sys.n or x1.size != sys.n:
        raise DimensionMismatch("boundary states must match the state dimension")
    Winv = gramian_inverse(controllability_gramian(sys, t1, t0))
    d = x1 - state_transition(sys, t1, t0) @ x0
    return float(max(d @ Winv @ d, 0.0))


def min_energy_maps(sys: LinearSystem, t0: float, t1: float, t: float):
    """Matrices ``(P, Q)`` with ``x(t) = P x0 + Q x1`` on the minimum-energy path."""
    if t == t0:
        return np.eye(sys.n), np.zeros((sys.n, sys.n))
    Winv = gramian_inverse(controllability_gramian(sys, t1, t0))
    Wt = controllability_gramian(sys, t, t0)
    Q = Wt @ state_transition(sys, t1, t).T @ Winv
    P = state_transition(sys, t, t0) - Q @ state_transition(sys, t1, t0)
    return P, Q


# ---------------------------------------------------------------------------
# minimum-energy feedback


@dataclass(frozen=True)
class ClosedLoopTrajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    energy: float

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


class FeedbackLaw:
    """``u*(t, x) = B(t)' W(t, t1)^{-1} (Phi(t, t1) x1 - x)`` on ``[t0, t1)``.

    The law is tabulated through a backward sweep of ``F(t) = Phi(t1, t)`` and
    ``R(t) = W(t1, t)`` on a grid that refines geometrically towards ``t1``,
    where the gain grows without bound. Using the identity
    ``W(t, t1)^{-1} Phi(t, t1) = F' R^{-1}`` the law reads
    ``u = B' F' R^{-1} (x1 - F x)``.
    """

    def __init__(self, sys: LinearSystem, x1, t0: float, t1: float, *,
                 step_ratio: float = 0.05, end_gap: float = 1e-10, cond_cap: float = 1e9):
        if not t0 < t1:
            raise ValueError("feedback law needs t0 < t1")
        self.sys = sys
        self.x1 = nm.as_vector(x1, "x1")
        if self.x1.size != sys.n:
            raise DimensionMismatch("target state dimension mismatch")
        self.t0, self.t1 = float(t0), float(t1)
        gramian_inverse(controllability_gramian(sys, t1, t0))  # controllability check

        h0 = 1.0 / sys.steps_per_unit
        t_end = t1 - end_gap * (t1 - t0)
        bps = list(sys.breakpoints_in(t0, t_end))
        nodes = [self.t0]
        t = self.t0
        while t < t_end:
            nxt = min(t + min(h0, step_ratio * (t1 - t)), t_end)
            while bps and bps[0] <= t:
                bps.pop(0)
            if bps and bps[0] < nxt:
                nxt = bps.pop(0)
            nodes.append(nxt)
            t = nxt
        self.nodes = np.asarray(nodes)
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        sweep = np.sort(np.concatenate([self.nodes, mids, [self.t1]]))
        self._sweep_t = sweep
        self._sweep_y = self._backward_sweep(sweep)
        k = len(self.nodes)
        # sweep = [n0, m0, n1, m1, ..., n_{k-1}, t1]
        self._F_nodes = self._sweep_y[0:2 * k:2, 0]
        self._R_nodes = self._sweep_y[0:2 * k:2, 1]
        self._F_mid = self._sweep_y[1:2 * k - 1:2, 0]
        self._R_mid = self._sweep_y[1:2 * k - 1:2, 1]
        # Close to t1, W(t1, t) degenerates at different rates along different
        # directions and pointwise solves lose all precision. The closed loop
        # is integrated while cond(W) stays below the cap; the last stretch
        # holds the costate W^{-1} e fixed, which is exactly the feedback
        # trajectory continued by the principle of optimality.
        self._stop = k - 1
        for i in range(1, k):
            w = np.linalg.eigvalsh(self._R_nodes[i])
            if w[0] <= 0 or w[-1] > cond_cap * w[0]:
                self._stop = i - 1 if i > 1 else 1
                break

    def _sweep_rhs(self, a, b):
        Afn, Bfn = self.sys.local(a, b)

        def rhs(t, Y):
            F, R = Y
            FB = F @ Bfn(t)
            # d/dt of (Phi(t1,t), W(t1,t)), integrated with negative time step
            return np.stack([-F @ Afn(t), -FB @ FB.T])

        return rhs

    def _backward_sweep(self, sweep):
        if self.sys.is_stepwise:
            return self._backward_sweep_stepwise(sweep)
        n = self.sys.n
        Y = np.stack([np.eye(n), np.zeros((n, n))])
        out = np.empty((len(sweep), 2, n, n))
        out[-1] = Y
        for i in range(len(sweep) - 1, 0, -1):
            a, b = sweep[i - 1], sweep[i]
            Y = nm.rk4_step(self._sweep_rhs(a, b), b, Y, a - b)
            Y[1] = nm.symmetrize(Y[1])
            out[i - 1] = Y
        if not np.all(np.isfinite(out)):
            raise NonFiniteState("feedback sweep became non-finite")
        return out

    def _backward_sweep_stepwise(self, sweep):
        """Same RK4 recursion, batched over steps when A and B are stepwise.

        On a step of length h with constant A, Q = B B', RK4 applied backwards
        gives ``F <- F T4(hA)`` and ``R <- R + h/6 sum_s w_s F P_s Q P_s' F'``
        with stage polynomials ``P_s`` of hA.
        """
        n = self.sys.n
        N = len(sweep) - 1
        a, b = sweep[:-1], sweep[1:]
        h = b - a
        mids = 0.5 * (a + b)
        A = np.stack([self.sys.A_at(t) for t in mids]) if isinstance(self.sys.A, PiecewiseConstant) \
            else np.broadcast_to(self.sys.A, (N, n, n))
        Bm = np.stack([self.sys.B_at(t) for t in mids]) if isinstance(self.sys.B, PiecewiseConstant) \
            else np.broadcast_to(self.sys.B, (N,) + self.sys.B.shape)
        hA = h[:, None, None] * A
        eye = np.eye(n)
        hA2 = hA @ hA
        hA3 = hA2 @ hA
        P2 = eye + 0.5 * hA
        P3 = P2 + 0.25 * hA2
        P4 = eye + hA + 0.5 * hA2 + 0.25 * hA3
        T4 = eye + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
        PB = [Bm, P2 @ Bm, P3 @ Bm, P4 @ Bm]
        weights = (1.0, 2.0, 2.0, 1.0)
        out = np.empty((N + 1, 2, n, n))
        F = eye.copy()
        R = np.zeros((n, n))
        out[N, 0], out[N, 1] = F, R
        for i in range(N - 1, -1, -1):
            inc = np.zeros((n, n))
            for w, stage in zip(weights, PB):
                G = F @ stage[i]
                inc += w * (G @ G.T)
            R = nm.symmetrize(R + (h[i] / 6.0) * inc)
            F = F @ T4[i]
            out[i, 0], out[i, 1] = F, R
        if not np.all(np.isfinite(out)):
            raise NonFiniteState("feedback sweep became non-finite")
        return out

    def _F_R(self, t):
        i = int(np.searchsorted(self._sweep_t, t, side="left"))
        s = self._sweep_t[i]
        Y = self._sweep_y[i]
        if s != t:
            Y = nm.rk4_step(self._sweep_rhs(t, s), s, Y, t - s)
        return Y[0], nm.symmetrize(Y[1])

    def __call__(self, t: float, x) -> np.ndarray:
        if not self.t0 <= t < self.t1:
            raise ValueError(f"feedback law is undefined at t={t} (horizon [{self.t0}, {self.t1}))")
        F, R = self._F_R(t)
        x = np.asarray(x, dtype=float)
        B = self.sys.B_at(t)
        return B.T @ F.T @ np.linalg.solve(R, self.x1 - F @ x)

    def simulate(self, x0) -> ClosedLoopTrajectory:
        """Closed-loop RK4 run from ``(x0, t0)`` to ``t1``.

        The state is carried as the target residual ``e = x1 - Phi(t1, t) x``
        (with ``e' = -F B u``), which keeps full relative precision while the
        residual shrinks to zero; ``x`` is recovered from ``e`` at each node.
        Energy ``int |u|^2 dt`` rides along as an extra state.
        """
        x0 = nm.as_vector(x0, "x0")
        if x0.size != self.sys.n:
            raise DimensionMismatch("initial state dimension mismatch")
        n = self.sys.n
        stop = self._stop
        nodes = self.nodes[:stop + 1]
        e = self.x1 - self._F_nodes[0] @ x0
        energy = 0.0
        states = np.empty((stop + 2, n))
        controls = np.empty((stop + 2, self.sys.m))
        states[0] = x0

        # per stage: input direction F B and gain (R^{-1} F B)' so that u = gain e
        B0 = np.empty((stop, n, self.sys.m))
        Bm = np.empty_like(B0)
        B1 = np.empty_like(B0)
        for j in range(stop):
            _, Bfn = self.sys.local(nodes[j], nodes[j + 1])
            B0[j], Bm[j], B1[j] = Bfn(nodes[j]), Bfn(0.5 * (nodes[j] + nodes[j + 1])), Bfn(nodes[j + 1])
        FB0 = self._F_nodes[:stop] @ B0
        FBm = self._F_mid[:stop] @ Bm
        FB1 = self._F_nodes[1:stop + 1] @ B1
        K0 = np.swapaxes(np.linalg.solve(self._R_nodes[:stop], FB0), 1, 2)
        Km = np.swapaxes(np.linalg.solve(self._R_mid[:stop], FBm), 1, 2)
        K1 = np.swapaxes(np.linalg.solve(self._R_nodes[1:stop + 1], FB1), 1, 2)

        for j in range(stop):
            h = nodes[j + 1] - nodes[j]
            u1 = K0[j] @ e
            k1 = -FB0[j] @ u1
            u2 = Km[j] @ (e + 0.5 * h * k1)
            k2 = -FBm[j] @ u2
            u3 = Km[j] @ (e + 0.5 * h * k2)
            k3 = -FBm[j] @ u3
            u4 = K1[j] @ (e + h * k3)
            k4 = -FB1[j] @ u4
            e = e + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            energy += (h / 6.0) * (u1 @ u1 + 2 * u2 @ u2 + 2 * u3 @ u3 + u4 @ u4)
            controls[j] = u1
            states[j + 1] = np.linalg.solve(self._F_nodes[j + 1], self.x1 - e)
            if not np.all(np.isfinite(e)):
                raise NonFiniteState(f"closed loop diverged at t={nodes[j + 1]:.6g}")
        costate = np.linalg.solve(self._R_nodes[stop], e)
        _, Bfn = self.sys.local(nodes[-1], self.t1)
        controls[stop] = Bfn(nodes[-1]).T @ self._F_nodes[stop].T @ costate
        controls[stop + 1] = Bfn(self.t1).T @ costate
        energy += float(e @ costate)
        states[stop + 1] = self.x1 - e + self._R_nodes[stop] @ costate
        times = np.append(nodes, self.t1)
        return ClosedLoopTrajectory(times, states, controls, float(energy))


def min_energy_control(sys: LinearSystem, x0, x1, t0: float, t1: float) -> FeedbackLaw:
    """Minimum-energy feedback law steering ``(x0, t0)`` to ``(x1, t1)``.

    ``x0`` only serves the controllability/dimension checks; the law itself
    depends on the target alone.
    """
    x0 = nm.as_vector(x0, "x0")
    if x0.size != sys.n:
        raise DimensionMismatch("initial state dimension mismatch")
    return FeedbackLaw(sys, x1, t0, t1)


def expected_min_energy_gaussian(sys: LinearSystem, m0, S0, m1, S1, S01, t0: float, t1: float) -> float:
    """Average minimum energy between jointly Gaussian endpoints (trace formula)."""
    m0, m1 = nm.as_vector(m0, "m0"), nm.as_vector(m1, "m1")
    S0, S1, S01 = nm.as_matrix(S0, "S0"), nm.as_matrix(S1, "S1"), nm.as_matrix(S01, "S01")
    n = sys.n
    if m0.size != n or m1.size != n or S0.shape != (n, n) or S1.shape != (n, n) or S01.shape != (n, n):
        raise DimensionMismatch("moment dimensions must match the state dimension")
    joint = np.block([[S0, S01], [S01.T, S1]])
    if np.min(nm.psd_eigenvalues(joint)) < -1e-10:
        from .errors import NotPsd

        raise NotPsd("joint covariance is not PSD")
    Winv = gramian_inverse(controllability_gramian(sys, t0, t1))
    Phi = state_transition(sys, t0, t1)
    val = (
        np.trace(Winv @ (S0 + np.outer(m0, m0)))
        - 2.0 * np.trace(Phi.T @ Winv @ (S01 + np.outer(m0, m1)))
        + np.trace(Phi.T @ Winv @ Phi @ (S1 + np.outer(m1, m1)))
    )
    return float(val)


# ---------------------------------------------------------------------------
# classical observability


def pivoted_elimination(M, rtol: float = RANK_RTOL):
    """Rank and pivot columns by Gaussian elimination with full pivoting.

    Elimination stops once the largest remaining entry falls below ``rtol``
    times the first pivot.
    """
    M = np.array(nm.as_matrix(M), dtype=float)
    rows, cols = M.shape
    col_index = list(range(cols))
    pivots = []
    first = None
    for r in range(min(rows, cols)):
        sub = np.abs(M[r:, r:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        val = sub[i, j]
        if first is None:
            first = val
        if val == 0.0 or val <= rtol * first:
            break
        i += r
        j += r
        M[[r, i]] = M[[i, r]]
        M[:, [r, j]] = M[:, [j, r]]
        col_index[r], col_index[j] = col_index[j], col_index[r]
        pivots.append(col_index[r])
        M[r + 1:, r:] -= np.outer(M[r + 1:, r] / M[r, r], M[r, r:])
    return len(pivots), sorted(pivots)


def observability_matrix(A, C) -> np.ndarray:
    A = nm.as_matrix(A, "A")
    C = nm.as_matrix(C, "C")
    n = A.shape[0]
    if A.shape != (n, n) or C.shape[1] != n:
        raise DimensionMismatch(f"incompatible shapes A{A.shape}, C{C.shape}")
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable_pair(A, C) -> bool:
    O = observability_matrix(A, C)
    return pivoted_elimination(O)[0] == O.shape[1]
