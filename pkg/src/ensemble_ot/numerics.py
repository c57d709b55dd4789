"""Shared numerical kernels: fixed-step RK4, PSD matrix functions, equality QP."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NonFiniteState, NotPsd, NotSymmetric, SingularKkt

DEFAULT_STEPS_PER_UNIT = 1000
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array (scalars become 1x1, vectors become rows)."""
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState(f"{name} has non-finite entries")
    return arr


def as_vector(value, name: str = "vector") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteState(f"{name} has non-finite entries")
    return arr


def symmetrize(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + np.swapaxes(S, -1, -2))


@dataclass(frozen=True)
class OdeSolution:
    times: np.ndarray
    states: np.ndarray  # states[i] is the state at times[i]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_step(rhs: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_ode(rhs: Callable, x0, t0: float, t1: float, steps: int) -> OdeSolution:
    """Classic RK4 with ``steps`` uniform steps on ``[t0, t1]``.

    ``x0`` may be an array of any shape (matrix ODEs are integrated as-is);
    ``rhs(t, x)`` must return an array of the same shape.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t1 < t0:
        raise ValueError("t0 must not exceed t1")
    x = np.array(x0, dtype=float)
    times = np.linspace(t0, t1, steps + 1)
    states = np.empty((steps + 1,) + x.shape)
    states[0] = x
    h = (t1 - t0) / steps
    for i in range(steps):
        x = rk4_step(rhs, times[i], x, h)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state became non-finite at t={times[i + 1]:.6g}")
        states[i + 1] = x
    return OdeSolution(times, states)


def rk4_propagator(A: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 map for the constant-coefficient ODE x' = A x.

    Applying RK4 to a linear autonomous field is exactly multiplication by
    the degree-4 Taylor polynomial of exp(hA); powering it reproduces the
    integrator without evaluating stages.
    """
    n = A.shape[0]
    hA = h * A
    M = np.eye(n)
    term = np.eye(n)
    for k in range(1, 5):
        term = term @ hA / k
        M = M + term
    return M


def check_symmetric(S: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    S = as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {S.shape}")
    if S.size and np.max(np.abs(S - S.T)) > tol:
        raise NotSymmetric(f"asymmetry {np.max(np.abs(S - S.T)):.3g} exceeds {tol:g}")
    return symmetrize(S)


def _psd_eigh(S: np.ndarray, tol: float):
    S = check_symmetric(S)
    w, V = np.linalg.eigh(S)
    if w.size and w[0] < -tol:
        raise NotPsd(f"smallest eigenvalue {w[0]:.3g} below -{tol:g}")
    return np.clip(w, 0.0, None), V


def psd_sqrt(S, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues in ``[-tol, 0)`` are clamped to zero."""
    w, V = _psd_eigh(S, tol)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def psd_inv_sqrt(S, tol: float = PSD_TOL, rcond: float = 1e-12) -> np.ndarray:
    """Inverse square root through the same eigenbasis as :func:`psd_sqrt`."""
    w, V = _psd_eigh(S, tol)
    if w.size and w[0] <= rcond * max(w[-1], np.finfo(float).tiny):
        raise NotPsd("matrix is singular; inverse square root undefined")
    return symmetrize((V / np.sqrt(w)) @ V.T)


def psd_eigenvalues(S) -> np.ndarray:
    return np.linalg.eigvalsh(symmetrize(as_matrix(S)))


def solve_equality_qp(Q, q, Aeq, beq, pivot_tol: float = 1e-12) -> np.ndarray:
    """Minimise ``0.5 x'Qx + q'x`` subject to ``Aeq x = beq`` by a direct KKT solve."""
    Q = as_matrix(Q, "Q")
    Aeq = as_matrix(Aeq, "Aeq")
    q = as_vector(q, "q")
    beq = as_vector(beq, "beq")
    n = Q.shape[0]
    k = Aeq.shape[0]
    if Q.shape != (n, n) or q.shape != (n,) or Aeq.shape[1] != n or beq.shape != (k,):
        raise DimensionMismatch("inconsistent QP dimensions")
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = Q
    kkt[:n, n:] = Aeq.T
    kkt[n:, :n] = Aeq
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)  # singularity is reported below
        lu, piv = sla.lu_factor(kkt, check_finite=False)
    scale = max(np.max(np.abs(kkt)), 1.0)
    if np.min(np.abs(np.diag(lu))) < pivot_tol * scale:
        raise SingularKkt("KKT matrix is numerically singular")
    sol = sla.lu_solve((lu, piv), np.concatenate([-q, beq]), check_finite=False)
    return sol[:n]
