"""Shared generators and independent reference computations for the tests."""
import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from ensemble_ot import LinearSystem


def random_spd(rng, n, floor=0.2):
    M = rng.normal(size=(n, n))
    return M @ M.T + floor * np.eye(n)


def random_controllable(rng, n=None, m=None, scale=1.0, max_cond=None):
    """Constant (A, B) pair with a well-conditioned controllability matrix and,
    if ``max_cond`` is given, a unit-horizon Gramian of bounded condition."""
    while True:
        n_ = n or int(rng.integers(2, 5))
        m_ = m or int(rng.integers(1, n_ + 1))
        A = scale * rng.normal(size=(n_, n_))
        B = rng.normal(size=(n_, m_))
        K = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n_)])
        if np.linalg.svd(K, compute_uv=False)[-1] <= 1e-2:
            continue
        if max_cond is None or np.linalg.cond(expm_gramian(A, B, 1.0)) <= max_cond:
            return LinearSystem(A, B)


def expm_gramian(A, B, T):
    """W(T, 0) of a constant pair by adaptive quadrature of expm."""
    val, _ = quad_vec(lambda s: expm(A * (T - s)) @ B @ B.T @ expm(A * (T - s)).T, 0.0, T, epsabs=1e-13, epsrel=1e-12)
    return val


def double_integrator():
    return LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]])


def random_pair(rng, observable, n=None, p=None):
    """(A, C) with known observability, built from a rotated Kalman form."""
    n = n or int(rng.integers(2, 6))
    p = p or int(rng.integers(1, n + 1))
    if observable:
        return rng.normal(size=(n, n)), rng.normal(size=(p, n))
    r = int(rng.integers(0, n))  # dimension of the observable part
    A = rng.normal(size=(n, n))
    A[:r, r:] = 0.0
    C = np.zeros((p, n))
    C[:, :r] = rng.normal(size=(p, r))
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q @ A @ Q.T, C @ Q.T
