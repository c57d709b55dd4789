import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from ensemble_ot import GaussianMeasure, Grid, LinearSystem, grid_discretize, lqr_cost_matrix, transport_simplex
from ensemble_ot.errors import DimensionMismatch, InfeasibleConstraint, NotPsd
from ensemble_ot.gaussian_tracking import (
    bures_cost,
    covariance_objective,
    gaussian_interpolant,
    infer_state_covariances,
    infer_state_means,
    riccati_solve,
    track_gaussian,
    whitening,
)
from ensemble_ot.lti_systems import controllability_gramian, state_transition
from helpers import double_integrator, random_controllable, random_spd

MEANS = [-1.0, 3.0, 5.0, -4.0, -7.0]
CASE1 = [3.0, 3.0, 3.0, 3.0, 4.0]
CASE2 = [6.0, 7.0, 3.0, 2.0, 5.0]


def scalar_integrator():
    return LinearSystem([[0.0]], [[1.0]], [[1.0]])


def outputs(variances):
    return [GaussianMeasure([m], [[v]]) for m, v in zip(MEANS, variances)]


def riccati_rhs(sys, t, K):
    A, B = sys.A_at(t), sys.B_at(t)
    return -A.T @ K - K @ A + K @ B @ B.T @ K


def sdp_covariances(sys, Ys):
    """Independent oracle: the chain problem as an SDP with one LMI per interval."""
    T = len(Ys) - 1
    n = sys.n
    S = [cp.Variable((n, n), PSD=True) for _ in range(T + 1)]
    cons, obj = [], 0
    for k, (L0, L1) in enumerate(whitening(sys, T)):
        X = cp.Variable((n, n))
        P0, P1 = L0 @ S[k] @ L0.T, L1 @ S[k + 1] @ L1.T
        cons.append(cp.bmat([[P0, X], [X.T, P1]]) >> 0)
        obj += cp.trace(P0) + cp.trace(P1) - 2 * cp.trace(X)
    for k, Y in enumerate(Ys):
        C = sys.C_at(float(k))
        cons.append(C @ S[k] @ C.T == Y)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=500)
    if prob.status != cp.OPTIMAL:
        # near-singular optima can stall the interior point method; SCS is slower but robust
        prob.solve(solver="SCS", eps=1e-10, max_iters=200_000)
    assert prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    return prob.value


# Riccati


def test_riccati_scalar_equal_variances_is_zero():
    sol = riccati_solve(scalar_integrator(), [[2.0]], [[2.0]])
    assert abs(sol.K0[0, 0]) < 1e-12
    assert np.max(np.abs(sol.K)) < 1e-12


def test_riccati_scalar_closed_form():
    # standard deviations 2 and 1
    sol = riccati_solve(scalar_integrator(), [[4.0]], [[1.0]])
    assert sol.K0[0, 0] == pytest.approx(0.5, abs=1e-12)
    # scalar solution of K' = K^2 from K(0) = k0 is k0 / (1 - k0 t)
    for t in np.linspace(0, 1, 11):
        assert sol.at(t)[0, 0] == pytest.approx(0.5 / (1 - 0.5 * t), abs=1e-6)


def test_riccati_finite_difference_order(rng):
    sys = random_controllable(rng, n=3, m=2, scale=0.5)
    sol = riccati_solve(sys, random_spd(rng, 3, 0.5), random_spd(rng, 3, 0.5))
    ip_times = sol.times
    K = sol.K
    errors = []
    for stride in (4, 2):
        i = len(ip_times) // 2
        h = ip_times[i + stride] - ip_times[i]
        fd = (K[i + stride] - K[i - stride]) / (2 * h)
        errors.append(np.max(np.abs(fd - riccati_rhs(sys, ip_times[i], K[i]))))
    ratio = errors[0] / errors[1]
    assert 3.0 <= ratio <= 5.0


def test_riccati_symmetric(rng):
    for _ in range(5):
        sys = random_controllable(rng, scale=0.5)
        n = sys.n
        sol = riccati_solve(sys, random_spd(rng, n, 0.5), random_spd(rng, n, 0.5))
        assert np.max(np.abs(sol.K - np.swapaxes(sol.K, 1, 2))) < 1e-8


def test_riccati_rejects_indefinite():
    with pytest.raises(NotPsd):
        riccati_solve(scalar_integrator(), [[-1.0]], [[1.0]])


# interpolant


def test_interpolant_endpoints(rng):
    for _ in range(5):
        sys = random_controllable(rng, scale=0.5, max_cond=1e4)
        n = sys.n
        g0 = GaussianMeasure(rng.normal(size=n), random_spd(rng, n, 0.5))
        g1 = GaussianMeasure(rng.normal(size=n), random_spd(rng, n, 0.5))
        ip = gaussian_interpolant(sys, g0, g1)
        assert np.max(np.abs(ip.mean(0.0) - g0.mean)) < 1e-6
        assert np.max(np.abs(ip.covariance(0.0) - g0.cov)) < 1e-6
        assert np.max(np.abs(ip.mean(1.0) - g1.mean)) < 1e-6
        assert np.max(np.abs(ip.covariance(1.0) - g1.cov)) < 1e-6


def test_interpolant_scalar_translation():
    ip = gaussian_interpolant(scalar_integrator(), GaussianMeasure([1.0], [[3.0]]), GaussianMeasure([-2.0], [[3.0]]))
    for t in np.linspace(0, 1, 17):
        assert ip.mean(t)[0] == pytest.approx(1.0 - 3.0 * t, abs=1e-6)
        assert ip.covariance(t)[0, 0] == pytest.approx(3.0, abs=1e-6)


def test_interpolant_scalar_geodesic():
    ip = gaussian_interpolant(scalar_integrator(), GaussianMeasure([0.0], [[4.0]]), GaussianMeasure([0.0], [[1.0]]))
    for t in np.linspace(0, 1, 17):
        assert ip.covariance(t)[0, 0] == pytest.approx((2.0 - t) ** 2, abs=1e-4)


@settings(max_examples=15)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_interpolant_scalar_geodesic_property(s0, s1, m0, m1):
    ip = gaussian_interpolant(scalar_integrator(), GaussianMeasure([m0], [[s0 * s0]]), GaussianMeasure([m1], [[s1 * s1]]))
    for t in (0.1, 0.35, 0.5, 0.8):
        assert ip.covariance(t)[0, 0] == pytest.approx(((1 - t) * s0 + t * s1) ** 2, abs=1e-4)
        assert ip.mean(t)[0] == pytest.approx((1 - t) * m0 + t * m1, abs=1e-6)


def test_mean_dynamics_finite_difference(rng):
    sys = random_controllable(rng, n=3, m=1, scale=0.5)
    g0 = GaussianMeasure(rng.normal(size=3), random_spd(rng, 3, 0.5))
    g1 = GaussianMeasure(rng.normal(size=3), random_spd(rng, 3, 0.5))
    ip = gaussian_interpolant(sys, g0, g1)
    B = sys.B_at(0.0)
    for t in (0.25, 0.5, 0.75):
        rhs = (sys.A_at(t) - B @ B.T @ ip.K(t)) @ ip.mean(t) + B @ B.T @ ip.m(t)
        errors = []
        for h in (4e-3, 2e-3):
            fd = (ip.mean(t + h) - ip.mean(t - h)) / (2 * h)
            errors.append(np.max(np.abs(fd - rhs)))
        assert errors[1] < 1e-4 * max(1.0, np.max(np.abs(rhs)))
        assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_covariance_matches_lyapunov_oracle(rng):
    """Closed-form covariance against integrating the closed-loop Lyapunov equation."""
    sys = random_controllable(rng, n=2, m=1, scale=0.5)
    S0, S1 = random_spd(rng, 2, 0.5), random_spd(rng, 2, 0.5)
    ip = gaussian_interpolant(sys, GaussianMeasure(np.zeros(2), S0), GaussianMeasure(np.zeros(2), S1))
    B = sys.B_at(0.0)

    def rhs(t, y):
        S = y.reshape(2, 2)
        F = sys.A_at(t) - B @ B.T @ ip.K(t)
        return (F @ S + S @ F.T).ravel()

    times = np.linspace(0, 1, 6)
    sol = solve_ivp(rhs, (0, 1), S0.ravel(), t_eval=times, rtol=1e-10, atol=1e-12)
    for t, y in zip(times, sol.y.T):
        assert np.max(np.abs(ip.covariance(t) - y.reshape(2, 2))) < 1e-5


def test_covariance_psd_along_path(rng):
    for _ in range(4):
        sys = random_controllable(rng, scale=0.5)
        n = sys.n
        ip = gaussian_interpolant(sys, GaussianMeasure(np.zeros(n), random_spd(rng, n, 0.3)),
                                  GaussianMeasure(np.zeros(n), random_spd(rng, n, 0.3)))
        for t in np.linspace(0, 1, 21):
            assert np.linalg.eigvalsh(ip.covariance(t))[0] >= -1e-8


def test_interpolant_rejects_wrong_dimension():
    with pytest.raises(DimensionMismatch):
        gaussian_interpolant(double_integrator(), GaussianMeasure([0.0], [[1.0]]), GaussianMeasure([0.0], [[1.0]]))


# Bures cost


def test_bures_scalar_and_commuting():
    assert bures_cost([[1.0]], [[4.0]]) == pytest.approx(1.0, abs=1e-12)
    a, b = np.diag([1.0, 9.0]), np.diag([4.0, 1.0])
    assert bures_cost(a, b) == pytest.approx((1 - 2) ** 2 + (3 - 1) ** 2, abs=1e-12)


def test_bures_near_singular_accuracy(rng):
    """Nuclear-norm evaluation against the trace formula in extended precision."""
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    V = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    S0 = V @ np.diag([1e-9, 2.0, 500.0]) @ V.T
    W = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    S1 = W @ np.diag([3e-9, 1.0, 450.0]) @ W.T

    def sqrtm(M):
        E, Q = mp.eigsy(M)
        return Q * mp.diag([mp.sqrt(max(e, 0)) for e in E]) * Q.T

    A, B = mp.matrix(S0.tolist()), mp.matrix(S1.tolist())
    h = sqrtm(A)
    mid = sqrtm(h * B * h)
    exact = float(sum(A[i, i] + B[i, i] - 2 * mid[i, i] for i in range(3)))
    assert bures_cost(S0, S1) == pytest.approx(exact, rel=1e-9)


# means


def test_means_fully_observed(rng):
    sys = LinearSystem(random_controllable(rng, n=3, m=2).A_at(0.0), rng.normal(size=(3, 2)), np.eye(3))
    ys = [rng.normal(size=3) for _ in range(4)]
    assert np.max(np.abs(infer_state_means(sys, ys) - np.stack(ys))) < 1e-10


def test_means_example1_first_components():
    nu = infer_state_means(double_integrator(), [[m] for m in MEANS])
    assert np.array_equal(nu[:, 0], np.array(MEANS))


def test_means_example1_against_generic_solver():
    sys = double_integrator()
    nu = infer_state_means(sys, [[m] for m in MEANS])
    # the velocities are the only free variables; minimise the summed energy directly
    Phi = state_transition(sys, 1.0, 0.0)
    Wi = np.linalg.inv(controllability_gramian(sys, 1.0, 0.0))

    def energy(v):
        x = np.column_stack([MEANS, v])
        d = x[1:] - x[:-1] @ Phi.T
        return 0.5 * np.einsum("ki,ij,kj->", d, Wi, d)

    res = minimize(energy, np.zeros(5), method="BFGS", options={"gtol": 1e-12})
    assert np.max(np.abs(nu[:, 1] - res.x)) < 1e-6
    assert energy(nu[:, 1]) <= res.fun + 1e-10


def test_means_rank_deficient_output_map():
    sys = LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(InfeasibleConstraint):
        infer_state_means(sys, [[0.0, 0.0], [1.0, 2.0]])


# covariances


def test_covariances_fully_observed(rng):
    sys = LinearSystem(0.5 * rng.normal(size=(2, 2)), rng.normal(size=(2, 1)), np.eye(2))
    Ys = [random_spd(rng, 2, 0.5) for _ in range(3)]
    covs = infer_state_covariances(sys, Ys)
    assert np.max(np.abs(covs - np.stack(Ys))) < 1e-10


def test_covariances_scalar_objective():
    covs, obj = infer_state_covariances(scalar_integrator(), [[[1.0]], [[4.0]]], return_objective=True)
    assert obj == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("variances, expected", [(CASE1, 0.0700379), (CASE2, 2.37784)])
def test_covariances_example1(variances, expected):
    sys = double_integrator()
    covs, obj = infer_state_covariances(sys, [[[v]] for v in variances], return_objective=True)
    assert np.array_equal(np.round(covs[:, 0, 0], 12), np.array(variances))
    assert np.max(np.abs(covs[:, 0, 0] - variances)) < 1e-12
    assert obj == pytest.approx(sdp_covariances(sys, [np.array([[v]]) for v in variances]), rel=1e-6)
    assert obj == pytest.approx(expected, rel=1e-5)


@pytest.mark.parametrize("seed", range(6))
def test_covariances_against_sdp_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    p = int(rng.integers(1, n))
    sys = LinearSystem(0.5 * rng.normal(size=(n, n)), rng.normal(size=(n, 2)), rng.normal(size=(p, n)))
    Ys = [random_spd(rng, p, 1.0) for _ in range(4)]
    covs, obj = infer_state_covariances(sys, Ys, return_objective=True)
    for k, (S, Y) in enumerate(zip(covs, Ys)):
        C = sys.C_at(float(k))
        assert np.max(np.abs(C @ S @ C.T - Y)) < 1e-9
        assert np.linalg.eigvalsh(S)[0] >= -1e-10
    assert obj == pytest.approx(covariance_objective(sys, covs), abs=1e-12)
    assert obj == pytest.approx(sdp_covariances(sys, Ys), rel=1e-5, abs=1e-7)


def test_covariances_reject_indefinite_output():
    with pytest.raises(NotPsd):
        infer_state_covariances(double_integrator(), [[[1.0]], [[-1.0]]])


# pipeline


def test_track_reduces_to_single_interpolant(rng):
    sys = LinearSystem(0.5 * rng.normal(size=(2, 2)), rng.normal(size=(2, 1)), np.eye(2))
    g0 = GaussianMeasure(rng.normal(size=2), random_spd(rng, 2, 0.5))
    g1 = GaussianMeasure(rng.normal(size=2), random_spd(rng, 2, 0.5))
    track = track_gaussian(sys, [g0, g1], samples_per_interval=20)
    ip = gaussian_interpolant(sys, g0, g1)
    for t, m, S in zip(track.times, track.means, track.covariances):
        assert np.max(np.abs(m - ip.mean(t))) < 1e-10
        assert np.max(np.abs(S - ip.covariance(t))) < 1e-10


@pytest.mark.parametrize("variances", [CASE1, CASE2])
def test_track_example1_matches_outputs(variances):
    track = track_gaussian(double_integrator(), outputs(variances), samples_per_interval=10)
    y_means, y_covs = track.output([[1.0, 0.0]])
    for k in range(5):
        i = int(np.argmin(np.abs(track.times - k)))
        assert track.times[i] == k
        assert y_means[i, 0] == pytest.approx(MEANS[k], abs=1e-6)
        assert y_covs[i, 0, 0] == pytest.approx(variances[k], abs=1e-6)
    assert np.min(np.linalg.eigvalsh(track.covariances)) >= -1e-8


@pytest.mark.slow
def test_track_example1_against_grid_lp():
    """Total cost against the LP over 41-node grids of the Gaussian-fitted marginals."""
    sys = double_integrator()
    track = track_gaussian(sys, outputs(CASE1), samples_per_interval=4)
    total = 0.0
    for k in range(4):
        g0 = GaussianMeasure(track.state_means[k], track.state_covariances[k])
        g1 = GaussianMeasure(track.state_means[k + 1], track.state_covariances[k + 1])
        mu = grid_discretize(g0, Grid.around(g0, 41))
        nu = grid_discretize(g1, Grid.around(g1, 41))
        cost = lqr_cost_matrix(sys, k, k + 1, mu.atoms, nu.atoms)
        total += transport_simplex(mu.weights, nu.weights, cost)[1]
    assert abs(track.transport_cost - total) <= 0.02 * total
