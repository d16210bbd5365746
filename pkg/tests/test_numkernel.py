import numpy as np
import pytest
import scipy.linalg as sla

from rflsmooth.errors import InfeasibleError, StationarityError
from rflsmooth.numkernel import (
    RiccatiProblem,
    care_residual,
    expm,
    is_hurwitz,
    solve_care,
    solve_lyapunov,
    spectral_radius,
)

from conftest import random_hurwitz


def care_eig_oracle(a, s, q):
    """Hamiltonian-subspace oracle via complex eigendecomposition, independent
    of the production ordered-Schur route."""
    n = a.shape[0]
    ham = np.block([[a, s], [-q, -a.T]])
    w, v = np.linalg.eig(ham)
    stable = v[:, w.real < 0]
    assert stable.shape[1] == n
    x = stable[n:] @ np.linalg.inv(stable[:n])
    x = x.real
    return 0.5 * (x + x.T)


def lyap_kron_oracle(a, w):
    """Literal vectorized linear-solve formulation."""
    n = a.shape[0]
    k = np.kron(np.eye(n), a) + np.kron(a, np.eye(n))
    return np.linalg.solve(k, -w.reshape(-1, order="F")).reshape((n, n), order="F")


def random_lqr_problem(rng, n):
    a = random_hurwitz(rng, n)
    b = rng.standard_normal((n, 2))
    c = rng.standard_normal((2, n))
    return RiccatiProblem(a=a, q=c.T @ c, s=-b @ b.T)


class TestCare:
    def test_scalar_pure_quadratic(self):
        sol = solve_care(RiccatiProblem(a=[[0.0]], q=[[1.0]], s=[[-1.0]]))
        np.testing.assert_allclose(sol.x, [[1.0]], rtol=1e-12)
        assert sol.stabilizing

    def test_scalar_linear(self):
        a = 1.7
        q = 0.3
        sol = solve_care(RiccatiProblem(a=[[-a]], q=[[q]], s=[[0.0]]))
        np.testing.assert_allclose(sol.x, [[q / (2 * a)]], rtol=1e-12)

    def test_random_against_eig_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            prob = random_lqr_problem(rng, 4)
            sol = solve_care(prob)
            oracle = care_eig_oracle(prob.a, prob.s, prob.q)
            err = np.linalg.norm(sol.x - oracle) / (1.0 + np.linalg.norm(oracle))
            assert err <= 1e-8
            assert sol.residual <= 1e-8 * (1.0 + np.linalg.norm(sol.x) ** 2)
            assert sol.stabilizing

    def test_inverse_duality(self):
        # if X > 0 solves (A, S, Q), then X^-1 is the stabilizing solution of
        # the time-reversed transposed problem (-A', -Q, -S)
        rng = np.random.default_rng(23)
        for _ in range(5):
            a = random_hurwitz(rng, 3)
            b = rng.standard_normal((3, 3))
            c = rng.standard_normal((3, 3)) + 3 * np.eye(3)
            prob = RiccatiProblem(a=a, q=c.T @ c, s=-b @ b.T)
            x = solve_care(prob).x
            dual = solve_care(RiccatiProblem(a=-a.T, q=-prob.s, s=-prob.q)).x
            np.testing.assert_allclose(np.linalg.inv(dual), x,
                                       rtol=1e-7, atol=1e-9)

    def test_imaginary_axis_infeasible(self):
        with pytest.raises(InfeasibleError) as err:
            solve_care(RiccatiProblem(a=[[0.0]], q=[[1.0]], s=[[0.0]]))
        assert err.value.eigenvalues is not None

    def test_asymmetric_q_rejected(self):
        with pytest.raises(ValueError):
            RiccatiProblem(a=np.eye(2), q=np.array([[0.0, 1.0], [0.0, 0.0]]),
                           s=np.zeros((2, 2)))

    def test_residual_helper(self):
        prob = RiccatiProblem(a=[[-1.0]], q=[[2.0]], s=[[0.0]])
        assert care_residual(prob, np.array([[1.0]])) == 0.0


class TestLyapunov:
    def test_scalar(self):
        np.testing.assert_allclose(solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]])

    def test_zero_rhs(self):
        np.testing.assert_allclose(solve_lyapunov([[-1.0]], [[0.0]]), [[0.0]])

    def test_random_against_oracles(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = random_hurwitz(rng, 5)
            g = rng.standard_normal((5, 3))
            w = g @ g.T
            p = solve_lyapunov(a, w)
            np.testing.assert_allclose(p, lyap_kron_oracle(a, w),
                                       rtol=1e-10, atol=1e-12)
            # independent dense Bartels-Stewart route
            p_bs = sla.solve_continuous_lyapunov(a, -w)
            np.testing.assert_allclose(p, p_bs, rtol=1e-9, atol=1e-11)
            assert np.linalg.eigvalsh(p).min() >= -1e-10 * np.linalg.norm(p)

    def test_not_hurwitz_raises(self):
        with pytest.raises(StationarityError):
            solve_lyapunov([[1.0]], [[1.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve_lyapunov(np.eye(2) * -1, np.eye(3))


class TestExpm:
    def test_zero_time_identity(self):
        a = np.random.default_rng(0).standard_normal((4, 4))
        np.testing.assert_allclose(expm(a, 0.0), np.eye(4))

    def test_diagonal(self):
        phi = expm(np.diag([-1.0, -2.0]), 1.0)
        np.testing.assert_allclose(phi, np.diag([np.exp(-1.0), np.exp(-2.0)]),
                                   rtol=1e-12)

    def test_semigroup(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 4))
        t1, t2 = 0.4, 0.9
        lhs = expm(a, t1 + t2)
        rhs = expm(a, t1) @ expm(a, t2)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(lhs)

    def test_taylor_series_oracle(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((4, 4))
        a /= 2.0 * np.linalg.norm(a)        # ||A t|| < 1 so 30 terms suffice
        t = 0.37
        series = np.eye(4)
        term = np.eye(4)
        for k in range(1, 31):
            term = term @ (a * t) / k
            series = series + term
        np.testing.assert_allclose(expm(a, t), series, rtol=1e-12, atol=1e-14)


class TestSpectralRadius:
    def test_identity(self):
        assert spectral_radius(np.eye(3)) == 1.0

    def test_nilpotent(self):
        assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0

    def test_companion_polynomial(self):
        # companion matrix of (x - 2)(x + 0.5) = x^2 - 1.5 x - 1
        comp = np.array([[1.5, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(spectral_radius(comp), 2.0, rtol=1e-12)

    def test_empty(self):
        assert spectral_radius(np.zeros((0, 0))) == 0.0


def test_is_hurwitz():
    assert is_hurwitz([[-1.0]])
    assert not is_hurwitz([[1.0]])
    assert is_hurwitz(np.zeros((0, 0)))
