"""Dense numerical kernels: algebraic Riccati and Lyapunov solvers, matrix
exponential, spectral radius.

The Riccati solver handles the generic form

    X A + A' X + X S X + Q = 0

with a sign-indefinite quadratic coefficient S, via an ordered real Schur
decomposition of the associated Hamiltonian matrix, optionally refined by
Newton-Kleinman iterations.  The Lyapunov solver uses a dense Kronecker
linear solve, which is exact at the problem sizes that occur here (n <= 30).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InfeasibleError, NumericalError, StationarityError

__all__ = [
    "RiccatiProblem",
    "CareSolution",
    "solve_care",
    "care_residual",
    "solve_lyapunov",
    "lyapunov_residual",
    "expm",
    "spectral_radius",
    "is_hurwitz",
]

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class RiccatiProblem:
    """Continuous algebraic Riccati equation  X A + A' X + X S X + Q = 0.

    Q is the constant term and S the (possibly sign-indefinite) quadratic
    coefficient; both must be symmetric.  Cross and shift terms are folded
    into A by the caller.
    """

    a: np.ndarray
    q: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        s = np.atleast_2d(np.asarray(self.s, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", s)
        n = a.shape[0]
        if a.shape != (n, n) or q.shape != (n, n) or s.shape != (n, n):
            raise ValueError("A, Q, S must be square and of equal size")
        for name, mat in (("Q", q), ("S", s)):
            scale = 1.0 + np.abs(mat).max()
            if np.abs(mat - mat.T).max() > _SYM_TOL * scale:
                raise ValueError(f"{name} is not symmetric to tolerance {_SYM_TOL}")

    @property
    def n(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class CareSolution:
    x: np.ndarray
    residual: float
    stabilizing: bool
    closed_loop_eigs: np.ndarray = field(repr=False, default=None)


def care_residual(prob: RiccatiProblem, x: np.ndarray) -> float:
    """Frobenius norm of  X A + A' X + X S X + Q."""
    r = x @ prob.a + prob.a.T @ x + x @ prob.s @ x + prob.q
    return float(np.linalg.norm(r, "fro"))


def _hamiltonian_schur(prob: RiccatiProblem, imag_tol: float):
    n = prob.n
    ham = np.block([[prob.a, prob.s], [-prob.q, -prob.a.T]])
    eigs = np.linalg.eigvals(ham)
    scale = max(1.0, np.abs(eigs).max())
    near_axis = eigs[np.abs(eigs.real) <= imag_tol * scale]
    if near_axis.size > 0:
        raise InfeasibleError(
            "Hamiltonian matrix has eigenvalues on the imaginary axis; "
            "no stabilizing Riccati solution exists",
            eigenvalues=near_axis,
        )
    _, z, sdim = sla.schur(ham, sort="lhp")
    if sdim != n:
        raise InfeasibleError(
            f"stable invariant subspace has dimension {sdim}, expected {n}",
            eigenvalues=eigs,
        )
    u1 = z[:n, :n]
    u2 = z[n:, :n]
    x = np.linalg.solve(u1.T, u2.T).T
    return 0.5 * (x + x.T)


def _newton_refine(prob: RiccatiProblem, x: np.ndarray, sweeps: int = 5):
    """Newton-Kleinman refinement; each step is one Lyapunov solve."""
    best = x
    best_res = care_residual(prob, x)
    for _ in range(sweeps):
        acl = prob.a + prob.s @ best
        if np.linalg.eigvals(acl).real.max() >= 0:
            break
        f = best @ prob.a + prob.a.T @ best + best @ prob.s @ best + prob.q
        try:
            delta = _lyap_kron(acl.T, f)
        except np.linalg.LinAlgError:
            break
        cand = 0.5 * ((best + delta) + (best + delta).T)
        res = care_residual(prob, cand)
        if res >= best_res:
            break
        best, best_res = cand, res
    return best, best_res


def solve_care(prob: RiccatiProblem, imag_tol: float = 1e-9) -> CareSolution:
    """Solve X A + A' X + X S X + Q = 0 for the stabilizing symmetric X.

    Parameters
    ----------
    prob : RiccatiProblem
    imag_tol : float
        Relative tolerance for detecting imaginary-axis Hamiltonian
        eigenvalues, which make the problem infeasible.

    Returns
    -------
    CareSolution
        Symmetric solution, Frobenius residual, and a flag telling whether
        Re(eig(A + S X)) < 0.

    Raises
    ------
    InfeasibleError
        If no stabilizing solution exists.
    """
    x = _hamiltonian_schur(prob, imag_tol)
    res = care_residual(prob, x)
    if res > 1e-8 * (1.0 + np.linalg.norm(x, "fro") ** 2):
        x, res = _newton_refine(prob, x)
    cl_eigs = np.linalg.eigvals(prob.a + prob.s @ x)
    return CareSolution(
        x=x,
        residual=res,
        stabilizing=bool(cl_eigs.real.max() < 0),
        closed_loop_eigs=cl_eigs,
    )


def _lyap_kron(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve A P + P A' + W = 0 by the Kronecker-product linear system."""
    n = a.shape[0]
    eye = np.eye(n)
    k = np.kron(eye, a) + np.kron(a, eye)
    p = np.linalg.solve(k, -w.reshape(n * n, order="F")).reshape((n, n), order="F")
    return 0.5 * (p + p.T)


def lyapunov_residual(a: np.ndarray, w: np.ndarray, p: np.ndarray) -> float:
    return float(np.linalg.norm(a @ p + p @ a.T + w, "fro"))


def solve_lyapunov(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve the continuous Lyapunov equation  A P + P A' + W = 0.

    A must be Hurwitz; W symmetric.  Raises StationarityError when A is not
    Hurwitz (the stationary covariance does not exist) and NumericalError
    when the residual exceeds the accepted threshold.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if a.shape != w.shape or a.shape[0] != a.shape[1]:
        raise ValueError("A and W must be square matrices of equal size")
    if not is_hurwitz(a):
        raise StationarityError(
            "matrix is not Hurwitz; stationary Lyapunov equation has no "
            f"solution (max Re eig = {np.linalg.eigvals(a).real.max():.6g})"
        )
    p = _lyap_kron(a, w)
    res = lyapunov_residual(a, w, p)
    if res > 1e-8 * (1.0 + np.linalg.norm(p, "fro")) * (1.0 + np.linalg.norm(a, "fro")):
        raise NumericalError(f"Lyapunov residual too large: {res:.3e}")
    return p


def expm(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Transition matrix e^(A t) (scaling-and-squaring Pade, via SciPy)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return sla.expm(a * t)


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(m)).max())


def is_hurwitz(a: np.ndarray, tol: float = 0.0) -> bool:
    """True when every eigenvalue of A has real part < -tol."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return True
    return bool(np.linalg.eigvals(a).real.max() < -tol)
