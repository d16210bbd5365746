"""Estimator/smoother synthesis: multiplier assembly, feasibility, the two
Riccati equations, gain computation, the guaranteed cost bound, and its
minimization over the scaling point (tau, lambda).

Conventions
-----------
lambda is ordered as [k uncertainty scalings, g difference scalings,
g plant-nonlinearity scalings, g estimator-copy scalings], ktilde = k + 3g.

The filter Riccati is solved in covariance orientation,

    At Y + Y At' - Y (Ct2' E^-1 Ct2 - R/tau) Y + W = 0,

with At = Ap - Bt1 M^-1 Dt21' E^-1 Ct2, E = Dt21 M^-1 Dt21', and
W = Bt1 M^-1 Bt1' - Bt1 M^-1 Dt21' E^-1 Dt21 M^-1 Bt1'.  The companion
equation is the estimation-cost Riccati

    X Ap + Ap' X - (1/tau) X Bt1 M^-1 Bt1' X + (R - Gam G^-1 Gam') = 0,

whose constant term is positive semidefinite by construction (it is a Schur
complement of the stacked cost form), so a stabilizing PSD solution exists
whenever Ap is Hurwitz.  With no uncertainty channels (ktilde = 0) the
scaled noise products fall back to the physical ones and the filter Riccati
reduces to the standard Kalman form.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import CouplingError, InfeasibleError, NumericalError
from .model import CompactPlant
from .numkernel import RiccatiProblem, solve_care, spectral_radius

__all__ = [
    "ScalingPoint",
    "MultiplierPair",
    "SynthesisSolution",
    "OptimizationResult",
    "assemble_multipliers",
    "feasible",
    "cost_weights",
    "filter_riccati",
    "control_riccati",
    "compute_gains",
    "cost_bound",
    "minimize_bound",
    "solution_to_json",
]

FEASIBILITY_SLACK = 1e-9


@dataclass(frozen=True)
class ScalingPoint:
    """IQC scaling vector lambda (length ktilde) and cost scale tau > 0."""

    lam: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float).reshape(-1))
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class MultiplierPair:
    """Input/output multipliers M(lambda), N(lambda) and their rank-one terms."""

    M: np.ndarray
    N: np.ndarray
    M_terms: tuple
    N_terms: tuple


@dataclass(frozen=True)
class SynthesisSolution:
    """Riccati solutions, estimator matrices, and the guaranteed cost bound."""

    point: ScalingPoint
    Y: np.ndarray
    X: np.ndarray
    Ac: np.ndarray
    Bc_tilde: np.ndarray
    Cc_tilde: np.ndarray
    Ca: np.ndarray
    Vtau: float
    rho_yx: float
    residual_y: float
    residual_x: float
    m: int
    l: int

    @property
    def Bc(self) -> np.ndarray:
        """Gain on the physical measurement increment (first l columns)."""
        return self.Bc_tilde[:, : self.l]

    @property
    def Gc(self) -> np.ndarray:
        """Gain on the estimator-copy outputs (last g columns)."""
        return self.Bc_tilde[:, self.l:]

    @property
    def Cc(self) -> np.ndarray:
        """Estimated-output rows (first m rows of Cc_tilde)."""
        return self.Cc_tilde[: self.m]

    @property
    def Kc(self) -> np.ndarray:
        """Copy-input rows (last g rows of Cc_tilde)."""
        return self.Cc_tilde[self.m:]


def assemble_multipliers(compact: CompactPlant, lam: np.ndarray) -> MultiplierPair:
    """Build M(lambda), N(lambda) from the four constraint families:
    one per uncertainty channel, then per nonlinearity the difference,
    plant, and estimator-copy bounds."""
    plant = compact.plant
    k, g = plant.k, plant.g
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != compact.ktilde:
        raise ValueError(f"lambda must have length {compact.ktilde}, got {lam.size}")

    nin = compact.r + 2 * g
    nout = compact.h + 2 * g
    m_terms, n_terms = [], []

    r_off = np.concatenate([[0], np.cumsum(plant.r_s)]).astype(int)
    h_off = np.concatenate([[0], np.cumsum(plant.h_s)]).astype(int)
    for s in range(k):
        mt = np.zeros((nin, nin))
        sl = slice(r_off[s], r_off[s + 1])
        mt[sl, sl] = np.eye(plant.r_s[s])
        nt = np.zeros((nout, nout))
        sl = slice(h_off[s], h_off[s + 1])
        nt[sl, sl] = np.eye(plant.h_s[s])
        m_terms.append(mt)
        n_terms.append(nt)

    def rank_one(size, coeffs):
        v = np.zeros(size)
        for idx, c in coeffs:
            v[idx] = c
        return np.outer(v, v)

    for i in range(g):
        b2 = plant.beta[i]
        mu, mut = compact.r + i, compact.r + g + i
        nu, nut = compact.h + i, compact.h + g + i
        # difference bound: (mu - mu~)^2 <= beta^2 (nu - nu~)^2
        m_terms.append(rank_one(nin, [(mu, 1.0), (mut, -1.0)]))
        n_terms.append(rank_one(nout, [(nu, b2), (nut, -b2)]))
    for i in range(g):
        b2 = plant.beta[i]
        m_terms.append(rank_one(nin, [(compact.r + i, 1.0)]))
        n_terms.append(rank_one(nout, [(compact.h + i, b2)]))
    for i in range(g):
        b2 = plant.beta[i]
        m_terms.append(rank_one(nin, [(compact.r + g + i, 1.0)]))
        n_terms.append(rank_one(nout, [(compact.h + g + i, b2)]))

    m = sum(w * t for w, t in zip(lam, m_terms)) if m_terms else np.zeros((nin, nin))
    n = sum(w * t for w, t in zip(lam, n_terms)) if n_terms else np.zeros((nout, nout))
    return MultiplierPair(M=m, N=n, M_terms=tuple(m_terms), N_terms=tuple(n_terms))


def feasible(compact: CompactPlant, point: ScalingPoint):
    """Admissibility of a scaling point: lambda >= 0, M(lambda) > 0 and
    M(lambda)^-1 >= J J'.  Returns (bool, margin) where the margin is the
    smallest eigenvalue of M^-1 - J J' (or -inf when M is not PD)."""
    if compact.ktilde == 0:
        return True, math.inf
    lam = point.lam
    if lam.size != compact.ktilde or np.any(lam < 0):
        return False, -math.inf
    mult = assemble_multipliers(compact, lam)
    eig_m = np.linalg.eigvalsh(mult.M)
    if eig_m.min() <= 0:
        return False, -math.inf
    gap = np.linalg.inv(mult.M) - compact.J @ compact.J.T
    margin = float(np.linalg.eigvalsh(0.5 * (gap + gap.T)).min())
    return margin >= 0, margin


def _scaled_noise(compact: CompactPlant, mult: MultiplierPair):
    """Scaled noise products (Wxx, Wxy, E) = (Bt1 M^-1 Bt1', Bt1 M^-1 Dt21',
    Dt21 M^-1 Dt21'); physical products when there is no uncertainty channel."""
    if compact.ktilde == 0:
        bw, dw = compact.Bp1w, compact.Db21
        return bw @ bw.T, bw @ dw.T, dw @ dw.T
    minv = np.linalg.inv(mult.M)
    bm = compact.Bt1 @ minv
    dm = compact.Dt21 @ minv
    return bm @ compact.Bt1.T, bm @ compact.Dt21.T, dm @ compact.Dt21.T


def cost_weights(compact: CompactPlant, point: ScalingPoint, mult: MultiplierPair = None,
                 delayed_target: bool = False):
    """Quadratic cost data (R, G, Gam) for the estimation cost plus the
    tau-weighted stacked-output penalty.

    delayed_target=True swaps the estimation target row from the undelayed
    output Cp0 to the delayed readout Ca (experimental variant; the published
    gains correspond to the default Cp0 target).
    """
    if mult is None:
        mult = assemble_multipliers(compact, point.lam)
    aug = compact.aug
    n, m, g = compact.n, compact.m, compact.g
    tau = point.tau
    target = aug.Ca if delayed_target else aug.Cp0
    sel = np.block([[np.eye(m), np.zeros((m, g))], [np.zeros((g, m)), np.zeros((g, g))]])
    r = target.T @ target + tau * compact.Ct1.T @ mult.N @ compact.Ct1
    gmat = sel + tau * compact.Dt12.T @ mult.N @ compact.Dt12
    gam = -np.hstack([target.T, np.zeros((n, g))]) + tau * compact.Ct1.T @ mult.N @ compact.Dt12
    return r, gmat, gam


def _require_feasible(compact, point):
    ok, margin = feasible(compact, point)
    if not ok:
        raise InfeasibleError(
            f"scaling point is infeasible (margin {margin:.3e})", margin=margin
        )
    return margin


def filter_riccati(compact: CompactPlant, point: ScalingPoint,
                   delayed_target: bool = False):
    """Solve the filter Riccati equation; returns (Y, residual).

    Raises InfeasibleError when the point is inadmissible or the equation
    has no stabilizing positive-definite solution.
    """
    _require_feasible(compact, point)
    mult = assemble_multipliers(compact, point.lam)
    wxx, wxy, e = _scaled_noise(compact, mult)
    r, _, _ = cost_weights(compact, point, mult, delayed_target)
    einv = np.linalg.inv(e)
    ap = compact.aug.Ap
    at = ap - wxy @ einv @ compact.Ct2
    s = -(compact.Ct2.T @ einv @ compact.Ct2 - r / point.tau)
    w = wxx - wxy @ einv @ wxy.T
    sol = solve_care(RiccatiProblem(a=at.T, q=0.5 * (w + w.T), s=0.5 * (s + s.T)))
    y = sol.x
    if np.linalg.eigvalsh(y).min() <= 0:
        raise InfeasibleError(
            "filter Riccati solution is not positive definite at this scaling point"
        )
    return y, sol.residual


def control_riccati(compact: CompactPlant, point: ScalingPoint,
                    delayed_target: bool = False):
    """Solve the estimation-cost Riccati equation; returns (X, residual)."""
    _require_feasible(compact, point)
    mult = assemble_multipliers(compact, point.lam)
    wxx, _, _ = _scaled_noise(compact, mult)
    r, gmat, gam = cost_weights(compact, point, mult, delayed_target)
    if np.linalg.eigvalsh(0.5 * (gmat + gmat.T)).min() <= 0:
        raise InfeasibleError("cost weight G is singular at this scaling point")
    q = r - gam @ np.linalg.solve(gmat, gam.T)
    s = -wxx / point.tau
    sol = solve_care(RiccatiProblem(a=compact.aug.Ap, q=0.5 * (q + q.T), s=0.5 * (s + s.T)))
    x = sol.x
    if np.linalg.eigvalsh(x).min() < -1e-10 * (1.0 + np.linalg.norm(x)):
        raise InfeasibleError(
            "estimation-cost Riccati solution is not positive semidefinite"
        )
    return x, sol.residual


def _residual_threshold(x):
    return 1e-8 * (1.0 + np.linalg.norm(x, "fro") ** 2)


def compute_gains(compact: CompactPlant, point: ScalingPoint,
                  y: np.ndarray = None, x: np.ndarray = None,
                  residuals=(0.0, 0.0), delayed_target: bool = False) -> SynthesisSolution:
    """Assemble the estimator matrices Ac, Bc~, Cc~ and the cost bound.

    Solves both Riccati equations unless Y, X are supplied.  Enforces the
    coupling condition rho(Y X) < tau and the residual thresholds before
    emitting any gain.
    """
    if y is None:
        y, res_y = filter_riccati(compact, point, delayed_target)
    else:
        res_y = residuals[0]
    if x is None:
        x, res_x = control_riccati(compact, point, delayed_target)
    else:
        res_x = residuals[1]
    if res_y > _residual_threshold(y):
        raise NumericalError(f"filter Riccati residual {res_y:.3e} above threshold")
    if res_x > _residual_threshold(x):
        raise NumericalError(f"cost Riccati residual {res_x:.3e} above threshold")

    tau = point.tau
    rho = spectral_radius(y @ x)
    if rho >= tau:
        raise CouplingError(
            f"coupling condition violated: rho(YX) = {rho:.6e} >= tau = {tau:.6e}",
            rho=rho, tau=tau,
        )

    mult = assemble_multipliers(compact, point.lam)
    _, wxy, e = _scaled_noise(compact, mult)
    r, gmat, gam = cost_weights(compact, point, mult, delayed_target)
    einv = np.linalg.inv(e)
    n = compact.n
    corr = np.linalg.inv(np.eye(n) - (y @ x) / tau)

    bc = (y @ compact.Ct2.T + wxy) @ einv
    cc = -np.linalg.solve(gmat, gam.T) @ corr
    ac = (compact.aug.Ap + (y @ r) / tau - bc @ compact.Ct2
          - (y @ gam @ np.linalg.solve(gmat, gam.T) @ corr) / tau)
    v = _bound_from_parts(y, x, r, bc, e, corr)
    return SynthesisSolution(
        point=point, Y=y, X=x, Ac=ac, Bc_tilde=bc, Cc_tilde=cc,
        Ca=compact.aug.Ca.copy(), Vtau=v, rho_yx=rho,
        residual_y=res_y, residual_x=res_x, m=compact.m, l=compact.l,
    )


def _bound_from_parts(y, x, r, bc, e, corr):
    return float(0.5 * np.trace(y @ r + bc @ e @ bc.T @ x @ corr))


def cost_bound(compact: CompactPlant, point: ScalingPoint,
               y: np.ndarray, x: np.ndarray, delayed_target: bool = False) -> float:
    """Guaranteed cost bound V_tau for given Riccati solutions."""
    tau = point.tau
    rho = spectral_radius(y @ x)
    if rho >= tau:
        raise CouplingError(
            f"coupling condition violated: rho(YX) = {rho:.6e} >= tau = {tau:.6e}",
            rho=rho, tau=tau,
        )
    mult = assemble_multipliers(compact, point.lam)
    _, wxy, e = _scaled_noise(compact, mult)
    r, _, _ = cost_weights(compact, point, mult, delayed_target)
    einv = np.linalg.inv(e)
    bc = (y @ compact.Ct2.T + wxy) @ einv
    corr = np.linalg.inv(np.eye(compact.n) - (y @ x) / tau)
    return _bound_from_parts(y, x, r, bc, e, corr)


@dataclass
class OptimizationResult:
    point: ScalingPoint
    solution: SynthesisSolution
    vtau: float
    trace: list = field(default_factory=list)
    starts_used: int = 0


def _evaluate(compact, tau, lam, delayed_target):
    point = ScalingPoint(lam=lam, tau=tau)
    sol = compute_gains(compact, point, delayed_target=delayed_target)
    return point, sol


def minimize_bound(compact: CompactPlant, *, tau_bounds=(1e-8, 1e-3),
                   n_starts: int = 8, seed: int = 0, starts=None,
                   lam_high: float = 1.0, inner_maxiter: int = 60,
                   outer_xtol: float = 5e-3, delayed_target: bool = False,
                   ) -> OptimizationResult:
    """Minimize the guaranteed cost bound over (tau, lambda).

    A projected SLSQP search over lambda inside the admissible set is nested
    in a bounded scalar search over log tau, restarted from `n_starts`
    feasible points drawn deterministically from `seed` (or from explicit
    `starts`).  Returns the best feasible point found together with its
    synthesis solution and the full search trace.

    Raises InfeasibleError when no feasible start can be found.
    """
    kt = compact.ktilde
    rng = np.random.default_rng(seed)
    log_lo, log_hi = math.log(tau_bounds[0]), math.log(tau_bounds[1])
    trace = []
    penalty = 1e9

    def value(tau, lam):
        try:
            _, sol = _evaluate(compact, tau, lam, delayed_target)
        except (InfeasibleError, NumericalError, np.linalg.LinAlgError):
            return penalty
        trace.append((float(tau), [float(v) for v in lam], sol.Vtau))
        return sol.Vtau

    if kt == 0:
        empty = np.zeros(0)
        res = optimize.minimize_scalar(
            lambda lt: value(math.exp(lt), empty),
            bounds=(log_lo, log_hi), method="bounded",
            options={"xatol": outer_xtol},
        )
        if res.fun >= penalty:
            raise InfeasibleError("no feasible tau found within the search bounds")
        point, sol = _evaluate(compact, math.exp(res.x), empty, delayed_target)
        return OptimizationResult(point=point, solution=sol, vtau=sol.Vtau,
                                  trace=trace, starts_used=1)

    def margin_of(lam):
        return feasible(compact, ScalingPoint(lam=lam, tau=1.0))[1]

    if starts is None:
        starts = []
        attempts = 0
        while len(starts) < n_starts and attempts < 200 * n_starts:
            cand = rng.uniform(FEASIBILITY_SLACK, lam_high, size=kt)
            attempts += 1
            if margin_of(cand) > FEASIBILITY_SLACK:
                starts.append(cand)
        if not starts:
            raise InfeasibleError(
                "no feasible scaling vector found within the sampling budget"
            )
    else:
        starts = [np.asarray(s, dtype=float) for s in starts]

    constraints = [
        {"type": "ineq", "fun": lambda lam: lam - FEASIBILITY_SLACK},
        {"type": "ineq", "fun": lambda lam: margin_of(lam) - FEASIBILITY_SLACK},
    ]
    bounds = [(FEASIBILITY_SLACK, None)] * kt

    best = None
    for lam0 in starts:
        def tau_profile(log_tau, lam0=lam0):
            tau = math.exp(log_tau)
            with warnings.catch_warnings():
                # finite-difference probes step onto the penalty cliff
                warnings.simplefilter("ignore", RuntimeWarning)
                res = optimize.minimize(
                    lambda lam: value(tau, lam), lam0, method="SLSQP",
                    bounds=bounds, constraints=constraints,
                    options={"maxiter": inner_maxiter, "ftol": 1e-10},
                )
            lam_opt = res.x if margin_of(res.x) >= 0 else lam0
            return value(tau, lam_opt), lam_opt

        scan = optimize.minimize_scalar(
            lambda lt: tau_profile(lt)[0],
            bounds=(log_lo, log_hi), method="bounded",
            options={"xatol": outer_xtol},
        )
        v_here, lam_here = tau_profile(scan.x)
        if v_here < penalty and (best is None or _better(v_here, lam_here, best)):
            best = (v_here, math.exp(scan.x), lam_here)

    if best is None:
        raise InfeasibleError("optimizer found no feasible point within budget")
    _, tau_best, lam_best = best
    point, sol = _evaluate(compact, tau_best, lam_best, delayed_target)
    return OptimizationResult(point=point, solution=sol, vtau=sol.Vtau,
                              trace=trace, starts_used=len(starts))


def _better(v, lam, best):
    v_best, _, lam_best = best
    if abs(v - v_best) > 1e-12 * (1.0 + abs(v_best)):
        return v < v_best
    return tuple(lam) < tuple(lam_best)      # deterministic tie break


def solution_to_json(sol: SynthesisSolution, extra: dict = None) -> str:
    """Serialize a synthesis solution to JSON (row-major matrices with dims)."""

    def mat(a):
        a = np.asarray(a)
        return {"rows": a.shape[0], "cols": a.shape[1], "data": a.reshape(-1).tolist()}

    doc = {
        "tau": sol.point.tau,
        "lambda": sol.point.lam.tolist(),
        "Vtau": sol.Vtau,
        "rho_yx": sol.rho_yx,
        "residual_y": sol.residual_y,
        "residual_x": sol.residual_x,
        "Y": mat(sol.Y),
        "X": mat(sol.X),
        "Ac": mat(sol.Ac),
        "Bc_tilde": mat(sol.Bc_tilde),
        "Cc_tilde": mat(sol.Cc_tilde),
        "Ca": mat(sol.Ca),     # delayed readout row of the chosen realization
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
