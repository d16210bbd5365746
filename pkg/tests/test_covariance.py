import numpy as np
import pytest

from rflsmooth.covariance import (
    build_closed_loop,
    delta_sweep,
    smoothed_error_covariance,
    write_sweep_csv,
)
from rflsmooth.delay import pade_delay
from rflsmooth.errors import StationarityError
from rflsmooth.model import UncertainPlant, augment_with_delay, build_compact
from rflsmooth.sim import sample_linear_loop
from rflsmooth.synthesis import ScalingPoint, compute_gains


@pytest.fixture(scope="module")
def nominal_loop(paper_compact, paper_solution):
    return build_closed_loop(paper_compact, paper_solution, delta2=0.0)


def test_zero_delta_block_structure(paper_compact, paper_solution, nominal_loop):
    n = paper_compact.n
    a = nominal_loop.Abold
    np.testing.assert_allclose(a[:n, :n], paper_compact.aug.Ap)
    np.testing.assert_allclose(a[:n, n:], 0.0, atol=1e-15)
    np.testing.assert_allclose(a[n:, :n], paper_solution.Bc_tilde @ paper_compact.Ct2)
    np.testing.assert_allclose(a[n:, n:], paper_solution.Ac)


def test_noise_block(paper_compact, paper_solution, nominal_loop):
    n = paper_compact.n
    np.testing.assert_allclose(nominal_loop.Bbold[:n], paper_compact.Bp1w)
    np.testing.assert_allclose(nominal_loop.Bbold[n:],
                               paper_solution.Bc_tilde @ paper_compact.Db21)


def test_delta_out_of_unit_ball(paper_compact, paper_solution):
    with pytest.raises(ValueError):
        build_closed_loop(paper_compact, paper_solution, delta2=-1.5)


def test_worst_case_hurwitz(paper_compact, paper_solution):
    loop = build_closed_loop(paper_compact, paper_solution, delta2=-1.0)
    assert loop.is_hurwitz()


def test_structural_zero_top_right_block(paper_compact, paper_solution):
    """Bt1 Delta Dt12 Cc vanishes for any Delta here because the populated
    column of Bt1 multiplies only zero rows of Dt12."""
    n = paper_compact.n
    loop = build_closed_loop(paper_compact, paper_solution, delta2=-0.7)
    np.testing.assert_allclose(loop.Abold[:n, n:], 0.0, atol=1e-15)


def test_covariance_psd_and_scalar(nominal_loop):
    rep = smoothed_error_covariance(nominal_loop)
    assert np.linalg.eigvalsh(rep.P).min() >= -1e-10 * np.linalg.norm(rep.P)
    assert rep.Psa.shape == (1, 1)
    assert rep.Psa[0, 0] >= 0
    assert rep.Pf[0, 0] >= 0
    np.testing.assert_allclose(rep.Psa, rep.Psa.T)


def test_zero_lag_collapses_to_static_form(nominal_loop, paper_compact):
    rep = smoothed_error_covariance(nominal_loop, lag=0.0)
    n = paper_compact.n
    cw = np.hstack([paper_compact.aug.Cp0, np.zeros((1, n))])
    ca = np.hstack([np.zeros((1, n)), paper_compact.aug.Ca])
    direct = (cw - ca) @ rep.P @ (cw - ca).T
    np.testing.assert_allclose(rep.Psa, direct, rtol=1e-10)
    np.testing.assert_allclose(rep.Phi, np.eye(2 * n), atol=1e-12)


def test_unstable_loop_raises(paper_compact, paper_solution):
    loop = build_closed_loop(paper_compact, paper_solution, delta2=0.0)
    flipped = type(loop)(
        compact=loop.compact, solution=loop.solution,
        Abold=-loop.Abold, Bbold=loop.Bbold, Delta=loop.Delta,
    )
    with pytest.raises(StationarityError):
        smoothed_error_covariance(flipped)


@pytest.fixture(scope="module")
def rows(paper_compact, paper_solution):
    return delta_sweep(paper_compact, paper_solution, np.linspace(-1, 0, 21))


class TestSweep:
    def test_monotone_and_dominated(self, rows):
        psa = np.array([r.psa for r in rows])
        pf = np.array([r.pf for r in rows])
        assert all(r.hurwitz for r in rows)
        assert np.all(np.diff(psa) <= 1e-12)      # decreasing toward delta2 = 0
        assert np.all(np.diff(pf) <= 1e-12)
        assert np.all(psa <= pf)

    def test_continuity(self, rows):
        psa = np.array([r.psa for r in rows])
        steps = np.abs(np.diff(psa))
        assert steps.max() <= 10 * np.median(steps) + 1e-12

    def test_reversed_grid_identical(self, paper_compact, paper_solution, rows):
        rev = delta_sweep(paper_compact, paper_solution,
                          np.linspace(-1, 0, 21)[::-1])
        assert [(r.delta2, r.psa, r.pf) for r in rev] == \
               [(r.delta2, r.psa, r.pf) for r in rows]

    def test_single_point(self, paper_compact, paper_solution):
        rows = delta_sweep(paper_compact, paper_solution, [0.0])
        assert len(rows) == 1 and rows[0].delta2 == 0.0

    def test_grid_range_checked(self, paper_compact, paper_solution):
        with pytest.raises(ValueError):
            delta_sweep(paper_compact, paper_solution, [0.5])

    def test_unstable_rows_flagged_not_filled(self, paper_compact, paper_solution):
        import dataclasses
        broken = dataclasses.replace(paper_solution, Ac=-paper_solution.Ac)
        rows = delta_sweep(paper_compact, broken, [0.0, -1.0])
        assert all(not r.hurwitz for r in rows)
        assert all(np.isnan(r.psa) and np.isnan(r.pf) for r in rows)

    def test_csv_deterministic(self, rows, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_sweep_csv(rows, p1)
        write_sweep_csv(rows, p2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()
        assert header[1] == "delta2,psa,pf,hurwitz"


def test_analytic_matches_linear_monte_carlo():
    """Small loop: Lyapunov-based smoothed covariance vs an empirical estimate
    from simulated sample paths (3 standard errors)."""
    plant = UncertainPlant(A=[[-1.0]], B1=[[1.0, 0.0]], C0=[[1.0]],
                           C2=[[1.0]], D21=[[0.0, 0.4]])
    aug = augment_with_delay(plant, pade_delay(1, 0.4))
    compact = build_compact(aug)
    sol = compute_gains(compact, ScalingPoint(lam=np.zeros(0), tau=20.0))
    loop = build_closed_loop(compact, sol)
    rep = smoothed_error_covariance(loop)

    n = compact.n
    sel_est = np.hstack([np.zeros((1, n)), compact.aug.Ca])[0]
    sel_tgt = np.hstack([compact.aug.Cp0, np.zeros((1, n))])[0]
    mc = sample_linear_loop(
        loop.Abold, loop.Bbold, sel_est, sel_tgt,
        dt=2e-3, horizon=10.0, lag=0.4, runs=3000, master_seed=11,
    )
    assert abs(mc.error_covariance - rep.Psa[0, 0]) <= 3 * mc.standard_error
