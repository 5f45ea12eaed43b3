import math

import numpy as np
import pytest
from scipy.integrate import quad

from blowup.errors import FiniteEscapeError, InvalidParameterError
from blowup.functions import make_constant, make_power
from blowup.ode import ProblemSpec, integrate
from blowup.picard import (
    apply_integral_operator,
    comparison_constants,
    majorant_growth,
    picard_solve,
    solve_autonomous_quadrature,
    verify_bound_preservation,
    verify_comparison_bound,
)

ONE = make_constant(1.0)


class TestConstants:
    @pytest.mark.parametrize("n,alpha,beta", [(1, 0.25, 1 / 3), (2, 0.125, 0.2), (3, 1 / 16, 1 / 9)])
    def test_values(self, n, alpha, beta):
        c = comparison_constants(n)
        assert c.alpha == pytest.approx(alpha, rel=1e-15)
        assert c.beta == pytest.approx(beta, rel=1e-15)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_growth_identities(self, n):
        c = comparison_constants(n)
        assert 2 ** n * c.alpha == 0.5
        assert (c.alpha / 2 ** (n - 1)) * (1.0 / c.beta - 1.0) == pytest.approx(
            2.0 * c.alpha, rel=1e-14
        )
        assert 0.0 < c.alpha <= 0.25
        assert 0.0 < c.beta <= 1 / 3

    def test_decreasing_in_n(self):
        cs = [comparison_constants(n) for n in range(1, 7)]
        assert all(a.alpha > b.alpha and a.beta > b.beta for a, b in zip(cs, cs[1:]))

    def test_bad_n(self):
        with pytest.raises(InvalidParameterError):
            comparison_constants(0)


class TestQuadratureInversion:
    def test_exponential(self):
        u = solve_autonomous_quadrature(make_power(1), 1, 1.0, [1.0])
        assert u[0] == pytest.approx(math.e, abs=1e-9)

    def test_square_growth(self):
        u = solve_autonomous_quadrature(ONE, 2, 1.0, [1.0])
        assert u[0] == pytest.approx(4.0, abs=1e-8)

    def test_hyperbolic(self):
        u = solve_autonomous_quadrature(make_power(2), 1, 1.0, [0.5])
        assert u[0] == pytest.approx(2.0, abs=1e-9)

    def test_finite_escape_detected(self):
        with pytest.raises(FiniteEscapeError) as exc:
            solve_autonomous_quadrature(make_power(2), 1, 1.0, [1.5])
        assert exc.value.escape_time == pytest.approx(1.0, abs=1e-6)

    def test_inverse_consistency(self):
        targets = np.linspace(0.0, 3.0, 50)
        u = solve_autonomous_quadrature(ONE, 2, 1.0, targets)
        for U, t in zip(u, targets):
            F, _ = quad(lambda s: 0.5 * s ** -0.5, 1.0, U, epsabs=1e-14, epsrel=1e-13)
            assert abs(F - t) <= 1e-10

    def test_target_order_preserved(self):
        shuffled = np.array([2.0, 0.0, 1.0, 0.5])
        u = solve_autonomous_quadrature(make_power(1), 1, 1.0, shuffled)
        assert np.allclose(u, np.exp(shuffled), rtol=1e-9)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            solve_autonomous_quadrature(ONE, 1, 0.0, [1.0])
        with pytest.raises(InvalidParameterError):
            solve_autonomous_quadrature(ONE, 1, 1.0, [-1.0])


class TestComparisonBound:
    def test_exponential_closed_form(self):
        rep = verify_comparison_bound(make_power(1), 1, 1.0, 3.0, 200)
        assert rep.passed
        # at t = T the two sides are (e^3 - 1) and (e^3 - 1)/12
        assert rep.min_slack >= 0.0

    def test_constant_growth(self):
        # u = 1 + t: slack = t - t/4 = 3t/4
        rep = verify_comparison_bound(ONE, 1, 1.0, 5.0, 200)
        assert rep.passed

    @pytest.mark.parametrize(
        "n,g,T",
        [
            (1, make_power(1), 3.0),
            (1, ONE, 5.0),
            (1, make_power(2), 0.9),  # finite escape at t=1: stay below
            (2, ONE, 2.0),
            (2, make_power(1), 2.0),
        ],
    )
    def test_suite_nonnegative_slack(self, n, g, T):
        rep = verify_comparison_bound(g, n, 1.0, T, 200)
        assert rep.min_slack_rel >= -1e-9

    def test_quadratic_case_values(self):
        # n=2, g=1: u = (1+t)^2, LHS = 2t+t^2, RHS = t^2/16
        rep = verify_comparison_bound(ONE, 2, 1.0, 2.0, 200)
        grid = np.linspace(0, 2.0, 200)
        u = solve_autonomous_quadrature(ONE, 2, 1.0, grid)
        assert np.max(np.abs(u - (1 + grid) ** 2)) <= 1e-8
        assert rep.passed


class TestMajorantGrowth:
    def test_linear_case(self):
        g = majorant_growth(make_power(1), 1)
        assert g(3.0) == pytest.approx(36.0, rel=1e-14)

    def test_constant_case(self):
        g = majorant_growth(make_constant(1.0), 2)
        assert g(7.0) == pytest.approx(8.0, rel=1e-14)

    def test_quadratic_case(self):
        g = majorant_growth(make_power(2), 1)
        assert g(1.0) == pytest.approx(36.0, rel=1e-14)

    def test_metadata_inherited(self):
        h = make_power(2)
        g = majorant_growth(h, 2)
        assert g.nondecreasing and g.nonnegative
        assert g.asymptotic_exponent == 2.0

    def test_weight_scales(self):
        g = majorant_growth(make_constant(1.0), 1, weight=3.0)
        assert g(1.0) == pytest.approx(12.0, rel=1e-14)


class TestPicardTower:
    def test_exponential_series(self):
        tw = picard_solve(make_power(1), 1, [1.0], 1.0, tol=1e-10)
        assert tw.converged
        assert tw.iterations <= 30
        assert abs(tw.iterates[-1][-1] - math.e) <= 1e-6
        # early iterates are the Taylor partial sums
        g = tw.grid
        assert np.max(np.abs(tw.iterates[1] - (1 + g))) <= 1e-12
        assert np.max(np.abs(tw.iterates[2] - (1 + g + g ** 2 / 2))) <= 1e-10

    def test_monotone_and_bounded(self):
        tw = picard_solve(make_power(1), 1, [1.0], 1.0, tol=1e-10)
        assert tw.monotone_slack >= -1e-12
        assert tw.majorant_slack >= -1e-12 * (1.0 + np.max(tw.majorant))
        # closed-form majorant: growth g(s) = 12 s from u0 = 1 gives e^(12 t)
        assert tw.majorant[-1] == pytest.approx(math.exp(12.0), rel=1e-8)

    def test_constant_h_exact_after_one_iteration(self):
        tw = picard_solve(make_constant(1.0), 2, [1.0, 1.0], 2.0, tol=1e-12)
        g = tw.grid
        assert np.max(np.abs(tw.iterates[-1] - (1 + g + g ** 2 / 2))) == 0.0
        assert tw.iterations <= 2

    def test_fixed_point_residual(self):
        from blowup.volterra import weighted_volterra

        tw = picard_solve(make_power(1), 1, [1.0], 1.0, tol=1e-10)
        v = tw.iterates[-1]
        image = 1.0 + weighted_volterra(v, 1, tw.grid)
        assert np.max(np.abs(image - v)) <= 10.0 * 1e-10

    def test_refuses_escaping_majorant(self):
        # h = s^2 forces a finite-escape majorant: hypothesis fails
        with pytest.raises(FiniteEscapeError):
            picard_solve(make_power(2), 1, [1.0], 2.0, tol=1e-8)

    def test_nonconvergence_reported(self):
        tw = picard_solve(make_power(1), 1, [1.0], 1.0, tol=1e-12, max_iter=3)
        assert not tw.converged
        assert tw.iterations == 3
        assert tw.sup_gap > 1e-12

    def test_positive_data_required_without_majorant_seed(self):
        with pytest.raises(InvalidParameterError):
            picard_solve(make_power(1), 1, [0.0], 1.0)
        tw = picard_solve(make_power(1), 1, [0.0], 1.0, majorant_b=[1.0])
        assert np.all(tw.iterates[-1] == 0.0)  # zero data, h(0) = 0

    def test_weighted_tower_matches_direct(self):
        # v'' = q(t) h(v) with piecewise q: closed form on each branch
        from blowup.functions import make_piecewise

        q = make_piecewise([((0, 1), 0.5), ((1, math.inf), 1.0)])
        tw = picard_solve(make_power(1), 2, [1.0, 1.0], 3.0, tol=1e-9, q=q)
        rt = math.sqrt(0.5)
        v1 = math.cosh(rt) + math.sinh(rt) / rt
        v1p = rt * math.sinh(rt) + math.cosh(rt)
        c1, c2 = (v1 + v1p) / 2, (v1 - v1p) / 2
        i1 = int(np.argmin(np.abs(tw.grid - 1.0)))
        assert tw.grid[i1] == 1.0  # breakpoint is a grid node
        assert tw.solution[i1] == pytest.approx(v1, abs=1e-8)
        assert tw.solution[-1] == pytest.approx(c1 * math.e ** 2 + c2 * math.e ** -2, abs=1e-8)

        # direct integration agrees everywhere except inside the single
        # dense-output cell adjacent to the jump (one-sided derivative there)
        p = ProblemSpec(m=2, k=0, a=(1.0, 1.0), q=q, h=make_power(1))
        traj = integrate(p, 3.0, 1e-10)
        direct = traj(tw.grid)[:, 0]
        gap_cell = np.searchsorted(traj.ts, 1.0, side="right")
        hide = (tw.grid > 1.0) & (tw.grid < traj.ts[min(gap_cell, len(traj.ts) - 1)])
        assert np.max(np.abs((tw.solution - direct)[~hide])) <= 1e-6


class TestIntegralOperator:
    def test_zero_rhs_gives_taylor_polynomial(self):
        p = ProblemSpec(m=3, k=0, a=(2.0, 1.0, 0.5), q=make_constant(0.0), h=make_power(1))
        grid = np.linspace(0, 2, 65)
        u = np.zeros((65, 3))
        img = apply_integral_operator(p, grid, u)
        want = 2.0 + grid + 0.25 * grid ** 2
        assert np.max(np.abs(img[:, 0] - want)) <= 1e-13

    def test_unit_case(self):
        p = ProblemSpec(m=1, k=0, a=(0.0,), q=ONE, h=make_constant(1.0))
        grid = np.linspace(0, 2, 65)
        img = apply_integral_operator(p, grid, np.zeros((65, 1)))
        assert np.max(np.abs(img[:, 0] - grid)) <= 1e-13

    def test_cosh_fixed_point(self):
        p = ProblemSpec(m=2, k=0, a=(1.0, 0.0), q=ONE, h=make_power(1))
        traj = integrate(p, 3.0, 1e-10)
        img = apply_integral_operator(p, traj.ts, traj.ys)
        assert np.max(np.abs(img - traj.ys)) <= 1e-7


class TestBoundPreservation:
    def test_vacuous(self):
        p = ProblemSpec(m=1, k=0, a=(1.0,), q=ONE, h=make_power(1))
        traj = integrate(p, 2.0, 1e-10)
        rep = verify_bound_preservation(p, traj, 0, seed=0)
        assert rep.passed and rep.worst_violation == 0.0

    @pytest.mark.parametrize("m,a", [(1, (1.0,)), (2, (1.0, 0.0))])
    def test_hundred_trials(self, m, a):
        p = ProblemSpec(m=m, k=0, a=a, q=ONE, h=make_power(1))
        traj = integrate(p, 3.0, 1e-10)
        rep = verify_bound_preservation(p, traj, 100, seed=0)
        assert rep.worst_violation <= 1e-9

    def test_deterministic_for_seed(self):
        p = ProblemSpec(m=1, k=0, a=(1.0,), q=ONE, h=make_power(1))
        traj = integrate(p, 2.0, 1e-10)
        a = verify_bound_preservation(p, traj, 10, seed=3)
        b = verify_bound_preservation(p, traj, 10, seed=3)
        assert a == b
