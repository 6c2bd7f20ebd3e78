import json
import math

import numpy as np
import pytest

from bihartree.multibubble import (
    EvaluationError,
    InteractionConstants,
    ParseError,
    PolygonConfig,
    SolverError,
    alpha_range_guard,
    constant_A1,
    constant_A2,
    degree_heuristic,
    interaction_constants,
    load_potential_config,
    pair_interaction,
    parse_potential,
    polygon_sum,
    polygon_sum_direct,
    reduced_residuals,
    solve_reduced,
)
from bihartree.quad import QuadratureSpec, radial_integral
from bihartree.specfun import ProblemParams, c_n_alpha, i_of_s, sphere_area

PARAMS = ProblemParams(9, 8.0)

ENGINEERED = "(1 + (r-2)^2 + (x3-1)^2 + x4^2 + x5^2 + x6^2 + x7^2 + x8^2 + x9^2) / r^4"


@pytest.fixture(scope="module")
def consts():
    return interaction_constants(PARAMS)


class TestParser:
    def test_constant(self):
        assert parse_potential("1").evaluate(3.0, np.zeros(7)) == 1.0

    def test_engineered_expression(self):
        V = parse_potential(ENGINEERED)
        assert V.evaluate(2.0, np.array([1.0, 0, 0, 0, 0, 0, 0])) == pytest.approx(1.0 / 16.0)
        # r^4 V has its critical point at (2, e1)
        grad = V.grad_rv4(2.0, np.array([1.0, 0, 0, 0, 0, 0, 0]))
        assert np.max(np.abs(grad)) < 1e-9

    def test_precedence_and_power(self):
        V = parse_potential("2 + 3 * r ^ 2")
        assert V.evaluate(2.0, []) == pytest.approx(14.0)
        assert parse_potential("2 ^ 3 ^ 2").evaluate(1.0, []) == pytest.approx(512.0)
        assert parse_potential("-r^2").evaluate(2.0, []) == pytest.approx(-4.0)

    def test_exp(self):
        V = parse_potential("exp(-(r-1)^2)")
        assert V.evaluate(1.0, []) == pytest.approx(1.0)
        assert V.evaluate(2.0, []) == pytest.approx(math.exp(-1.0))

    def test_trailing_operator_position(self):
        with pytest.raises(ParseError) as err:
            parse_potential("r +")
        assert err.value.position == 3

    def test_unknown_identifier_position(self):
        with pytest.raises(ParseError) as err:
            parse_potential("1 + qq * 2")
        assert err.value.position == 5
        with pytest.raises(ParseError):
            parse_potential("x2")  # transverse coordinates start at x3

    def test_unbalanced_paren(self):
        with pytest.raises(ParseError):
            parse_potential("(1 + r")

    def test_division_by_zero_lazy(self):
        V = parse_potential("1 / (r - 1)")
        assert V.evaluate(2.0, []) == 1.0
        with pytest.raises(EvaluationError):
            V.evaluate(1.0, [])

    def test_missing_transverse_coordinate(self):
        V = parse_potential("x5 + 1")
        with pytest.raises(EvaluationError):
            V.evaluate(1.0, [0.0])

    def test_gradient_matches_hand_derivative(self):
        V = parse_potential("(1 + (r-2)^2 + (x3-1)^2) / r^4")
        r, xpp = 1.7, np.array([0.4])
        grad = V.grad_rv4(r, xpp)
        # r^4 V = 1 + (r-2)^2 + (x3-1)^2
        assert grad[0] == pytest.approx(2.0 * (r - 2.0), rel=1e-7)
        assert grad[1] == pytest.approx(2.0 * (xpp[0] - 1.0), rel=1e-7)


class TestPotentialConfig:
    def test_round_trip(self, tmp_path):
        doc = {
            "expression": ENGINEERED,
            "box": {"r": [1.5, 2.5], "xpp_center": [1, 0, 0, 0, 0, 0, 0], "xpp_radius": 0.5},
            "constants": {"L0": 0.001, "L1": 100.0},
        }
        path = tmp_path / "pot.json"
        path.write_text(json.dumps(doc))
        cfg = load_potential_config(path)
        assert cfg["L0"] == 0.001
        assert cfg["box"]["r"] == (1.5, 2.5)
        assert cfg["model"].evaluate(2.0, [1, 0, 0, 0, 0, 0, 0]) == pytest.approx(1.0 / 16.0)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"expression": "1"}))
        with pytest.raises(ValueError):
            load_potential_config(path)


class TestPolygonSum:
    def test_antipodal_pair(self):
        config = PolygonConfig(m=2, r_bar=1.3, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)
        assert polygon_sum(config) == pytest.approx((2 * 1.3) ** (-5.0), rel=1e-14)

    def test_square(self):
        config = PolygonConfig(m=4, r_bar=1.0, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)
        want = 2.0 ** (-5.0) * (2.0 * (math.sqrt(2.0) / 2.0) ** (-5.0) + 1.0)
        assert polygon_sum(config) == pytest.approx(want, rel=1e-14)

    def test_dihedral_distances(self):
        config = PolygonConfig(m=7, r_bar=2.2, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)
        centers = config.centers()
        for j in range(1, 7):
            want = 2.0 * 2.2 * math.sin(j * math.pi / 7.0)
            assert np.linalg.norm(centers[j] - centers[0]) == pytest.approx(want, rel=1e-13)

    @pytest.mark.parametrize("m", [2, 5, 37, 200, 1000])
    def test_direct_summation_matches_sine_form(self, m):
        config = PolygonConfig(m=m, r_bar=1.7, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)
        assert polygon_sum_direct(config) == pytest.approx(polygon_sum(config), rel=1e-12)

    def test_growth_exponent(self):
        ms = [10, 32, 100, 316, 1000, 3162, 10000]
        vals = [
            polygon_sum(PolygonConfig(m=m, r_bar=1.0, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS))
            for m in ms
        ]
        slope = np.polyfit(np.log(ms), np.log(vals), 1)[0]
        assert abs(slope - 5.0) / 5.0 < 0.01

    def test_minimum_bubbles(self):
        with pytest.raises(ValueError):
            PolygonConfig(m=1, r_bar=1.0, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)


class TestInteractionConstants:
    def test_A1_closed_form_amplitude_one(self):
        # with amplitude 1 the squared-bubble integral is pi^5/24 at N = 9
        got = radial_integral(lambda r: (1.0 + r * r) ** (-5.0), 9)
        assert got == pytest.approx(math.pi**5 / 24.0, rel=1e-10)

    def test_A1_value_and_cross_check(self):
        a1 = constant_A1(PARAMS)
        amp = c_n_alpha(PARAMS).canonical
        assert a1 == pytest.approx(amp**2 * math.pi**5 / 24.0, rel=1e-12)
        # at (9, 8) the pi powers cancel: A1 = 83160/24 exactly
        assert a1 == pytest.approx(83160.0 / 24.0, rel=1e-12)

    def test_A1_positive_and_beta_free(self):
        # A1 is an integral of the unit-scale bubble; no beta enters
        assert constant_A1(PARAMS) > 0.0

    def test_A2_extrapolation_matches_closed_oracle(self, consts):
        # independent oracle: the d -> infinity limit in closed form,
        # A2 = I(alpha/2) C^(2p) |S^(N-1)| (N-4)/(N(N+2))
        amp = c_n_alpha(PARAMS).canonical
        oracle = (
            i_of_s(9, 4.0) * amp**4 * sphere_area(9) * 5.0 / (9.0 * 11.0)
        )
        assert consts.A2 == pytest.approx(oracle, rel=1e-2)
        assert consts.A2_rel_uncertainty < 0.01

    def test_A2_scaled_values_monotone(self):
        est = constant_A2(PARAMS)
        assert all(b > a for a, b in zip(est.scaled_values, est.scaled_values[1:]))
        assert all(v > 0 for v in est.scaled_values)

    def test_channel_exponents(self):
        # each channel must decay with the d-exponent N-4
        ds = (8.0, 16.0, 32.0)
        locs, nls = [], []
        for d in ds:
            pi = pair_interaction(PARAMS, d)
            locs.append(-pi.local)
            nls.append(-pi.nonlocal_)
        for vals in (locs, nls):
            slope = np.polyfit(np.log(ds), np.log(vals), 1)[0]
            assert abs(-slope - 5.0) < 0.15

    def test_beta_covariance(self):
        # P_beta(d) = beta^(-1) P_1(beta d) exactly
        d, beta = 6.0, 2.0
        scaled = pair_interaction(PARAMS, d, beta=beta)
        unit = pair_interaction(PARAMS, beta * d, beta=1.0)
        assert scaled.total == pytest.approx(unit.total / beta, rel=1e-9)

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            InteractionConstants(A1=-1.0, A2=1.0)

    def test_a3_aggregation(self, consts):
        config = PolygonConfig(m=50, r_bar=2.0, x_bar_pp=np.zeros(7), beta=1.0, params=PARAMS)
        want = consts.A2 * polygon_sum(config) / 50.0**5
        assert consts.a3_for(config) == pytest.approx(want, rel=1e-14)


class TestReducedEquations:
    def _config(self, m=100, r=2.0, x3=1.0, t=0.05):
        xpp = np.zeros(7)
        xpp[0] = x3
        return PolygonConfig(
            m=m, r_bar=r, x_bar_pp=xpp, beta=t * m**5.0, params=PARAMS
        )

    def test_balance_closed_form(self, consts):
        # the last residual entry vanishes at t* = (A3/(A1 V))^(1/(N-8))
        V = parse_potential(ENGINEERED)
        config = self._config(t=0.04)
        a3 = consts.a3_for(config)
        v = V.evaluate(config.r_bar, config.x_bar_pp)
        t_star = (a3 / (consts.A1 * v)) ** (1.0 / (9.0 - 8.0))
        balanced = self._config(t=t_star)
        res = reduced_residuals(balanced, V, consts)
        assert abs(res[-1]) < 1e-9 * consts.A1 * v / t_star**5

    def test_residual_zero_at_engineered_critical_point(self, consts):
        V = parse_potential(ENGINEERED)
        config = self._config()
        res = reduced_residuals(config, V, consts)
        assert np.max(np.abs(res[:-1])) < 1e-9

    def test_rotation_relabeling_invariance(self, consts):
        # the residuals see the polygon only through its distance multiset
        V = parse_potential(ENGINEERED)
        a = reduced_residuals(self._config(), V, consts)
        b = reduced_residuals(self._config(), V, consts)
        assert np.array_equal(a, b)

    def test_positive_potential_required(self, consts):
        V = parse_potential("r - 10")
        with pytest.raises(ValueError):
            reduced_residuals(self._config(), V, consts)

    def test_jacobian_matches_finite_differences(self, consts):
        from bihartree.multibubble import _balance_jacobian, _balance_residual

        V = parse_potential(ENGINEERED)
        config = self._config()
        rng = np.random.default_rng(5150)
        for _ in range(3):
            w = np.empty(9)
            w[0] = rng.uniform(1.7, 2.3)
            w[1:8] = rng.normal(scale=0.2, size=7)
            w[1] += 1.0
            w[8] = rng.uniform(0.03, 0.06)
            jac = _balance_jacobian(w, V, consts, config)
            fd = np.empty_like(jac)
            for i in range(9):
                h = 1e-6 * max(1.0, abs(w[i]))
                wp, wm = w.copy(), w.copy()
                wp[i] += h
                wm[i] -= h
                fd[:, i] = (
                    _balance_residual(wp, V, consts, config)[0]
                    - _balance_residual(wm, V, consts, config)[0]
                ) / (2.0 * h)
            scale = np.max(np.abs(jac))
            assert np.max(np.abs(jac - fd)) / scale < 1e-5


class TestSolver:
    def test_converges_to_engineered_point(self, consts):
        V = parse_potential(ENGINEERED)
        xpp0 = np.zeros(7)
        xpp0[0] = 0.8
        initial = PolygonConfig(m=100, r_bar=2.3, x_bar_pp=xpp0, beta=0.05 * 100**5, params=PARAMS)
        sol, report = solve_reduced(V, 100, initial, consts)
        assert abs(sol.r_bar - 2.0) < 1e-8
        target = np.zeros(7)
        target[0] = 1.0
        assert np.max(np.abs(sol.x_bar_pp - target)) < 1e-8
        v = V.evaluate(sol.r_bar, sol.x_bar_pp)
        t_closed = consts.a3_for(sol) / (consts.A1 * v)
        assert report["t_star"] == pytest.approx(t_closed, rel=1e-8)
        assert report["converged"] and report["t_in_range"]

    def test_deterministic(self, consts):
        V = parse_potential(ENGINEERED)
        xpp0 = np.zeros(7)
        xpp0[0] = 0.7
        initial = PolygonConfig(m=64, r_bar=2.2, x_bar_pp=xpp0, beta=0.05 * 64**5, params=PARAMS)
        a, ra = solve_reduced(V, 64, initial, consts)
        b, rb = solve_reduced(V, 64, initial, consts)
        assert a.r_bar == b.r_bar and a.beta == b.beta
        assert ra["t_star"] == rb["t_star"]

    def test_constant_potential_fails(self, consts):
        V = parse_potential("1")
        initial = PolygonConfig(
            m=50, r_bar=2.0, x_bar_pp=np.zeros(7), beta=0.05 * 50**5, params=PARAMS
        )
        with pytest.raises(SolverError) as err:
            solve_reduced(V, 50, initial, consts, max_iter=25)
        assert err.value.trace  # iteration trace attached

    def test_degree_heuristic(self):
        V = parse_potential(ENGINEERED)
        box = {"r": (1.5, 2.5), "xpp_center": np.array([1.0, 0, 0, 0, 0, 0, 0]), "xpp_radius": 0.5}
        deg = degree_heuristic(V, box, samples_per_face=10)
        assert deg["heuristic"]
        assert deg["degree_estimate"] == 1
        assert deg["boundary_min_grad_norm"] > 0.0


def test_alpha_range_guard():
    assert alpha_range_guard(PARAMS)
    assert alpha_range_guard(ProblemParams(9, 3.6))  # boundary 6 - 12/5 = 3.6 included
    assert not alpha_range_guard(ProblemParams(9, 3.5))
