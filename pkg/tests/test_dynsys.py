import math

import numpy as np
import pytest

from edlab.catalog import make_baker, make_circle_flow
from edlab.dynsys import (
    Circle,
    ContinuousSystem,
    IntegratorConfig,
    advance,
    backward_orbit_with_log_jacobian,
    backward_orbits,
    check_reversal,
    map_backward_orbit,
    map_forward,
)
from edlab.errors import (
    IntegrationBudgetError,
    MissingReversalError,
    NumericalOverflowError,
    PreimageUndefinedError,
)

# Reference values from scipy.integrate.solve_ivp (rtol = atol = 1e-13),
# circle flow omega = 0.3 started at x = 1.0 and integrated for t = 2.
REF_FORWARD_X = 0.4236597144656623
REF_BACKWARD_X = 2.2555915558396356
REF_BACKWARD_LOGJ = -0.13192547950313765
# int_{-pi}^{pi} dx / (2 - sin x), scipy.integrate.quad
PERIOD_OMEGA2 = 3.6275987284684357

CIRCLE = Circle()


def _rotation():
    return ContinuousSystem(
        dim=1,
        vector_field=lambda x: np.full_like(x, 1.3),
        divergence=lambda x: np.zeros(x.shape[:-1]),
        domain=CIRCLE,
        name="rotation",
    )


class TestAdvance:
    def test_fixed_point_stays(self, circle05):
        x = advance(circle05, math.pi / 6, 7.0)
        assert float(x) == pytest.approx(math.pi / 6, abs=1e-15)

    def test_zero_time_is_identity(self, circle05):
        x = np.array([0.1, -2.0, 3.0])
        assert np.array_equal(advance(circle05, x, 0.0), x)

    def test_full_period_returns(self, circle2):
        x = np.linspace(-3.0, 3.0, 7)
        y = advance(circle2, x, PERIOD_OMEGA2)
        assert np.all(CIRCLE.distance(x, y) < 1e-10)

    def test_matches_reference_solver(self):
        sys_ = make_circle_flow(0.3)
        assert float(advance(sys_, 1.0, 2.0)) == pytest.approx(REF_FORWARD_X, abs=1e-11)

    def test_result_is_wrapped(self, circle2):
        x = advance(circle2, np.linspace(-3, 3, 50), 10.0)
        assert np.all((x >= -math.pi) & (x < math.pi))

    def test_nonfinite_time_rejected(self, circle05):
        with pytest.raises(ValueError):
            advance(circle05, 0.0, math.inf)

    def test_overflow_aborts(self):
        blow = ContinuousSystem(
            dim=1,
            vector_field=lambda x: x * x,
            divergence=lambda x: 2 * x[..., 0],
            domain=_Line(),
        )
        with pytest.raises(NumericalOverflowError), np.errstate(over="ignore"):
            advance(blow, 1.0, 2.0, IntegratorConfig(h=1e-2))

    def test_budget(self, circle2):
        with pytest.raises(IntegrationBudgetError):
            advance(circle2, 0.0, 10.0, IntegratorConfig(h=1e-3, max_substeps=100))


class _Line:
    volume = math.inf

    def wrap(self, x):
        return x

    def distance(self, a, b):
        return np.abs(np.asarray(a) - np.asarray(b)).reshape(np.shape(a)[:1] or ())


class TestProperties:
    def test_semigroup(self, rng):
        sys_ = make_circle_flow(0.7)
        x = rng.uniform(-math.pi, math.pi, 100)
        t1 = rng.uniform(-2, 2, 100)
        t2 = rng.uniform(-2, 2, 100)
        for xi, a, b in zip(x, t1, t2):
            once = advance(sys_, xi, a + b)
            twice = advance(sys_, advance(sys_, xi, a), b)
            assert float(CIRCLE.distance(once, twice)) < 1e-8

    def test_inverse_consistency(self, rng):
        sys_ = make_circle_flow(1.4)
        x = rng.uniform(-math.pi, math.pi, 200)
        for t in (0.3, 1.0, 2.5):
            back = advance(sys_, advance(sys_, x, t), -t)
            assert np.max(CIRCLE.distance(back, x)) < 1e-8

    def test_jacobian_cocycle(self, rng):
        sys_ = make_circle_flow(0.5)
        x = rng.uniform(-math.pi, math.pi, 50)
        t1, t2 = 0.7, 1.6
        _, total = backward_orbit_with_log_jacobian(sys_, x, t1 + t2)
        y, second = backward_orbit_with_log_jacobian(sys_, x, t2)
        _, first = backward_orbit_with_log_jacobian(sys_, y, t1)
        assert np.max(np.abs(total - (second + first))) < 1e-8

    def test_fourth_order_convergence(self):
        sys_ = make_circle_flow(0.3)
        h = 0.1
        ref = float(advance(sys_, 1.0, 2.0, IntegratorConfig(h=h / 16)))
        e1 = abs(float(advance(sys_, 1.0, 2.0, IntegratorConfig(h=h))) - ref)
        e2 = abs(float(advance(sys_, 1.0, 2.0, IntegratorConfig(h=h / 2))) - ref)
        assert 12.0 < e1 / e2 < 20.0


class TestBackwardOrbit:
    def test_fixed_point_closed_form(self, circle05):
        x, logj = backward_orbit_with_log_jacobian(circle05, math.pi / 6, 4.0)
        assert float(x) == pytest.approx(math.pi / 6, abs=1e-15)
        assert float(logj) == pytest.approx(4.0 * math.cos(math.pi / 6), abs=1e-12)

    def test_zero_time(self, circle05):
        x, logj = backward_orbit_with_log_jacobian(circle05, 1.234, 0.0)
        assert float(x) == 1.234 and float(logj) == 0.0

    def test_divergence_free_field(self):
        x, logj = backward_orbit_with_log_jacobian(_rotation(), np.array([0.5, 1.0]), 3.0)
        assert np.all(logj == 0.0)
        assert np.allclose(x, CIRCLE.wrap(np.array([0.5, 1.0]) - 3.9), atol=1e-12)

    def test_matches_reference_solver(self):
        x, logj = backward_orbit_with_log_jacobian(make_circle_flow(0.3), 1.0, 2.0)
        assert float(x) == pytest.approx(REF_BACKWARD_X, abs=1e-11)
        assert float(logj) == pytest.approx(REF_BACKWARD_LOGJ, abs=1e-11)

    def test_checkpoints_match_single_runs(self, circle05):
        x = np.array([-1.0, 0.2, 2.9])
        series = backward_orbits(circle05, x, [0.0, 1.5, 3.0])
        for t, (pts, logj) in zip([0.0, 1.5, 3.0], series):
            p1, l1 = backward_orbit_with_log_jacobian(circle05, x, t)
            assert np.allclose(pts, p1, atol=1e-12)
            assert np.allclose(logj, l1, atol=1e-12)

    def test_negative_time_rejected(self, circle05):
        with pytest.raises(ValueError):
            backward_orbit_with_log_jacobian(circle05, 0.0, -1.0)


class TestMaps:
    def test_volume_preserving_baker(self, baker, rng):
        x = rng.random((20, 2))
        pts, logj = map_backward_orbit(baker, x, 9)
        assert np.all(logj == 0.0)
        assert np.allclose(map_forward(baker, pts, 9), x, atol=1e-12)

    def test_dissipative_baker_log_jacobian(self, baker025):
        x = map_forward(baker025, np.array([0.3, 0.7]), 5)
        _, logj = map_backward_orbit(baker025, x, 3)
        assert float(logj) == pytest.approx(3 * math.log(2), abs=1e-15)

    def test_zero_steps(self, baker025):
        x = np.array([0.4, 0.3])
        pts, logj = map_backward_orbit(baker025, x, 0)
        assert np.array_equal(pts, x) and float(logj) == 0.0

    def test_preimage_failure_reports_step(self, baker025):
        # y = 0.2 < a, so one step back is defined and lands at y = 0.8, off the image
        x = np.array([0.4, 0.2])
        with pytest.raises(PreimageUndefinedError) as info:
            map_backward_orbit(baker025, x, 3)
        assert info.value.step == 1

    def test_off_image_at_step_zero(self, baker025):
        with pytest.raises(PreimageUndefinedError) as info:
            map_backward_orbit(baker025, np.array([0.4, 0.3]), 1)
        assert info.value.step == 0


class TestReversal:
    def test_random_points(self, circle05, rng):
        x = rng.uniform(-math.pi, math.pi, 20)
        assert np.max(check_reversal(circle05, x, 3.0)) < 1e-8

    def test_zero_time_exact(self, circle05):
        assert np.all(check_reversal(circle05, np.array([0.3, -2.0]), 0.0) == 0.0)

    def test_other_omega(self):
        assert float(check_reversal(make_circle_flow(0.8), 0.0, 1.0)) < 1e-8

    def test_missing_reversal(self):
        with pytest.raises(MissingReversalError):
            check_reversal(_rotation(), 0.0, 1.0)

