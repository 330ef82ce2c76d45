import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from edlab.catalog import (
    BakerSpec,
    circle_K_closed_form,
    circle_fixed_points,
    circle_stationary,
    make_baker,
    make_circle_flow,
    make_system,
)
from edlab.dynsys import check_reversal
from edlab.errors import DegenerateOmegaError
from edlab.measures import Atomic, AbsContinuous, lebesgue
from edlab.transport import QuadratureRule, log_density_at, uniform_density

# sqrt(3) / (2 pi * 2) = 1 / (2 Z) with Z = int dx / (2 - sin x) from scipy.integrate.quad
RHO_BAR_AT_ZERO = 0.13783222385544802


class TestCircleFlow:
    def test_vector_field_values(self):
        assert make_circle_flow(0.0).vector_field(np.array([[math.pi / 2]]))[0, 0] == -1.0
        assert abs(make_circle_flow(0.5).vector_field(np.array([[math.pi / 6]]))[0, 0]) < 1e-15

    @pytest.mark.parametrize("omega", [-1.5, 0.0, 0.3, 2.0])
    def test_divergence_at_zero(self, omega):
        assert make_circle_flow(omega).divergence(np.array([[0.0]]))[0] == -1.0

    def test_reversal_is_involution(self, circle05, rng):
        R = circle05.reversal
        x = rng.uniform(-math.pi, math.pi, 100)
        assert np.allclose(R(R(x)), x, atol=1e-14)

    def test_reversal_conjugacy(self, rng):
        sys_ = make_circle_flow(0.3)
        x = rng.uniform(-math.pi, math.pi, 10)
        assert np.max(check_reversal(sys_, x, 2.0)) < 1e-8


class TestFixedPoints:
    def test_half(self):
        xp, xm = circle_fixed_points(0.5)
        assert xp == pytest.approx(0.5235987755982988, abs=1e-15)
        assert xm == pytest.approx(2.6179938779914944, abs=1e-15)

    def test_degenerate(self):
        assert circle_fixed_points(1.0) == (math.pi / 2, math.pi / 2)
        assert circle_fixed_points(-1.0) == (-math.pi / 2, -math.pi / 2)

    def test_none_above_one(self):
        assert circle_fixed_points(2.0) is None

    def test_negative_omega_wraps(self):
        xp, xm = circle_fixed_points(-0.5)
        assert -math.pi <= xm < math.pi
        assert xm == pytest.approx(-5 * math.pi / 6, abs=1e-14)

    @given(st.floats(min_value=0.01, max_value=0.99))
    def test_classification(self, omega):
        sys_ = make_circle_flow(omega)
        xp, xm = circle_fixed_points(omega)
        div = sys_.divergence(np.array([[xp], [xm]]))
        assert div[0] < 0 < div[1]
        assert abs(xp) < abs(xm)


class TestClosedFormK:
    def test_values(self):
        assert circle_K_closed_form(0.6) == pytest.approx(0.8, abs=1e-15)
        assert circle_K_closed_form(2.0) == 0.0
        assert circle_K_closed_form(0.0) == 1.0
        assert circle_K_closed_form(1.0) == 0.0


class TestStationary:
    def test_atomic_below_one(self):
        nu = circle_stationary(0.5)
        assert isinstance(nu, Atomic)
        assert nu.points[0, 0] == pytest.approx(math.pi / 6, abs=1e-15)
        assert nu.weights[0] == 1.0

    def test_backward_branch(self):
        nu = circle_stationary(0.5, backward=True)
        assert nu.points[0, 0] == pytest.approx(5 * math.pi / 6, abs=1e-14)

    def test_density_above_one(self):
        nu = circle_stationary(2.0)
        assert isinstance(nu, AbsContinuous)
        assert nu.rho_bar(np.array([[0.0]]))[0] == pytest.approx(RHO_BAR_AT_ZERO, abs=1e-12)
        x = np.linspace(-3, 3, 13).reshape(-1, 1)
        c = math.sqrt(3) / (2 * math.pi)
        assert np.allclose(nu.rho_bar(x), c / (2 - np.sin(x[:, 0])), atol=1e-12)

    def test_degenerate_error(self):
        with pytest.raises(DegenerateOmegaError):
            circle_stationary(1.0)


class TestBaker:
    def test_standard_values(self, baker):
        out = baker.forward(np.array([[0.3, 0.4]]))
        assert np.allclose(out, [[0.6, 0.2]], atol=1e-15)
        assert baker.log_jac_inv(np.array([[0.1, 0.1]]))[0] == 0.0
        assert not math.copysign(1.0, baker.log_jac_inv(np.array([[0.1, 0.1]]))[0]) < 0

    def test_dissipative_values(self, baker025):
        out = baker025.forward(np.array([[0.7, 0.2]]))
        assert np.allclose(out, [[0.4, 0.55]], atol=1e-15)
        assert baker025.log_jac_inv(np.array([[0.1, 0.1]]))[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_off_image_undefined(self, baker025):
        assert np.all(np.isnan(baker025.inverse(np.array([[0.4, 0.3]]))))

    @pytest.mark.parametrize("a", [0.5, 0.25, 0.1])
    def test_round_trip(self, a, rng):
        sys_ = make_baker(a)
        p = rng.random((10_000, 2))
        assert (p[:, 0] < 0.5).any() and (p[:, 0] >= 0.5).any()
        back = sys_.inverse(sys_.forward(p))
        assert np.max(np.abs(back - p)) <= 1e-15

    @pytest.mark.parametrize("a", [0.0, -0.1, 0.6])
    def test_parameter_range(self, a):
        with pytest.raises(ValueError):
            BakerSpec(a)

    def test_uniform_is_invariant(self, baker):
        ev = uniform_density(baker)
        nodes = QuadratureRule.dyadic(6).nodes
        assert np.all(log_density_at(ev, nodes, 6) == 0.0)
        assert lebesgue(QuadratureRule.dyadic(4)).rho_bar(nodes[:3]).tolist() == [1.0, 1.0, 1.0]


def test_make_system_dispatch():
    assert make_system("circle", omega=0.5).params == {"omega": 0.5}
    assert make_system("baker").params == {"a": 0.5}
    with pytest.raises(ValueError):
        make_system("circle")
    with pytest.raises(ValueError):
        make_system("lorentz")
