import math

import numpy as np
import pytest

from edlab.catalog import make_baker, make_circle_flow
from edlab.errors import EvaluationError, NonPositiveDensityError
from edlab.measures import (
    Empirical,
    atomic,
    birkhoff_empirical,
    expect,
    lebesgue,
    normalize_density,
)
from edlab.transport import QuadratureRule

# Z = int_{-pi}^{pi} dx / (2 - sin x) by scipy.integrate.quad; equals 2 pi / sqrt 3
Z_OMEGA2 = 3.6275987284684357
RHO_BAR_AT_ZERO = 0.13783222385544802
Q = QuadratureRule.circle()


def _coord(i):
    return lambda p: p[:, i]


class TestAtomic:
    def test_point_evaluation(self, circle05):
        nu = atomic([math.pi / 6], [1.0], circle05)
        assert expect(nu, lambda x: np.cos(x[:, 0])) == pytest.approx(0.8660254037844387, abs=1e-15)

    def test_default_weights(self):
        nu = atomic([0.0, 1.0, 2.0])
        assert math.fsum(nu.weights) == 1.0

    def test_rejects_non_fixed_point(self, circle05):
        with pytest.raises(ValueError):
            atomic([0.1], [1.0], circle05)

    def test_map_fixed_point(self, baker025):
        assert atomic([[0.0, 0.0]], [1.0], baker025).points.shape == (1, 2)
        with pytest.raises(ValueError):
            atomic([[0.3, 0.0]], [1.0], baker025)

    @pytest.mark.parametrize("w", [[0.7, 0.7], [1.5, -0.5]])
    def test_bad_weights(self, w):
        with pytest.raises(ValueError):
            atomic([0.0, 1.0], w)

    def test_evaluation_failure_carries_point(self):
        nu = atomic([0.0, 1.0])
        with pytest.raises(EvaluationError) as info:
            expect(nu, lambda x: np.where(x[:, 0] > 0.5, np.nan, 1.0))
        assert info.value.point[0] == 1.0

    def test_raising_h_is_wrapped(self):
        def h(x):
            raise KeyError("boom")

        with pytest.raises(EvaluationError):
            expect(atomic([0.0]), h)


class TestAbsContinuous:
    def test_uniform_sine_vanishes(self):
        assert abs(expect(lebesgue(Q), lambda x: np.sin(x[:, 0]))) < 1e-12

    def test_constant_density(self):
        nu = normalize_density(lambda x: np.ones(len(x)), Q)
        assert np.allclose(nu.rho_bar(Q.nodes), 1 / (2 * math.pi), rtol=1e-14)

    def test_circulating_normalizer(self):
        nu = normalize_density(lambda x: 1 / np.abs(2 - np.sin(x[:, 0])), Q)
        assert nu.rho_bar(np.array([[0.0]]))[0] == pytest.approx(RHO_BAR_AT_ZERO, abs=1e-12)
        assert nu.rho_bar(np.array([[0.0]]))[0] == pytest.approx(1 / (2 * Z_OMEGA2), abs=1e-12)
        assert abs(Q.integrate(nu.rho_bar) - 1) < 1e-10

    def test_zero_node_rejected(self):
        with pytest.raises(NonPositiveDensityError) as info:
            normalize_density(lambda x: np.where(np.abs(x[:, 0] - Q.nodes[5, 0]) < 1e-12, 0.0, 1.0), Q)
        assert info.value.node[0] == Q.nodes[5, 0]

    def test_idempotent(self):
        nu = normalize_density(lambda x: 1 / (2 - np.sin(x[:, 0])), Q)
        again = normalize_density(nu.rho_bar, Q)
        assert np.max(np.abs(again.rho_bar(Q.nodes) - nu.rho_bar(Q.nodes))) <= 1e-12

    def test_divergence_expectation_vanishes(self):
        nu = normalize_density(lambda x: 1 / (2 - np.sin(x[:, 0])), Q)
        assert abs(expect(nu, make_circle_flow(2.0).divergence)) < 1e-10


class TestEmpirical:
    def test_baker_x_mean(self, baker):
        nu = birkhoff_empirical(baker, burn_in=100, samples=1_000_000, seed=1)
        assert abs(expect(nu, _coord(0)) - 0.5) < 3e-3

    def test_dissipative_y_mean(self, baker025):
        nu = birkhoff_empirical(baker025, burn_in=1000, samples=100_000, seed=0)
        assert abs(expect(nu, _coord(1)) - 1 / 3) < 2e-3

    def test_baker_xy_mean(self, baker):
        nu = birkhoff_empirical(baker, samples=100_000, seed=3)
        assert abs(expect(nu, lambda p: p[:, 0] * p[:, 1]) - 0.25) < 3e-3

    def test_single_sample_at_fixed_point(self, baker025):
        nu = birkhoff_empirical(baker025, x0=[0.0, 0.0], burn_in=0, samples=1)
        h = lambda p: 3.0 + p[:, 0] + p[:, 1]
        assert expect(nu, h) == 3.0

    def test_seed_determinism(self, baker025):
        a = birkhoff_empirical(baker025, samples=1000, seed=7)
        b = birkhoff_empirical(baker025, samples=1000, seed=7)
        c = birkhoff_empirical(baker025, samples=1000, seed=8)
        assert np.array_equal(a.orbit, b.orbit)
        assert not np.array_equal(a.orbit, c.orbit)

    def test_orbit_follows_map(self, baker025):
        # The low bit is refilled each step, so consecutive entries agree with T
        # up to one unit in the last place of x.
        nu = birkhoff_empirical(baker025, burn_in=10, samples=5000, seed=2)
        step = baker025.forward(nu.orbit[:-1])
        assert np.max(np.abs(step - nu.orbit[1:])) <= 2.0 ** -53

    def test_orbit_does_not_collapse(self, baker):
        nu = birkhoff_empirical(baker, burn_in=500, samples=200, seed=0)
        assert np.ptp(nu.samples[:, 0]) > 0.5

    def test_generic_map_without_sampler(self):
        sys_ = make_baker(0.25)
        plain = type(sys_)(**{**sys_.__dict__, "orbit_sampler": None})
        nu = birkhoff_empirical(plain, x0=[0.25, 0.1], burn_in=3, samples=4)
        assert np.array_equal(nu.orbit[1:], plain.forward(nu.orbit[:-1]))

    def test_preimage_pairing(self, baker025):
        nu = birkhoff_empirical(baker025, burn_in=20, samples=50, seed=4)
        assert np.array_equal(nu.preimages(0), nu.samples)
        assert np.array_equal(nu.preimages(3), nu.orbit[17:67])
        with pytest.raises(ValueError):
            nu.preimages(21)

    @pytest.mark.parametrize("a", [0.5, 0.25])
    def test_shift_invariance(self, a):
        sys_ = make_baker(a)
        nu = birkhoff_empirical(sys_, samples=100_000, seed=11)
        s = nu.n_samples
        for i in (0, 1):
            h = _coord(i)
            shifted = expect(nu, lambda p: h(sys_.forward(p)))
            sd = float(np.std(h(nu.samples)))
            assert abs(shifted - expect(nu, h)) < 5 * sd / math.sqrt(s)

    def test_argument_checks(self, baker):
        with pytest.raises(ValueError):
            birkhoff_empirical(baker, samples=0)
        with pytest.raises(ValueError):
            birkhoff_empirical(baker, burn_in=-1)

    def test_is_empirical(self, baker):
        assert isinstance(birkhoff_empirical(baker, burn_in=0, samples=3), Empirical)
