"""Driver construction, Lipschitz sampling, and structural classification."""

import numpy as np
import pytest

from gmech import (
    BSMarketParams,
    Generator,
    InvalidParams,
    NegativeMu,
    abs_z_generator,
    black_scholes_generator,
    classify_generator,
    domination_generator,
    linear_generator,
    verify_lipschitz,
    zero_generator,
)


class TestDominationGenerator:
    def test_values(self):
        g = domination_generator(0.5)
        assert g(0.0, 1.0, 2.0) == 1.5
        assert g(0.3, 0.0, 0.0) == 0.0
        assert g(0.0, -1.0, -2.0) == 1.5

    def test_mu_zero_is_the_zero_driver(self):
        g = domination_generator(0.0)
        assert g(0.0, 3.0, -4.0) == 0.0

    def test_negative_mu(self):
        with pytest.raises(NegativeMu):
            domination_generator(-0.1)

    def test_flags(self):
        g = domination_generator(0.5)
        assert g.flags.zero_at_zero and g.flags.deterministic


class TestBlackScholesGenerator:
    def test_plugin_value(self):
        g = black_scholes_generator(BSMarketParams(r=0.05, b=0.08, sigma=0.2))
        assert abs(g(0.0, 1.0, 0.0) - (-0.05)) < 1e-15
        assert g.mu == pytest.approx(max(0.05, 0.03 / 0.2))

    def test_drift_equals_rate_kills_hedge_term(self):
        g = black_scholes_generator(BSMarketParams(r=0.05, b=0.05, sigma=0.2))
        for y, z in [(1.0, 3.0), (-2.0, 0.5)]:
            assert g(0.0, y, z) == pytest.approx(-0.05 * y, abs=1e-15)

    def test_degenerate_market_gives_zero_driver(self):
        g = black_scholes_generator(BSMarketParams(r=0.0, b=0.0, sigma=1.0))
        assert g(0.0, 5.0, -7.0) == 0.0

    def test_bad_sigma(self):
        with pytest.raises(InvalidParams):
            BSMarketParams(r=0.05, b=0.08, sigma=0.0)
        with pytest.raises(InvalidParams):
            BSMarketParams(r=0.05, b=0.08, sigma=-1.0)


class TestVerifyLipschitz:
    def test_domination_driver_is_exactly_tight(self):
        g = domination_generator(0.5)
        for seed in (0, 1, 2):
            rep = verify_lipschitz(g, samples=500, seed=seed)
            assert rep.ok
            assert rep.worst_ratio <= 0.5 + 1e-12

    def test_quadratic_violates_declared_constant(self):
        g = Generator(fn=lambda t, y, z: np.asarray(y, float) ** 2, mu=1.0)
        rep = verify_lipschitz(g, samples=500,
                               box=((-10.0, 10.0), (-10.0, 10.0)), seed=3)
        assert not rep.ok
        assert rep.witness is not None

    def test_zero_driver(self):
        rep = verify_lipschitz(zero_generator(), samples=100, seed=0)
        assert rep.ok and rep.worst_ratio == 0.0

    def test_sample_validation(self):
        with pytest.raises(InvalidParams):
            verify_lipschitz(zero_generator(), samples=0)


class TestClassifyGenerator:
    def test_domination_driver_structure(self):
        rep = classify_generator(domination_generator(0.5), samples=300, seed=1)
        assert rep.zero_at_zero.holds
        assert rep.convex.holds
        assert rep.subadditive.holds
        assert rep.positively_homogeneous.holds
        assert rep.sellers_condition.holds
        assert not rep.y_independent.holds
        assert not rep.zero_rate.holds

    def test_black_scholes_structure(self):
        g = black_scholes_generator(BSMarketParams(r=0.05, b=0.08, sigma=0.2))
        rep = classify_generator(g, samples=300, seed=2)
        assert not rep.y_independent.holds
        assert rep.y_independent.witness is not None
        assert rep.positively_homogeneous.holds
        assert rep.convex.holds and rep.concave.holds  # affine

    def test_quadratic_hedge_term(self):
        g = Generator(fn=lambda t, y, z: np.asarray(z, float) ** 2, mu=10.0)
        rep = classify_generator(g, samples=300, seed=3)
        assert rep.convex.holds
        assert not rep.positively_homogeneous.holds
        assert rep.positively_homogeneous.witness is not None

    def test_abs_z_flags_and_structure(self):
        g = abs_z_generator(0.3)
        assert g.flags.z_only and g.flags.y_independent
        rep = classify_generator(g, samples=200, seed=4)
        assert rep.y_independent.holds
        assert rep.zero_rate.holds
        assert not rep.z_independent.holds

    def test_verdicts_are_deterministic(self):
        g = linear_generator(0.2, -0.4)
        a = classify_generator(g, samples=150, seed=9).as_dict()
        b = classify_generator(g, samples=150, seed=9).as_dict()
        assert a == b
