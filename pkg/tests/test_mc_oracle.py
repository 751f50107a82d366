import math

import numpy as np
import pytest

from conftest import CGMY_REF, MATURITY, NIG_REF, RATE, SPOT, VG_REF
from lrlevy.errors import InvalidInput, InvalidModel
from lrlevy.fourier_pricing import cos_price
from lrlevy.levy_models import MarketLeg, RiskNeutralSetup
from lrlevy.mc_oracle import SimSpec, mc_price, simulate_terminal


def spec(model=NIG_REF, n=200_000, **kw):
    leg_s = kw.pop("leg_s", MarketLeg(SPOT, 0.0, 0.0, 1.0, "S"))
    leg_z = kw.pop("leg_z", MarketLeg(80.0, 0.0, 0.0, 0.5, "Z"))
    return SimSpec(model, leg_s, leg_z, RATE, MATURITY, n, **kw)


def test_deterministic_limit():
    s = spec(leg_s=MarketLeg(SPOT, 0.0, 0.0, 0.0), leg_z=MarketLeg(80.0, 0.0, 0.0, 0.0), n=1000)
    sample = simulate_terminal(s)
    np.testing.assert_allclose(sample.s_t, SPOT * math.exp(RATE * MATURITY), rtol=1e-15)
    np.testing.assert_allclose(sample.z_t, 80.0 * math.exp(RATE * MATURITY), rtol=1e-15)


def test_identical_legs_coincide_pathwise():
    leg = MarketLeg(SPOT, 0.01, 0.15, 0.8)
    sample = simulate_terminal(spec(VG_REF, 10_000, leg_s=leg, leg_z=leg, n_steps=3))
    np.testing.assert_array_equal(sample.s_t, sample.z_t)


@pytest.mark.parametrize("model", [NIG_REF, VG_REF], ids=lambda m: m.name)
@pytest.mark.parametrize("steps", [1, 4])
def test_martingale_mean(model, steps):
    leg_s = MarketLeg(SPOT, 0.01, 0.1, 1.0)
    price, se = mc_price(spec(model, 1_000_000 if steps == 1 else 200_000, leg_s=leg_s, n_steps=steps), lambda s, z: s)
    assert abs(price - SPOT * math.exp(-0.01 * MATURITY)) < 3 * se


def test_constant_payoff_is_discount_exactly():
    price, se = mc_price(spec(n=1000), lambda s, z: 1.0)
    assert price == math.exp(-RATE * MATURITY)
    assert se == 0.0


@pytest.mark.parametrize("model", [NIG_REF, VG_REF], ids=lambda m: m.name)
def test_call_agrees_with_cos(model):
    sample = simulate_terminal(spec(model, 1_000_000, seed=3))
    cf = RiskNeutralSetup(model, MarketLeg(SPOT), RATE, MATURITY).cf
    for k in (90.0, 100.0, 110.0):
        price, se = mc_price(sample, lambda s, z: np.maximum(s - k, 0.0))
        assert abs(price - cos_price(cf, "call", SPOT, k, math.exp(-RATE * MATURITY))) < 3 * se


def test_z_leg_with_half_loading_agrees_with_cos():
    sample = simulate_terminal(spec(NIG_REF, 1_000_000, seed=11))
    cf = RiskNeutralSetup(NIG_REF, MarketLeg(80.0, kappa=0.5), RATE, MATURITY).cf
    price, se = mc_price(sample, lambda s, z: np.maximum(z - 80.0, 0.0))
    assert abs(price - cos_price(cf, "call", 80.0, 80.0, math.exp(-RATE * MATURITY))) < 3 * se


def test_seed_reproducibility():
    a = simulate_terminal(spec(n=100_000, seed=5))
    b = simulate_terminal(spec(n=100_000, seed=5))
    c = simulate_terminal(spec(n=100_000, seed=6))
    np.testing.assert_array_equal(a.s_t, b.s_t)
    assert not np.array_equal(a.s_t, c.s_t)


def test_antithetic_pairs_mirror_the_gaussian_parts():
    n = 150_000  # spans several blocks
    sample = simulate_terminal(spec(NIG_REF, n, antithetic=True, leg_s=MarketLeg(SPOT, 0.0, 0.2, 1.0)))
    half = n // 2
    np.testing.assert_allclose(sample.w_s[:half], -sample.w_s[half:], atol=1e-15)
    price, se = mc_price(sample, lambda s, z: s)
    assert abs(price - SPOT) < 3 * se


def test_correlation_of_diffusions():
    s = spec(n=200_000, rho=0.3, leg_s=MarketLeg(SPOT, 0.0, 0.2, 1.0), leg_z=MarketLeg(80.0, 0.0, 0.2, 1.0))
    sample = simulate_terminal(s)
    assert np.corrcoef(sample.w_s, sample.w_z)[0, 1] == pytest.approx(0.3, abs=0.01)


def test_rejects_unsupported_inputs():
    with pytest.raises(InvalidModel):
        spec(CGMY_REF)
    with pytest.raises(InvalidInput):
        spec(n=11, antithetic=True)
    with pytest.raises(InvalidInput):
        spec(n=0)
