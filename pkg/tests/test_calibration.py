import math
import warnings

import numpy as np
import pytest

from conftest import BS_REF, CGMY_REF, MATURITY, NIG_REF, RATE, SPOT, VG_REF, common_shock_history
from lrlevy.calibration import (
    CalibrationSettings,
    FitSettings,
    OptionChain,
    PricerConfig,
    Quote,
    calibrate,
    consistent_div_z,
    estimate_leg_vols,
    fit_model,
    from_model,
    historical_vol,
    model_quote_prices,
    relative_rmse,
    risk_neutral_drift,
    rmse_objective,
    synthetic_chain,
    to_model,
    update_shadow_rate,
)
from lrlevy.errors import ConfigError, DegenerateSpec, NonConvergence
from lrlevy.levy_models import BS, CGMY, MarketLeg, jump_compensator

STRIKES21 = np.linspace(80.0, 120.0, 21)
LEG = MarketLeg(SPOT)


# --- estimators ------------------------------------------------------------------


def test_constant_prices_have_zero_vol():
    assert historical_vol(np.zeros(50)) == 0.0


def test_alternating_returns_vol():
    x = 0.01
    r = np.tile([x, -x], 25)
    assert historical_vol(r) == pytest.approx(x * math.sqrt(50 / 49) * math.sqrt(252), rel=1e-12)


def test_gbm_vol_recovered(rng):
    r = 0.2 / math.sqrt(252) * rng.standard_normal(100_000) - 0.02 / 252
    assert historical_vol(r) == pytest.approx(0.2, rel=0.01)


def test_leg_vols_of_common_shock_history():
    ss, sz = estimate_leg_vols(common_shock_history())
    assert sz / ss == pytest.approx(0.25, rel=1e-12)


# --- drifts and the rate update ---------------------------------------------------


def test_drift_identities():
    assert risk_neutral_drift(0.03, MarketLeg(SPOT, 0.0, 0.0, 0.0), CGMY_REF) == 0.03
    assert risk_neutral_drift(0.03, MarketLeg(SPOT, 0.03, 0.0, 0.0), CGMY_REF) == 0.0


def test_drift_with_jumps_and_diffusion():
    lam = jump_compensator(CGMY_REF, 1.0)
    got = risk_neutral_drift(0.02, MarketLeg(SPOT, 0.0, 0.1, 1.0), CGMY_REF)
    assert got == pytest.approx(0.02 + 0.005 + lam, abs=1e-15)


def test_update_shadow_rate():
    assert update_shadow_rate(0.04, 0.04, 0.3, 0.2) == pytest.approx(0.04, abs=1e-15)
    assert update_shadow_rate(0.07, 0.04, 0.3, 0.2) == pytest.approx(-0.02, abs=1e-15)
    with pytest.raises(DegenerateSpec):
        update_shadow_rate(0.07, 0.04, 0.3, 0.3)


# --- objective --------------------------------------------------------------------


def test_objective_zero_at_generating_params():
    chain = synthetic_chain(CGMY_REF, RATE, SPOT, STRIKES21, MATURITY)
    assert rmse_objective(CGMY_REF, RATE, chain, LEG) < 1e-10


def test_single_quote_rmse():
    q = Quote(100.0, MATURITY, "call", 0.0)
    model_price = model_quote_prices(BS_REF, RATE, OptionChain(SPOT, (q,)), LEG)[0]
    chain = OptionChain(SPOT, (Quote(100.0, MATURITY, "call", model_price + 2.0),))
    assert rmse_objective(BS_REF, RATE, chain, LEG) == pytest.approx(2.0, abs=1e-12)


def test_zero_weight_quotes_ignored():
    chain = synthetic_chain(NIG_REF, RATE, SPOT, STRIKES21, MATURITY)
    bad = Quote(100.0, MATURITY, "call", 50.0, weight=0.0)
    noisy = OptionChain(SPOT, chain.quotes + (bad,))
    assert rmse_objective(NIG_REF, RATE, noisy, LEG) == pytest.approx(rmse_objective(NIG_REF, RATE, chain, LEG))


def test_bs_fits_cgmy_smile_worse():
    chain = synthetic_chain(CGMY_REF, RATE, SPOT, STRIKES21, MATURITY)
    assert rmse_objective(BS_REF, RATE, chain, LEG) > rmse_objective(CGMY_REF, RATE, chain, LEG)


def test_relative_rmse():
    chain = synthetic_chain(BS_REF, RATE, SPOT, STRIKES21, MATURITY)
    assert relative_rmse(0.0, chain) == 0.0
    assert relative_rmse(chain.mean_mid(), chain) == pytest.approx(1.0)


# --- parameter maps ---------------------------------------------------------------------


@pytest.mark.parametrize("model", [BS_REF, NIG_REF, CGMY_REF, VG_REF], ids=lambda m: m.name)
def test_parameter_map_round_trip(model):
    back = to_model(model.name, from_model(model))
    for a, b in zip(vars(model).values(), vars(back).values()):
        assert b == pytest.approx(a, rel=1e-12)


def test_parameter_map_always_valid(rng):
    for kind, dim in (("NIG", 3), ("CGMY", 4), ("VG", 3)):
        for _ in range(50):
            to_model(kind, rng.normal(0, 5, dim))  # must not raise


# --- fitting ----------------------------------------------------------------------------


def test_fit_recovers_bs_vol():
    chain = synthetic_chain(BS(0.25), RATE, SPOT, STRIKES21, MATURITY)
    fit = fit_model("BS", chain, RATE, LEG, FitSettings(n_starts=2))
    assert fit.theta.sigma == pytest.approx(0.25, abs=1e-3)
    assert fit.best_so_far == sorted(fit.best_so_far, reverse=True)


def test_fit_is_deterministic():
    chain = synthetic_chain(NIG_REF, RATE, SPOT, STRIKES21, MATURITY)
    a = fit_model("NIG", chain, RATE, LEG, FitSettings(n_starts=1, seed=4))
    b = fit_model("NIG", chain, RATE, LEG, FitSettings(n_starts=1, seed=4))
    assert a.theta == b.theta


def test_fit_recovers_nig():
    chain = synthetic_chain(NIG_REF, RATE, SPOT, STRIKES21, MATURITY)
    fit = fit_model("NIG", chain, RATE, LEG, FitSettings(n_starts=3))
    assert relative_rmse(fit.rmse, chain) < 1e-6


def test_unknown_kind():
    chain = synthetic_chain(BS_REF, RATE, SPOT, STRIKES21, MATURITY)
    with pytest.raises(ConfigError):
        fit_model("Heston", chain, RATE, LEG)


# --- the outer loop --------------------------------------------------------------------------


def bs_world(sigma=0.25, strikes=STRIKES21):
    # for BS the compensator falls as the rate rises, so equal loadings give a contracting update
    hist = common_shock_history()
    ss, sz = estimate_leg_vols(hist)
    theta = BS(sigma)
    chain = synthetic_chain(theta, RATE, float(hist.price_s[-1]), strikes, MATURITY)
    settings = CalibrationSettings(div_z=consistent_div_z(theta, ss, sz, 1.0, 1.0), fit=FitSettings(n_starts=2))
    return chain, hist, settings


def test_consistent_world_has_a_fixed_point():
    hist = common_shock_history()
    ss, sz = estimate_leg_vols(hist)
    dz = consistent_div_z(CGMY_REF, ss, sz, 1.0, 0.0)
    mu_s = risk_neutral_drift(RATE, MarketLeg(SPOT, 0.0, ss, 1.0), CGMY_REF)
    mu_z = risk_neutral_drift(RATE, MarketLeg(50.0, dz, sz, 0.0), CGMY_REF)
    assert update_shadow_rate(mu_s, mu_z, ss, sz) == pytest.approx(RATE, abs=1e-14)


def test_calibrate_recovers_bs_and_rate():
    chain, hist, settings = bs_world()
    res = calibrate(chain, hist, "BS", 0.03, settings)
    assert res.converged
    assert abs(res.last_step) < settings.eps
    assert res.theta_star.sigma == pytest.approx(0.25, abs=1e-3)
    assert res.trace[0].rate == 0.03
    # the update is a contraction with slope s, so the remaining distance to the
    # fixed point is step / (1 - s); the true rate must sit exactly there
    steps = [e.next_rate - e.rate for e in res.trace]
    slope = steps[-1] / steps[-2]
    assert 0 < slope < 1
    assert res.r_bar_star - RATE == pytest.approx(-steps[-1] / (1 - slope), rel=0.05)


def test_calibrate_single_quote():
    chain, hist, settings = bs_world(strikes=[100.0])
    res = calibrate(chain, hist, "BS", 0.02, settings)
    assert res.converged and res.iterations <= 5
    assert res.rmse < 1e-8


def test_nonconvergence_is_reported():
    chain, hist, settings = bs_world()
    from dataclasses import replace

    with pytest.warns(NonConvergence):
        res = calibrate(chain, hist, "BS", 0.2, replace(settings, max_iter=1))
    assert not res.converged
    assert res.iterations == 1


def test_diffusion_in_pricing_changes_prices():
    chain = synthetic_chain(NIG_REF, RATE, SPOT, STRIKES21, MATURITY)
    leg = MarketLeg(SPOT, 0.0, 0.1, 1.0)
    plain = model_quote_prices(NIG_REF, RATE, chain, leg)
    with_diff = model_quote_prices(NIG_REF, RATE, chain, leg, PricerConfig(diffusion_in_pricing=True))
    assert np.all(with_diff > plain)


def test_converged_rate_is_a_fixed_point():
    chain, hist, settings = bs_world()
    res = calibrate(chain, hist, "BS", 0.021, settings)
    ss, sz = res.sigma_s, res.sigma_z
    leg_s = MarketLeg(chain.spot, chain.div_yield, ss, settings.kappa_s)
    leg_z = MarketLeg(float(hist.price_z[-1]), settings.div_z, sz, settings.kappa_z)
    again = update_shadow_rate(
        risk_neutral_drift(res.r_bar_star, leg_s, res.theta_star),
        risk_neutral_drift(res.r_bar_star, leg_z, res.theta_star),
        ss, sz,
    )
    assert abs(again - res.r_bar_star) < settings.eps


def test_calibration_is_bit_identical():
    chain, hist, settings = bs_world()
    a = calibrate(chain, hist, "BS", 0.021, settings)
    b = calibrate(chain, hist, "BS", 0.021, settings)
    assert a == b


def test_cgmy_seeds_agree_on_prices():
    # parameters may land in different local minima; fitted prices must not
    chain = synthetic_chain(CGMY_REF, RATE, SPOT, STRIKES21, MATURITY)
    fits = [fit_model("CGMY", chain, RATE, LEG, FitSettings(n_starts=1, seed=s)) for s in range(5)]
    prices = np.array([model_quote_prices(f.theta, RATE, chain, LEG) for f in fits])
    mids = np.array([q.mid for q in chain.quotes])
    # twice the cross-method pricing tolerance of 1e-4 per unit spot
    assert np.max(np.abs(prices - mids)) < 2e-4 * SPOT
    assert np.max(np.ptp(prices, axis=0)) < 2e-4 * SPOT
