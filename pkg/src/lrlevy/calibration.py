"""Shadow-rate calibration loop.

1. estimate sigma_S, sigma_Z from daily log-returns of the pair,
2. fit the Levy parameters to the option chain at the current rate r_k,
3. form risk-neutral drifts mu = r_k - div + sigma^2/2 + Lambda,
4. update r_{k+1} = (mu_S sigma_Z - mu_Z sigma_S) / (sigma_Z - sigma_S),
5. stop once |r_{k+1} - r_k| < eps or the iteration cap is reached.

Because r_k enters both drifts, step 4 gives r_{k+1} = r_k + c(Theta) with c
independent of r_k. The iteration settles only where the fitted parameters
make c vanish; if the inputs admit no such point the loop reports
non-convergence rather than raising.
"""

from __future__ import annotations

import datetime as dt
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    ConfigError,
    DomainError,
    InsufficientData,
    InvalidInput,
    InvalidModel,
    LRError,
    MomentExplosion,
    NonConvergence,
)
from .fourier_pricing import CosConfig, FftConfig, QuadConfig, price_options
from .levy_models import BS, CGMY, NIG, VG, LevyModel, MarketLeg, RiskNeutralSetup, jump_compensator
from .shadow_rate import TRADING_DAYS, PairHistory, TwoAssetSpec, shadow_rate

ModelKind = Literal["BS", "NIG", "CGMY", "VG"]


@dataclass(frozen=True)
class Quote:
    strike: float
    maturity: float
    kind: str
    mid: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.strike > 0 and self.maturity > 0):
            raise InvalidInput("strike and maturity must be positive")
        if self.kind not in ("call", "put"):
            raise InvalidInput(f"kind must be 'call' or 'put', got {self.kind!r}")
        if not self.mid >= 0:
            raise InvalidInput(f"mid must be >= 0, got {self.mid}")


@dataclass(frozen=True)
class OptionChain:
    spot: float
    quotes: tuple[Quote, ...]
    as_of: dt.date | None = None
    div_yield: float = 0.0

    def __post_init__(self):
        if not self.spot > 0:
            raise InvalidInput("spot must be positive")
        if not self.quotes:
            raise InvalidInput("an option chain needs at least one quote")
        object.__setattr__(self, "quotes", tuple(self.quotes))

    def active(self) -> list[Quote]:
        return [q for q in self.quotes if q.weight > 0]

    def mean_mid(self) -> float:
        return float(np.mean([q.mid for q in self.active()]))


# ---------------------------------------------------------------------------
# building blocks


def historical_vol(log_returns, periods_per_year: int = TRADING_DAYS) -> float:
    """Sample standard deviation (N-1 divisor) of daily log-returns, annualized."""
    r = np.asarray(log_returns, dtype=float)
    if r.size < 2:
        raise InsufficientData(f"need at least 2 returns, got {r.size}")
    return float(np.std(r, ddof=1) * math.sqrt(periods_per_year))


def risk_neutral_drift(rate: float, leg: MarketLeg, model: LevyModel) -> float:
    return rate - leg.div_yield + 0.5 * leg.sigma**2 + jump_compensator(model, leg.kappa)


def update_shadow_rate(
    mu_s: float,
    mu_z: float,
    sigma_s: float,
    sigma_z: float,
    lam: float = 0.0,
    kappa_s: float = 0.0,
    kappa_z: float = 0.0,
) -> float:
    """(mu_S sigma_Z - mu_Z sigma_S) / (sigma_Z - sigma_S), plus the wedge if lam > 0."""
    return shadow_rate(TwoAssetSpec(mu_s, mu_z, sigma_s, sigma_z, kappa_s, kappa_z, lam))


@dataclass(frozen=True)
class PricerConfig:
    method: str = "cos"
    cos: CosConfig = field(default_factory=lambda: CosConfig(n_terms=512))
    fft: FftConfig = field(default_factory=FftConfig)
    quad: QuadConfig = field(default_factory=QuadConfig)
    diffusion_in_pricing: bool = False


def model_quote_prices(
    theta: LevyModel, rate: float, chain: OptionChain, leg: MarketLeg, config: PricerConfig | None = None
) -> np.ndarray:
    """Model prices for every quote in the chain (weights ignored)."""
    config = config or PricerConfig()
    if not config.diffusion_in_pricing:
        leg = replace(leg, sigma=0.0)
    leg = replace(leg, spot=chain.spot, div_yield=chain.div_yield)
    out = np.empty(len(chain.quotes))
    groups: dict[tuple[float, str], list[int]] = {}
    for i, q in enumerate(chain.quotes):
        groups.setdefault((q.maturity, q.kind), []).append(i)
    for (maturity, kind), idx in groups.items():
        setup = RiskNeutralSetup(theta, leg, rate, maturity)
        strikes = np.array([chain.quotes[i].strike for i in idx])
        out[idx] = price_options(
            setup.cf, kind, chain.spot, strikes, math.exp(-rate * maturity), config.method,
            cos=config.cos, fft=config.fft, quad=config.quad,
        )
    return out


def rmse_objective(
    theta: LevyModel, rate: float, chain: OptionChain, leg: MarketLeg, config: PricerConfig | None = None
) -> float:
    """Weighted root-mean-square price error; infeasible parameters give +inf."""
    try:
        prices = model_quote_prices(theta, rate, chain, leg, config)
    except (MomentExplosion, DomainError, InvalidModel, LRError):
        return math.inf
    w = np.array([q.weight for q in chain.quotes])
    mids = np.array([q.mid for q in chain.quotes])
    err = prices - mids
    if not np.all(np.isfinite(err[w > 0])):
        return math.inf
    return float(math.sqrt(np.sum(w * err * err) / np.sum(w)))


def relative_rmse(rmse: float, chain: OptionChain) -> float:
    return rmse / chain.mean_mid()


# ---------------------------------------------------------------------------
# parameter transforms for unconstrained search


def to_model(kind: str, x: Sequence[float], fixed_y: float | None = None) -> LevyModel:
    x = [min(max(float(v), -50.0), 50.0) for v in x]
    if kind == "BS":
        return BS(math.exp(x[0]))
    if kind == "NIG":
        alpha = math.exp(x[0])
        return NIG(alpha, alpha * math.tanh(x[1]), math.exp(x[2]))
    if kind == "CGMY":
        # periodic map onto [0, 2]: unlike a sigmoid it never goes flat near the ends
        y = fixed_y if fixed_y is not None else 1.0 - math.cos(x[3])
        return CGMY(math.exp(x[0]), math.exp(x[1]), math.exp(x[2]), y)
    if kind == "VG":
        return VG(math.exp(x[0]), math.exp(x[1]), x[2])
    raise ConfigError(f"unknown model kind {kind!r}")


def from_model(model: LevyModel) -> np.ndarray:
    if isinstance(model, BS):
        return np.array([math.log(model.sigma)])
    if isinstance(model, NIG):
        return np.array([math.log(model.alpha), math.atanh(model.beta / model.alpha), math.log(model.delta)])
    if isinstance(model, CGMY):
        y_arg = math.acos(min(max(1.0 - model.Y, -1.0), 1.0))
        return np.array([math.log(model.C), math.log(model.G), math.log(model.M), y_arg])
    if isinstance(model, VG):
        return np.array([math.log(model.sigma), math.log(model.nu), model.theta])
    raise ConfigError(f"unsupported model {model!r}")


def _random_start(kind: str, rng: np.random.Generator) -> np.ndarray:
    def logu(lo, hi):
        return math.log(rng.uniform(lo, hi))

    if kind == "BS":
        return np.array([logu(0.05, 0.6)])
    if kind == "NIG":
        return np.array([logu(3.0, 30.0), math.atanh(rng.uniform(-0.5, 0.5)), logu(0.05, 1.0)])
    if kind == "CGMY":
        y_arg = math.acos(1.0 - rng.uniform(0.1, 1.5))
        return np.array([logu(0.2, 3.0), logu(2.0, 30.0), logu(2.0, 30.0), y_arg])
    if kind == "VG":
        return np.array([logu(0.05, 0.5), logu(0.05, 1.0), rng.uniform(-0.3, 0.1)])
    raise ConfigError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class FitSettings:
    n_starts: int = 5
    seed: int = 0
    max_evals: int = 4000
    xatol: float = 1e-7
    fatol: float = 1e-10
    cgmy_two_step: bool = False
    cgmy_initial_y: float = 0.5


@dataclass
class FitResult:
    theta: LevyModel
    rmse: float
    evaluations: int
    best_so_far: list[float]


def fit_model(
    kind: str,
    chain: OptionChain,
    rate: float,
    leg: MarketLeg,
    settings: FitSettings | None = None,
    pricer: PricerConfig | None = None,
    start: LevyModel | None = None,
) -> FitResult:
    """Multi-start Nelder-Mead on the price RMSE at a fixed rate.

    ``start`` adds a warm start in front of the random starts. The returned
    ``best_so_far`` records the running minimum over all evaluations.
    """
    settings = settings or FitSettings()
    kind = kind.upper()
    rng = np.random.default_rng(settings.seed)
    starts = [from_model(start)] if start is not None else []
    starts += [_random_start(kind, rng) for _ in range(settings.n_starts)]
    history: list[float] = []

    def objective(x, fixed_y=None):
        try:
            theta = to_model(kind, x, fixed_y)
        except InvalidModel:
            val = math.inf
        else:
            val = rmse_objective(theta, rate, chain, leg, pricer)
        history.append(min(val, history[-1]) if history else val)
        return val if math.isfinite(val) else 1e10

    def run(x0, fixed_y=None):
        res = minimize(
            objective, x0, args=(fixed_y,), method="Nelder-Mead",
            options={"maxfev": settings.max_evals, "xatol": settings.xatol, "fatol": settings.fatol},
        )
        return res.x, res.fun

    best_x, best_f = None, math.inf
    for x0 in starts:
        if kind == "CGMY" and settings.cgmy_two_step:
            y0 = settings.cgmy_initial_y
            xs, _ = run(x0[:3], y0)
            x0 = np.append(xs, math.acos(1.0 - y0))
        x, f = run(x0)
        if f < best_f:
            best_x, best_f = x, f
    if best_x is None or best_f >= 1e10:
        raise ConfigError(f"no feasible {kind} parameters found")
    return FitResult(to_model(kind, best_x), best_f, len(history), history)


# ---------------------------------------------------------------------------
# outer loop


@dataclass(frozen=True)
class CalibrationSettings:
    eps: float = 1e-4
    max_iter: int = 50
    kappa_s: float = 1.0
    kappa_z: float = 1.0
    div_z: float = 0.0
    include_jump_wedge: bool = False
    wedge_lambda: float = 0.0
    periods_per_year: int = TRADING_DAYS
    fit: FitSettings = field(default_factory=FitSettings)
    pricer: PricerConfig = field(default_factory=PricerConfig)
    warm_start: bool = True
    later_starts: int | None = None


@dataclass(frozen=True)
class TraceEntry:
    rate: float
    rmse: float
    theta: LevyModel
    next_rate: float


@dataclass
class CalibrationResult:
    theta_star: LevyModel
    r_bar_star: float
    rmse: float
    relative_rmse: float
    iterations: int
    trace: list[TraceEntry]
    converged: bool
    sigma_s: float = math.nan
    sigma_z: float = math.nan

    @property
    def last_step(self) -> float:
        last = self.trace[-1]
        return last.next_rate - last.rate


def estimate_leg_vols(history: PairHistory, periods_per_year: int = TRADING_DAYS) -> tuple[float, float]:
    ret_s = np.diff(np.log(history.price_s))
    ret_z = np.diff(np.log(history.price_z))
    return historical_vol(ret_s, periods_per_year), historical_vol(ret_z, periods_per_year)


def calibrate(
    chain: OptionChain,
    history: PairHistory,
    kind: str,
    seed_rate: float,
    settings: CalibrationSettings | None = None,
) -> CalibrationResult:
    """Alternate Levy fits and shadow-rate updates until the rate settles.

    The result's ``r_bar_star`` is the rate at which ``theta_star`` was fitted.
    Hitting ``max_iter`` emits :class:`NonConvergence` and returns the last
    iterate with ``converged=False``.
    """
    settings = settings or CalibrationSettings()
    kind = kind.upper()
    if kind not in ("BS", "NIG", "CGMY", "VG"):
        raise ConfigError(f"unknown model kind {kind!r}")
    sigma_s, sigma_z = estimate_leg_vols(history, settings.periods_per_year)
    leg_s = MarketLeg(chain.spot, chain.div_yield, sigma_s, settings.kappa_s, "S")
    leg_z = MarketLeg(float(history.price_z[-1]), settings.div_z, sigma_z, settings.kappa_z, "Z")
    lam = settings.wedge_lambda if settings.include_jump_wedge else 0.0

    rate = seed_rate
    trace: list[TraceEntry] = []
    start = None
    fit_settings = settings.fit
    converged = False
    for _ in range(settings.max_iter):
        fit = fit_model(kind, chain, rate, leg_s, fit_settings, settings.pricer, start)
        mu_s = risk_neutral_drift(rate, leg_s, fit.theta)
        mu_z = risk_neutral_drift(rate, leg_z, fit.theta)
        nxt = update_shadow_rate(mu_s, mu_z, sigma_s, sigma_z, lam, settings.kappa_s, settings.kappa_z)
        trace.append(TraceEntry(rate, fit.rmse, fit.theta, nxt))
        if abs(nxt - rate) < settings.eps:
            converged = True
            break
        rate = nxt
        if settings.warm_start:
            # later fits add the previous optimum to (optionally fewer) random starts
            start = fit.theta
            if settings.later_starts is not None:
                fit_settings = replace(settings.fit, n_starts=settings.later_starts)

    last = trace[-1]
    if not converged:
        warnings.warn(
            NonConvergence(
                f"shadow rate still moving by {last.next_rate - last.rate:.3g} after {len(trace)} iterations"
            ),
            stacklevel=2,
        )
    return CalibrationResult(
        theta_star=last.theta,
        r_bar_star=last.rate,
        rmse=last.rmse,
        relative_rmse=relative_rmse(last.rmse, chain),
        iterations=len(trace),
        trace=trace,
        converged=converged,
        sigma_s=sigma_s,
        sigma_z=sigma_z,
    )


def consistent_div_z(
    model: LevyModel, sigma_s: float, sigma_z: float, kappa_s: float, kappa_z: float, div_s: float = 0.0,
    lam: float = 0.0,
) -> float:
    """Dividend yield of Z that makes the rate update stationary at ``model``.

    Solves c(model) = 0 where r_{k+1} - r_k = c; useful for building
    synthetic worlds in which the loop has a fixed point.
    """
    lam_s = jump_compensator(model, kappa_s)
    lam_z = jump_compensator(model, kappa_z)
    if sigma_s == 0:
        raise InvalidInput("sigma_s must be nonzero to solve for div_z")
    # (a_s - div_s) sigma_z - (a_z - div_z) sigma_s + lam (kappa_z - kappa_s) = 0
    a_s = 0.5 * sigma_s**2 + lam_s
    a_z = 0.5 * sigma_z**2 + lam_z
    return a_z - ((a_s - div_s) * sigma_z + lam * (kappa_z - kappa_s)) / sigma_s


def synthetic_chain(
    theta: LevyModel, rate: float, spot: float, strikes, maturity: float, kind: str = "call",
    kappa: float = 1.0, div_yield: float = 0.0, config: PricerConfig | None = None,
) -> OptionChain:
    """Noise-free chain priced by the model itself."""
    quotes = tuple(Quote(float(k), maturity, kind, 0.0) for k in strikes)
    chain = OptionChain(spot, quotes, div_yield=div_yield)
    leg = MarketLeg(spot, div_yield, 0.0, kappa)
    prices = model_quote_prices(theta, rate, chain, leg, config)
    return OptionChain(spot, tuple(replace(q, mid=float(p)) for q, p in zip(quotes, prices)), div_yield=div_yield)
