"""Closed-form two-asset call value without a riskless asset, and PDE checks.

The call on the portfolio-style payoff is

    C = eta S Phi(d) + (1 - eta) Z Phi(d - dw) - K exp(-m) Phi(d - w),

with dw = w - w_t and d = -y*, where y* solves F1(y) + F2(y) = K for

    F1 = eta S exp(m + w^2/2 + w y),
    F2 = (1 - eta) Z exp(m + w w_t - w_t^2/2 + w_t y).

For constant rate and volatility, m = r (T - t) and w = w_t = sigma sqrt(T - t),
and the value solves

    C_t + r (S C_S + Z C_Z) + sigma^2/2 (S^2 C_SS + 2 S Z C_SZ + Z^2 C_ZZ) - r C = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InvalidInput, NoRoot, NonFiniteInput, StepTooLarge, StepTooSmall


def _npdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class LrInputs:
    t: float
    S: float
    Z: float
    eta: float
    K: float
    m: float
    w: float
    w_t: float
    T: float | None = None

    def __post_init__(self):
        vals = (self.t, self.S, self.Z, self.eta, self.K, self.m, self.w, self.w_t)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteInput(f"non-finite closed-form input in {self}")
        if self.S <= 0 or self.Z <= 0 or self.K <= 0:
            raise InvalidInput("S, Z and K must be positive")
        if not 0 < self.eta <= 1:
            raise InvalidInput(f"eta must lie in (0, 1], got {self.eta}")
        if self.w < 0 or self.w_t < 0:
            raise InvalidInput("w and w_t must be >= 0")

    @classmethod
    def from_constant(
        cls, t: float, S: float, Z: float, eta: float, K: float, T: float, r: float, sigma: float,
        sigma_t: float | None = None,
    ) -> "LrInputs":
        """Inputs for constant rate r and volatilities sigma, sigma_t (default sigma)."""
        tau = T - t
        if not tau > 0:
            raise InvalidInput(f"need t < T, got t={t}, T={T}")
        sigma_t = sigma if sigma_t is None else sigma_t
        root = math.sqrt(tau)
        return cls(t, S, Z, eta, K, r * tau, sigma * root, sigma_t * root, T)


def _terms(inp: LrInputs, y: float) -> tuple[float, float]:
    f1 = inp.eta * inp.S * math.exp(inp.m + 0.5 * inp.w**2 + inp.w * y)
    f2 = 0.0
    if inp.eta < 1:
        f2 = (1 - inp.eta) * inp.Z * math.exp(inp.m + inp.w * inp.w_t - 0.5 * inp.w_t**2 + inp.w_t * y)
    return f1, f2


def root_residual(inp: LrInputs, y: float) -> float:
    f1, f2 = _terms(inp, y)
    return f1 + f2 - inp.K


def _single_term_roots(inp: LrInputs, target: float) -> list[float]:
    """Where each exponential term alone equals ``target``."""
    roots = []
    if inp.w > 0:
        roots.append((math.log(target / (inp.eta * inp.S)) - inp.m - 0.5 * inp.w**2) / inp.w)
    if inp.eta < 1 and inp.w_t > 0:
        base = (1 - inp.eta) * inp.Z
        roots.append((math.log(target / base) - inp.m - inp.w * inp.w_t + 0.5 * inp.w_t**2) / inp.w_t)
    return roots


def solve_y_star(inp: LrInputs, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Unique root y* of F1 + F2 = K by bracketed Newton on log(F1 + F2) - log K."""
    if inp.eta == 1 and inp.w > 0:
        return (math.log(inp.K / inp.S) - inp.m - 0.5 * inp.w**2) / inp.w

    # terms with zero slope are constants; they must stay below K
    floor = 0.0
    if inp.w == 0:
        floor += inp.eta * inp.S * math.exp(inp.m)
    if inp.eta < 1 and inp.w_t == 0:
        floor += (1 - inp.eta) * inp.Z * math.exp(inp.m)
    if floor >= inp.K:
        raise NoRoot(f"F1 + F2 stays above K={inp.K} for every y (limit {floor:.6g})")
    if not _single_term_roots(inp, inp.K):
        raise NoRoot("F1 + F2 does not depend on y")

    log_k = math.log(inp.K)

    def g(y):
        f1, f2 = _terms(inp, y)
        total = f1 + f2
        return math.log(total) - log_k, (f1 * inp.w + f2 * inp.w_t) / total

    spare = inp.K - floor
    lo = min(_single_term_roots(inp, spare / 2))
    hi = max(_single_term_roots(inp, spare))
    while g(lo)[0] > 0:
        lo -= max(1.0, abs(lo))
    while g(hi)[0] < 0:
        hi += max(1.0, abs(hi))

    y = 0.5 * (lo + hi)
    for _ in range(max_iter):
        val, slope = g(y)
        if val > 0:
            hi = y
        else:
            lo = y
        step = val / slope if slope > 0 else math.inf
        y_new = y - step
        if not lo < y_new < hi:
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) < tol * max(1.0, abs(y)) or hi - lo < tol:
            return y_new
        y = y_new
    raise NoRoot(f"y* iteration did not settle in {max_iter} steps")


def lr_closed_form_price(inp: LrInputs) -> float:
    d = -solve_y_star(inp)
    dw = inp.w - inp.w_t
    value = inp.eta * inp.S * ndtr(d) - inp.K * math.exp(-inp.m) * ndtr(d - inp.w)
    if inp.eta < 1:
        value += (1 - inp.eta) * inp.Z * ndtr(d - dw)
    return float(value)


@dataclass(frozen=True)
class YStarPartials:
    y_t: float
    y_S: float
    y_Z: float


def y_star_partials(inp: LrInputs, dm_dt: float, dw_dt: float, dwt_dt: float) -> YStarPartials:
    """Implicit derivatives of y* from the closed-form derivatives of F1 and F2."""
    y = solve_y_star(inp)
    f1, f2 = _terms(inp, y)
    dy = f1 * inp.w + f2 * inp.w_t
    df_dt = f1 * (dm_dt + inp.w * dw_dt + dw_dt * y)
    df_dt += f2 * (dm_dt + dw_dt * inp.w_t + inp.w * dwt_dt - inp.w_t * dwt_dt + dwt_dt * y)
    return YStarPartials(y_t=-df_dt / dy, y_S=-(f1 / inp.S) / dy, y_Z=-(f2 / inp.Z) / dy)


def constant_rate_partials(inp: LrInputs, r: float) -> YStarPartials:
    """y* partials when m = r tau and w, w_t are proportional to sqrt(tau)."""
    tau = _tau(inp)
    return y_star_partials(inp, -r, -inp.w / (2 * tau), -inp.w_t / (2 * tau))


@dataclass(frozen=True)
class LrGreeks:
    C_t: float
    C_S: float
    C_Z: float


def lr_greeks(inp: LrInputs, r: float) -> LrGreeks:
    """First-order sensitivities in the constant-rate, constant-volatility case.

    The chain-rule terms multiplying the derivatives of d cancel by the root
    equation, which leaves C_S = eta Phi(d) and C_Z = (1 - eta) Phi(d - dw).
    """
    tau = _tau(inp)
    d = -solve_y_star(inp)
    dw = inp.w - inp.w_t
    ddw_dt = -dw / (2 * tau)
    c_t = -inp.K * math.exp(-inp.m) * (r * ndtr(d - inp.w) + _npdf(d - inp.w) * inp.w / (2 * tau))
    c_z = 0.0
    if inp.eta < 1:
        c_t -= (1 - inp.eta) * inp.Z * _npdf(d - dw) * ddw_dt
        c_z = (1 - inp.eta) * float(ndtr(d - dw))
    return LrGreeks(C_t=c_t, C_S=inp.eta * float(ndtr(d)), C_Z=c_z)


def _tau(inp: LrInputs) -> float:
    if inp.T is None:
        raise InvalidInput("maturity T is required; build the inputs with LrInputs.from_constant")
    tau = inp.T - inp.t
    if not tau > 0:
        raise InvalidInput("evaluation point must lie before maturity")
    return tau


def pde_residual(
    inp: LrInputs, r: float, sigma: float, h: float = 1e-4, h_t: float = 1e-5
) -> float:
    """|LHS| of the pricing PDE with all derivatives from central differences.

    The value is re-evaluated at shifted (t, S, Z) with m = r (T - t) and
    w = w_t = sigma sqrt(T - t); ``h`` is relative to S and Z, ``h_t`` absolute.
    """
    tau = _tau(inp)
    if not h_t < tau:
        raise InvalidInput(f"time step {h_t} reaches past maturity (tau={tau})")

    def value(t, S, Z):
        return lr_closed_form_price(LrInputs.from_constant(t, S, Z, inp.eta, inp.K, inp.T, r, sigma))

    t, S, Z = inp.t, inp.S, inp.Z
    hs, hz = h * S, h * Z
    c0 = value(t, S, Z)
    c_t = (value(t + h_t, S, Z) - value(t - h_t, S, Z)) / (2 * h_t)
    cs_p, cs_m = value(t, S + hs, Z), value(t, S - hs, Z)
    cz_p, cz_m = value(t, S, Z + hz), value(t, S, Z - hz)
    c_s = (cs_p - cs_m) / (2 * hs)
    c_z = (cz_p - cz_m) / (2 * hz)
    c_ss = (cs_p - 2 * c0 + cs_m) / hs**2
    c_zz = (cz_p - 2 * c0 + cz_m) / hz**2
    c_sz = (
        value(t, S + hs, Z + hz) - value(t, S + hs, Z - hz) - value(t, S - hs, Z + hz) + value(t, S - hs, Z - hz)
    ) / (4 * hs * hz)
    c_dd = 0.5 * sigma**2 * (S * S * c_ss + 2 * S * Z * c_sz + Z * Z * c_zz)
    return abs(c_t + r * (S * c_s + Z * c_z) + c_dd - r * c0)


@dataclass(frozen=True)
class ResidualStudy:
    steps: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        res = self.residuals
        return tuple(a / b if b > 0 else math.inf for a, b in zip(res, res[1:]))


def pde_residual_study(
    inp: LrInputs, r: float, sigma: float, h0: float = 1e-2, halvings: int = 3, h_t0: float | None = None
) -> ResidualStudy:
    """Residuals as the steps are halved; quadratic decay shows ratios near 4.

    Emits :class:`StepTooLarge` when the first ratio is far above 4 and
    :class:`StepTooSmall` when the residual stops decreasing.
    """
    tau = _tau(inp)
    h_t0 = h_t0 if h_t0 is not None else min(h0 * tau, 0.25 * tau)
    steps, residuals = [], []
    for j in range(halvings + 1):
        h = h0 / 2**j
        steps.append(h)
        residuals.append(pde_residual(inp, r, sigma, h, h_t0 / 2**j))
    study = ResidualStudy(tuple(steps), tuple(residuals))
    ratios = study.ratios
    if ratios and ratios[-1] < 1.5:
        warnings.warn(StepTooSmall(f"residual stalled: ratios {ratios}"), stacklevel=2)
    elif ratios and ratios[0] > 8:
        warnings.warn(StepTooLarge(f"residual decays faster than quadratic: ratios {ratios}"), stacklevel=2)
    return study


def bs_reduction_inputs(t: float, S: float, K: float, T: float, r: float, sigma: float) -> LrInputs:
    """eta = 1 inputs whose value is the Black-Scholes call on S."""
    return LrInputs.from_constant(t, S, S, 1.0, K, T, r, sigma)


def closed_form_grid(inp: LrInputs, r: float, sigma: float, S_values, Z_values, t_values, h: float = 1e-4):
    """Rows (t, S, Z, price, residual) over a grid of evaluation points."""
    rows = []
    for t in t_values:
        for S in S_values:
            for Z in Z_values:
                point = LrInputs.from_constant(float(t), float(S), float(Z), inp.eta, inp.K, inp.T, r, sigma)
                rows.append((float(t), float(S), float(Z), lr_closed_form_price(point), pde_residual(point, r, sigma, h)))
    return np.array(rows)
