"""Endogenous shadow riskless rate implied by two risky assets.

With a common Brownian factor the combination of S and Z that cancels the
diffusion earns

    r_bar = (mu_S sigma_Z - mu_Z sigma_S) / (sigma_Z - sigma_S)
            + lambda (kappa_Z - kappa_S) / (sigma_Z - sigma_S),

where the second term is the jump-risk wedge. Rolling estimates of the
inputs turn paired price histories into a dated shadow-rate series.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateSpec, EmptyIntersection, InsufficientData, InvalidInput, MisalignedSeries

TRADING_DAYS = 252


@dataclass(frozen=True)
class TwoAssetSpec:
    mu_s: float
    mu_z: float
    sigma_s: float
    sigma_z: float
    kappa_s: float = 0.0
    kappa_z: float = 0.0
    lam: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidInput(f"jump intensity must be >= 0, got {self.lam}")
        if not -1 <= self.rho <= 1:
            raise InvalidInput(f"rho must lie in [-1, 1], got {self.rho}")

    def swapped(self) -> "TwoAssetSpec":
        return replace(
            self,
            mu_s=self.mu_z,
            mu_z=self.mu_s,
            sigma_s=self.sigma_z,
            sigma_z=self.sigma_s,
            kappa_s=self.kappa_z,
            kappa_z=self.kappa_s,
        )


def shadow_rate_components(spec: TwoAssetSpec, floor: float = 1e-8) -> tuple[float, float]:
    """Return (diffusion component, jump wedge)."""
    denom = spec.sigma_z - spec.sigma_s
    if not abs(denom) > floor:
        raise DegenerateSpec(
            f"|sigma_Z - sigma_S| = {abs(denom):.3g} is below the floor {floor:.3g}; "
            "the shadow rate is undefined for equal volatilities"
        )
    diffusion = (spec.mu_s * spec.sigma_z - spec.mu_z * spec.sigma_s) / denom
    wedge = spec.lam * (spec.kappa_z - spec.kappa_s) / denom
    return diffusion, wedge


def shadow_rate(spec: TwoAssetSpec, floor: float = 1e-8) -> float:
    diffusion, wedge = shadow_rate_components(spec, floor)
    return diffusion + wedge


@dataclass(frozen=True)
class PairHistory:
    """Aligned, ascending price histories of the two legs."""

    dates: tuple[dt.date, ...]
    price_s: np.ndarray
    price_z: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if len(self.price_s) != n or len(self.price_z) != n:
            raise MisalignedSeries("dates and both price columns must have equal length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise MisalignedSeries("dates must be strictly increasing")
        s = np.asarray(self.price_s, dtype=float)
        z = np.asarray(self.price_z, dtype=float)
        if np.any(~(s > 0)) or np.any(~(z > 0)):
            raise InvalidInput("prices must be strictly positive and finite")
        object.__setattr__(self, "price_s", s)
        object.__setattr__(self, "price_z", z)

    @classmethod
    def from_legs(cls, leg_s: Mapping[dt.date, float], leg_z: Mapping[dt.date, float]) -> "PairHistory":
        if set(leg_s) != set(leg_z):
            raise MisalignedSeries("the S and Z histories cover different dates")
        dates = tuple(sorted(leg_s))
        return cls(dates, np.array([leg_s[d] for d in dates]), np.array([leg_z[d] for d in dates]))

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class RollingConfig:
    window: int = 60
    periods_per_year: int = TRADING_DAYS
    jump_threshold: float = 3.0
    detect_jumps: bool = True
    sigma_floor: float = 1e-8

    def __post_init__(self):
        if self.window < 2:
            raise InvalidInput(f"window must be >= 2, got {self.window}")


@dataclass(frozen=True)
class WindowStats:
    mu_s: float
    mu_z: float
    sigma_s: float
    sigma_z: float
    lam: float
    kappa_s: float
    kappa_z: float


@dataclass(frozen=True)
class ShadowRatePoint:
    date: dt.date
    r_bar: float
    diffusion_component: float
    jump_wedge: float
    window_stats: WindowStats
    flag: str = ""

    @property
    def degenerate(self) -> bool:
        return self.flag == "degenerate"


def window_estimates(ret_s: np.ndarray, ret_z: np.ndarray, config: RollingConfig) -> WindowStats:
    """Annualized drift, volatility and large-jump statistics of one window."""
    n = len(ret_s)
    ppy = config.periods_per_year
    sd_s = float(np.std(ret_s, ddof=1))
    sd_z = float(np.std(ret_z, ddof=1))
    lam = kappa_s = kappa_z = 0.0
    if config.detect_jumps:
        hits = (np.abs(ret_s) > config.jump_threshold * sd_s) | (np.abs(ret_z) > config.jump_threshold * sd_z)
        count = int(hits.sum())
        if count:
            lam = count * ppy / n
            kappa_s = float(ret_s[hits].mean())
            kappa_z = float(ret_z[hits].mean())
    sigma_s, sigma_z = sd_s * math.sqrt(ppy), sd_z * math.sqrt(ppy)
    # mean log return estimates mu - sigma^2/2; add it back to get the price drift
    return WindowStats(
        mu_s=float(ret_s.mean()) * ppy + 0.5 * sigma_s**2,
        mu_z=float(ret_z.mean()) * ppy + 0.5 * sigma_z**2,
        sigma_s=sigma_s,
        sigma_z=sigma_z,
        lam=lam,
        kappa_s=kappa_s,
        kappa_z=kappa_z,
    )


def rolling_shadow_series(
    history: PairHistory, window: int | None = None, config: RollingConfig | None = None
) -> list[ShadowRatePoint]:
    """One shadow-rate point per date once a full window of returns exists.

    Dates whose window has (numerically) equal leg volatilities are kept with
    ``flag="degenerate"`` and NaN rates so the output stays calendar aligned.
    """
    config = config or RollingConfig()
    if window is not None:
        config = replace(config, window=window)
    w = config.window
    if len(history) < w + 1:
        raise InsufficientData(f"need at least {w + 1} observations for window {w}, got {len(history)}")
    ret_s = np.diff(np.log(history.price_s))
    ret_z = np.diff(np.log(history.price_z))
    points = []
    for end in range(w, len(ret_s) + 1):
        stats = window_estimates(ret_s[end - w : end], ret_z[end - w : end], config)
        spec = TwoAssetSpec(
            mu_s=stats.mu_s,
            mu_z=stats.mu_z,
            sigma_s=stats.sigma_s,
            sigma_z=stats.sigma_z,
            kappa_s=stats.kappa_s,
            kappa_z=stats.kappa_z,
            lam=stats.lam,
        )
        date = history.dates[end]
        try:
            diffusion, wedge = shadow_rate_components(spec, config.sigma_floor)
        except DegenerateSpec:
            points.append(ShadowRatePoint(date, math.nan, math.nan, math.nan, stats, "degenerate"))
            continue
        points.append(ShadowRatePoint(date, diffusion + wedge, diffusion, wedge, stats))
    return points


@dataclass(frozen=True)
class GapPoint:
    date: dt.date
    gap: float


def benchmark_gap(
    series: Sequence[ShadowRatePoint], benchmark: Mapping[dt.date, float]
) -> list[GapPoint]:
    """r_bar minus the benchmark yield on the common dates."""
    gaps = [GapPoint(p.date, p.r_bar - benchmark[p.date]) for p in series if p.date in benchmark]
    if not gaps:
        raise EmptyIntersection("the shadow series and the benchmark share no dates")
    return gaps
