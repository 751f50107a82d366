"""Monte Carlo simulation of the two-asset common-jump model.

    ln S_T = ln S_0 + (r - div_S - sigma_S^2/2 - Lambda_S) T + sigma_S W_S(T) + kappa_S L(T)
    ln Z_T = ln Z_0 + (r - div_Z - sigma_Z^2/2 - Lambda_Z) T + sigma_Z W_Z(T) + kappa_Z L(T)

Both legs see the same Levy path L. NIG increments are drawn by
inverse-Gaussian subordination and VG increments by gamma subordination,
so every step is sampled exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput, InvalidModel
from .levy_models import NIG, VG, LevyModel, MarketLeg, jump_compensator

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class SimSpec:
    model: LevyModel
    leg_s: MarketLeg
    leg_z: MarketLeg
    rate: float
    maturity: float
    n_paths: int
    n_steps: int = 1
    seed: int = 0
    rho: float = 1.0
    antithetic: bool = False

    def __post_init__(self):
        if not isinstance(self.model, (NIG, VG)):
            raise InvalidModel(f"the simulator supports NIG and VG drivers, not {self.model.name}")
        if self.n_paths < 1 or self.n_steps < 1:
            raise InvalidInput("n_paths and n_steps must be >= 1")
        if self.antithetic and self.n_paths % 2:
            raise InvalidInput("antithetic sampling needs an even number of paths")
        if not self.maturity > 0:
            raise InvalidInput(f"maturity must be > 0, got {self.maturity}")
        if not -1 <= self.rho <= 1:
            raise InvalidInput(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class TerminalSample:
    s_t: np.ndarray
    z_t: np.ndarray
    levy: np.ndarray
    w_s: np.ndarray
    w_z: np.ndarray
    discount: float
    antithetic: bool = False


def _subordinator(model: LevyModel, dt: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(model, NIG):
        gamma = math.sqrt(model.alpha**2 - model.beta**2)
        return rng.wald(model.delta * dt / gamma, (model.delta * dt) ** 2, size=n)
    return rng.gamma(dt / model.nu, model.nu, size=n)


def _mix(model: LevyModel, dt: float, time_change: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Brownian motion with drift evaluated at the random time change."""
    if isinstance(model, NIG):
        return model.mu * dt + model.beta * time_change + np.sqrt(time_change) * normals
    return model.theta * time_change + model.sigma * np.sqrt(time_change) * normals


def _simulate_block(spec: SimSpec, n: int, rng: np.random.Generator):
    dt = spec.maturity / spec.n_steps
    half = n // 2 if spec.antithetic else n
    levy = np.zeros(n)
    w_s = np.zeros(n)
    w_z = np.zeros(n)
    for _ in range(spec.n_steps):
        time_change = _subordinator(spec.model, dt, half, rng)
        normals = rng.standard_normal((3, half))
        if spec.antithetic:
            # mirrored Gaussian draws share one subordinator draw
            time_change = np.concatenate([time_change, time_change])
            normals = np.concatenate([normals, -normals], axis=1)
        levy += _mix(spec.model, dt, time_change, normals[0])
        dw_s = math.sqrt(dt) * normals[1]
        w_s += dw_s
        w_z += spec.rho * dw_s + math.sqrt(max(1.0 - spec.rho**2, 0.0) * dt) * normals[2]
    return levy, w_s, w_z


def simulate_terminal(spec: SimSpec) -> TerminalSample:
    """Paired terminal prices with common jumps and martingale-corrected drifts."""
    lam_s = jump_compensator(spec.model, spec.leg_s.kappa)
    lam_z = jump_compensator(spec.model, spec.leg_z.kappa)
    n_blocks = -(-spec.n_paths // BLOCK_SIZE)
    streams = np.random.SeedSequence(spec.seed).spawn(n_blocks)
    parts = []
    for j, stream in enumerate(streams):
        n = min(BLOCK_SIZE, spec.n_paths - j * BLOCK_SIZE)
        parts.append(_simulate_block(spec, n, np.random.default_rng(stream)))
    if spec.antithetic:
        # lay out all originals first, then all mirrors, so path i pairs with i + n/2
        parts = [tuple(np.split(x, 2)) for block in parts for x in block]
        levy, w_s, w_z = (
            np.concatenate([p[0] for p in parts[j::3]] + [p[1] for p in parts[j::3]]) for j in range(3)
        )
    else:
        levy, w_s, w_z = (np.concatenate(x) for x in zip(*parts))

    def terminal(leg: MarketLeg, lam: float, w: np.ndarray) -> np.ndarray:
        drift = (spec.rate - leg.div_yield - 0.5 * leg.sigma**2 - lam) * spec.maturity
        return leg.spot * np.exp(drift + leg.sigma * w + leg.kappa * levy)

    return TerminalSample(
        s_t=terminal(spec.leg_s, lam_s, w_s),
        z_t=terminal(spec.leg_z, lam_z, w_z),
        levy=levy,
        w_s=w_s,
        w_z=w_z,
        discount=math.exp(-spec.rate * spec.maturity),
        antithetic=spec.antithetic,
    )


def mc_price(
    sample: TerminalSample | SimSpec, payoff: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> tuple[float, float]:
    """Discounted sample mean of ``payoff(S_T, Z_T)`` and its standard error."""
    if isinstance(sample, SimSpec):
        sample = simulate_terminal(sample)
    h = np.asarray(payoff(sample.s_t, sample.z_t), dtype=float) * np.ones_like(sample.s_t)
    if sample.antithetic:
        half = len(h) // 2
        h = 0.5 * (h[:half] + h[half:])
    n = len(h)
    mean = float(h.mean())
    se = float(h.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return sample.discount * mean, sample.discount * se
