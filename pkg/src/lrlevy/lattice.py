"""Two-asset jump-binomial lattice without a riskless asset.

Each step moves S by a factor (1+U) or (1+D) and Z by (1+U_t) or (1+D_t)
in the same state. The raw shadow growth quantity is

    R = (1+U)(1+D_t) - (1+U_t)(1+D),

the payoff of the zero-cost-in-diffusion portfolio long (1+D_t) S-units and
short (1+D) Z-units per unit of initial value. The risk-neutral up
probability is q = (D_t - D) / ((D_t - D) - (U_t - U)). Dividing R by the
same denominator gives the one-period growth G with

    q (1+U) + (1-q) (1+D) = G = q (1+U_t) + (1-q) (1+D_t),

so both assets earn G under q and backward induction discounts by G.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArbitrageWarning, DegenerateStep, InvalidInput, ZeroGrowthFactor

Payoff = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StepMoves:
    U: float
    D: float
    U_t: float
    D_t: float

    def __post_init__(self):
        if not self.U > self.D:
            raise InvalidInput(f"need U > D, got U={self.U}, D={self.D}")
        if not self.U_t > self.D_t:
            raise InvalidInput(f"need U_t > D_t, got U_t={self.U_t}, D_t={self.D_t}")
        if not (1 + self.D > 0 and 1 + self.D_t > 0):
            raise InvalidInput("down moves must keep prices positive (1 + D > 0)")


def shadow_growth_factor(m: StepMoves) -> float:
    return (1 + m.U) * (1 + m.D_t) - (1 + m.U_t) * (1 + m.D)


def _denominator(m: StepMoves) -> float:
    den = (m.D_t - m.D) - (m.U_t - m.U)
    if den == 0:
        raise DegenerateStep("(D_t - D) - (U_t - U) vanishes; q is undefined")
    return den


def risk_neutral_prob(m: StepMoves, warn: bool = True) -> float:
    """q = (D_t - D) / ((D_t - D) - (U_t - U)); warns when q is outside (0, 1)."""
    q = (m.D_t - m.D) / _denominator(m)
    if warn and not 0 < q < 1:
        warnings.warn(ArbitrageWarning(f"risk-neutral probability q={q:.6g} lies outside (0, 1)"), stacklevel=2)
    return q


def one_period_growth(m: StepMoves) -> float:
    """Growth G = R / ((D_t - D) - (U_t - U)) earned by both assets under q."""
    return shadow_growth_factor(m) / _denominator(m)


def ratio_martingale_defect(m: StepMoves) -> float:
    """E_q[(Z1/S1) * S1/(G S0)] / (Z0/S0) - 1, which is zero under q."""
    q = risk_neutral_prob(m, warn=False)
    g = one_period_growth(m)
    up = (1 + m.U_t) / (1 + m.U) * (1 + m.U) / g
    down = (1 + m.D_t) / (1 + m.D) * (1 + m.D) / g
    return q * up + (1 - q) * down - 1.0


def diffusion_moves(sigma_s: float, sigma_z: float, dt: float, rate: float | None = None) -> StepMoves:
    """Moves matching per-step diffusion variance, U = exp(sigma sqrt(dt)) - 1.

    Symmetric moves imply a per-step growth of cosh((a-b)/2) / cosh((a+b)/2)
    with a = sigma_s sqrt(dt), b = sigma_z sqrt(dt), i.e. a rate close to
    -sigma_s sigma_z / 2. Passing ``rate`` shifts both legs by a common log
    drift so that G = exp(rate * dt) exactly.
    """
    if not dt > 0:
        raise InvalidInput(f"dt must be > 0, got {dt}")
    a, b = sigma_s * math.sqrt(dt), sigma_z * math.sqrt(dt)
    shift = 0.0
    if rate is not None:
        shift = rate * dt - math.log(math.cosh(0.5 * (a - b)) / math.cosh(0.5 * (a + b)))
    return StepMoves(
        U=math.expm1(shift + a), D=math.expm1(shift - a), U_t=math.expm1(shift + b), D_t=math.expm1(shift - b)
    )


@dataclass(frozen=True)
class LatticeSpec:
    n_steps: int
    moves: StepMoves | Sequence[StepMoves]
    S0: float
    Z0: float
    payoff: Payoff
    max_bushy_depth: int = 25

    def __post_init__(self):
        if self.n_steps < 1:
            raise InvalidInput(f"n_steps must be >= 1, got {self.n_steps}")
        if not (self.S0 > 0 and self.Z0 > 0):
            raise InvalidInput("S0 and Z0 must be positive")
        if not isinstance(self.moves, StepMoves) and len(self.moves) != self.n_steps:
            raise InvalidInput(f"expected {self.n_steps} step moves, got {len(self.moves)}")

    def step_moves(self) -> list[StepMoves]:
        if isinstance(self.moves, StepMoves):
            return [self.moves] * self.n_steps
        return list(self.moves)

    @property
    def recombining(self) -> bool:
        moves = self.step_moves()
        return all(m == moves[0] for m in moves)


@dataclass
class LatticeResult:
    price: float
    q: np.ndarray
    growth: np.ndarray
    arbitrage_steps: list[int] = field(default_factory=list)
    node_table: list[tuple[int, int, float, float, float]] | None = None

    @property
    def no_arbitrage(self) -> bool:
        return not self.arbitrage_steps


def price_on_lattice(spec: LatticeSpec, keep_nodes: bool = False) -> LatticeResult:
    """Backward induction C_k = [q C_up + (1-q) C_down] / G.

    Constant moves give a recombining tree of n+1 terminal nodes; per-step
    moves give a bushy tree of 2^n nodes, allowed up to ``max_bushy_depth``.
    """
    moves = spec.step_moves()
    qs, gs, flagged = [], [], []
    for k, m in enumerate(moves):
        if shadow_growth_factor(m) == 0:
            raise ZeroGrowthFactor(f"step {k}: R = 0, one-period discounting is impossible")
        q = risk_neutral_prob(m, warn=False)
        if not 0 < q < 1:
            flagged.append(k)
        qs.append(q)
        gs.append(one_period_growth(m))
    if flagged:
        warnings.warn(ArbitrageWarning(f"q outside (0, 1) at steps {flagged[:10]}"), stacklevel=2)
    if spec.recombining:
        price, table = _recombining(spec, moves[0], qs[0], gs[0], keep_nodes)
    else:
        if spec.n_steps > spec.max_bushy_depth:
            raise InvalidInput(
                f"bushy tree with {spec.n_steps} steps exceeds the depth cap {spec.max_bushy_depth}"
            )
        price, table = _bushy(spec, moves, qs, gs, keep_nodes)
    return LatticeResult(price, np.array(qs), np.array(gs), flagged, table)


def _recombining(spec, m: StepMoves, q: float, g: float, keep_nodes: bool):
    n = spec.n_steps

    def level(k):
        j = np.arange(k + 1)
        s = spec.S0 * (1 + m.U) ** j * (1 + m.D) ** (k - j)
        z = spec.Z0 * (1 + m.U_t) ** j * (1 + m.D_t) ** (k - j)
        return s, z

    s, z = level(n)
    values = np.asarray(spec.payoff(s, z), dtype=float) * np.ones_like(s)
    table = [(n, j, s[j], z[j], values[j]) for j in range(n + 1)] if keep_nodes else None
    for k in range(n - 1, -1, -1):
        values = (q * values[1:] + (1 - q) * values[:-1]) / g
        if keep_nodes:
            s, z = level(k)
            table.extend((k, j, s[j], z[j], values[j]) for j in range(k + 1))
    if keep_nodes:
        table.sort()
    return float(values[0]), table


def _bushy(spec, moves, qs, gs, keep_nodes: bool):
    levels = [(np.array([spec.S0]), np.array([spec.Z0]))]
    for m in moves:
        s, z = levels[-1]
        levels.append(
            (
                (s[:, None] * np.array([1 + m.D, 1 + m.U])).ravel(),
                (z[:, None] * np.array([1 + m.D_t, 1 + m.U_t])).ravel(),
            )
        )
    s, z = levels[-1]
    values = np.asarray(spec.payoff(s, z), dtype=float) * np.ones_like(s)
    table = []
    if keep_nodes:
        table.extend((spec.n_steps, j, s[j], z[j], values[j]) for j in range(len(s)))
    for k in range(spec.n_steps - 1, -1, -1):
        values = (qs[k] * values[1::2] + (1 - qs[k]) * values[0::2]) / gs[k]
        if keep_nodes:
            s, z = levels[k]
            table.extend((k, j, s[j], z[j], values[j]) for j in range(len(s)))
    return float(values[0]), (sorted(table) if keep_nodes else None)
