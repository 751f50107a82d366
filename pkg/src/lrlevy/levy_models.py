"""Characteristic exponents and risk-neutral characteristic functions.

Four drivers are supported: a Brownian driver (``BS``), Normal Inverse
Gaussian, CGMY and Variance Gamma. Each model exposes ``exponent(u)``, the
per-unit-time log of E[exp(iu L(1))], evaluated in forms that avoid
cancellation near u = 0 so finite-difference cumulants stay accurate.

Complex powers and logarithms use the principal branch. Inside the
analyticity strip (checked by :func:`char_exponent`) every argument of a
power or logarithm has positive real part, so the branch is unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import DomainError, InvalidInput, InvalidModel, MomentExplosion


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class BS:
    """Brownian driver: L(1) ~ N(0, sigma^2)."""

    sigma: float
    name: ClassVar[str] = "BS"

    def __post_init__(self):
        if not _finite(self.sigma) or self.sigma < 0:
            raise InvalidModel(f"BS sigma must be finite and >= 0, got {self.sigma}")

    def exponent(self, u):
        return -0.5 * self.sigma**2 * u * u

    def moment_bounds(self) -> tuple[float, float]:
        return -math.inf, math.inf


@dataclass(frozen=True)
class NIG:
    alpha: float
    beta: float
    delta: float
    mu: float = 0.0
    name: ClassVar[str] = "NIG"

    def __post_init__(self):
        if not _finite(self.alpha, self.beta, self.delta, self.mu):
            raise InvalidModel("NIG parameters must be finite")
        if self.alpha <= 0 or abs(self.beta) >= self.alpha or self.delta <= 0:
            raise InvalidModel(
                f"NIG needs alpha > 0, |beta| < alpha, delta > 0; got "
                f"alpha={self.alpha}, beta={self.beta}, delta={self.delta}"
            )

    def exponent(self, u):
        a, b = self.alpha, self.beta
        gamma0 = math.sqrt(a * a - b * b)
        root = np.sqrt(a * a - (b + 1j * u) ** 2)
        # sqrt(a^2-b^2) - sqrt(a^2-(b+iu)^2) rewritten as a ratio to avoid cancellation
        return 1j * self.mu * u + self.delta * (2j * b * u - u * u) / (gamma0 + root)

    def moment_bounds(self) -> tuple[float, float]:
        return -self.alpha - self.beta, self.alpha - self.beta

    def mean(self) -> float:
        return self.mu + self.delta * self.beta / math.sqrt(self.alpha**2 - self.beta**2)

    def variance(self) -> float:
        return self.delta * self.alpha**2 / (self.alpha**2 - self.beta**2) ** 1.5


@dataclass(frozen=True)
class CGMY:
    C: float
    G: float
    M: float
    Y: float
    name: ClassVar[str] = "CGMY"

    def __post_init__(self):
        if not _finite(self.C, self.G, self.M, self.Y):
            raise InvalidModel("CGMY parameters must be finite")
        if self.C <= 0 or self.G < 0 or self.M < 0 or self.Y >= 2:
            raise InvalidModel(
                f"CGMY needs C > 0, G >= 0, M >= 0, Y < 2; got {self.C}, {self.G}, {self.M}, {self.Y}"
            )
        if self.Y == 0:
            raise InvalidModel("CGMY with Y = 0 is the Variance Gamma limit; use the VG model")
        if self.Y == 1:
            raise InvalidModel("CGMY with Y = 1 hits the pole of Gamma(-Y)")
        if self.Y < 0 and (self.G == 0 or self.M == 0):
            raise InvalidModel("CGMY with Y < 0 needs G > 0 and M > 0")

    def exponent(self, u):
        C, G, M, Y = self.C, self.G, self.M, self.Y

        def tempered(rate, z):
            # (rate + z)^Y - rate^Y
            if rate == 0:
                return z**Y
            return rate**Y * np.expm1(Y * np.log1p(z / rate))

        return C * gamma_fn(-Y) * (tempered(M, -1j * u) + tempered(G, 1j * u))

    def moment_bounds(self) -> tuple[float, float]:
        return -self.G, self.M


@dataclass(frozen=True)
class VG:
    sigma: float
    nu: float
    theta: float
    name: ClassVar[str] = "VG"

    def __post_init__(self):
        if not _finite(self.sigma, self.nu, self.theta):
            raise InvalidModel("VG parameters must be finite")
        if self.sigma <= 0 or self.nu <= 0:
            raise InvalidModel(f"VG needs sigma > 0 and nu > 0; got {self.sigma}, {self.nu}")

    def exponent(self, u):
        s2nu = self.sigma**2 * self.nu
        return -np.log1p(-1j * self.theta * self.nu * u + 0.5 * s2nu * u * u) / self.nu

    def moment_bounds(self) -> tuple[float, float]:
        # roots of 1 - theta*nu*s - sigma^2*nu*s^2/2 = 0
        s2nu = self.sigma**2 * self.nu
        disc = math.sqrt((self.theta * self.nu) ** 2 + 2 * s2nu)
        return (-self.theta * self.nu - disc) / s2nu, (-self.theta * self.nu + disc) / s2nu

    def as_cgmy(self, Y: float) -> CGMY:
        """CGMY parameters whose Y -> 0 limit is this VG law."""
        root = math.sqrt(0.25 * (self.theta * self.nu) ** 2 + 0.5 * self.sigma**2 * self.nu)
        G = 1.0 / (root - 0.5 * self.theta * self.nu)
        M = 1.0 / (root + 0.5 * self.theta * self.nu)
        return CGMY(C=1.0 / self.nu, G=G, M=M, Y=Y)


LevyModel = Union[BS, NIG, CGMY, VG]
MODEL_TYPES: dict[str, type] = {cls.name: cls for cls in (BS, NIG, CGMY, VG)}


def model_to_dict(model: LevyModel) -> dict:
    return {"model": model.name, **asdict(model)}


def model_from_dict(data: dict) -> LevyModel:
    data = dict(data)
    try:
        kind = str(data.pop("model")).upper()
        cls = MODEL_TYPES[kind]
    except KeyError as exc:
        raise InvalidModel(f"unknown or missing model tag in {data!r}") from exc
    try:
        return cls(**{k: float(v) for k, v in data.items()})
    except TypeError as exc:
        raise InvalidModel(f"bad parameters for {kind}: {exc}") from exc


def char_exponent(model: LevyModel, u) -> complex | np.ndarray:
    """Psi(u) with a strip check on the imaginary part of ``u``."""
    u = np.asarray(u)
    lo, hi = model.moment_bounds()
    s = -np.imag(u)
    if np.any(s <= lo) or np.any(s >= hi):
        raise DomainError(
            f"{model.name} exponent needs -Im(u) in ({lo:.6g}, {hi:.6g}); got range "
            f"[{np.min(s):.6g}, {np.max(s):.6g}]"
        )
    out = model.exponent(u.astype(complex))
    return out.item() if out.ndim == 0 else out


def jump_compensator(model: LevyModel, kappa: float) -> float:
    """Lambda = Psi(-i kappa) = log E[exp(kappa L(1))]."""
    if kappa == 0:
        return 0.0
    lo, hi = model.moment_bounds()
    if not lo < kappa < hi:
        raise MomentExplosion(
            f"E[exp({kappa} L)] is infinite for {model!r}; need kappa in ({lo:.6g}, {hi:.6g})"
        )
    return float(np.real(model.exponent(complex(0.0, -kappa))))


def vg_limit_check(cgmy: CGMY, vg: VG, u: float) -> float:
    return float(abs(char_exponent(cgmy, u) - char_exponent(vg, u)))


def cumulants_fd(exponent, step: float = 1e-4) -> tuple[float, float]:
    """First two cumulants of a per-unit-time exponent by central differences."""
    plus, minus = exponent(step), exponent(-step)
    c1 = np.imag(plus - minus) / (2 * step)
    c2 = -np.real(plus - 2 * exponent(0.0) + minus) / step**2
    return float(c1), float(c2)


@dataclass(frozen=True)
class MarketLeg:
    spot: float
    div_yield: float = 0.0
    sigma: float = 0.0
    kappa: float = 1.0
    label: str = "S"

    def __post_init__(self):
        if not (self.spot > 0 and math.isfinite(self.spot)):
            raise InvalidInput(f"spot must be > 0, got {self.spot}")
        if not self.sigma >= 0:
            raise InvalidModel(f"diffusion sigma must be >= 0, got {self.sigma}")


class LogPriceCF:
    """phi(u) = E^Q[exp(iu ln S(T))] with access to its exponent."""

    def __init__(self, setup: "RiskNeutralSetup"):
        self.setup = setup

    def log(self, u):
        st = self.setup
        leg = st.leg
        u = np.asarray(u, dtype=complex)
        drift = st.rate - leg.div_yield - 0.5 * leg.sigma**2 - st.compensator
        jump = char_exponent(st.model, leg.kappa * u) if leg.kappa != 0 else 0.0 * u
        out = 1j * u * (math.log(leg.spot) + drift * st.maturity) - 0.5 * leg.sigma**2 * u * u * st.maturity
        out = out + st.maturity * jump
        return out.item() if out.ndim == 0 else out

    def __call__(self, u):
        return np.exp(self.log(u))

    @property
    def spot(self) -> float:
        return self.setup.leg.spot

    @property
    def forward(self) -> float:
        st = self.setup
        return st.leg.spot * math.exp((st.rate - st.leg.div_yield) * st.maturity)

    @property
    def discount(self) -> float:
        return math.exp(-self.setup.rate * self.setup.maturity)


@dataclass(frozen=True)
class RiskNeutralSetup:
    model: LevyModel
    leg: MarketLeg
    rate: float
    maturity: float
    compensator: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.maturity > 0:
            raise InvalidModel(f"maturity must be > 0, got {self.maturity}")
        object.__setattr__(self, "compensator", jump_compensator(self.model, self.leg.kappa))

    @property
    def cf(self) -> LogPriceCF:
        return LogPriceCF(self)


def rn_log_price_cf(setup: RiskNeutralSetup, u):
    return setup.cf(u)


@dataclass(frozen=True)
class TwoLegSetup:
    """Both legs sharing one driver, with diffusion correlation rho."""

    model: LevyModel
    leg_s: MarketLeg
    leg_z: MarketLeg
    rate: float
    maturity: float
    rho: float = 1.0

    def __post_init__(self):
        if not -1 <= self.rho <= 1:
            raise InvalidModel(f"rho must lie in [-1, 1], got {self.rho}")
        if not self.maturity > 0:
            raise InvalidModel(f"maturity must be > 0, got {self.maturity}")


def joint_cf(setup: TwoLegSetup, u1, u2):
    """E^Q[exp(i(u1 ln S(T) + u2 ln Z(T)))] for the common-driver pair."""
    s, z, T = setup.leg_s, setup.leg_z, setup.maturity
    lam_s = jump_compensator(setup.model, s.kappa)
    lam_z = jump_compensator(setup.model, z.kappa)
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    drift = 1j * u1 * (setup.rate - s.div_yield - 0.5 * s.sigma**2 - lam_s)
    drift = drift + 1j * u2 * (setup.rate - z.div_yield - 0.5 * z.sigma**2 - lam_z)
    quad = -0.5 * (
        u1 * u1 * s.sigma**2 + 2 * setup.rho * u1 * u2 * s.sigma * z.sigma + u2 * u2 * z.sigma**2
    )
    combined = u1 * s.kappa + u2 * z.kappa
    jump = char_exponent(setup.model, combined)
    level = 1j * (u1 * math.log(s.spot) + u2 * math.log(z.spot))
    out = np.exp(level + T * (drift + quad + jump))
    return out.item() if out.ndim == 0 else out
