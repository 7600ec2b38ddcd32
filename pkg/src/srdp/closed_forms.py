"""Closed-form regions: the uniform binary source under Hamming distortion and
the jointly Gaussian decoder-side-information family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .info import binary_entropy, inverse_binary_entropy, star
from .noiseless import RateTuple

# guard band around the log singularities of the Gaussian family
GAUSS_GUARD = 1e-12


# --------------------------------------------------------------------------
# binary source


@dataclass(frozen=True)
class BinaryParams:
    """Crossovers of the test channel X -> U (alpha) and of U -> Y (beta)."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {v}")


def binary_region_point(p: BinaryParams) -> RateTuple:
    return RateTuple(1.0 - binary_entropy(p.alpha), 1.0 - binary_entropy(p.beta), star(p.alpha, p.beta))


def binary_min_R(R0: float, D: float) -> float | None:
    """Smallest message rate for a uniform bit at common-randomness rate ``R0``
    and distortion ``D``; ``None`` when no rate works.

    The smallest allowed reconstruction crossover is ``beta = H_b^{-1}(1 - R0)``
    and the largest test-channel crossover meeting ``alpha * beta <= D`` is
    ``(D - beta) / (1 - 2 beta)``.
    """
    if R0 < 0 or D < 0 or math.isnan(R0) or math.isnan(D):
        raise ValueError("R0 and D must be nonnegative")
    if D >= 0.5:
        return 0.0
    beta = inverse_binary_entropy(min(max(1.0 - R0, 0.0), 1.0))
    if beta >= 0.5:
        return None
    if D < beta - 1e-12:
        return None
    alpha = min(max((D - beta) / (1.0 - 2.0 * beta), 0.0), 0.5)
    return 1.0 - binary_entropy(alpha)


@dataclass(frozen=True)
class TradeoffRow:
    D: float
    R0_low: float
    R0_high: float
    R_low_cr: float  # message rate at R0_low
    R_high_cr: float  # message rate at R0_high
    R_saving_fraction: float
    anchor: str


@dataclass(frozen=True)
class TradeoffBand:
    D: float
    increase: tuple[float, float]
    saving: tuple[float, float]
    reported: tuple[float, float]

    @property
    def overlaps(self) -> bool:
        return self.saving[0] <= self.reported[1] and self.reported[0] <= self.saving[1]


@dataclass(frozen=True)
class TradeoffTable:
    rows: list[TradeoffRow]
    bands: list[TradeoffBand] = field(default_factory=list)


def _row(D: float, r0_low: float, frac: float, anchor: str) -> TradeoffRow:
    r_low = binary_min_R(r0_low, D)
    r0_high = r0_low * (1.0 + frac)
    r_high = binary_min_R(r0_high, D)
    saving = 0.0 if not r_low else 1.0 - r_high / r_low
    return TradeoffRow(D, r0_low, r0_high, r_low, r_high, saving, anchor)


def fig4_tradeoff_table(steps: int = 8) -> TradeoffTable:
    """Message-rate savings bought by extra common randomness on the binary surface.

    Anchors:

    * ``D = 0.1``, small common randomness: baseline ``R0 = 1 - H_b(0.1)``,
      the least common randomness that reaches ``D = 0.1`` at all; increases
      of 40 % to 87 %.
    * ``D = 0.4``, comparable rates: baseline is the fixed point
      ``binary_min_R(R0, 0.4) = R0``; increases of 43 % to 63 %.
    * ``D = 0.5``: the message rate is already zero, so the saving is zero.
    """
    rows: list[TradeoffRow] = []
    bands: list[TradeoffBand] = []

    base_small = 1.0 - binary_entropy(0.1)
    base_equal = brentq(lambda r: binary_min_R(r, 0.4) - r, 0.05, 0.5, xtol=1e-14)
    for D, base, (lo, hi), reported, anchor in (
        (0.1, base_small, (0.40, 0.87), (0.45, 0.52), "R0 = 1 - H_b(D), least feasible"),
        (0.4, base_equal, (0.43, 0.63), (0.31, 0.39), "R0 = R fixed point"),
    ):
        batch = [_row(D, base, f, anchor) for f in np.linspace(lo, hi, steps)]
        rows += batch
        savings = [r.R_saving_fraction for r in batch]
        bands.append(TradeoffBand(D, (lo, hi), (min(savings), max(savings)), reported))
    rows.append(_row(0.5, 0.5, 0.5, "R already zero"))
    return TradeoffTable(rows, bands)


# --------------------------------------------------------------------------
# Gaussian source with decoder side information


def gaussian_s(eta: float, nu: float) -> float:
    """Variance of the test-channel noise that gives Var(E[X|U,Z]) = nu."""
    if not nu > eta**2:
        raise ValueError(f"nu = {nu} must exceed eta^2 = {eta**2}")
    if not nu < 1.0:
        raise ValueError(f"nu = {nu} must be below 1")
    return (1.0 - nu) * (1.0 - eta**2) / (nu - eta**2)


@dataclass(frozen=True)
class GaussianParams:
    eta: float
    delta: float
    nu: float

    def __post_init__(self):
        if not -1.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (-1, 1), got {self.eta}")
        if not 0.0 < self.delta <= 2.0:
            raise ValueError(f"delta must lie in (0, 2], got {self.delta}")
        if self.delta > zero_rate_threshold(self.eta) + 1e-15:
            raise ValueError(
                f"delta = {self.delta} exceeds 2 - 2|eta| = {zero_rate_threshold(self.eta)}"
            )
        lo, hi = self.rho**2, 1.0
        if not lo < self.nu < hi:
            raise ValueError(f"nu must lie in (rho^2, 1) = ({lo}, 1), got {self.nu}")
        if self.nu - lo < GAUSS_GUARD:
            raise ValueError(f"nu is within {GAUSS_GUARD} of rho^2: R_G3 diverges")
        if hi - self.nu < GAUSS_GUARD:
            raise ValueError(f"nu is within {GAUSS_GUARD} of 1: R_G1 diverges")

    @property
    def rho(self) -> float:
        return 1.0 - self.delta / 2.0

    @property
    def s_nu(self) -> float:
        return gaussian_s(self.eta, self.nu)


def gaussian_rates(g: GaussianParams) -> tuple[float, float, float]:
    """(message rate, common-randomness rate, sum rate) lower bounds in bits."""
    eta2, rho2, nu, s = g.eta**2, g.rho**2, g.nu, g.s_nu
    r1 = 0.5 * math.log2((1.0 - eta2) / (1.0 - nu))
    r2 = 0.5 * math.log2((1.0 + s - eta2) / (1.0 + s - rho2 / nu**2))
    r3 = 0.5 * math.log2((nu**2 - eta2 * rho2) / (nu * (nu - rho2)))
    return r1, r2, r3


def _half_log2(num: float, den: float) -> float:
    if den <= 0 or num <= 0:
        return math.inf
    return 0.5 * math.log2(num / den)


def gaussian_rates_flagged(eta: float, delta: float, nu: float) -> tuple[float, float, float, str]:
    """Rates for a grid row, tolerating the two singular ends of the ``nu`` range.

    Inside the guard band a diverging rate is reported as ``inf`` and named in
    the returned flag; outside ``[rho^2, 1]`` this raises like :class:`GaussianParams`.
    """
    rho2 = (1.0 - delta / 2.0) ** 2
    near_lo, near_hi = nu - rho2 < GAUSS_GUARD, 1.0 - nu < GAUSS_GUARD
    if not (near_lo or near_hi):
        return (*gaussian_rates(GaussianParams(eta, delta, nu)), "")
    if nu < rho2 - GAUSS_GUARD or nu > 1.0 + GAUSS_GUARD:
        raise ValueError(f"nu must lie in (rho^2, 1) = ({rho2}, 1), got {nu}")
    GaussianParams(eta, delta, 0.5 * (rho2 + 1.0))  # validates eta and delta
    eta2 = eta**2
    flags = []
    if near_hi:
        r1, flags = math.inf, flags + ["R_G1 divergent"]
        s = 0.0
    else:
        r1 = _half_log2(1.0 - eta2, 1.0 - nu)
        s = gaussian_s(eta, nu)
    r2 = _half_log2(1.0 + s - eta2, 1.0 + s - rho2 / nu**2)
    if near_lo:
        r3, flags = math.inf, flags + ["R_G3 divergent"]
    else:
        r3 = _half_log2(nu**2 - eta2 * rho2, nu * (nu - rho2))
    return r1, r2, r3, "; ".join(flags)


def zero_rate_threshold(eta: float) -> float:
    """Distortion reachable with no communication at all: 2 - 2|eta|."""
    if not -1.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (-1, 1), got {eta}")
    return 2.0 - 2.0 * abs(eta)


gaussian_zero_rate_threshold = zero_rate_threshold


def gaussian_min_R_limit(eta: float, delta: float) -> float:
    """Limit of the message rate as nu decreases to rho^2 (unbounded common randomness).

    At the boundary ``delta = 2 - 2|eta|`` the limit is zero.
    """
    thr = zero_rate_threshold(eta)
    if not 0.0 < delta <= thr:
        raise ValueError(f"delta must lie in (0, {thr}], got {delta}")
    rho2 = (1.0 - delta / 2.0) ** 2
    if rho2 >= 1.0:
        raise ValueError("delta -> 0 makes the limit diverge")
    return max(0.5 * math.log2((1.0 - eta**2) / (1.0 - rho2)), 0.0)


@dataclass(frozen=True)
class GaussianSample:
    """Monte Carlo estimates from the explicit construction, with standard errors."""

    rates: tuple[float, float, float]
    rates_se: tuple[float, float, float]
    var_s: float
    var_s_se: float
    e_xy: float
    e_xy_se: float
    distortion: float
    distortion_se: float


def _gauss_mi(cov: np.ndarray, a: list[int], b: list[int], c: list[int] = ()) -> float:
    """I(A;B|C) in bits for a Gaussian vector with covariance ``cov``."""

    def logdet(idx):
        if not idx:
            return 0.0
        return np.linalg.slogdet(cov[np.ix_(idx, idx)])[1]

    c = list(c)
    val = logdet(a + c) + logdet(b + c) - logdet(a + b + c) - logdet(c)
    return 0.5 * val / math.log(2.0)


def sample_gaussian_family(g: GaussianParams, n_samples: int = 10**6, seed: int = 0,
                           batches: int = 20) -> GaussianSample:
    """Simulate (X, Z, U, Y) from the construction and estimate the three rates.

    Rates come from the sampled covariance matrix through Gaussian
    log-determinant formulas, so they are independent of the closed forms.
    Standard errors are batch-means estimates over ``batches`` seeded chunks.
    """
    s = g.s_nu
    per = n_samples // batches
    stats = []
    for i in range(batches):
        rng = np.random.default_rng([seed, i])
        x = rng.standard_normal(per)
        z = g.eta * x + math.sqrt(1.0 - g.eta**2) * rng.standard_normal(per)
        u = x + math.sqrt(s) * rng.standard_normal(per)
        # conditional mean of X given (U, Z), computed from the sample-free covariance
        k = np.array([[1.0 + s, g.eta], [g.eta, 1.0]])
        w = np.linalg.solve(k, np.array([1.0, g.eta]))
        sv = w[0] * u + w[1] * z
        y = (g.rho / g.nu) * sv + math.sqrt(1.0 - g.rho**2 / g.nu) * rng.standard_normal(per)
        cov = np.cov(np.vstack([x, z, u, y]))
        X, Z, U, Y = 0, 1, 2, 3
        rates = (
            _gauss_mi(cov, [U], [X]) - _gauss_mi(cov, [U], [Z]),
            _gauss_mi(cov, [U], [Y]) - _gauss_mi(cov, [U], [Z]),
            _gauss_mi(cov, [U], [Y], [Z]),
        )
        stats.append((*rates, sv.var(), np.mean(x * y), np.mean((x - y) ** 2)))
    arr = np.array(stats)
    mean = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / math.sqrt(batches)
    return GaussianSample(
        rates=tuple(mean[:3]), rates_se=tuple(se[:3]),
        var_s=mean[3], var_s_se=se[3], e_xy=mean[4], e_xy_se=se[4],
        distortion=mean[5], distortion_se=se[5],
    )
