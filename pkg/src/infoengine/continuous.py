"""Continuous-valued systems handled through quantization.

Gaussian particle/measurement pairs are reduced to finite joints, option
spread markets are reduced to interval horse races, and constrained final
distributions are chosen by KL projection onto a finite family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr, owens_t

from .gambling import OddsProfile
from .ledger import Ledger, draw_pairs, log_payoffs
from .prob_core import NORMALIZATION_TOL, FinitePmf, JointPmf, as_joint, as_pmf, min_kl_choice


@dataclass(frozen=True)
class GaussianSystem:
    """``X ~ N(0, sigma_x_sq)`` measured as ``Y = X + N`` with ``N ~ N(0, sigma_n_sq)``.

    Variances are in the k_B T-scaled units of the particle model.
    """

    sigma_x_sq: float
    sigma_n_sq: float

    def __post_init__(self):
        if not (self.sigma_x_sq > 0 and self.sigma_n_sq > 0):
            raise ValueError("both variances must be positive")

    @property
    def snr(self) -> float:
        return self.sigma_x_sq / self.sigma_n_sq

    @property
    def sigma_x(self) -> float:
        return math.sqrt(self.sigma_x_sq)

    @property
    def sigma_y(self) -> float:
        return math.sqrt(self.sigma_x_sq + self.sigma_n_sq)

    @property
    def correlation(self) -> float:
        return self.sigma_x / self.sigma_y


def gaussian_mi(sys: GaussianSystem) -> float:
    return 0.5 * math.log1p(sys.snr)


def _bvn_cdf(h: np.ndarray, k: np.ndarray, rho: float) -> np.ndarray:
    """Standard bivariate normal CDF via Owen's T; accepts infinite limits."""
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    out = np.empty(h.shape)
    hf, kf = np.isfinite(h), np.isfinite(k)
    fin = hf & kf
    # at least one limit infinite
    out[~fin] = np.where(
        (h[~fin] == -np.inf) | (k[~fin] == -np.inf), 0.0,
        np.where(h[~fin] == np.inf, ndtr(k[~fin]), ndtr(h[~fin])),
    )
    hh, kk = h[fin], k[fin]
    s = math.sqrt(max(0.0, 1.0 - rho * rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (kk - rho * hh) / (hh * s)
        ak = (hh - rho * kk) / (kk * s)
        th = np.where(hh == 0, 0.25 * np.sign(kk - rho * hh), owens_t(hh, ah))
        tk = np.where(kk == 0, 0.25 * np.sign(hh - rho * kk), owens_t(kk, ak))
    beta = np.where((hh * kk < 0) | ((hh * kk == 0) & (hh + kk < 0)), 0.5, 0.0)
    vals = 0.5 * (ndtr(hh) + ndtr(kk)) - th - tk - beta
    origin = (hh == 0) & (kk == 0)
    vals[origin] = 0.25 + math.asin(rho) / (2 * math.pi)
    out[fin] = vals
    return out


def bin_edges(sigma: float, bins: int, span: float) -> np.ndarray:
    return np.linspace(-span * sigma, span * sigma, bins + 1)


def quantize(sys: GaussianSystem, bins: int, span: float) -> JointPmf:
    """Joint pmf of the bin indices of ``(X, Y)``.

    Each coordinate is cut into ``bins`` equal cells on ``[-span s, span s]``
    with ``s`` its own standard deviation; mass beyond the range is folded
    into the two edge cells. Cell masses are exact bivariate-normal
    rectangle probabilities.
    """
    if bins < 2:
        raise ValueError("need at least two bins")
    if span <= 0:
        raise ValueError("span must be positive")
    # standardized edges, outer ones pushed to infinity to fold the tails in
    e = np.linspace(-span, span, bins + 1)
    e[0], e[-1] = -np.inf, np.inf
    F = _bvn_cdf(e[:, None], e[None, :], sys.correlation)
    mass = np.diff(np.diff(F, axis=0), axis=1)
    np.clip(mass, 0.0, None, out=mass)
    total = mass.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ArithmeticError(f"quantized mass sums to {total}")
    return JointPmf(mass / total)


def interval_probs(mean: float, sd: float, grid: np.ndarray) -> np.ndarray:
    """Normal mass per grid interval, with the tails folded into the outer intervals."""
    z = (np.asarray(grid, dtype=float) - mean) / sd
    cdf = ndtr(z)
    cdf[0], cdf[-1] = 0.0, 1.0
    return np.diff(cdf)


@dataclass(frozen=True, eq=False)
class SpreadMarket:
    """Binary-put spreads on the intervals ``(K_j, K_{j+1}]`` priced at ``C_j * Delta_j``."""

    grid: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        slopes = np.array(self.slopes, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two boundaries")
        if slopes.shape != (grid.size - 1,) or np.any(slopes <= 0) or not np.all(np.isfinite(slopes)):
            raise ValueError("need one positive finite slope per interval")
        grid.setflags(write=False)
        slopes.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "slopes", slopes)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def n_intervals(self) -> int:
        return self.slopes.size

    def spread_odds(self) -> np.ndarray:
        """Gain per dollar of each spread, ``1 / (C_j Delta_j)``."""
        return 1.0 / (self.slopes * self.widths)

    def odds_density(self) -> np.ndarray:
        """Piecewise-constant odds function value ``Delta_j * o_j`` on each interval."""
        return self.widths * self.spread_odds()

    def as_horse_race(self) -> OddsProfile:
        return OddsProfile(self.spread_odds())

    def locate(self, x) -> np.ndarray:
        """Interval index of each price ``x`` (intervals are right-closed)."""
        j = np.searchsorted(self.grid, x, side="left") - 1
        return np.clip(j, 0, self.n_intervals - 1)

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "slopes": self.slopes.tolist()}

    @classmethod
    def from_dict(cls, d) -> "SpreadMarket":
        return cls(d["grid"], d["slopes"])


def fair_spread_market(density, grid) -> SpreadMarket:
    """Market whose spread on interval ``j`` costs exactly ``P(interval j)``."""
    p = as_pmf(density).probs
    grid = np.asarray(grid, dtype=float)
    if p.size != grid.size - 1:
        raise ValueError("density must have one entry per grid interval")
    if np.any(p == 0):
        raise ValueError("zero-mass interval would need infinite odds")
    return SpreadMarket(grid, p / np.diff(grid))


@dataclass(frozen=True, eq=False)
class SpreadAllocation:
    """``fractions[y, j]``: share of capital put on interval ``j`` after seeing ``y``."""

    fractions: np.ndarray

    def __post_init__(self):
        f = np.array(self.fractions, dtype=float)
        if f.ndim != 2:
            raise ValueError("fractions must be indexed [y, interval]")
        if np.any(f < 0) or np.any(np.abs(f.sum(axis=1) - 1.0) > NORMALIZATION_TOL):
            raise ValueError("every row of fractions must be nonnegative and sum to 1")
        f.setflags(write=False)
        object.__setattr__(self, "fractions", f)

    def density(self, market: SpreadMarket) -> np.ndarray:
        """Bet density ``phi_j(y) / Delta_j`` as a ``[y, j]`` table."""
        return self.fractions / market.widths[None, :]


def kelly_allocation(joint) -> SpreadAllocation:
    return SpreadAllocation(as_joint(joint).x_given_y().rows)


def simulate_spread_gamble(market: SpreadMarket, allocation: SpreadAllocation, joint,
                           rounds: int, seed: int) -> Ledger:
    """Trade spreads for ``rounds`` rounds; ``joint[j, y]`` is over interval index and side info."""
    joint = as_joint(joint)
    if joint.shape[0] != market.n_intervals or allocation.fractions.shape != joint.shape[::-1]:
        raise ValueError("joint, market and allocation disagree on alphabets")
    # bet density times piecewise odds, i.e. phi_j(y) * o_j
    payoff = allocation.density(market).T * market.odds_density()[:, None]
    table = log_payoffs(payoff)
    js, ys = draw_pairs(joint.mass, rounds, seed)
    pos = joint.mass > 0
    target = -math.inf if np.any(np.isneginf(table[pos])) else float(np.sum(joint.mass[pos] * table[pos]))
    meta = {"units": "nats", "kind": "spread", "closed_form_nats": target}
    return Ledger(table[js, ys], seed=seed, metadata=meta)


class Projection(NamedTuple):
    member: FinitePmf
    divergence: float
    index: int


def project_to_family(target, family: Sequence) -> Projection:
    """Member of ``family`` minimizing ``D(target || member)``; ties go to the lowest index."""
    family = [as_pmf(f) for f in family]
    i, d = min_kl_choice(target, family)
    return Projection(family[i], d, i)


def gaussian_family(grid, means, sds) -> list[FinitePmf]:
    """Discretized normals on ``grid`` for every (mean, sd) pair of the parameter grid."""
    members = []
    for mu in means:
        for sd in sds:
            p = interval_probs(mu, sd, grid)
            members.append(FinitePmf(p / p.sum()))
    return members
