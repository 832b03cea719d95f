"""Universal betting and universal work extraction for finite alphabets.

With a uniform prior over the simplex, the mixture over constant bets
collapses to the add-one (Laplace) rule applied separately to each
side-information subsequence. Its log-wealth trails the best constant bet
in hindsight by at most ``k (m - 1) ln(n + 1)`` on every sequence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .gambling import OddsProfile
from .ledger import Ledger, draw_pairs
from .prob_core import FinitePmf, as_joint, as_pmf

REGRET_SLACK = 1e-9


@dataclass
class CountTable:
    """Counts ``n(j, y)`` of past rounds, stored as ``counts[y, j]``."""

    m: int
    k: int
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError("alphabet sizes must be positive")
        if self.counts is None:
            self.counts = np.zeros((self.k, self.m), dtype=np.int64)
        else:
            self.counts = np.array(self.counts, dtype=np.int64)
            if self.counts.shape != (self.k, self.m) or np.any(self.counts < 0):
                raise ValueError("counts must be a nonnegative (k, m) table")

    def n(self, y: int) -> int:
        return int(self.counts[y].sum())

    def update(self, x: int, y: int) -> None:
        self.counts[y, x] += 1


def universal_bet(counts: CountTable, y: int) -> FinitePmf:
    row = counts.counts[y]
    return FinitePmf((row + 1.0) / (row.sum() + counts.m))


def dirichlet_integral_oracle(counts: CountTable, y: int, samples: int = 100_000,
                              seed: int = 0, with_error: bool = False):
    """Monte Carlo value of the wealth-weighted mean bet under a uniform simplex prior.

    Draws ``b`` uniformly on the simplex and forms the self-normalized
    estimate of ``E[b prod_j b_j^n_j] / E[prod_j b_j^n_j]``. With
    ``with_error`` the delta-method standard error of each component is
    returned alongside.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    b = rng.dirichlet(np.ones(counts.m), size=samples)
    n = counts.counts[y].astype(float)
    logw = np.log(np.clip(b, 1e-300, None)) @ n
    w = np.exp(logw - logw.max())
    wbar = w.mean()
    est = (w[:, None] * b).mean(axis=0) / wbar
    pmf = FinitePmf(est / est.sum())
    if not with_error:
        return pmf
    resid = w[:, None] * (b - est[None, :]) / wbar
    se = resid.std(axis=0, ddof=1) / math.sqrt(samples)
    return pmf, se


def _alphabets(xs, ys, m, k):
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("outcome and side-information sequences must have equal length")
    if k is None:
        k = int(ys.max()) + 1 if ys.size else 1
    if xs.size and (xs.min() < 0 or xs.max() >= m or ys.min() < 0 or ys.max() >= k):
        raise ValueError("sequence symbol outside its alphabet")
    return xs, ys, k


def universal_bets(xs, ys, m: int, k: int | None = None) -> np.ndarray:
    """Probability the universal bet assigns to each realized outcome, round by round."""
    xs, ys, k = _alphabets(xs, ys, m, k)
    table = CountTable(m, k)
    out = np.empty(xs.size)
    for i, (x, y) in enumerate(zip(xs, ys)):
        row = table.counts[y]
        out[i] = (row[x] + 1.0) / (row.sum() + m)
        row[x] += 1
    return out


def run_universal(xs, ys, odds: OddsProfile, k: int | None = None) -> Ledger:
    xs = np.asarray(xs, dtype=np.int64)
    b = universal_bets(xs, ys, odds.size, k)
    inc = np.log(b * odds.payout[xs]) if xs.size else np.zeros(0)
    return Ledger(inc, metadata={"units": "nats", "kind": "universal"})


def run_universal_engine(xs, ys, initial_split, k: int | None = None) -> Ledger:
    """Work per cycle of the engine whose final split follows the universal rule."""
    v0 = as_pmf(initial_split).probs
    xs = np.asarray(xs, dtype=np.int64)
    q = universal_bets(xs, ys, v0.size, k)
    inc = np.log(q / v0[xs]) if xs.size else np.zeros(0)
    return Ledger(inc, metadata={"units": "kBT", "kind": "universal-engine"})


def best_constant_hindsight(xs, ys, odds: OddsProfile, k: int | None = None) -> float:
    """``ln S*_n``: log-wealth of the best per-y constant bet, chosen with hindsight.

    The maximizer bets the empirical frequencies of each side-information
    subsequence.
    """
    xs, ys, k = _alphabets(xs, ys, odds.size, k)
    if xs.size == 0:
        return 0.0
    counts = np.zeros((k, odds.size))
    np.add.at(counts, (ys, xs), 1.0)
    n_y = counts.sum(axis=1, keepdims=True)
    pos = counts > 0
    loglik = np.sum(counts[pos] * np.log((counts / np.where(n_y > 0, n_y, 1.0))[pos]))
    return float(loglik + np.sum(np.log(odds.payout[xs])))


class RegretReport(NamedTuple):
    regret: float
    bound: float
    holds: bool
    n: int
    m: int
    k: int

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "k": self.k, "regret_nats": self.regret,
                "bound_nats": self.bound, "holds": self.holds}


def regret_bound(n: int, m: int, k: int) -> float:
    return k * (m - 1) * math.log(n + 1)


def regret_check(xs, ys, odds: OddsProfile, k: int | None = None) -> RegretReport:
    xs, ys, k = _alphabets(xs, ys, odds.size, k)
    regret = best_constant_hindsight(xs, ys, odds, k) - run_universal(xs, ys, odds, k).total
    bound = regret_bound(xs.size, odds.size, k)
    return RegretReport(regret, bound, bool(regret <= bound + REGRET_SLACK), int(xs.size), odds.size, k)


def sample_sequences(joint, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = draw_pairs(as_joint(joint).mass, n, seed)
    return np.asarray(xs), np.asarray(ys)


def read_sequences(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([int(r["x"]) for r in rows], dtype=np.int64),
            np.array([int(r["y"]) for r in rows], dtype=np.int64))


def write_sequences(path, xs, ys) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        w.writerows(zip(map(int, xs), map(int, ys)))
    return path
