"""Horse-race gambling with side information.

The gambler reinvests all capital every round, spreading it over outcomes
according to ``b(x|y)``; a winning outcome ``x`` pays ``o(x)`` per dollar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import szilard
from .ledger import Ledger, draw_pairs, log_payoffs
from .prob_core import (
    ChannelKernel,
    JointPmf,
    as_joint,
    as_kernel,
    as_pmf,
    kl_divergence,
    min_kl_choice,
    mutual_information,
)

ANALOGY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OddsProfile:
    payout: np.ndarray

    def __post_init__(self):
        arr = np.array(self.payout, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("odds need a one-dimensional payout vector")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("odds must be positive and finite")
        arr.setflags(write=False)
        object.__setattr__(self, "payout", arr)

    @property
    def size(self) -> int:
        return self.payout.size


def fair_odds(prior) -> OddsProfile:
    """Odds ``1 / P(x)``; ``prior`` may be a pmf or a joint (its X-marginal is used)."""
    if isinstance(prior, JointPmf):
        prior = prior.px()
    p = as_pmf(prior).probs
    if np.any(p == 0):
        raise ValueError("fair odds are infinite on zero-probability outcomes")
    return OddsProfile(1.0 / p)


def unfair_odds(prior, loss) -> OddsProfile:
    """Fair odds discounted by ``exp(-loss[x])``, the gambling twin of a lossy engine."""
    return OddsProfile(fair_odds(prior).payout * np.exp(-np.asarray(loss, dtype=float)))


@dataclass(frozen=True, eq=False)
class BettingStrategy:
    """Allocation rows ``b(.|y)`` indexed by side information, and per-y skip flags."""

    allocation: ChannelKernel
    skip: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "allocation", as_kernel(self.allocation))
        k = self.allocation.n_inputs
        skip = np.zeros(k, dtype=bool) if self.skip is None else np.array(self.skip, dtype=bool)
        if skip.shape != (k,):
            raise ValueError("one skip flag per side-information symbol is required")
        skip.setflags(write=False)
        object.__setattr__(self, "skip", skip)

    def describe(self) -> dict:
        return {"allocation": self.allocation.rows.tolist(), "skip": self.skip.tolist()}


def as_strategy(s) -> BettingStrategy:
    return s if isinstance(s, BettingStrategy) else BettingStrategy(s)


def kelly_strategy(conditional) -> BettingStrategy:
    """Bet in proportion to the posterior: ``b(x|y) = P(x|y)``."""
    if isinstance(conditional, JointPmf):
        conditional = conditional.x_given_y()
    return BettingStrategy(as_kernel(conditional))


def profit_table(strategy, odds: OddsProfile) -> np.ndarray:
    """``[x, y]`` table of ``ln b(x|y) o(x)``, zero in skipped columns."""
    strategy = as_strategy(strategy)
    b = strategy.allocation.rows.T
    if b.shape[0] != odds.size:
        raise ValueError("odds and strategy disagree on the outcome alphabet")
    table = log_payoffs(b * odds.payout[:, None])
    table[:, strategy.skip] = 0.0
    return table


def _expectation(mass: np.ndarray, table: np.ndarray) -> float:
    if mass.shape != table.shape:
        raise ValueError("joint and strategy alphabets are incompatible")
    pos = mass > 0
    if np.any(np.isneginf(table[pos])):
        return -math.inf
    return float(np.sum(mass[pos] * table[pos]))


def growth_rate(strategy, odds: OddsProfile, joint) -> float:
    """Expected log-capital increment per round, ``-inf`` when ruin has positive probability."""
    return _expectation(as_joint(joint).mass, profit_table(strategy, odds))


class ConstrainedBet(NamedTuple):
    strategy: BettingStrategy
    loss: float
    choices: tuple
    row_losses: tuple

    @property
    def infeasible(self) -> bool:
        return math.isinf(self.loss)


def constrained_strategy(conditional, candidates: Sequence, marginal_y=None) -> ConstrainedBet:
    """Best fair bet when each row ``b(.|y)`` must come from ``candidates``.

    ``conditional`` is either the joint distribution or the posterior kernel;
    in the latter case ``marginal_y`` supplies ``P(y)``. The returned ``loss``
    is ``sum_y P(y) min_b D(P(.|y) || b)``, the shortfall from ``I(X;Y)``.
    """
    if isinstance(conditional, JointPmf):
        marginal_y = conditional.py() if marginal_y is None else marginal_y
        conditional = conditional.x_given_y()
    if marginal_y is None:
        raise ValueError("marginal_y is required when a posterior kernel is given")
    posterior = as_kernel(conditional)
    py = as_pmf(marginal_y).probs
    cands = [as_pmf(c) for c in candidates]
    if not cands:
        raise ValueError("candidate set is empty")
    picks = [min_kl_choice(posterior.rows[y], cands) for y in range(posterior.n_inputs)]
    rows = np.stack([cands[i].probs for i, _ in picks])
    row_losses = tuple(d for _, d in picks)
    loss = sum(w * d for w, d in zip(py, row_losses) if w > 0)
    return ConstrainedBet(BettingStrategy(rows), float(loss), tuple(i for i, _ in picks), row_losses)


def best_track(tracks: Sequence) -> tuple[int, float]:
    """Pick the race track (joint law) with the largest mutual information."""
    if len(tracks) == 0:
        raise ValueError("no tracks to choose from")
    values = [mutual_information(t) for t in tracks]
    i = int(np.argmax(values))
    return i, values[i]


def simulate_gamble(strategy, odds: OddsProfile, joint, rounds: int, seed: int) -> Ledger:
    strategy = as_strategy(strategy)
    joint = as_joint(joint)
    table = profit_table(strategy, odds)
    xs, ys = draw_pairs(joint.mass, rounds, seed)
    meta = {
        "units": "nats",
        "kind": "gamble",
        "strategy": strategy.describe(),
        "closed_form_nats": growth_rate(strategy, odds, joint),
    }
    return Ledger(table[xs, ys], seed=seed, metadata=meta)


def unfair_skip_policy(joint, loss_per_symbol) -> BettingStrategy:
    """Kelly bets, skipping every ``y`` whose information gain cannot cover the loss.

    ``y`` is skipped when ``D(P(.|y) || P_X) <= E[loss(X) | y]``.
    """
    joint = as_joint(joint)
    post = joint.x_given_y()
    px = joint.px()
    f = np.asarray(loss_per_symbol, dtype=float)
    if f.shape != (px.size,) or np.any(f < 0):
        raise ValueError("loss_per_symbol must be nonnegative, one entry per outcome")
    skip = [kl_divergence(post.rows[y], px) <= float(post.rows[y] @ f) for y in range(post.n_inputs)]
    return BettingStrategy(post, skip)


def per_round_tables(joint, protocol) -> tuple[np.ndarray, np.ndarray]:
    """Gambling profit and engine work tables for a mapped pair.

    The bet uses fair odds ``1/P_X`` and allocation ``protocol``; the engine
    starts from ``v_0 = P_X`` and moves to ``v_f = protocol``.
    """
    joint = as_joint(joint)
    if isinstance(protocol, szilard.ControlProtocol):
        rows, skip = protocol.final_split, protocol.skip
    else:
        rows, skip = as_kernel(protocol), None
    gamble = profit_table(BettingStrategy(rows, skip), fair_odds(joint))
    config = szilard.EngineConfig(joint.px(), joint.y_given_x())
    engine = szilard.work_table(config, szilard.ControlProtocol(rows, skip))
    return gamble, engine


def values_agree(a, b, tol: float = ANALOGY_TOL) -> bool:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return False
    same_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid="ignore"):
        close = np.abs(a - b) <= tol
    return bool(np.all(same_inf | close))


def analogy_check(joint, protocol, tol: float = ANALOGY_TOL) -> bool:
    """True iff gambling and the engine give the same per-round and mean gains.

    Both the ``[x, y]`` payoff tables and the expectations under ``joint``
    are compared at absolute tolerance ``tol``.
    """
    joint = as_joint(joint)
    gamble, engine = per_round_tables(joint, protocol)
    if not values_agree(gamble, engine, tol):
        return False
    config = szilard.EngineConfig(joint.px(), joint.y_given_x())
    skip = protocol.skip if isinstance(protocol, szilard.ControlProtocol) else None
    rows = protocol.final_split if isinstance(protocol, szilard.ControlProtocol) else protocol
    g = growth_rate(BettingStrategy(rows, skip), fair_odds(joint), joint)
    w = szilard.expected_work(config, szilard.ControlProtocol(rows, skip), joint)
    return values_agree(g, w, tol)
