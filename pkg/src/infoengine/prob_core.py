"""Information-theoretic primitives over finite alphabets.

Every quantity is measured in nats. ``0 ln 0`` is taken as ``0`` throughout,
and a Kullback-Leibler divergence whose first argument puts mass outside the
support of the second evaluates to ``math.inf`` instead of raising.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORMALIZATION_TOL = 1e-9


class DomainError(ValueError):
    """A scalar argument lies outside its admissible range."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_normalized(arr: np.ndarray, axis=None, what="distribution") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{what} has negative entries")
    total = arr.sum(axis=axis, keepdims=axis is not None)
    if np.any(np.abs(total - 1.0) > NORMALIZATION_TOL):
        raise ValueError(f"{what} sums to {np.ravel(total)} (tolerance {NORMALIZATION_TOL})")
    return arr / total


@dataclass(frozen=True, eq=False)
class FinitePmf:
    """Probability vector over the alphabet ``{0, ..., size-1}``."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("a pmf needs a one-dimensional, nonempty probability vector")
        object.__setattr__(self, "probs", _frozen(_check_normalized(arr, what="pmf")))

    @classmethod
    def uniform(cls, size: int) -> "FinitePmf":
        return cls(np.full(size, 1.0 / size))

    @property
    def size(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"FinitePmf({np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class ChannelKernel:
    """Row-stochastic matrix; ``rows[a]`` is the output distribution for input ``a``."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rows, dtype=float)
        if arr.ndim != 2 or 0 in arr.shape:
            raise ValueError("a channel kernel needs a nonempty two-dimensional array")
        object.__setattr__(self, "rows", _frozen(_check_normalized(arr, axis=1, what="kernel row")))

    @classmethod
    def from_pmfs(cls, pmfs: Sequence[FinitePmf]) -> "ChannelKernel":
        return cls(np.stack([as_pmf(p).probs for p in pmfs]))

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.rows.shape[1]

    def row(self, a: int) -> FinitePmf:
        return FinitePmf(self.rows[a])

    def __repr__(self):
        return f"ChannelKernel({np.array2string(self.rows, precision=6)})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint distribution of ``(X, Y)``; ``mass[x, y]``."""

    mass: np.ndarray

    def __post_init__(self):
        arr = np.array(self.mass, dtype=float)
        if arr.ndim != 2 or 0 in arr.shape:
            raise ValueError("a joint pmf needs a nonempty two-dimensional array")
        object.__setattr__(self, "mass", _frozen(_check_normalized(arr, what="joint pmf")))

    @classmethod
    def from_channel(cls, prior, channel) -> "JointPmf":
        """Build ``P(x) P(y|x)`` from a prior on X and a kernel X -> Y."""
        prior, channel = as_pmf(prior), as_kernel(channel)
        if channel.n_inputs != prior.size:
            raise ValueError("channel input alphabet does not match the prior")
        return cls(prior.probs[:, None] * channel.rows)

    @property
    def shape(self):
        return self.mass.shape

    def px(self) -> FinitePmf:
        return FinitePmf(self.mass.sum(axis=1))

    def py(self) -> FinitePmf:
        return FinitePmf(self.mass.sum(axis=0))

    def x_given_y(self) -> ChannelKernel:
        """Posterior ``P(x|y)`` with rows indexed by ``y``.

        Rows for outcomes ``y`` of zero probability are set to uniform; they
        carry no weight in any expectation.
        """
        return ChannelKernel(_conditional_rows(self.mass.T))

    def y_given_x(self) -> ChannelKernel:
        return ChannelKernel(_conditional_rows(self.mass))

    def transpose(self) -> "JointPmf":
        return JointPmf(self.mass.T)

    def __repr__(self):
        return f"JointPmf({np.array2string(self.mass, precision=6)})"


def _conditional_rows(m: np.ndarray) -> np.ndarray:
    totals = m.sum(axis=1, keepdims=True)
    out = np.full(m.shape, 1.0 / m.shape[1])
    pos = totals[:, 0] > 0
    out[pos] = m[pos] / totals[pos]
    return out


def as_pmf(p) -> FinitePmf:
    return p if isinstance(p, FinitePmf) else FinitePmf(p)


def as_kernel(k) -> ChannelKernel:
    return k if isinstance(k, ChannelKernel) else ChannelKernel(k)


def as_joint(j) -> JointPmf:
    return j if isinstance(j, JointPmf) else JointPmf(j)


def _xlogx_terms(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in nats."""
    probs = as_pmf(p).probs
    return max(0.0, float(-_xlogx_terms(probs).sum()))


def _check_probability(v, name):
    v = float(v)
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        raise DomainError(f"{name}={v} is not a probability")
    return v


def binary_entropy(p: float) -> float:
    p = _check_probability(p, "p")
    return float(-_xlogx_terms(np.array([p, 1.0 - p])).sum())


def star_convolve(p: float, q: float) -> float:
    """``pq + (1-p)(1-q)``: probability that two independent flips agree."""
    p = _check_probability(p, "p")
    q = _check_probability(q, "q")
    return p * q + (1.0 - p) * (1.0 - q)


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in nats, ``inf`` when ``p`` is not absolutely continuous wrt ``q``."""
    p, q = as_pmf(p).probs, as_pmf(q).probs
    if p.shape != q.shape:
        raise ValueError("kl_divergence needs distributions on the same alphabet")
    pos = p > 0
    if np.any(q[pos] == 0):
        return math.inf
    return max(0.0, float(np.sum(p[pos] * np.log(p[pos] / q[pos]))))


def mutual_information(j) -> float:
    m = as_joint(j).mass
    px = m.sum(axis=1, keepdims=True)
    py = m.sum(axis=0, keepdims=True)
    pos = m > 0
    ratio = m[pos] / (px * py)[pos]
    return max(0.0, float(np.sum(m[pos] * np.log(ratio))))


def conditional_entropy(j) -> float:
    """``H(X|Y) = H(X,Y) - H(Y)`` for a joint indexed ``[x, y]``."""
    m = as_joint(j).mass
    h_xy = float(-_xlogx_terms(m).sum())
    h_y = float(-_xlogx_terms(m.sum(axis=0)).sum())
    return max(0.0, h_xy - h_y)


def min_kl_choice(target, candidates: Sequence) -> tuple[int, float]:
    """Index of the candidate closest to ``target`` in KL divergence, and the divergence.

    Ties go to the lowest index. If every candidate is at infinite
    divergence the result is ``(0, inf)``.
    """
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")
    best_i, best = 0, math.inf
    for i, c in enumerate(candidates):
        d = kl_divergence(target, c)
        if d < best:
            best_i, best = i, d
    return best_i, best


def symmetric_channel(q: float, m: int = 2) -> ChannelKernel:
    """m-ary symmetric channel that errs with total probability ``q``."""
    q = _check_probability(q, "q")
    rows = np.full((m, m), q / (m - 1))
    np.fill_diagonal(rows, 1.0 - q)
    return ChannelKernel(rows)


def to_bits(nats: float) -> float:
    return nats / math.log(2)
