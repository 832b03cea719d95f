"""Discrete information engines: single- and multi-divider Szilard cycles.

A particle sits in one of ``m`` compartments with probability equal to the
normalized compartment volume ``v_0``. After a noisy measurement ``y`` the
dividers are moved quasi-statically to the split ``v_f(.|y)`` and the
extracted work, in units of k_B T, is ``ln v_f(x|y) / v_0(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .ledger import Ledger, draw_pairs, log_payoffs
from .prob_core import (
    NORMALIZATION_TOL,
    ChannelKernel,
    FinitePmf,
    JointPmf,
    as_joint,
    as_kernel,
    as_pmf,
    kl_divergence,
    min_kl_choice,
)

DEFAULT_CAPACITY_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


class ConfigurationError(ValueError):
    """Joint distribution inconsistent with the engine configuration."""


class ConvergenceError(RuntimeError):
    """Capacity iteration hit its cap; carries the best iterate found."""

    def __init__(self, message, best_split, best_value):
        super().__init__(message)
        self.best_split = best_split
        self.best_value = best_value


@dataclass(frozen=True, eq=False)
class EngineConfig:
    initial_split: FinitePmf
    measurement: ChannelKernel

    def __post_init__(self):
        object.__setattr__(self, "initial_split", as_pmf(self.initial_split))
        object.__setattr__(self, "measurement", as_kernel(self.measurement))
        if self.parts < 2:
            raise ValueError("an engine needs at least two compartments")
        if self.measurement.n_inputs != self.parts:
            raise ValueError("measurement kernel must have one row per compartment")

    @property
    def parts(self) -> int:
        return self.initial_split.size

    def joint(self) -> JointPmf:
        return JointPmf.from_channel(self.initial_split, self.measurement)


@dataclass(frozen=True, eq=False)
class ControlProtocol:
    """Final splits ``v_f(.|y)`` (rows indexed by measurement) plus per-y skip flags."""

    final_split: ChannelKernel
    skip: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "final_split", as_kernel(self.final_split))
        k = self.final_split.n_inputs
        skip = np.zeros(k, dtype=bool) if self.skip is None else np.array(self.skip, dtype=bool)
        if skip.shape != (k,):
            raise ValueError("one skip flag per measurement outcome is required")
        skip.setflags(write=False)
        object.__setattr__(self, "skip", skip)


def as_protocol(p) -> ControlProtocol:
    return p if isinstance(p, ControlProtocol) else ControlProtocol(p)


def work_table(config: EngineConfig, protocol) -> np.ndarray:
    """``[x, y]`` table of per-cycle work; skipped measurements give 0."""
    protocol = as_protocol(protocol)
    v0 = config.initial_split.probs
    vf = protocol.final_split.rows.T  # [x, y]
    if vf.shape != (config.parts, config.measurement.n_outputs):
        raise ValueError("protocol shape does not match the engine")
    with np.errstate(divide="ignore"):
        table = log_payoffs(vf) - np.log(v0)[:, None]
    table[:, protocol.skip] = 0.0
    return table


def cycle_work(x: int, y: int, config: EngineConfig, protocol) -> float:
    """Work of one cycle in k_B T; ``-inf`` if the particle is squeezed into zero volume."""
    return float(work_table(config, protocol)[x, y])


def optimal_protocol(posterior) -> ControlProtocol:
    """Move the dividers so that ``v_f(.|y)`` equals the posterior ``P(.|y)``."""
    return ControlProtocol(as_kernel(posterior))


def _check_consistent(config: EngineConfig, joint: JointPmf):
    expected = config.joint().mass
    if joint.mass.shape != expected.shape or np.max(np.abs(joint.mass - expected)) > NORMALIZATION_TOL:
        raise ConfigurationError("joint distribution does not match initial split and measurement")


def expected_work(config: EngineConfig, protocol, joint=None) -> float:
    """Mean work per cycle, ``E[ln v_f(X|Y) / v_0(X)]``."""
    joint = config.joint() if joint is None else as_joint(joint)
    _check_consistent(config, joint)
    table = work_table(config, protocol)
    pos = joint.mass > 0
    if np.any(np.isneginf(table[pos])):
        return -math.inf
    return float(np.sum(joint.mass[pos] * table[pos]))


class Capacity(NamedTuple):
    split: FinitePmf
    value: float
    iterations: int
    # False when the kernel is rank deficient, so other maximizing splits may exist
    unique: bool


def _divergences(rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rows > 0, rows * np.log(rows / q), 0.0)
    return terms.sum(axis=1)


def _ba_value(r: np.ndarray, W: np.ndarray) -> tuple[float, np.ndarray]:
    d = _divergences(W, r @ W)
    pos = r > 0
    return float(r[pos] @ d[pos]), d


def _ba_step(r: np.ndarray, d: np.ndarray, mu: float) -> np.ndarray:
    nxt = r * np.exp(mu * (d - d.max()))
    return nxt / nxt.sum()


def _face_newton_step(r, W, d, S):
    q = r @ W
    inv_q = np.divide(1.0, q, out=np.zeros_like(q), where=q > 0)
    Ws = W[S]
    k = int(S.sum())
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = -(Ws * inv_q) @ Ws.T
    K[:k, k] = K[k, :k] = 1.0
    # least squares because the Hessian is singular when rows coincide
    return np.linalg.lstsq(K, np.concatenate([1.0 - d[S], [0.0]]), rcond=None)[0][:k]


def _newton_polish(r: np.ndarray, W: np.ndarray, value: float, d: np.ndarray):
    """Active-set Newton step for ``I`` on the simplex.

    The free set is the support of ``r`` plus every coordinate the
    optimality conditions want to grow; a vanishing coordinate whose step
    points out of the simplex is fixed at zero and the step recomputed.
    Returns the improved ``(r, value, d)`` or ``None`` if the value would drop.
    """
    tiny = r <= 1e-12
    S = ~tiny | (d > value)
    while True:
        step = _face_newton_step(r, W, d, S)
        blocked = tiny[S] & (step < 0)
        if not np.any(blocked) or int(S.sum()) - int(blocked.sum()) < 1:
            break
        S[np.flatnonzero(S)[blocked]] = False
    # longest step that stays on the simplex; the blocking coordinate leaves the face
    rs = r[S]
    neg = step < 0
    alpha = min(1.0, float(np.min(-rs[neg] / step[neg]))) if np.any(neg) else 1.0
    for _ in range(30):
        cand = r.copy()
        cand[S] = np.maximum(rs + alpha * step, 0.0)
        if cand.sum() > 0:
            cand /= cand.sum()
            cand_value, cand_d = _ba_value(cand, W)
            # an emptied output column would make some divergences infinite
            if np.all(np.isfinite(cand_d)) and cand_value >= value:
                return cand, cand_value, cand_d
        alpha /= 2
    return None


def optimize_initial_split(measurement, tolerance: float = DEFAULT_CAPACITY_TOL,
                           max_iter: int = DEFAULT_MAX_ITER) -> Capacity:
    """Maximize ``I(X;Y)`` over the initial split for a fixed measurement kernel.

    Blahut-Arimoto iteration started from the uniform split. It stops once
    the gap between ``max_x D(W_x || q)`` (an upper bound on capacity) and
    the current mutual information drops below ``tolerance``.

    The plain update ``r <- r exp(D)`` contracts slowly when the rows of the
    kernel are nearly equal, so each step first tries the over-relaxed
    update ``r <- r exp(mu D)``. It is kept only if the value does not drop;
    otherwise ``mu`` is halved, and at ``mu = 1`` the classical update,
    which never decreases the value, is taken. A Newton step on the current
    support then polishes the iterate, again only if the value does not drop.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    W = as_kernel(measurement).rows
    m = W.shape[0]
    r = np.full(m, 1.0 / m)
    value, d = _ba_value(r, W)
    mu = 1.0
    for it in range(1, max_iter + 1):
        if d.max() - value < tolerance:
            unique = bool(np.linalg.matrix_rank(W) == m)
            return Capacity(FinitePmf(r), max(0.0, value), it, unique)
        while True:
            cand = _ba_step(r, d, mu)
            cand_value, cand_d = _ba_value(cand, W)
            if cand_value >= value or mu == 1.0:
                break
            mu = max(1.0, mu / 2)
        r, value, d = cand, cand_value, cand_d
        mu = min(2 * mu, 1e6)
        polished = _newton_polish(r, W, value, d)
        if polished is not None:
            r, value, d = polished
    raise ConvergenceError(f"no convergence within {max_iter} iterations", FinitePmf(r), value)


class ConstrainedProtocol(NamedTuple):
    protocol: ControlProtocol
    loss: float
    choices: tuple
    row_losses: tuple


def notch_constrained_protocol(posterior, notches: Sequence, marginal_y) -> ConstrainedProtocol:
    """Best protocol when the dividers can only stop at the given notches.

    For each measurement the notch with the smallest divergence from the
    posterior is used; ``loss`` is the resulting drop in mean work.
    """
    posterior = as_kernel(posterior)
    py = as_pmf(marginal_y).probs
    if py.size != posterior.n_inputs:
        raise ValueError("marginal_y must have one entry per posterior row")
    notches = [as_pmf(n) for n in notches]
    picks = [min_kl_choice(posterior.rows[y], notches) for y in range(posterior.n_inputs)]
    rows = np.stack([notches[i].probs for i, _ in picks])
    row_losses = tuple(d for _, d in picks)
    loss = _weighted_loss(py, row_losses)
    return ConstrainedProtocol(ControlProtocol(rows), loss, tuple(i for i, _ in picks), row_losses)


def _weighted_loss(weights, losses) -> float:
    total = 0.0
    for w, d in zip(weights, losses):
        if w > 0:
            total += w * d
    return total


def lossy_skip_protocol(config: EngineConfig, loss) -> ControlProtocol:
    """Optimal protocol for an engine that loses ``loss[x]`` (k_B T units) per cycle.

    The cycle is run for measurement ``y`` only when the information gain
    ``D(P(.|y) || v_0)`` exceeds the expected loss given ``y``.
    """
    joint = config.joint()
    post = joint.x_given_y()
    f = np.asarray(loss, dtype=float)
    skip = np.array([kl_divergence(post.rows[y], config.initial_split) <= float(post.rows[y] @ f)
                     for y in range(post.n_inputs)])
    return ControlProtocol(post, skip)


def lossy_work_table(config: EngineConfig, protocol, loss) -> np.ndarray:
    protocol = as_protocol(protocol)
    table = work_table(config, protocol) - np.asarray(loss, dtype=float)[:, None]
    table[:, protocol.skip] = 0.0
    return table


def simulate_engine(config: EngineConfig, protocol, cycles: int, seed: int, loss=None) -> Ledger:
    """Run ``cycles`` independent engine cycles and record the work of each."""
    protocol = as_protocol(protocol)
    joint = config.joint()
    table = work_table(config, protocol) if loss is None else lossy_work_table(config, protocol, loss)
    xs, ys = draw_pairs(joint.mass, cycles, seed)
    with np.errstate(invalid="ignore"):
        target = float(np.sum(np.where(joint.mass > 0, joint.mass * table, 0.0)))
    meta = {"units": "kBT", "kind": "engine", "parts": config.parts, "closed_form_nats": target}
    return Ledger(table[xs, ys], seed=seed, metadata=meta)
