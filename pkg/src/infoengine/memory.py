"""Engines and races whose rounds depend on each other.

Everything here is exact enumeration over trajectories ``(x^n, y^n)`` for
small horizons. Arrays share one axis convention: the first ``n`` axes are
``x_1..x_n`` and the next ``n`` are ``y_1..y_n``.

A :class:`CausalLaw` stores one conditional table per step. Each table's
leading axes index the history ``(x-part, y-part)`` and its last axis is the
distribution of the new symbol:

=============  ==========================  =========================
kind           history at step i           new symbol
=============  ==========================  =========================
input          x^{i-1}, y^{i-1}            x_i
measurement    x^i, y^{i-1}                y_i
protocol       x^{i-1}, y^i                x_i
=============  ==========================  =========================
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .prob_core import NORMALIZATION_TOL, as_kernel, as_pmf, binary_entropy, star_convolve

MAX_CELLS = 4 ** 6
KINDS = ("input", "measurement", "protocol")


class UnsupportedInstance(ValueError):
    """Problem size or alphabet outside what exact enumeration handles."""


def _history_len(kind: str, i: int) -> tuple[int, int]:
    # (number of x symbols, number of y symbols) in the step-i history, i >= 1
    if kind == "input":
        return i - 1, i - 1
    if kind == "measurement":
        return i, i - 1
    if kind == "protocol":
        return i - 1, i
    raise ValueError(f"unknown causal-law kind {kind!r}")


def _check_cells(n, nx, ny):
    if n < 1:
        raise ValueError("horizon must be at least 1")
    if (nx * ny) ** n > MAX_CELLS:
        raise UnsupportedInstance(f"horizon {n} exceeds the enumeration cap for alphabets {nx}x{ny}")


@dataclass(frozen=True, eq=False)
class CausalLaw:
    kind: str
    steps: tuple
    nx: int = 2
    ny: int = 2
    # (step, flat history index) pairs whose row was filled with uniform
    filled: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        out_size = self.ny if self.kind == "measurement" else self.nx
        steps = []
        for i, s in enumerate(self.steps, start=1):
            a, b = _history_len(self.kind, i)
            arr = np.array(s, dtype=float)
            if arr.shape != (self.nx,) * a + (self.ny,) * b + (out_size,):
                raise ValueError(f"step {i} has shape {arr.shape}, inconsistent with a {self.kind} law")
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > NORMALIZATION_TOL):
                raise ValueError(f"step {i} rows are not distributions")
            arr.setflags(write=False)
            steps.append(arr)
        object.__setattr__(self, "steps", tuple(steps))

    @property
    def n(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nx": self.nx, "ny": self.ny,
                "steps": [s.tolist() for s in self.steps]}

    @classmethod
    def from_dict(cls, d) -> "CausalLaw":
        return cls(d["kind"], tuple(np.array(s) for s in d["steps"]), d.get("nx", 2), d.get("ny", 2))


@dataclass(frozen=True, eq=False)
class TrajectoryJoint:
    mass: np.ndarray
    n: int
    nx: int = 2
    ny: int = 2

    def __post_init__(self):
        _check_cells(self.n, self.nx, self.ny)
        arr = np.array(self.mass, dtype=float)
        if arr.shape != (self.nx,) * self.n + (self.ny,) * self.n:
            raise ValueError("mass shape does not match horizon and alphabets")
        if np.any(arr < 0) or abs(arr.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("trajectory mass is not a distribution")
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)

    def x_axis(self, i: int) -> int:
        return i - 1

    def y_axis(self, i: int) -> int:
        return self.n + i - 1

    def prefix(self, a: int, b: int) -> np.ndarray:
        """Marginal of ``(x^a, y^b)`` with axes ``x_1..x_a, y_1..y_b``."""
        drop = tuple(range(a, self.n)) + tuple(range(self.n + b, 2 * self.n))
        return self.mass.sum(axis=drop)


@dataclass(frozen=True)
class MarkovEngineModel:
    """Two-compartment engine that is not re-equilibrated between cycles.

    ``p`` is the probability the particle changes side between cycles and
    ``q`` the probability that a measurement is wrong.
    """

    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")


def _embed(arr: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    """Reshape an array over ``(x^a, y^b)`` so it broadcasts against the full layout."""
    nx_shape = arr.shape[:a]
    ny_shape = arr.shape[a:a + b]
    return arr.reshape(nx_shape + (1,) * (n - a) + ny_shape + (1,) * (n - b))


def _to_prefix_layout(law: CausalLaw, i: int) -> tuple[np.ndarray, int, int]:
    """Step ``i`` table with axes rearranged to ``(x^a, y^b)`` including the new symbol."""
    s = law.steps[i - 1]
    a, b = _history_len(law.kind, i)
    if law.kind == "measurement":
        return s, a, b + 1
    return np.moveaxis(s, -1, a), a + 1, b


def assemble_joint(input_law: CausalLaw, measurement_law: CausalLaw, n: int | None = None) -> TrajectoryJoint:
    """``P(x^n, y^n) = prod_i P(x_i | x^{i-1}, y^{i-1}) P(y_i | x^i, y^{i-1})``."""
    if input_law.kind != "input" or measurement_law.kind != "measurement":
        raise ValueError("need an input law and a measurement law")
    n = input_law.n if n is None else n
    if input_law.n < n or measurement_law.n < n:
        raise ValueError("laws are shorter than the requested horizon")
    if (input_law.nx, input_law.ny) != (measurement_law.nx, measurement_law.ny):
        raise ValueError("laws disagree on alphabets")
    nx, ny = input_law.nx, input_law.ny
    _check_cells(n, nx, ny)
    mass = np.ones((1,) * (2 * n))
    for i in range(1, n + 1):
        for law in (input_law, measurement_law):
            arr, a, b = _to_prefix_layout(law, i)
            mass = mass * _embed(arr, a, b, n)
    return TrajectoryJoint(mass, n, nx, ny)


def _sum_except(mass: np.ndarray, keep: set) -> np.ndarray:
    drop = tuple(ax for ax in range(mass.ndim) if ax not in keep)
    return mass.sum(axis=drop, keepdims=True) if drop else mass


def conditional_mi(mass: np.ndarray, a: Sequence[int], b: Sequence[int], c: Sequence[int]) -> float:
    """``I(A; B | C)`` for disjoint axis groups of a probability tensor."""
    a, b, c = set(a), set(b), set(c)
    p_abc = _sum_except(mass, a | b | c)
    p_ac = _sum_except(p_abc, a | c)
    p_bc = _sum_except(p_abc, b | c)
    p_c = _sum_except(p_abc, c)
    num, den = np.broadcast_arrays(p_abc * p_c, p_ac * p_bc)
    pabc = np.broadcast_to(p_abc, num.shape)
    pos = pabc > 0
    return max(0.0, float(np.sum(pabc[pos] * np.log(num[pos] / den[pos]))))


def directed_information(joint: TrajectoryJoint, direction: str = "y->x") -> float:
    """Directed information by exact enumeration.

    ``"y->x"`` gives ``sum_i I(X_i; Y^i | X^{i-1})``; ``"x->y"`` gives
    ``sum_i I(Y_i; X^i | Y^{i-1})``.
    """
    n = joint.n
    xs = [joint.x_axis(i) for i in range(1, n + 1)]
    ys = [joint.y_axis(i) for i in range(1, n + 1)]
    if direction == "y->x":
        return sum(conditional_mi(joint.mass, [xs[i]], ys[:i + 1], xs[:i]) for i in range(n))
    if direction == "x->y":
        return sum(conditional_mi(joint.mass, [ys[i]], xs[:i + 1], ys[:i]) for i in range(n))
    raise ValueError("direction must be 'y->x' or 'x->y'")


def causal_mi_sum(joint: TrajectoryJoint) -> float:
    """``sum_i I(X_i; Y_i | X^{i-1}, Y^{i-1})``, the work attainable with hysteresis."""
    n = joint.n
    return sum(
        conditional_mi(joint.mass, [joint.x_axis(i)], [joint.y_axis(i)],
                       [joint.x_axis(j) for j in range(1, i)] + [joint.y_axis(j) for j in range(1, i)])
        for i in range(1, n + 1)
    )


def _normalize_last(num: np.ndarray, step: int, filled: list) -> np.ndarray:
    tot = num.sum(axis=-1, keepdims=True)
    out = np.empty_like(num)
    zero = tot[..., 0] <= 0
    out[~zero] = num[~zero] / tot[~zero]
    out[zero] = 1.0 / num.shape[-1]
    filled.extend((step, int(h)) for h in np.flatnonzero(zero.ravel()))
    return out


def extract_law(joint: TrajectoryJoint, kind: str) -> CausalLaw:
    """Per-step conditionals of the requested kind read off a trajectory joint.

    Histories of zero probability get uniform rows and are listed in
    ``filled``.
    """
    steps, filled = [], []
    for i in range(1, joint.n + 1):
        a, b = _history_len(kind, i)
        if kind == "measurement":
            marg = joint.prefix(a, b + 1)  # x^i, y^i: new symbol already last
        else:
            marg = np.moveaxis(joint.prefix(a + 1, b), a, -1)  # move x_i last
        steps.append(_normalize_last(marg, i, filled))
    return CausalLaw(kind, tuple(steps), joint.nx, joint.ny, tuple(filled))


def optimal_causal_protocol(joint: TrajectoryJoint) -> CausalLaw:
    """Best final distribution at each cycle, ``Q*(x_i | x^{i-1}, y^i) = P(x_i | x^{i-1}, y^i)``."""
    return extract_law(joint, "protocol")


def blind_protocol(joint: TrajectoryJoint) -> CausalLaw:
    """Best protocol without measurements, ``P(x_i | x^{i-1})``, written as a protocol law."""
    steps = []
    for i in range(1, joint.n + 1):
        marg = joint.prefix(i, 0)
        tot = marg.sum(axis=-1, keepdims=True)
        cond = np.where(tot > 0, marg / np.where(tot > 0, tot, 1.0), 1.0 / joint.nx)
        # broadcast over the y^i history axes, which the blind controller ignores
        shape = (joint.nx,) * (i - 1) + (joint.ny,) * i + (joint.nx,)
        cond = cond.reshape((joint.nx,) * (i - 1) + (1,) * i + (joint.nx,))
        steps.append(np.broadcast_to(cond, shape).copy())
    return CausalLaw("protocol", tuple(steps), joint.nx, joint.ny)


def _reference_tables(joint: TrajectoryJoint) -> list[np.ndarray]:
    # P(x_i | x^{i-1}) over axes x_1..x_i
    out = []
    for i in range(1, joint.n + 1):
        marg = joint.prefix(i, 0)
        tot = marg.sum(axis=-1, keepdims=True)
        out.append(np.where(tot > 0, marg / np.where(tot > 0, tot, 1.0), 1.0 / joint.nx))
    return out


def _expect_log(joint: TrajectoryJoint, factors: list[np.ndarray]) -> float:
    """``E[ln prod factors]`` with each factor embedded in the full layout."""
    total = 0.0
    pos = joint.mass > 0
    for f in factors:
        with np.errstate(divide="ignore"):
            lf = np.log(np.broadcast_to(f, joint.mass.shape))
        if np.any(np.isneginf(lf[pos])):
            return -math.inf
        total += float(np.sum(joint.mass[pos] * lf[pos]))
    return total


def causal_work(joint: TrajectoryJoint, protocol: CausalLaw, reference: Sequence[np.ndarray] | None = None) -> float:
    """Mean total work in k_B T of a causal protocol, ``sum_i E[ln Q_i(X_i) / o_i(X^i)]``.

    ``reference[i-1]`` is the table ``o_i`` over ``x^i``, the normalized
    volume the particle is released from at cycle ``i``. It defaults to
    ``P(x_i | x^{i-1})``, under which a controller without measurements
    extracts nothing.
    """
    if protocol.kind != "protocol":
        raise ValueError("need a protocol law")
    ref = _reference_tables(joint) if reference is None else list(reference)
    factors = []
    for i in range(1, joint.n + 1):
        arr, a, b = _to_prefix_layout(protocol, i)
        factors.append(_embed(arr, a, b, joint.n))
        factors.append(1.0 / _embed(np.asarray(ref[i - 1], dtype=float), i, 0, joint.n))
    return _expect_log(joint, factors)


def causal_log_wealth(joint: TrajectoryJoint, bets: CausalLaw, odds: Sequence[np.ndarray] | None = None) -> float:
    """Expected ``ln S_n`` for causal bets ``b(x_i | x^{i-1}, y^i)`` and odds ``o_i(x^i)``.

    Odds default to the fair ``1 / P(x_i | x^{i-1})``.
    """
    if bets.kind != "protocol":
        raise ValueError("bets must be a protocol-kind law")
    odds = [1.0 / r for r in _reference_tables(joint)] if odds is None else list(odds)
    factors = []
    for i in range(1, joint.n + 1):
        arr, a, b = _to_prefix_layout(bets, i)
        factors.append(_embed(arr, a, b, joint.n) * _embed(np.asarray(odds[i - 1], dtype=float), i, 0, joint.n))
    return _expect_log(joint, factors)


def causal_gain(joint: TrajectoryJoint) -> float:
    """Extra work from causal measurement access, ``E[W(X^n||Y^n)] - E[W(X^n)]``."""
    return causal_work(joint, optimal_causal_protocol(joint)) - causal_work(joint, blind_protocol(joint))


# -- model builders ---------------------------------------------------------

def iid_laws(prior, channel, n: int) -> tuple[CausalLaw, CausalLaw]:
    """Memoryless input and measurement laws repeated for ``n`` steps."""
    p = as_pmf(prior).probs
    W = as_kernel(channel).rows
    nx, ny = W.shape
    inp, meas = [], []
    for i in range(1, n + 1):
        inp.append(np.broadcast_to(p, (nx,) * (i - 1) + (ny,) * (i - 1) + (nx,)).copy())
        # measurement table axes: x^{i-1}, x_i, y^{i-1}, y_i
        w = W.reshape((1,) * (i - 1) + (nx,) + (1,) * (i - 1) + (ny,))
        meas.append(np.broadcast_to(w, (nx,) * i + (ny,) * (i - 1) + (ny,)).copy())
    return CausalLaw("input", tuple(inp), nx, ny), CausalLaw("measurement", tuple(meas), nx, ny)


def markov_engine_laws(model: MarkovEngineModel, n: int) -> tuple[CausalLaw, CausalLaw]:
    """Laws over ``n + 1`` steps for the non-equilibrated engine.

    Step 1 is the preparation cycle: the particle starts on a uniformly
    random side and the reading taken then is a fair coin, so only the
    location is carried forward. Steps ``2..n+1`` are the ``n`` measured
    cycles, each flipping side with probability ``p`` and misread with
    probability ``q``.
    """
    p, q = model.p, model.q
    horizon = n + 1
    flip = np.array([[1 - p, p], [p, 1 - p]])
    err = np.array([[1 - q, q], [q, 1 - q]])
    inp, meas = [], []
    for i in range(1, horizon + 1):
        if i == 1:
            inp.append(np.array([0.5, 0.5]))
            meas.append(np.full((2, 2), 0.5))
            continue
        # depends on x_{i-1} only; axes x^{i-1}, y^{i-1}, x_i
        t = flip.reshape((1,) * (i - 2) + (2,) + (1,) * (i - 1) + (2,))
        inp.append(np.broadcast_to(t, (2,) * (2 * (i - 1)) + (2,)).copy())
        e = err.reshape((1,) * (i - 1) + (2,) + (1,) * (i - 1) + (2,))
        meas.append(np.broadcast_to(e, (2,) * i + (2,) * (i - 1) + (2,)).copy())
    return CausalLaw("input", tuple(inp)), CausalLaw("measurement", tuple(meas))


def markov_engine_joint(model: MarkovEngineModel, n: int) -> TrajectoryJoint:
    return assemble_joint(*markov_engine_laws(model, n))


def markov_engine_gain(model: MarkovEngineModel, n: int) -> float:
    """Closed-form gain over ``n`` cycles, ``n [H_b(p*q) - H_b(q)]``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return n * (binary_entropy(star_convolve(model.p, model.q)) - binary_entropy(model.q))


def delayed_copy_laws(n: int) -> tuple[CausalLaw, CausalLaw]:
    """Fair i.i.d. bits with ``Y_1`` a fair coin and ``Y_i = X_{i-1}`` afterwards."""
    inp, meas = [], []
    for i in range(1, n + 1):
        inp.append(np.full((2,) * (2 * (i - 1)) + (2,), 0.5))
        if i == 1:
            meas.append(np.full((2, 2), 0.5))
            continue
        copy = np.eye(2).reshape((1,) * (i - 2) + (2,) + (1,) + (1,) * (i - 1) + (2,))
        meas.append(np.broadcast_to(copy, (2,) * i + (2,) * (i - 1) + (2,)).copy())
    return CausalLaw("input", tuple(inp)), CausalLaw("measurement", tuple(meas))


def good_bad_device_law(n: int, stay: float, good_start: float = 0.5) -> CausalLaw:
    """Measurement law of a device hopping between an exact and a useless state.

    The hidden state keeps its value between cycles with probability
    ``stay``. In the good state ``y = x``; in the bad state ``y`` is a fair
    coin. Conditionals on ``(x^i, y^{i-1})`` come from forward filtering of
    the hidden state.
    """
    trans = np.array([[stay, 1 - stay], [1 - stay, stay]])
    emit = np.empty((2, 2, 2))  # [s, x, y]
    emit[0] = np.eye(2)
    emit[1] = 0.5
    # alpha axes: s, x_1..x_i, y_1..y_i
    alpha = np.array([good_start, 1 - good_start])[:, None, None] * emit
    prev = np.ones(())
    steps = []
    for i in range(1, n + 1):
        if i > 1:
            moved = np.tensordot(trans, alpha, axes=([0], [0]))  # s_i, x^{i-1}, y^{i-1}
            moved = np.expand_dims(np.expand_dims(moved, i), -1)  # add x_i and y_i
            e = emit.reshape((2,) + (1,) * (i - 1) + (2,) + (1,) * (i - 1) + (2,))
            alpha = moved * e
        cur = alpha.sum(axis=0)  # x^i, y^i
        denom = np.expand_dims(np.expand_dims(prev, i - 1), -1) if i > 1 else prev
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(denom > 0, cur / np.where(denom > 0, denom, 1.0), 0.5)
        steps.append(cond)
        prev = cur
    return CausalLaw("measurement", tuple(steps))


def random_law(kind: str, n: int, rng: np.random.Generator, nx: int = 2, ny: int = 2) -> CausalLaw:
    out_size = ny if kind == "measurement" else nx
    steps = []
    for i in range(1, n + 1):
        a, b = _history_len(kind, i)
        shape = (nx,) * a + (ny,) * b
        steps.append(rng.dirichlet(np.ones(out_size), size=shape))
    return CausalLaw(kind, tuple(steps), nx, ny)


# -- mixtures and concavity ---------------------------------------------------

def causal_product(law: CausalLaw, upto: int | None = None) -> np.ndarray:
    """``P(x^i || y^{i-1})`` with axes ``x_1..x_i, y_1..y_{i-1}``."""
    if law.kind != "input":
        raise ValueError("causal product is defined here for input laws")
    upto = law.n if upto is None else upto
    prod = np.ones(())
    for i in range(1, upto + 1):
        arr, a, _ = _to_prefix_layout(law, i)
        # prod axes x^{i-1}, y^{i-2} -> insert x_i and y_{i-1}
        p = np.expand_dims(prod, i - 1)
        if i > 1:
            p = np.expand_dims(p, -1)
        prod = p * arr
    return prod


def mix_causal(a: CausalLaw, b: CausalLaw, lam: float) -> CausalLaw:
    """Law whose causal product is ``lam * prod(a) + (1 - lam) * prod(b)``.

    Each step's conditional is the mixed product up to that step divided by
    the mixed product one step earlier. Zero-probability histories get a
    uniform row and are listed in ``filled``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if a.kind != "input" or b.kind != "input" or a.n != b.n or (a.nx, a.ny) != (b.nx, b.ny):
        raise ValueError("mix_causal needs two input laws of the same shape")
    if lam == 1.0:
        return a
    if lam == 0.0:
        return b
    steps, filled = [], []
    prev = np.ones(())
    for i in range(1, a.n + 1):
        cur = lam * causal_product(a, i) + (1 - lam) * causal_product(b, i)
        denom = np.expand_dims(prev, i - 1)
        if i > 1:
            denom = np.expand_dims(denom, -1)
        num = np.moveaxis(cur, i - 1, -1)  # history x^{i-1}, y^{i-1}, then x_i
        den = np.moveaxis(np.broadcast_to(denom, cur.shape), i - 1, -1)
        step = np.empty_like(num)
        ok = den[..., 0] > 0
        step[ok] = num[ok] / den[ok]
        step[~ok] = 1.0 / a.nx
        filled.extend((i, int(h)) for h in np.flatnonzero(~ok.ravel()))
        # guard against rounding drift in the ratio of products
        step /= step.sum(axis=-1, keepdims=True)
        steps.append(step)
        prev = cur
    return CausalLaw("input", tuple(steps), a.nx, a.ny, tuple(filled))


def hysteresis_objective(input_law: CausalLaw, measurement_law: CausalLaw) -> float:
    return causal_mi_sum(assemble_joint(input_law, measurement_law))


class ConcavityResult(NamedTuple):
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def concavity_check(a: CausalLaw, b: CausalLaw, measurement_law: CausalLaw, lam: float,
                    tol: float = 1e-9) -> ConcavityResult:
    lhs = hysteresis_objective(mix_causal(a, b, lam), measurement_law)
    rhs = lam * hysteresis_objective(a, measurement_law) + (1 - lam) * hysteresis_objective(b, measurement_law)
    return ConcavityResult(lhs, rhs, bool(lhs >= rhs - tol))


def concavity_sweep(instances: int, n: int, seed: int) -> list[dict]:
    """Random binary instances of the concavity inequality, one row per instance."""
    rows = []
    for k in range(instances):
        rng = np.random.default_rng([seed, k])
        horizon = n if n > 0 else int(rng.integers(1, 4))
        a = random_law("input", horizon, rng)
        b = random_law("input", horizon, rng)
        meas = random_law("measurement", horizon, rng)
        lam = float(rng.uniform())
        res = concavity_check(a, b, meas, lam)
        rows.append({"seed": seed, "instance": k, "n": horizon, "lambda": lam,
                     "lhs": res.lhs, "rhs": res.rhs, "slack": res.slack, "holds": res.holds})
    return rows


# -- backward-sweep maximization ------------------------------------------------

def _mi_terms(px: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Per-history ``I(X; Y)`` for input rows ``px[H, G, x]`` and channels ``W[H, x, y]``."""
    joint = px[..., :, None] * W[:, None, :, :]  # H, G, x, y
    py = joint.sum(axis=2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(joint > 0, joint * np.log(W[:, None, :, :] / py), 0.0)
    return t.sum(axis=(2, 3))


class HysteresisResult(NamedTuple):
    law: CausalLaw
    value: float


def hysteresis_maximize(measurement_law: CausalLaw, n: int, grid_step: float = 1e-2,
                        candidates: Sequence[float] | None = None) -> HysteresisResult:
    """Maximize ``sum_i I(X_i; Y_i | X^{i-1}, Y^{i-1})`` over the input law.

    Binary alphabets only, ``n <= 3``. Steps are optimized from ``i = n``
    down to ``i = 1``: each history's ``P(X_i = 1 | history)`` is chosen by
    grid search with the already-optimized later steps held fixed, which
    reaches the maximum over the whole product grid because later terms do
    not depend on earlier conditionals except through history weights.
    ``candidates`` replaces the grid by a finite set of admissible values.
    """
    if measurement_law.kind != "measurement" or (measurement_law.nx, measurement_law.ny) != (2, 2):
        raise UnsupportedInstance("hysteresis maximization handles binary measurement laws only")
    if not 1 <= n <= 3 or measurement_law.n < n:
        raise UnsupportedInstance("hysteresis maximization handles horizons 1..3")
    if candidates is None:
        if not 0 < grid_step <= 0.5:
            raise ValueError("grid_step must lie in (0, 0.5]")
        grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    else:
        grid = np.asarray(candidates, dtype=float)
        if grid.size == 0 or np.any((grid < 0) | (grid > 1)):
            raise ValueError("candidates must be probabilities of X = 1")
    px_grid = np.stack([1 - grid, grid], axis=-1)  # G, 2

    future = np.zeros((2,) * (2 * n))  # value-to-go over x^n, y^n
    steps = [None] * n
    for i in range(n, 0, -1):
        h = 2 * (i - 1)
        m = measurement_law.steps[i - 1]  # x^{i-1}, x_i, y^{i-1}, y_i
        order = list(range(i - 1)) + list(range(i, 2 * i - 1)) + [i - 1, 2 * i - 1]
        W = np.transpose(m, order).reshape(-1, 2, 2)
        V = np.transpose(future, order).reshape(-1, 2, 2)
        H = W.shape[0]
        px = np.broadcast_to(px_grid, (H,) + px_grid.shape)
        score = _mi_terms(px, W) + np.einsum("gx,hxy,hxy->hg", px_grid, W, V)
        best = np.argmax(score, axis=1)
        a = grid[best]
        steps[i - 1] = np.stack([1 - a, a], axis=-1).reshape((2,) * h + (2,))
        future = score[np.arange(H), best].reshape((2,) * h)
    law = CausalLaw("input", tuple(steps))
    meas = CausalLaw("measurement", measurement_law.steps[:n])
    return HysteresisResult(law, hysteresis_objective(law, meas))
