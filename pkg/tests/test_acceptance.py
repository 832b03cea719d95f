"""Acceptance criteria, one test per criterion, at the stated tolerances."""
import itertools
import math
import time

import numpy as np
import pytest

from infoengine import continuous as ct
from infoengine import gambling as gb
from infoengine import memory as mem
from infoengine import szilard as sz
from infoengine import universal as uv
from infoengine.prob_core import JointPmf, kl_divergence, mutual_information, symmetric_channel

from oracles import (
    HALF_LN2,
    MARKOV_P01_Q02,
    MI_Q025,
    capacity_grid_binary,
    capacity_grid_ternary,
    enumerate_regret,
    hysteresis_separable_grid,
    loop_directed_information,
    loop_kl,
    loop_mi,
    mp_binary_entropy,
    random_joint,
)

criterion = pytest.mark.criterion


@criterion(1, "fair odds without side information earn nothing")
def test_fair_bet_null():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    for _ in range(100):
        m, k = int(rng.integers(2, 9)), int(rng.integers(1, 9))
        prior = rng.dirichlet(np.ones(m))
        joint = JointPmf(np.outer(prior, rng.dirichlet(np.ones(k))))
        g = gb.growth_rate(gb.kelly_strategy(joint), gb.fair_odds(prior), joint)
        assert abs(g) < 1e-12
    assert time.perf_counter() - start < 1.0


@criterion(2, "optimal growth and work equal I(X;Y), analytically and by Monte Carlo")
def test_optimal_value_is_mutual_information():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    for _ in range(100):
        m, k = int(rng.integers(2, 9)), int(rng.integers(1, 9))
        mass = random_joint(rng, m, k)
        joint = JointPmf(mass)
        ref = loop_mi(mass)
        g = gb.growth_rate(gb.kelly_strategy(joint), gb.fair_odds(joint), joint)
        cfg = sz.EngineConfig(joint.px(), joint.y_given_x())
        w = sz.expected_work(cfg, sz.optimal_protocol(joint.x_given_y()))
        assert abs(g - ref) < 1e-12 and abs(w - ref) < 1e-12

    joint = JointPmf.from_channel([0.5, 0.5], symmetric_channel(0.25))
    cfg = sz.EngineConfig([0.5, 0.5], symmetric_channel(0.25))
    for seed in range(20):
        gam = gb.simulate_gamble(gb.kelly_strategy(joint), gb.fair_odds(joint), joint, 100_000, seed)
        eng = sz.simulate_engine(cfg, sz.optimal_protocol(joint.x_given_y()), 100_000, seed)
        assert abs(gam.mean() - MI_Q025) <= 3 * gam.std_error()
        assert abs(eng.mean() - MI_Q025) <= 3 * eng.std_error()
    assert time.perf_counter() - start < 30.0


@criterion(3, "gambling and engine values agree per round, including non-optimal protocols")
def test_analogy_exactness():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    for t in range(100):
        m = int(rng.integers(2, 7))
        joint = JointPmf(random_joint(rng, m, int(rng.integers(1, 6))))
        proto = joint.x_given_y().rows if t % 4 == 0 else rng.dirichlet(np.ones(m), size=joint.shape[1])
        skip = rng.random(joint.shape[1]) < 0.3
        gamble, engine = gb.per_round_tables(joint, sz.ControlProtocol(proto, skip))
        assert np.max(np.abs(gamble - engine)) <= 1e-12
        assert gb.analogy_check(joint, sz.ControlProtocol(proto, skip), tol=1e-12)
        led_g = gb.simulate_gamble(gb.BettingStrategy(proto, skip), gb.fair_odds(joint), joint, 50, t)
        cfg = sz.EngineConfig(joint.px(), joint.y_given_x())
        led_e = sz.simulate_engine(cfg, sz.ControlProtocol(proto, skip), 50, t)
        assert np.max(np.abs(led_g.increments - led_e.increments)) <= 1e-12
    assert time.perf_counter() - start < 1.0


@criterion(4, "constrained bet and notched divider match brute force; value is I minus the KL loss")
def test_constrained_scan():
    rng = np.random.default_rng(4)
    for _ in range(100):
        m = int(rng.integers(2, 5))
        joint = JointPmf(random_joint(rng, m, int(rng.integers(1, 4))))
        cands = [rng.dirichlet(np.ones(m)) for _ in range(int(rng.integers(1, 6)))]
        post, py = joint.x_given_y().rows, joint.py().probs
        brute_choice = []
        for row in post:
            losses = [loop_kl(row, c) for c in cands]
            brute_choice.append(min(range(len(cands)), key=lambda i: (losses[i], i)))
        brute_loss = sum(py[y] * loop_kl(post[y], cands[c]) for y, c in enumerate(brute_choice))
        bet = gb.constrained_strategy(joint, cands)
        notch = sz.notch_constrained_protocol(post, cands, py)
        assert list(bet.choices) == brute_choice == list(notch.choices)
        assert abs(bet.loss - brute_loss) < 1e-12
        target = mutual_information(joint) - bet.loss
        assert abs(gb.growth_rate(bet.strategy, gb.fair_odds(joint), joint) - target) < 1e-12
        cfg = sz.EngineConfig(joint.px(), joint.y_given_x())
        assert abs(sz.expected_work(cfg, notch.protocol) - target) < 1e-12
    example = gb.constrained_strategy([[0.75, 0.25]], [[0.5, 0.5], [0.9, 0.1]], marginal_y=[1.0])
    assert example.choices == (1,) and example.loss == pytest.approx(0.0924, abs=1e-4)


@criterion(5, "capacity fixed point matches dense grid search; q=0.25 gives the uniform split")
def test_capacity_optimization():
    rng = np.random.default_rng(5)
    for _ in range(20):
        W = rng.dirichlet(np.ones(2), size=2)
        assert abs(sz.optimize_initial_split(W).value - capacity_grid_binary(W)[0]) < 1e-6
    for _ in range(5):
        W = rng.dirichlet(np.ones(3), size=3)
        assert abs(sz.optimize_initial_split(W).value - capacity_grid_ternary(W)[0]) < 1e-6
    cap = sz.optimize_initial_split(symmetric_channel(0.25))
    np.testing.assert_allclose(cap.split.probs, [0.5, 0.5], atol=1e-9)
    assert abs(cap.value - (math.log(2) - mp_binary_entropy(0.25))) < 1e-10
    assert cap.value == pytest.approx(0.130812, abs=1e-6)


@criterion(6, "universal bet regret stays below k(m-1)ln(n+1); closed form matches the Dirichlet integral")
def test_universal_regret():
    start = time.perf_counter()
    odds = gb.fair_odds([0.5, 0.5])
    for n in range(1, 13):
        bound = uv.regret_bound(n, 2, 1)
        for xs in itertools.product((0, 1), repeat=n):
            assert uv.regret_check(xs, [0] * n, odds, 1).regret <= bound + uv.REGRET_SLACK
    rng = np.random.default_rng(6)
    for _ in range(100):
        m, k = int(rng.integers(2, 5)), int(rng.integers(1, 3))
        xs, ys = rng.integers(0, m, 200), rng.integers(0, k, 200)
        o = gb.OddsProfile(rng.uniform(0.5, 4.0, m))
        rep = uv.regret_check(xs, ys, o, k)
        assert rep.holds and rep.regret == pytest.approx(enumerate_regret(xs, ys, m, k, o.payout), abs=1e-9)
    for t in range(20):
        m = int(rng.integers(2, 5))
        table = uv.CountTable(m, 1, rng.integers(0, 5, size=(1, m)))
        est, se = uv.dirichlet_integral_oracle(table, 0, samples=200_000, seed=t, with_error=True)
        assert np.all(np.abs(est.probs - uv.universal_bet(table, 0).probs) <= 3 * se)
    assert time.perf_counter() - start < 60.0


@criterion(7, "memory gain by enumeration equals n[H_b(p*q) - H_b(q)]")
def test_memory_gain():
    grid = np.round(np.linspace(0.0, 1.0, 11), 10)
    for p in grid:
        for q in grid:
            model = mem.MarkovEngineModel(p, q)
            per_cycle = mp_binary_entropy(p * q + (1 - p) * (1 - q)) - mp_binary_entropy(q)
            for n in range(1, 5):
                joint = mem.markov_engine_joint(model, n)
                assert abs(mem.directed_information(joint) - n * per_cycle) < 1e-9
                assert abs(mem.markov_engine_gain(model, n) - n * per_cycle) < 1e-9
    gain = mem.directed_information(mem.markov_engine_joint(mem.MarkovEngineModel(0.1, 0.2), 1))
    assert abs(gain - MARKOV_P01_Q02) < 1e-12
    assert gain == pytest.approx(0.072585, abs=1e-4)


@criterion(8, "delayed copy: zero directed information toward X, positive toward Y")
def test_directed_information_counterexample():
    for n in range(1, 5):
        joint = mem.assemble_joint(*mem.delayed_copy_laws(n))
        assert mem.directed_information(joint, "y->x") == 0.0
        assert loop_directed_information(joint.mass, n, "y->x") == pytest.approx(0.0, abs=1e-12)
        if n >= 2:
            assert mem.directed_information(joint, "x->y") > 0


@criterion(9, "hysteresis objective is concave under causal mixing")
def test_concavity():
    start = time.perf_counter()
    rows = mem.concavity_sweep(1000, 0, seed=9)
    assert len(rows) == 1000
    assert all(r["lhs"] >= r["rhs"] - 1e-9 for r in rows)
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = int(rng.integers(1, 4))
        a, b = mem.random_law("input", n, rng), mem.random_law("input", n, rng)
        meas = mem.random_law("measurement", n, rng)
        for lam in (0.0, 1.0):
            res = mem.concavity_check(a, b, meas, lam)
            assert abs(res.lhs - res.rhs) <= 1e-12
    assert time.perf_counter() - start < 60.0


@criterion(10, "backward sweep matches exhaustive grid search; noiseless case attains 2 ln 2")
def test_hysteresis_maximization():
    rng = np.random.default_rng(10)
    laws = [mem.good_bad_device_law(2, 0.9), mem.good_bad_device_law(2, 0.6, good_start=0.8)]
    laws += [mem.random_law("measurement", 2, rng) for _ in range(3)]
    for meas in laws:
        ours = mem.hysteresis_maximize(meas, 2, grid_step=1e-2).value
        ref = hysteresis_separable_grid(meas.steps[0], meas.steps[1], 1e-2)
        assert abs(ours - ref) < 1e-3
    noiseless = mem.iid_laws([0.5, 0.5], np.eye(2), 2)[1]
    assert mem.hysteresis_maximize(noiseless, 2).value == pytest.approx(2 * math.log(2), abs=1e-12)


@criterion(11, "quantized Gaussian MI converges; spread gambling grows at the quantized MI")
def test_continuous_convergence():
    sys_ = ct.GaussianSystem(1.0, 1.0)
    mi = mutual_information(ct.quantize(sys_, 256, 8.0))
    assert abs(mi - HALF_LN2) / HALF_LN2 < 0.01
    chain = [mutual_information(ct.quantize(sys_, 2 ** k, 8.0)) for k in range(1, 9)]
    assert all(b >= a for a, b in zip(chain, chain[1:]))

    joint = ct.quantize(sys_, 32, 4.0)
    market = ct.fair_spread_market(joint.px(), ct.bin_edges(sys_.sigma_x, 32, 4.0))
    led = ct.simulate_spread_gamble(market, ct.kelly_allocation(joint), joint, 100_000, 11)
    assert abs(led.mean() - mutual_information(joint)) <= 3 * led.std_error()


@criterion(12, "skipping low-information rounds never lowers net growth")
def test_skip_rule():
    joint = JointPmf.from_channel([0.7, 0.3], symmetric_channel(0.25))
    f = np.array([0.1, 0.1])
    post, px = joint.x_given_y().rows, joint.px()
    assert any(kl_divergence(post[y], px) <= post[y] @ f for y in range(2))
    odds = gb.unfair_odds(px, f)
    skip, never = gb.unfair_skip_policy(joint, f), gb.kelly_strategy(joint)
    assert gb.growth_rate(skip, odds, joint) >= gb.growth_rate(never, odds, joint)
    for seed in range(20):
        a = gb.simulate_gamble(skip, odds, joint, 20_000, seed)
        b = gb.simulate_gamble(never, odds, joint, 20_000, seed)
        diff = a.increments - b.increments
        se = diff.std(ddof=1) / math.sqrt(diff.size)
        assert diff.mean() >= -3 * se
