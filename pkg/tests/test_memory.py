import math

import numpy as np
import pytest

from infoengine import memory as mem
from infoengine.prob_core import JointPmf, binary_entropy, mutual_information, symmetric_channel

from oracles import (
    MARKOV_P01_Q02,
    hysteresis_product_grid,
    hysteresis_separable_grid,
    loop_directed_information,
    markov_engine_table,
    mp_binary_entropy,
)


class TestLaws:
    def test_shape_checked(self):
        with pytest.raises(ValueError):
            mem.CausalLaw("input", (np.array([[0.5, 0.5]]),))

    def test_rows_checked(self):
        with pytest.raises(ValueError):
            mem.CausalLaw("measurement", (np.array([[0.5, 0.6], [0.5, 0.5]]),))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            mem.CausalLaw("oracle", ())

    def test_dict_round_trip(self, rng):
        law = mem.random_law("input", 2, rng)
        back = mem.CausalLaw.from_dict(law.to_dict())
        for a, b in zip(law.steps, back.steps):
            np.testing.assert_array_equal(a, b)

    def test_enumeration_cap(self):
        with pytest.raises(mem.UnsupportedInstance):
            mem.assemble_joint(*mem.iid_laws([0.5, 0.5], np.eye(2), 7))

    def test_extract_inverts_assemble(self, rng):
        inp, meas = mem.random_law("input", 3, rng), mem.random_law("measurement", 3, rng)
        joint = mem.assemble_joint(inp, meas)
        for orig, got in zip(inp.steps, mem.extract_law(joint, "input").steps):
            np.testing.assert_allclose(got, orig, atol=1e-12)
        for orig, got in zip(meas.steps, mem.extract_law(joint, "measurement").steps):
            np.testing.assert_allclose(got, orig, atol=1e-12)


class TestDirectedInformation:
    def test_iid_is_n_times_mi(self):
        W = symmetric_channel(0.25)
        joint = mem.assemble_joint(*mem.iid_laws([0.3, 0.7], W, 2))
        single = mutual_information(JointPmf.from_channel([0.3, 0.7], W))
        assert mem.directed_information(joint) == pytest.approx(2 * single, abs=1e-14)

    def test_random_against_entropy_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 4))
            joint = mem.assemble_joint(mem.random_law("input", n, rng), mem.random_law("measurement", n, rng))
            for direction in ("y->x", "x->y"):
                ref = loop_directed_information(joint.mass, n, direction)
                assert mem.directed_information(joint, direction) == pytest.approx(ref, abs=1e-12)

    def test_conservation_law(self, rng):
        # I(X^n;Y^n) = I(X^n -> Y^n) + I(0 Y^{n-1} -> X^n); for our per-step Y_i that
        # reads sum_i I(X_i;Y^i|X^{i-1}) + sum_i I(Y_i;X^i|Y^{i-1}) - sum_i I(X_i;Y_i|X^{i-1},Y^{i-1})
        n = 3
        joint = mem.assemble_joint(mem.random_law("input", n, rng), mem.random_law("measurement", n, rng))
        total = mem.conditional_mi(joint.mass, range(n), range(n, 2 * n), [])
        lhs = mem.directed_information(joint, "y->x") + mem.directed_information(joint, "x->y")
        assert total == pytest.approx(lhs - mem.causal_mi_sum(joint), abs=1e-12)

    def test_delayed_copy(self):
        for n in range(1, 5):
            joint = mem.assemble_joint(*mem.delayed_copy_laws(n))
            assert mem.directed_information(joint, "y->x") == 0.0
            if n > 1:
                assert mem.directed_information(joint, "x->y") > 0.1
                assert mem.directed_information(joint, "x->y") == pytest.approx((n - 1) * math.log(2), abs=1e-12)

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            mem.directed_information(mem.assemble_joint(*mem.delayed_copy_laws(1)), "x<-y")


class TestMarkovEngine:
    def test_per_cycle_value(self):
        gain = mem.markov_engine_gain(mem.MarkovEngineModel(0.1, 0.2), 1)
        assert gain == pytest.approx(MARKOV_P01_Q02, abs=1e-15)
        di = mem.directed_information(mem.markov_engine_joint(mem.MarkovEngineModel(0.1, 0.2), 1))
        assert di == pytest.approx(MARKOV_P01_Q02, abs=1e-12)

    def test_joint_matches_cell_by_cell_construction(self):
        for n in (1, 2):
            joint = mem.markov_engine_joint(mem.MarkovEngineModel(0.3, 0.15), n)
            np.testing.assert_allclose(joint.mass, markov_engine_table(0.3, 0.15, n), atol=1e-15)

    def test_grid_closed_form(self):
        grid = np.round(np.linspace(0, 1, 11), 10)
        for p in grid:
            for q in grid:
                model = mem.MarkovEngineModel(p, q)
                for n in (1, 2):
                    joint = mem.markov_engine_joint(model, n)
                    closed = n * (mp_binary_entropy(p * q + (1 - p) * (1 - q)) - mp_binary_entropy(q))
                    assert mem.directed_information(joint) == pytest.approx(closed, abs=1e-9)

    def test_special_cases(self):
        assert mem.markov_engine_gain(mem.MarkovEngineModel(0.3, 0.5), 3) == pytest.approx(0.0, abs=1e-15)
        iid = 2 * (math.log(2) - binary_entropy(0.2))
        assert mem.markov_engine_gain(mem.MarkovEngineModel(0.5, 0.2), 2) == pytest.approx(iid, abs=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            mem.MarkovEngineModel(1.2, 0.1)
        with pytest.raises(ValueError):
            mem.markov_engine_gain(mem.MarkovEngineModel(0.1, 0.1), 0)


class TestWork:
    def test_gain_equals_directed_information(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 4))
            joint = mem.assemble_joint(mem.random_law("input", n, rng), mem.random_law("measurement", n, rng))
            assert mem.causal_gain(joint) == pytest.approx(mem.directed_information(joint), abs=1e-12)

    def test_blind_default_extracts_nothing(self, rng):
        joint = mem.assemble_joint(mem.random_law("input", 2, rng), mem.random_law("measurement", 2, rng))
        assert mem.causal_work(joint, mem.blind_protocol(joint)) == pytest.approx(0.0, abs=1e-14)

    def test_wealth_equals_work(self, rng):
        joint = mem.assemble_joint(mem.random_law("input", 2, rng), mem.random_law("measurement", 2, rng))
        proto = mem.optimal_causal_protocol(joint)
        assert mem.causal_log_wealth(joint, proto) == pytest.approx(mem.causal_work(joint, proto), abs=1e-12)

    def test_optimal_beats_random_protocols(self, rng):
        joint = mem.assemble_joint(mem.random_law("input", 2, rng), mem.random_law("measurement", 2, rng))
        best = mem.causal_work(joint, mem.optimal_causal_protocol(joint))
        for _ in range(50):
            assert mem.causal_work(joint, mem.random_law("protocol", 2, rng)) <= best + 1e-12

    def test_kind_checked(self, rng):
        joint = mem.assemble_joint(*mem.iid_laws([0.5, 0.5], np.eye(2), 1))
        with pytest.raises(ValueError):
            mem.causal_work(joint, mem.random_law("input", 1, rng))


class TestConcavity:
    def test_endpoints_exact(self, rng):
        for _ in range(20):
            a, b = mem.random_law("input", 2, rng), mem.random_law("input", 2, rng)
            meas = mem.random_law("measurement", 2, rng)
            for lam in (0.0, 1.0):
                res = mem.concavity_check(a, b, meas, lam)
                assert abs(res.lhs - res.rhs) <= 1e-12

    def test_mixture_product_is_mixture(self, rng):
        a, b = mem.random_law("input", 3, rng), mem.random_law("input", 3, rng)
        mix = mem.mix_causal(a, b, 0.3)
        np.testing.assert_allclose(mem.causal_product(mix),
                                   0.3 * mem.causal_product(a) + 0.7 * mem.causal_product(b), atol=1e-14)

    def test_sweep(self):
        rows = mem.concavity_sweep(200, 0, seed=3)
        assert all(r["holds"] for r in rows)
        assert {r["n"] for r in rows} == {1, 2, 3}

    def test_lambda_range(self, rng):
        a = mem.random_law("input", 1, rng)
        with pytest.raises(ValueError):
            mem.mix_causal(a, a, 1.5)


class TestHysteresis:
    def test_noiseless(self):
        meas = mem.iid_laws([0.5, 0.5], np.eye(2), 2)[1]
        assert mem.hysteresis_maximize(meas, 2).value == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_against_full_product_grid(self, rng):
        for k in range(3):
            meas = mem.random_law("measurement", 2, rng) if k else mem.good_bad_device_law(2, 0.8)
            ours = mem.hysteresis_maximize(meas, 2, grid_step=0.1).value
            ref = hysteresis_product_grid(meas.steps[0], meas.steps[1], 0.1)
            assert ours == pytest.approx(ref, abs=1e-12)

    def test_against_fine_grid(self, rng):
        for k in range(3):
            meas = mem.random_law("measurement", 2, rng) if k else mem.good_bad_device_law(2, 0.9)
            ours = mem.hysteresis_maximize(meas, 2, grid_step=0.01).value
            ref = hysteresis_separable_grid(meas.steps[0], meas.steps[1], 0.01)
            assert abs(ours - ref) < 1e-3
            assert ours >= ref - 1e-12

    def test_objective_at_iid_uniform_is_directed_information(self):
        meas = mem.good_bad_device_law(3, 0.7)
        iid = mem.iid_laws([0.5, 0.5], np.eye(2), 3)[0]
        joint = mem.assemble_joint(iid, meas)
        assert mem.hysteresis_objective(iid, meas) == pytest.approx(mem.directed_information(joint), abs=1e-12)

    def test_candidate_restriction(self):
        meas = mem.good_bad_device_law(2, 0.9)
        res = mem.hysteresis_maximize(meas, 2, candidates=[0.5])
        iid = mem.iid_laws([0.5, 0.5], np.eye(2), 2)[0]
        assert res.value == pytest.approx(mem.hysteresis_objective(iid, meas), abs=1e-14)

    def test_unsupported(self, rng):
        with pytest.raises(mem.UnsupportedInstance):
            mem.hysteresis_maximize(mem.random_law("measurement", 4, rng), 4)
        with pytest.raises(mem.UnsupportedInstance):
            mem.hysteresis_maximize(mem.random_law("measurement", 2, rng, nx=3), 2)

    def test_good_bad_rows(self):
        law = mem.good_bad_device_law(2, 0.9)
        np.testing.assert_allclose(law.steps[0], [[0.75, 0.25], [0.25, 0.75]])
