import math

import numpy as np
import pytest

from tsforge.grpo import (
    GrpoError,
    SelectionStrategy,
    ToyInstance,
    classify_prediction,
    group_advantages,
    select_rl_data,
    simulate_grpo,
)
from tsforge.manifest import Manifest, PredictionRecord


class TestGroupAdvantages:
    def test_zero_spread(self):
        assert group_advantages([1, 1, 1, 1]) == [0, 0, 0, 0]

    def test_two_values(self):
        assert group_advantages([0, 2]) == pytest.approx([-1, 1])

    def test_four_values(self):
        got = group_advantages([0.5, 1.5, 2.5, 3.5])
        assert got == pytest.approx([-1.3416, -0.4472, 0.4472, 1.3416], abs=1e-4)

    def test_too_small(self):
        with pytest.raises(GrpoError):
            group_advantages([1.0])

    def test_normalization_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            r = rng.normal(size=int(rng.integers(2, 12)))
            if np.std(r) < 1e-8:
                continue
            a = np.array(group_advantages(list(r)))
            assert abs(a.mean()) < 1e-9
            assert abs(a.std() - 1.0) < 1e-6
            # order preservation
            for i in range(len(r)):
                for j in range(len(r)):
                    if r[i] > r[j]:
                        assert a[i] > a[j]

    def test_shift_scale_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            r = rng.normal(size=6)
            base = group_advantages(list(r))
            for alpha in (0.5, 2.0):
                for beta in (-1.0, 3.0):
                    other = group_advantages(list(alpha * r + beta))
                    assert np.max(np.abs(np.array(base) - other)) < 1e-9


class TestClassifyPrediction:
    def test_format_error_takes_precedence(self):
        p = PredictionRecord("e", "<answer>x</answer>", False, 0.0)
        assert classify_prediction(p) == "format_error"

    def test_correct(self):
        p = PredictionRecord("e", "<think></think><answer>x</answer>", True, 0.0)
        assert classify_prediction(p) == "correct"

    def test_content_error(self):
        p = PredictionRecord("e", "<think></think><answer>y</answer>", True, 0.2)
        assert classify_prediction(p) == "content_error"


def _preds(n_correct, n_content, n_format):
    recs = []
    for i in range(n_correct):
        recs.append(PredictionRecord(f"c{i}", "<think></think><answer>x</answer>", True, 0.0))
    for i in range(n_content):
        recs.append(PredictionRecord(f"w{i}", "<think></think><answer>y</answer>", True, 0.5))
    for i in range(n_format):
        recs.append(PredictionRecord(f"f{i}", "<answer>x</answer>", False, 0.0))
    return Manifest(PredictionRecord, recs)


class TestSelectRlData:
    def test_random_uniform_budget(self):
        ids = select_rl_data(_preds(50, 30, 20), SelectionStrategy("random", budget=40), seed=1)
        assert len(ids) == 40 and len(set(ids)) == 40

    def test_error_only_all_correct_rejected(self):
        with pytest.raises(GrpoError, match="no error"):
            select_rl_data(_preds(100, 0, 0), SelectionStrategy("error_only", budget=10), seed=1)

    def test_error_only_format_first(self):
        ids = select_rl_data(_preds(0, 100, 10), SelectionStrategy("error_only", budget=50), seed=1)
        assert len(ids) == 50
        assert sum(1 for i in ids if i.startswith("f")) == 10
        assert sum(1 for i in ids if i.startswith("w")) == 40

    def test_error_only_format_overflow_rejected(self):
        with pytest.raises(GrpoError, match="format"):
            select_rl_data(_preds(0, 0, 30), SelectionStrategy("error_only", budget=10), seed=1)

    def test_error_only_never_selects_correct(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            nc, nw, nf = (int(rng.integers(0, 30)) for _ in range(3))
            if nw + nf == 0:
                continue
            budget = max(nf, 1) + int(rng.integers(0, nw + 1))
            ids = select_rl_data(_preds(nc, nw, nf),
                                 SelectionStrategy("error_only", budget=budget), seed=int(rng.integers(1e6)))
            assert not any(i.startswith("c") for i in ids)

    def test_balanced_ratio_60(self):
        ids = select_rl_data(_preds(100, 100, 10),
                             SelectionStrategy("balanced_correct_error", budget=60), seed=2)
        correct = [i for i in ids if i.startswith("c")]
        errors = [i for i in ids if not i.startswith("c")]
        assert len(correct) == 10 and len(errors) == 50
        # every available format error is drawn before any content error count
        assert sum(1 for i in ids if i.startswith("f")) == 10

    def test_balanced_rounds_toward_errors(self):
        ids = select_rl_data(_preds(100, 100, 0),
                             SelectionStrategy("balanced_correct_error", budget=7), seed=2)
        assert sum(1 for i in ids if i.startswith("c")) == 1  # ceil(7*5/6)=6 errors
        assert len(ids) == 7

    def test_infeasible_balanced(self):
        with pytest.raises(GrpoError):
            select_rl_data(_preds(0, 100, 0),
                           SelectionStrategy("balanced_correct_error", budget=60), seed=2)

    def test_deterministic(self):
        p = _preds(50, 50, 5)
        s = SelectionStrategy("balanced_correct_error", budget=30)
        assert select_rl_data(p, s, seed=9) == select_rl_data(p, s, seed=9)
        assert select_rl_data(p, s, seed=9) != select_rl_data(p, s, seed=10)

    def test_bad_strategy(self):
        with pytest.raises(GrpoError):
            SelectionStrategy("best_only", budget=10)


def _instance(iid="t0", ref="THE TARGET WORDS"):
    return ToyInstance(
        instance_id=iid,
        reference=ref,
        candidates=(
            f"<think>ok</think><answer>{ref}</answer>",  # r_total 2.0
            f"<answer>{ref}</answer>",                   # format broken, r 1.0
            "complete garbage",                           # r 0.0
        ),
        logits=(0.0, 0.0, 0.0),
    )


class TestSimulateGrpo:
    def test_lr_zero_is_flat(self):
        res = simulate_grpo([_instance()], lr=0.0, steps=20, seed=3)
        assert res.final_logits["t0"] == [0.0, 0.0, 0.0]
        assert all(abs(row.p_best - 1 / 3) < 1e-12 for row in res.trace)

    def test_learns_dominant_candidate(self):
        res = simulate_grpo([_instance()], lr=0.1, steps=500, seed=3)
        assert res.trace[-1].p_best > 0.9
        assert res.trace[-1].mean_reward > res.trace[0].mean_reward

    def test_identical_rewards_no_update(self):
        inst = ToyInstance("t", "A B", ("garbage one", "garbage two"), (0.3, -0.2))
        res = simulate_grpo([inst], lr=0.5, steps=50, seed=0)
        assert res.final_logits["t"] == [0.3, -0.2]

    def test_nonfinite_abort_names_step(self):
        with np.errstate(invalid="ignore"), pytest.raises(GrpoError, match="step 1"):
            simulate_grpo([_instance()], lr=float("inf"), steps=5, seed=3)

    def test_deterministic_trace(self):
        a = simulate_grpo([_instance()], lr=0.05, steps=100, seed=8)
        b = simulate_grpo([_instance()], lr=0.05, steps=100, seed=8)
        assert [(r.step, r.mean_reward, r.p_best) for r in a.trace] == \
            [(r.step, r.mean_reward, r.p_best) for r in b.trace]

    def test_trace_length_and_steps(self):
        res = simulate_grpo([_instance()], lr=0.05, steps=10, seed=1)
        assert [r.step for r in res.trace] == list(range(11))
