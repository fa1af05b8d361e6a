import itertools

import pytest

from tsforge.evaluate import (
    EvalError,
    EvalPair,
    EvalSet,
    SetResult,
    evaluate,
    extract_answer_for_eval,
    score_set,
    weighted_average,
)
from tsforge.rewards import reward_total

from format_cases import MALFORMED, WELL_FORMED


class TestExtractAnswerForEval:
    def test_well_formed(self):
        assert extract_answer_for_eval("<think>t</think><answer>A B</answer>") == "A B"

    def test_unclosed_treated_as_empty(self):
        assert extract_answer_for_eval("<answer>A B") == ""

    def test_lenient_without_think(self):
        assert extract_answer_for_eval("<answer>A B</answer>") == "A B"

    def test_hand_labeled_suite(self):
        for raw, expected in WELL_FORMED + MALFORMED:
            assert extract_answer_for_eval(raw) == expected, raw

    def test_adversarial_never_throws(self):
        adversarial = [raw for raw, _ in MALFORMED] + [
            "<answer>" * 10, "</answer>" * 10, "\x00<answer>\x00</answer>",
        ]
        for raw in adversarial:
            extract_answer_for_eval(raw)


def _pair(i, raw, ref):
    return EvalPair(example_id=f"e{i}", raw_output=raw, ref_transcript=ref)


def _ok(text):
    return f"<think></think><answer>{text}</answer>"


class TestScoreSet:
    def test_all_perfect(self):
        s = EvalSet("x", tuple(_pair(i, _ok("A B C"), "A B C") for i in range(5)))
        assert score_set(s).wer_percent == 0.0

    def test_pooled_count_arithmetic(self):
        s = EvalSet("x", (_pair(0, _ok("A X C"), "A B C D"),))  # 1 sub + 1 del over 4
        assert score_set(s).wer_percent == pytest.approx(50.0)

    def test_one_empty_extraction_among_perfect(self):
        ref = " ".join(f"W{i}" for i in range(10))
        pairs = [_pair(i, _ok(ref), ref) for i in range(9)]
        pairs.append(_pair(9, "<answer>unclosed", ref))
        res = score_set(EvalSet("x", tuple(pairs)))
        assert res.wer_percent == pytest.approx(10.0)
        assert res.n_malformed == 1

    def test_malformed_counts_strict_parse_failures(self):
        pairs = (
            _pair(0, "<answer>A</answer>", "A"),             # lenient ok, strict fail
            _pair(1, "<think></think><answer>A</answer>", "A"),
        )
        res = score_set(EvalSet("x", pairs))
        assert res.n_malformed == 1
        assert res.wer_percent == 0.0

    def test_permutation_invariant(self):
        pairs = [
            _pair(0, _ok("A B"), "A B C"),
            _pair(1, "garbage", "D E"),
            _pair(2, _ok("X"), "X"),
        ]
        results = {score_set(EvalSet("x", tuple(p))).wer_percent
                   for p in itertools.permutations(pairs)}
        assert len(results) == 1

    def test_empty_set_rejected(self):
        with pytest.raises(EvalError):
            EvalSet("x", ())

    def test_empty_reference_rejected(self):
        with pytest.raises(EvalError):
            EvalSet("x", (_pair(0, _ok("A"), " !! "),))


class TestWeightedAverage:
    def test_single_set_identity(self):
        per = {"a": SetResult(12.5, 100, 0)}
        assert weighted_average(per) == 12.5

    def test_weighted(self):
        per = {"a": SetResult(10.0, 100, 0), "b": SetResult(20.0, 300, 0)}
        assert weighted_average(per) == pytest.approx(17.5)

    def test_equal_sizes_mean(self):
        per = {"a": SetResult(10.0, 50, 0), "b": SetResult(30.0, 50, 0)}
        assert weighted_average(per) == pytest.approx(20.0)

    def test_bounded_by_min_max(self):
        per = {"a": SetResult(3.0, 17, 0), "b": SetResult(9.0, 5, 0), "c": SetResult(6.0, 88, 0)}
        avg = weighted_average(per)
        assert 3.0 <= avg <= 9.0

    def test_empty_rejected(self):
        with pytest.raises(EvalError):
            weighted_average({})


def test_agreement_with_reward_wer():
    """For well-formed outputs the eval WER equals 1 - r_wer of the same pair."""
    cases = [
        (_ok("A B C"), "A B C"),
        (_ok("A X C"), "A B C D"),
        (_ok(""), "A B C"),
        (_ok("A A A A"), "A"),
    ]
    for raw, ref in cases:
        res = score_set(EvalSet("x", (_pair(0, raw, ref),)))
        b = reward_total(raw, ref)
        assert abs(res.wer_percent / 100.0 - (1.0 - b.r_wer)) < 1e-12


def test_evaluate_report_invariant():
    sets = [
        EvalSet("single", tuple(_pair(i, _ok("A B"), "A B") for i in range(4))),
        EvalSet("2mix", (_pair(0, _ok("A"), "A B"),)),
    ]
    report = evaluate(sets)
    total_n = sum(r.n_samples for r in report.per_set.values())
    expected = sum(r.wer_percent * r.n_samples for r in report.per_set.values()) / total_n
    assert abs(report.weighted_avg_percent - expected) < 1e-9
