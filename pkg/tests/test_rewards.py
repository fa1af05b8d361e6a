import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsforge.rewards import (
    AlignmentCounts,
    align,
    normalize_text,
    parse_output,
    reward_format,
    reward_total,
    reward_wer,
    serialize_target,
)

from format_cases import MALFORMED, WELL_FORMED
from oracles import edit_distance_recursive


class TestNormalizeText:
    def test_punctuation_and_case(self):
        assert normalize_text("Hello,  world!") == ["HELLO", "WORLD"]

    def test_apostrophe_preserved(self):
        assert normalize_text("it's") == ["IT'S"]

    def test_empty(self):
        assert normalize_text("") == []

    def test_digits_kept(self):
        assert normalize_text("route 66") == ["ROUTE", "66"]


class TestAlign:
    def test_identity(self):
        words = ["A", "B", "C", "D", "E"]
        assert align(words, words) == AlignmentCounts(0, 0, 0, 5, 5)

    def test_sub_and_del(self):
        c = align(["A", "X", "C"], ["A", "B", "C", "D"])
        assert (c.sub, c.dele, c.ins, c.hits, c.n_ref) == (1, 1, 0, 2, 4)

    def test_insertions(self):
        c = align(["HELLO", "HELLO", "HELLO"], ["HELLO"])
        assert (c.ins, c.hits, c.n_ref) == (2, 1, 1)

    def test_empty_hyp(self):
        c = align([], ["A", "B"])
        assert (c.sub, c.dele, c.ins, c.hits) == (0, 2, 0, 0)

    def test_empty_ref(self):
        c = align(["A"], [])
        assert (c.sub, c.dele, c.ins, c.n_ref) == (0, 0, 1, 0)

    def test_matches_memoless_recursion(self):
        alphabet = ["A", "B", "C"]
        seqs = [seq for n in range(4) for seq in itertools.product(alphabet, repeat=n)]
        for ref in seqs:
            for hyp in seqs:
                c = align(list(hyp), list(ref))
                assert c.errors == edit_distance_recursive(hyp, ref)
                assert c.hits + c.sub + c.dele == len(ref)
                assert c.hits + c.sub + c.ins == len(hyp)

    @given(st.lists(st.sampled_from("AB"), max_size=8), st.lists(st.sampled_from("AB"), max_size=8))
    @settings(max_examples=200)
    def test_count_identities(self, hyp, ref):
        c = align(hyp, ref)
        assert c.hits + c.sub + c.dele == len(ref)
        assert c.hits + c.sub + c.ins == len(hyp)
        assert c.errors >= abs(len(ref) - len(hyp))


class TestRewardWer:
    def test_perfect(self):
        assert reward_wer(AlignmentCounts(0, 0, 0, 5, 5)) == 1.0

    def test_half(self):
        assert reward_wer(AlignmentCounts(1, 1, 0, 2, 4)) == 0.5

    def test_negative_when_many_insertions(self):
        assert reward_wer(AlignmentCounts(0, 0, 2, 1, 1)) == -1.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            reward_wer(AlignmentCounts(0, 0, 0, 0, 0))


class TestParseOutput:
    def test_well_formed(self):
        p = parse_output("<think>t</think><answer>a</answer>")
        assert p.format_ok and p.think == "t" and p.answer == "a"

    def test_missing_think_best_effort(self):
        p = parse_output("<answer>a</answer>")
        assert not p.format_ok and p.answer == "a"

    def test_trailing_text_breaks_strict(self):
        assert not parse_output("<think>t</think><answer>a</answer> trailing").format_ok

    def test_whitespace_between_blocks_ok(self):
        assert parse_output("<think>t</think>\n  <answer>a</answer>").format_ok

    def test_hand_labeled_suite(self):
        for raw, _ in WELL_FORMED:
            assert parse_output(raw).format_ok, raw
        for raw, _ in MALFORMED:
            assert not parse_output(raw).format_ok, raw

    def test_never_throws(self):
        for raw, _ in WELL_FORMED + MALFORMED:
            parse_output(raw)


class TestRewards:
    def test_format_reward_binary(self):
        assert reward_format(parse_output("<think>t</think><answer>a</answer>")) == 1.0
        assert reward_format(parse_output("")) == 0.0
        assert reward_format(parse_output("<think></think><answer>a</answer>")) == 1.0

    def test_total_perfect(self):
        b = reward_total("<think>x</think><answer>THE CAT SAT</answer>", "THE CAT SAT")
        assert b.r_total == 2.0 and b.r_wer == 1.0 and b.r_format == 1.0

    def test_total_empty_answer_all_deletions(self):
        ref = " ".join(f"W{i}" for i in range(10))
        b = reward_total(f"<think>t</think><answer></answer>", ref)
        assert b.r_format == 1.0
        assert b.r_wer == 0.0
        assert b.counts.dele == 10
        assert b.r_total == 1.0

    def test_total_garbage_floor(self):
        b = reward_total("garbage string", "A B C D")
        assert b.r_wer == 0.0 and b.r_format == 0.0 and b.r_total == 0.0

    def test_total_is_exact_sum(self):
        for raw, _ in WELL_FORMED + MALFORMED:
            b = reward_total(raw, "SOME REFERENCE WORDS")
            assert b.r_total == b.r_wer + b.r_format

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            reward_total("<think></think><answer>a</answer>", " , !")

    def test_wer_upper_bound(self):
        rng = np.random.default_rng(0)
        vocab = ["A", "B", "C", "D"]
        for _ in range(200):
            ref = " ".join(rng.choice(vocab, size=rng.integers(1, 6)))
            hyp = " ".join(rng.choice(vocab, size=rng.integers(0, 8)))
            b = reward_total(f"<think></think><answer>{hyp}</answer>", ref)
            assert b.r_wer <= 1.0
            assert (b.r_wer == 1.0) == (normalize_text(hyp) == normalize_text(ref))


def test_serialize_target_round_trips():
    raw = serialize_target("some reasoning", "AN ANSWER")
    p = parse_output(raw)
    assert p.format_ok and p.think == "some reasoning" and p.answer == "AN ANSWER"
