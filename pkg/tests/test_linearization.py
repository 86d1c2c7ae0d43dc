import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GUEST, HOME, make_game
from hockeygen.game_model import (
    EndResult,
    GameTime,
    Goal,
    LengthBucket,
    Penalty,
    Resolution,
    Save,
    Score,
    Strength,
    derive_features,
)
from hockeygen.linearization import (
    LengthBuckets,
    assign_length_buckets,
    check_token_sequence,
    detokenize,
    is_tag,
    linearize_event,
    tokenize_target,
    with_bucket,
)
from hockeygen.synth_corpus import names_in_event

SAMPLE_RESULT = EndResult("Ässät", "Blues", Score(0, 4), (Score(0, 3), Score(0, 0), Score(0, 1)))
SAMPLE_SOURCE = (
    "<length>long</length> <type>result</type> <home> Ässät </home> <guest> Blues </guest> "
    "<score> 0 - 4 </score> <periods> ( 0 - 3 , 0 - 0 , 0 - 1 ) </periods>"
)


class TestLinearize:
    def test_sample_end_result(self):
        assert " ".join(linearize_event(SAMPLE_RESULT, None, "long")) == SAMPLE_SOURCE

    def test_bucket_token_only_difference(self):
        long = linearize_event(SAMPLE_RESULT, None, LengthBucket.LONG)
        short = linearize_event(SAMPLE_RESULT, None, LengthBucket.SHORT)
        assert short[0] == "<length>short</length>" and short[1:] == long[1:]
        assert with_bucket(long, "short") == short

    def test_goal_with_assist(self):
        goal = Goal("Mäkinen", ("Laine",), "Blues", Score(0, 2), GameTime(11, 40), 1, Strength.POWER_PLAY,
                    frozenset({"go_ahead"}))
        s = " ".join(linearize_event(goal, None, "medium"))
        assert s == (
            "<length>medium</length> <type>goal</type> <scorer> Mäkinen </scorer> <assists> Laine </assists> "
            "<team> Blues </team> <score> 0 - 2 </score> <time> 11.40 </time> <period>1</period> "
            "<strength>power_play</strength> <flag>go_ahead</flag>"
        )

    def test_goal_without_assists_omits_tag(self):
        goal = Goal("A", (), "Blues", Score(0, 1), GameTime(1, 0), 1)
        assert "<assists>" not in linearize_event(goal, None, "short")

    def test_overtime_resolution_tag(self):
        er = EndResult("A", "B", Score(3, 2), (Score(1, 0), Score(1, 1), Score(0, 1), Score(1, 0)), Resolution.OVERTIME)
        toks = linearize_event(er, None, "short")
        assert toks[-1] == "<resolution>overtime</resolution>"

    def test_penalty_and_save(self):
        pen = linearize_event(Penalty("Koski", "Ässät", GameTime(30, 0), 10), None, "short")
        assert pen[1] == "<type>penalty</type>" and "10" in pen and "<period>2</period>" in pen
        save = linearize_event(Save("Aho", "Blues", 35), None, "short")
        assert save[1] == "<type>save</type>" and "35" in save

    def test_well_nested(self, small_corpus):
        for ex in small_corpus.examples["train"][:500]:
            check_token_sequence(linearize_event(ex.event, ex.context, ex.length_bucket))

    def test_check_rejects_bad_nesting(self):
        with pytest.raises(ValueError):
            check_token_sequence(["<a>", "x", "</b>"])
        with pytest.raises(ValueError):
            check_token_sequence(["<a>", "x"])
        with pytest.raises(ValueError):
            check_token_sequence(["<a>", "", "</a>"])

    def test_injective(self, small_corpus):
        seen = {}
        for g in small_corpus.games:
            for ev in g.events:
                key = tuple(linearize_event(ev, g.context, "short"))
                assert seen.setdefault(key, ev) == ev

    def test_copyable_tokens_in_source(self, small_corpus):
        """Names and numbers in references occur verbatim in the linearized input."""
        for ex in small_corpus.examples["train"]:
            src = set(linearize_event(ex.event, ex.context, ex.length_bucket))
            for name in names_in_event(ex.event):
                for part in name.split():
                    assert part in src
            for tok in tokenize_target(ex.text):
                if any(c.isdigit() for c in tok):
                    assert tok in src, (tok, ex.text)


class TestTokenize:
    def test_sample_output(self):
        toks = tokenize_target("Blues vei voiton Ässistä maalein 4–0 (3–0, 0–0, 1–0).")
        assert " ".join(toks) == "Blues vei voiton Ässistä maalein 4 - 0 ( 3 - 0 , 0 - 0 , 1 - 0 ) ."

    def test_single_word(self):
        assert tokenize_target("abc") == ["abc"]

    @pytest.mark.parametrize("text,tokens", [
        ("1.2.2018", ["1.2.2018"]),
        ("ajassa 39.54.", ["ajassa", "39.54", "."]),
        ("Ässät:stä", ["Ässät", ":stä"]),
        ("Jean-Pierre teki 2-1.", ["Jean-Pierre", "teki", "2", "-", "1", "."]),
    ])
    def test_rule_table(self, text, tokens):
        assert tokenize_target(text) == tokens

    def test_no_empty_tokens(self):
        assert all(t.strip() for t in tokenize_target("  a ,  b . ( c ) "))


class TestDetokenize:
    def test_score(self):
        assert detokenize(["4", "-", "0"]) == "4-0"

    def test_punctuation(self):
        assert detokenize(["Hei", ",", "maailma", "."]) == "Hei, maailma."

    def test_parentheses(self):
        assert detokenize(["maalein", "4", "-", "0", "(", "3", "-", "0", ")", "."]) == "maalein 4-0 (3-0)."

    def test_round_trip_corpus(self, small_corpus):
        for exs in small_corpus.examples.values():
            for ex in exs:
                assert detokenize(tokenize_target(ex.text)) == ex.text


class TestBuckets:
    def test_nine_counts(self):
        b = assign_length_buckets([3, 4, 5, 6, 7, 8, 9, 10, 11])
        assert (b.t1, b.t2) == (5, 8)
        assert [b.bucket(x) for x in (5, 6, 9)] == [LengthBucket.SHORT, LengthBucket.MEDIUM, LengthBucket.LONG]
        assert not b.degenerate

    def test_all_equal_is_degenerate(self):
        b = assign_length_buckets([7] * 12)
        assert b.degenerate
        assert b.bucket(7) is LengthBucket.SHORT

    def test_too_few(self):
        b = assign_length_buckets([4, 5])
        assert b.degenerate and b.bucket(4) is LengthBucket.MEDIUM and b.bucket(5) is LengthBucket.MEDIUM

    def test_one_to_hundred(self):
        b = assign_length_buckets(range(1, 101))
        sizes = [sum(b.bucket(x) is k for x in range(1, 101)) for k in LengthBucket]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(sizes) == [33, 33, 34]

    def test_accepts_token_sequences(self):
        assert assign_length_buckets([["a"], ["a", "b"], ["a", "b", "c"]]) == LengthBuckets(1, 2)

    def test_dict_round_trip(self):
        b = LengthBuckets(9, 14)
        assert LengthBuckets.from_dict(b.to_dict()) == b


@given(st.lists(st.integers(1, 60), min_size=3, max_size=300, unique=True))
def test_distinct_counts_split_evenly(counts):
    b = assign_length_buckets(counts)
    sizes = [sum(b.bucket(x) is k for x in counts) for k in LengthBucket]
    assert max(sizes) - min(sizes) <= 1
    assert not b.degenerate


@given(st.lists(st.integers(1, 40), min_size=3, max_size=300))
def test_bucket_monotone(counts):
    b = assign_length_buckets(counts)
    order = list(LengthBucket)
    ranks = [order.index(b.bucket(x)) for x in sorted(counts)]
    assert ranks == sorted(ranks)


def test_is_tag():
    assert is_tag("<score>") and is_tag("</score>") and is_tag("<type>goal</type>")
    assert not is_tag("Blues") and not is_tag("<")


def test_goal_flags_render_in_fixed_order():
    game = derive_features(make_game([("h", "10.00")]))
    toks = linearize_event(game.goals[0], game.context, "short")
    flags = [t for t in toks if t.startswith("<flag>")]
    assert flags == ["<flag>opening</flag>", "<flag>go_ahead</flag>", "<flag>deciding</flag>", "<flag>final</flag>"]
    assert HOME in toks and GUEST not in toks
