import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GUEST, HOME, make_game
from hockeygen.game_model import (
    AlignedExample,
    EndResult,
    GameRecord,
    GameTime,
    GameValidationError,
    Goal,
    LengthBucket,
    Penalty,
    Resolution,
    Save,
    Score,
    Strength,
    derive_features,
    dump_jsonl,
    example_from_dict,
    example_to_dict,
    game_from_dict,
    game_to_dict,
    load_jsonl,
    sort_events,
    validate_game,
)


def flags(game):
    return [set(g.derived) for g in derive_features(game).goals]


class TestValueTypes:
    def test_score_rejects_negative(self):
        with pytest.raises(ValueError):
            Score(-1, 0)

    def test_game_time_render_and_parse(self):
        assert str(GameTime(39, 4)) == "39.04"
        assert GameTime.parse("05.30") == GameTime(5, 30)
        with pytest.raises(ValueError):
            GameTime(3, 60)

    @pytest.mark.parametrize("text,period", [("00.01", 1), ("20.00", 1), ("20.01", 2), ("40.00", 2), ("60.00", 3), ("63.10", 4)])
    def test_period_boundaries_closed_above(self, text, period):
        assert GameTime.parse(text).period == period

    def test_aligned_example_needs_text(self):
        ctx = make_game([("h", "01.00")]).context
        with pytest.raises(ValueError):
            AlignedExample(Save("X", HOME, 20), ctx, "  ", LengthBucket.SHORT)


class TestDeriveFeatures:
    def test_comeback_two_one(self):
        assert flags(make_game([("h", "05.00"), ("g", "25.00"), ("h", "45.00")])) == [
            {"opening", "go_ahead"},
            {"tying"},
            {"go_ahead", "deciding", "final"},
        ]

    def test_single_goal_carries_four_flags(self):
        assert flags(make_game([("h", "10.00")])) == [{"opening", "go_ahead", "deciding", "final"}]

    def test_shutout_guest_first_goal_decides(self):
        f = flags(make_game([("g", "02.00"), ("g", "10.00"), ("g", "15.00"), ("g", "50.00")]))
        assert "deciding" in f[0]
        assert sum("deciding" in x for x in f) == 1
        assert "final" in f[3]

    def test_deciding_is_later_goal_when_loser_scores(self):
        # 1-0, 2-0, 2-1, 3-1: the loser ends with 1, so the winner's 2nd goal decides
        f = flags(make_game([("h", "01.00"), ("h", "02.00"), ("g", "03.00"), ("h", "04.00")]))
        assert [("deciding" in x) for x in f] == [False, True, False, False]

    def test_shootout_has_no_deciding_goal(self):
        game = make_game(
            [("h", "05.00"), ("g", "30.00")],
            periods=(Score(1, 0), Score(0, 1), Score(0, 0), Score(1, 0)),
            resolution=Resolution.SHOOTOUT,
            final=Score(2, 1),
        )
        assert validate_game(game) == []
        assert not any("deciding" in x for x in flags(game))

    def test_idempotent(self):
        game = derive_features(make_game([("h", "05.00"), ("g", "25.00"), ("h", "45.00")]))
        assert derive_features(game) == game

    def test_rejects_invalid_game(self):
        with pytest.raises(GameValidationError):
            derive_features(make_game([("h", "05.00")], final=Score(3, 0)))


class TestValidateGame:
    def test_consistent_game(self):
        assert validate_game(make_game([("h", "05.00"), ("g", "25.00"), ("h", "45.00")])) == []

    def test_score_jump(self):
        er = EndResult(HOME, GUEST, Score(3, 0), (Score(1, 0), Score(2, 0), Score(0, 0)))
        g1 = Goal("A", (), HOME, Score(1, 0), GameTime(5, 0), 1)
        g2 = Goal("B", (), HOME, Score(3, 0), GameTime(25, 0), 2)
        v = validate_game(GameRecord("x", dt.date(2018, 1, 1), (er, g1, g2)))
        assert v == ["score increment ≠ 1 at event 2"]

    def test_two_end_results(self):
        game = make_game([("h", "05.00")])
        doubled = GameRecord(game.id, game.date, (game.events[0],) + game.events)
        assert "multiple end results" in validate_game(doubled)

    def test_period_sum_mismatch(self):
        game = make_game([("h", "05.00")], periods=(Score(0, 0), Score(1, 0), Score(0, 0)), final=Score(1, 0))
        assert validate_game(game)  # goal in period 1 booked to period 2

    def test_tied_final_score(self):
        assert "final score is tied" in validate_game(make_game([("h", "05.00"), ("g", "25.00")]))

    def test_time_order(self):
        game = make_game([("h", "05.00"), ("h", "25.00")])
        er, g1, g2 = game.events
        swapped = GameRecord(game.id, game.date, (er, g2, g1))
        assert validate_game(game) == []
        assert validate_game(swapped)


goal_lists = st.lists(
    st.tuples(st.sampled_from("hg"), st.integers(1, 3599)), min_size=0, max_size=9, unique_by=lambda x: x[1]
).filter(lambda xs: sum(s == "h" for s, _ in xs) != sum(s == "g" for s, _ in xs)).map(
    lambda xs: [(s, str(GameTime.from_seconds(t))) for s, t in sorted(xs, key=lambda x: x[1])]
)


@given(goal_lists)
def test_flag_structure(goals):
    game = make_game(goals)
    assert validate_game(game) == []
    f = flags(game)
    assert sum("final" in x for x in f) == 1
    assert "final" in f[-1] and "opening" in f[0]
    assert sum("deciding" in x for x in f) == 1
    for x in f:
        if "opening" in x:
            assert "go_ahead" in x


@given(goal_lists)
def test_replay_reconstructs_final_score(goals):
    game = derive_features(make_game(goals))
    last = game.goals[-1].resulting_score
    assert last == game.end_result.final_score


class TestSerialization:
    def test_game_round_trip(self, tmp_path):
        game = derive_features(
            make_game(
                [("h", "05.00"), ("g", "25.00"), ("h", "41.30")],
                extra=[Penalty("C", GUEST, GameTime(12, 0), 2), Save("D", HOME, 31)],
            )
        )
        d = game_to_dict(game)
        assert d["v"] == 1
        assert d["events"][0]["type"] == "end_result"
        dump_jsonl([d], tmp_path / "g.jsonl")
        assert game_from_dict(load_jsonl(tmp_path / "g.jsonl")[0]) == game

    def test_enum_and_time_encoding(self):
        game = make_game([("h", "05.07")])
        goal = game_to_dict(game)["events"][1]
        assert goal["time"] == "05.07"
        assert goal["strength"] == "even"

    def test_rejects_unknown_version(self):
        d = game_to_dict(make_game([]))
        d["v"] = 2
        with pytest.raises(ValueError):
            game_from_dict(d)

    def test_example_round_trip(self):
        game = make_game([("h", "05.00")])
        ex = AlignedExample(game.events[1], game.context, "A teki maalin.", LengthBucket.SHORT, game.id)
        assert example_from_dict(example_to_dict(ex)) == ex


def test_sort_events_puts_result_first_and_untimed_last():
    game = make_game([("h", "05.00")])
    er, goal = game.events
    save = Save("G", HOME, 20)
    pen = Penalty("P", GUEST, GameTime(1, 0), 2)
    assert sort_events([save, goal, pen, er]) == (er, pen, goal, save)
