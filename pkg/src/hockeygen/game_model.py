"""Typed games and events, validation and derived goal features."""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Union

SCHEMA_VERSION = 1
MAX_GAME_SECONDS = 80 * 60
PERIOD_SECONDS = 20 * 60
PENALTY_MINUTES = frozenset({2, 4, 5, 10, 20, 25})
GOAL_FLAGS = ("opening", "tying", "go_ahead", "deciding", "final")


class GameValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class Resolution(str, Enum):
    REGULATION = "regulation"
    OVERTIME = "overtime"
    SHOOTOUT = "shootout"


class Strength(str, Enum):
    EVEN = "even"
    POWER_PLAY = "power_play"
    SHORT_HANDED = "short_handed"
    PENALTY_SHOT = "penalty_shot"
    EMPTY_NET = "empty_net"


class LengthBucket(str, Enum):
    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"


@dataclass(frozen=True)
class Score:
    home: int
    guest: int

    def __post_init__(self):
        if self.home < 0 or self.guest < 0:
            raise ValueError(f"negative score {self.home}-{self.guest}")

    def __str__(self) -> str:
        return f"{self.home}-{self.guest}"

    def __add__(self, other: "Score") -> "Score":
        return Score(self.home + other.home, self.guest + other.guest)

    @classmethod
    def parse(cls, text: str) -> "Score":
        m = re.fullmatch(r"\s*(\d+)\s*[-–]\s*(\d+)\s*", text)
        if not m:
            raise ValueError(f"bad score {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True, order=True)
class GameTime:
    minutes: int
    seconds: int

    def __post_init__(self):
        if self.minutes < 0 or not 0 <= self.seconds <= 59:
            raise ValueError(f"bad game time {self.minutes}.{self.seconds}")

    @property
    def total_seconds(self) -> int:
        return self.minutes * 60 + self.seconds

    @property
    def period(self) -> int:
        # closed upper bound: 20.00 is still period 1, 40.00 period 2
        return max(1, -(-self.total_seconds // PERIOD_SECONDS))

    def __str__(self) -> str:
        return f"{self.minutes:02d}.{self.seconds:02d}"

    @classmethod
    def parse(cls, text: str) -> "GameTime":
        m = re.fullmatch(r"(\d{1,2})\.(\d{2})", text.strip())
        if not m:
            raise ValueError(f"bad game time {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_seconds(cls, total: int) -> "GameTime":
        return cls(total // 60, total % 60)


@dataclass(frozen=True)
class EndResult:
    home_team: str
    guest_team: str
    final_score: Score
    period_scores: tuple[Score, ...]
    resolution: Resolution = Resolution.REGULATION

    type_name = "end_result"

    @property
    def winner(self) -> str | None:
        s = self.final_score
        if s.home == s.guest:
            return None
        return self.home_team if s.home > s.guest else self.guest_team


@dataclass(frozen=True)
class Goal:
    scorer: str
    assists: tuple[str, ...]
    team: str
    resulting_score: Score
    time: GameTime
    period: int
    strength: Strength = Strength.EVEN
    derived: frozenset[str] = field(default_factory=frozenset)

    type_name = "goal"


@dataclass(frozen=True)
class Penalty:
    player: str
    team: str
    time: GameTime
    penalty_minutes: int

    type_name = "penalty"


@dataclass(frozen=True)
class Save:
    goalie: str
    team: str
    count: int

    type_name = "save"


Event = Union[EndResult, Goal, Penalty, Save]
EVENT_TYPES = ("end_result", "goal", "penalty", "save")


@dataclass(frozen=True)
class GameContext:
    home_team: str
    guest_team: str
    final_score: Score


@dataclass(frozen=True)
class GameRecord:
    id: str
    date: dt.date
    events: tuple[Event, ...]

    @property
    def end_result(self) -> EndResult:
        for ev in self.events:
            if isinstance(ev, EndResult):
                return ev
        raise GameValidationError(["missing end result"])

    @property
    def context(self) -> GameContext:
        er = self.end_result
        return GameContext(er.home_team, er.guest_team, er.final_score)

    @property
    def goals(self) -> list[Goal]:
        return [ev for ev in self.events if isinstance(ev, Goal)]


@dataclass(frozen=True)
class AlignedExample:
    """One event with its reference span, the unit the generator trains on."""

    event: Event
    context: GameContext
    text: str
    length_bucket: LengthBucket
    game_id: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("aligned example with empty text")


def event_time(ev: Event) -> GameTime | None:
    return getattr(ev, "time", None)


def validate_game(game: GameRecord) -> list[str]:
    """Return human-readable violations; an empty list means the game is valid."""
    out: list[str] = []
    results = [i for i, ev in enumerate(game.events) if isinstance(ev, EndResult)]
    if not results:
        return ["missing end result"]
    if len(results) > 1:
        out.append("multiple end results")
    if results[0] != 0:
        out.append(f"end result not first at event {results[0]}")
    er: EndResult = game.events[results[0]]
    teams = {er.home_team, er.guest_team}
    if er.home_team == er.guest_team:
        out.append("home and guest team identical")

    expected_periods = 3 if er.resolution is Resolution.REGULATION else 4
    if len(er.period_scores) != expected_periods:
        out.append(
            f"{len(er.period_scores)} period scores for {er.resolution.value} game, "
            f"expected {expected_periods}"
        )
    summed = Score(0, 0)
    for p in er.period_scores:
        summed = summed + p
    if summed != er.final_score:
        out.append(f"period scores sum to {summed}, final score is {er.final_score}")
    if er.final_score.home == er.final_score.guest:
        out.append("final score is tied")

    prev = Score(0, 0)
    last_time: GameTime | None = None
    per_period = [Score(0, 0) for _ in range(4)]
    for i, ev in enumerate(game.events):
        if isinstance(ev, EndResult):
            continue
        if ev.team not in teams:
            out.append(f"unknown team {ev.team!r} at event {i}")
        t = event_time(ev)
        if t is not None:
            if t.total_seconds > MAX_GAME_SECONDS:
                out.append(f"time {t} beyond game bound at event {i}")
            if last_time is not None and t < last_time:
                out.append(f"time decreases at event {i}")
            last_time = t
        if isinstance(ev, Goal):
            s = ev.resulting_score
            dh, dg = s.home - prev.home, s.guest - prev.guest
            if sorted((dh, dg)) != [0, 1]:
                out.append(f"score increment ≠ 1 at event {i}")
            if min(dh, dg) == 0 and max(dh, dg) > 0:
                side = er.home_team if dh > 0 else er.guest_team
                if ev.team != side:
                    out.append(f"scoring team does not match score change at event {i}")
            if min(dh, dg) >= 0 and 1 <= ev.period <= 4:
                per_period[ev.period - 1] += Score(dh, dg)
            prev = s
            if len(ev.assists) > 2:
                out.append(f"more than two assists at event {i}")
            if ev.period != t.period:
                out.append(f"period {ev.period} inconsistent with time {t} at event {i}")
            if ev.period > 3 and er.resolution is Resolution.REGULATION:
                out.append(f"overtime goal in regulation game at event {i}")
            unknown = set(ev.derived) - set(GOAL_FLAGS)
            if unknown:
                out.append(f"unknown derived flags {sorted(unknown)} at event {i}")
        elif isinstance(ev, Penalty):
            if ev.penalty_minutes not in PENALTY_MINUTES:
                out.append(f"penalty minutes {ev.penalty_minutes} not allowed at event {i}")
        elif isinstance(ev, Save):
            if ev.count < 0:
                out.append(f"negative save count at event {i}")

    final = er.final_score
    if er.resolution is Resolution.SHOOTOUT:
        if prev.home != prev.guest:
            out.append(f"shootout game not tied after goals ({prev})")
        elif sorted((final.home - prev.home, final.guest - prev.guest)) != [0, 1]:
            out.append(f"shootout final {final} is not last goal score {prev} plus one")
        else:
            # the shootout goal is booked to the last period entry
            per_period[3] += Score(final.home - prev.home, final.guest - prev.guest)
    elif prev != final:
        out.append(f"goals reach {prev}, final score is {final}")
    if len(er.period_scores) == expected_periods and summed == final:
        for k, p in enumerate(er.period_scores):
            if per_period[k] != p:
                out.append(f"period {k + 1} score {p} does not match goals {per_period[k]}")
    if er.resolution is Resolution.OVERTIME and prev == final and final.home != final.guest:
        if not game.goals or game.goals[-1].period != 4:
            out.append("overtime game without an overtime winner")
    return out


def derive_features(game: GameRecord) -> GameRecord:
    """Populate the derived goal flags. Idempotent."""
    violations = validate_game(game)
    if violations:
        raise GameValidationError(violations)
    er = game.end_result
    final = er.final_score
    home_wins = final.home > final.guest
    loser_total = final.guest if home_wins else final.home
    goal_idx = [i for i, ev in enumerate(game.events) if isinstance(ev, Goal)]

    events = list(game.events)
    prev = Score(0, 0)
    for n, i in enumerate(goal_idx):
        g: Goal = events[i]
        s = g.resulting_score
        home_scored = s.home > prev.home
        mine_before, other_before = (prev.home, prev.guest) if home_scored else (prev.guest, prev.home)
        mine_after = mine_before + 1
        flags = set()
        if n == 0:
            flags.add("opening")
        if s.home == s.guest:
            flags.add("tying")
        if mine_before <= other_before and mine_after > other_before:
            flags.add("go_ahead")
        if (
            er.resolution is not Resolution.SHOOTOUT
            and home_scored == home_wins
            and mine_after == loser_total + 1
        ):
            flags.add("deciding")
        if n == len(goal_idx) - 1:
            flags.add("final")
        events[i] = replace(g, derived=frozenset(flags))
        prev = s
    return replace(game, events=tuple(events))


def sort_events(events: Iterable[Event]) -> tuple[Event, ...]:
    """EndResult first, timed events by time (stable), untimed events last."""
    evs = list(events)
    results = [e for e in evs if isinstance(e, EndResult)]
    timed = [e for e in evs if event_time(e) is not None]
    untimed = [e for e in evs if not isinstance(e, EndResult) and event_time(e) is None]
    timed.sort(key=lambda e: event_time(e).total_seconds)
    return tuple(results + timed + untimed)


# -- canonical JSONL ------------------------------------------------------


def _score_dict(s: Score) -> dict:
    return {"home": s.home, "guest": s.guest}


def event_to_dict(ev: Event) -> dict:
    if isinstance(ev, EndResult):
        return {
            "type": "end_result",
            "home_team": ev.home_team,
            "guest_team": ev.guest_team,
            "final_score": _score_dict(ev.final_score),
            "period_scores": [_score_dict(p) for p in ev.period_scores],
            "resolution": ev.resolution.value,
        }
    if isinstance(ev, Goal):
        return {
            "type": "goal",
            "scorer": ev.scorer,
            "assists": list(ev.assists),
            "team": ev.team,
            "resulting_score": _score_dict(ev.resulting_score),
            "time": str(ev.time),
            "period": ev.period,
            "strength": ev.strength.value,
            "derived": [f for f in GOAL_FLAGS if f in ev.derived],
        }
    if isinstance(ev, Penalty):
        return {
            "type": "penalty",
            "player": ev.player,
            "team": ev.team,
            "time": str(ev.time),
            "penalty_minutes": ev.penalty_minutes,
        }
    if isinstance(ev, Save):
        return {"type": "save", "goalie": ev.goalie, "team": ev.team, "count": ev.count}
    raise TypeError(f"not an event: {ev!r}")


def event_from_dict(d: dict) -> Event:
    kind = d["type"]
    if kind == "end_result":
        return EndResult(
            d["home_team"],
            d["guest_team"],
            Score(**d["final_score"]),
            tuple(Score(**p) for p in d["period_scores"]),
            Resolution(d["resolution"]),
        )
    if kind == "goal":
        return Goal(
            d["scorer"],
            tuple(d["assists"]),
            d["team"],
            Score(**d["resulting_score"]),
            GameTime.parse(d["time"]),
            int(d["period"]),
            Strength(d["strength"]),
            frozenset(d.get("derived", ())),
        )
    if kind == "penalty":
        return Penalty(d["player"], d["team"], GameTime.parse(d["time"]), int(d["penalty_minutes"]))
    if kind == "save":
        return Save(d["goalie"], d["team"], int(d["count"]))
    raise ValueError(f"unknown event type {kind!r}")


def context_to_dict(ctx: GameContext) -> dict:
    return {
        "home_team": ctx.home_team,
        "guest_team": ctx.guest_team,
        "final_score": _score_dict(ctx.final_score),
    }


def context_from_dict(d: dict) -> GameContext:
    return GameContext(d["home_team"], d["guest_team"], Score(**d["final_score"]))


def game_to_dict(game: GameRecord) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "id": game.id,
        "date": game.date.isoformat(),
        "events": [event_to_dict(e) for e in game.events],
    }


def game_from_dict(d: dict) -> GameRecord:
    if d.get("v") != SCHEMA_VERSION:
        raise ValueError(f"unsupported game schema version {d.get('v')!r}")
    return GameRecord(
        str(d["id"]),
        dt.date.fromisoformat(d["date"]),
        tuple(event_from_dict(e) for e in d["events"]),
    )


def example_to_dict(ex: AlignedExample) -> dict:
    return {
        "event": event_to_dict(ex.event),
        "context": context_to_dict(ex.context),
        "text": ex.text,
        "bucket": ex.length_bucket.value,
        "game_id": ex.game_id,
    }


def example_from_dict(d: dict) -> AlignedExample:
    return AlignedExample(
        event_from_dict(d["event"]),
        context_from_dict(d["context"]),
        d["text"],
        LengthBucket(d["bucket"]),
        d.get("game_id", ""),
    )


def dump_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def load_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
