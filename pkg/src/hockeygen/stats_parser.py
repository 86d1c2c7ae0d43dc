"""Line-oriented game statistics files and game/article pairing.

File grammar, one record per line::

    GAME <id> <YYYY-MM-DD> <home_team> - <guest_team>
    RESULT <h>-<g> (<p1h>-<p1g>, <p2h>-<p2g>, <p3h>-<p3g>[, <p4h>-<p4g>]) [JA|VL]
    GOAL <MM.SS> <team> <scorer> [(<assist1>[, <assist2>])] <h>-<g> [YV|AV|RL|TM] [JA]
    PENALTY <MM.SS> <team> <player> <minutes>
    SAVES <team> <goalie> <count>

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import datetime as dt
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .game_model import (
    EndResult,
    GameRecord,
    GameTime,
    Goal,
    Penalty,
    Resolution,
    Save,
    Score,
    Strength,
    sort_events,
)

STRENGTH_MARKERS = {
    "yv": Strength.POWER_PLAY,
    "av": Strength.SHORT_HANDED,
    "rl": Strength.PENALTY_SHOT,
    "tm": Strength.EMPTY_NET,
}
RESOLUTION_MARKERS = {"ja": Resolution.OVERTIME, "vl": Resolution.SHOOTOUT}
_MARKER_OF_STRENGTH = {v: k.upper() for k, v in STRENGTH_MARKERS.items()}
_MARKER_OF_RESOLUTION = {v: k.upper() for k, v in RESOLUTION_MARKERS.items()}


class ParseError(ValueError):
    def __init__(self, line_no: int, expected: str, line: str = ""):
        self.line_no = line_no
        self.expected = expected
        self.line = line
        super().__init__(f"line {line_no}: expected {expected}" + (f": {line!r}" if line else ""))


class UnknownAbbreviation(ParseError):
    def __init__(self, line_no: int, marker: str, line: str = ""):
        super().__init__(line_no, f"known marker, got {marker!r}", line)
        self.marker = marker


@dataclass(frozen=True)
class StatsDocument:
    raw_text: str
    source_path: str = "<string>"

    @classmethod
    def from_path(cls, path) -> "StatsDocument":
        return cls(Path(path).read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True)
class ArticleDocument:
    raw_text: str
    date: dt.date
    id: str = ""
    mentioned_teams: frozenset[str] = frozenset()

    @classmethod
    def from_path(cls, path) -> "ArticleDocument":
        """First line holds the ISO date, the rest is the article body."""
        p = Path(path)
        head, _, body = p.read_text(encoding="utf-8").partition("\n")
        return cls(body, dt.date.fromisoformat(head.strip()), p.stem)


_GAME_RE = re.compile(r"GAME\s+(\S+)\s+(\d{4}-\d{2}-\d{2})\s+(.+?)\s+-\s+(.+?)\s*$")
_SCORE = r"(\d+)\s*-\s*(\d+)"
_RESULT_RE = re.compile(rf"RESULT\s+{_SCORE}\s*\((.*)\)\s*(\w+)?\s*$")
_GOAL_RE = re.compile(rf"GOAL\s+(\d{{1,2}}\.\d{{2}})\s+(.+?)\s+{_SCORE}((?:\s+[A-Za-z]+)*)\s*$")
_PENALTY_RE = re.compile(r"PENALTY\s+(\d{1,2}\.\d{2})\s+(.+?)\s+(\d+)\s*$")
_SAVES_RE = re.compile(r"SAVES\s+(.+?)\s+(\d+)\s*$")


def _split_team(rest: str, teams: tuple[str, str], line_no: int, line: str) -> tuple[str, str]:
    for team in sorted(teams, key=len, reverse=True):
        if rest.startswith(team + " "):
            return team, rest[len(team) + 1 :].strip()
    raise ParseError(line_no, f"team name from header {list(teams)}", line)


def _parse_time(text: str, line_no: int, line: str) -> GameTime:
    try:
        return GameTime.parse(text)
    except ValueError:
        raise ParseError(line_no, "game time MM.SS with seconds < 60", line) from None


def parse_stats_file(doc: StatsDocument) -> GameRecord:
    """Parse one statistics file. Derived goal flags are left empty."""
    header = None
    result = None
    result_marker = None
    events = []
    overtime_goal = False
    for line_no, raw in enumerate(doc.raw_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        keyword = line.split(None, 1)[0]
        if header is None and keyword != "GAME":
            raise ParseError(line_no, "GAME header as first record", line)
        if keyword == "GAME":
            m = _GAME_RE.match(line)
            if not m or header is not None:
                raise ParseError(line_no, "single 'GAME <id> <YYYY-MM-DD> <home> - <guest>'", line)
            try:
                date = dt.date.fromisoformat(m.group(2))
            except ValueError:
                raise ParseError(line_no, "valid calendar date", line) from None
            header = (m.group(1), date, m.group(3), m.group(4))
        elif keyword == "RESULT":
            m = _RESULT_RE.match(line)
            if not m:
                raise ParseError(line_no, "'RESULT <h>-<g> (<p1>, <p2>, <p3>[, <p4>]) [JA|VL]'", line)
            periods = [p.strip() for p in m.group(3).split(",")]
            if len(periods) not in (3, 4):
                raise ParseError(line_no, "3 or 4 period scores", line)
            try:
                period_scores = tuple(Score.parse(p) for p in periods)
            except ValueError:
                raise ParseError(line_no, "period scores '<h>-<g>'", line) from None
            if m.group(4):
                marker = m.group(4).lower()
                if marker not in RESOLUTION_MARKERS:
                    raise UnknownAbbreviation(line_no, m.group(4), line)
                result_marker = RESOLUTION_MARKERS[marker]
            result = (Score(int(m.group(1)), int(m.group(2))), period_scores)
        elif keyword == "GOAL":
            m = _GOAL_RE.match(line)
            if not m:
                raise ParseError(line_no, "'GOAL <MM.SS> <team> <scorer> [(<assists>)] <h>-<g> [marker]'", line)
            time = _parse_time(m.group(1), line_no, line)
            team, who = _split_team(m.group(2), header[2:], line_no, line)
            assists: tuple[str, ...] = ()
            am = re.fullmatch(r"(.+?)\s*\((.*)\)", who)
            if am:
                who = am.group(1).strip()
                assists = tuple(a.strip() for a in am.group(2).split(",") if a.strip())
                if len(assists) > 2:
                    raise ParseError(line_no, "at most two assists", line)
            if not who:
                raise ParseError(line_no, "scorer name", line)
            strength = Strength.EVEN
            for marker in m.group(5).split():
                low = marker.lower()
                if low in STRENGTH_MARKERS:
                    strength = STRENGTH_MARKERS[low]
                elif low == "ja":
                    overtime_goal = True
                else:
                    raise UnknownAbbreviation(line_no, marker, line)
            if time.period > 3:
                overtime_goal = True
            events.append(
                Goal(who, assists, team, Score(int(m.group(3)), int(m.group(4))), time, time.period, strength)
            )
        elif keyword == "PENALTY":
            m = _PENALTY_RE.match(line)
            if not m:
                raise ParseError(line_no, "'PENALTY <MM.SS> <team> <player> <minutes>'", line)
            time = _parse_time(m.group(1), line_no, line)
            team, who = _split_team(m.group(2), header[2:], line_no, line)
            events.append(Penalty(who, team, time, int(m.group(3))))
        elif keyword == "SAVES":
            m = _SAVES_RE.match(line)
            if not m:
                raise ParseError(line_no, "'SAVES <team> <goalie> <count>'", line)
            team, who = _split_team(m.group(1), header[2:], line_no, line)
            events.append(Save(who, team, int(m.group(2))))
        else:
            raise ParseError(line_no, "one of GAME, RESULT, GOAL, PENALTY, SAVES", line)

    if header is None:
        raise ParseError(0, "GAME header")
    if result is None:
        raise ParseError(0, "RESULT record")
    if result_marker is not None:
        resolution = result_marker
    else:
        resolution = Resolution.OVERTIME if overtime_goal else Resolution.REGULATION
    game_id, date, home, guest = header
    er = EndResult(home, guest, result[0], result[1], resolution)
    return GameRecord(game_id, date, sort_events([er, *events]))


def serialize_game(game: GameRecord) -> str:
    """Render a game in the statistics file grammar; inverse of ``parse_stats_file``."""
    er = game.end_result
    lines = [f"GAME {game.id} {game.date.isoformat()} {er.home_team} - {er.guest_team}"]
    periods = ", ".join(str(p) for p in er.period_scores)
    result = f"RESULT {er.final_score} ({periods})"
    if er.resolution in _MARKER_OF_RESOLUTION:
        result += " " + _MARKER_OF_RESOLUTION[er.resolution]
    lines.append(result)
    for ev in game.events:
        if isinstance(ev, Goal):
            s = f"GOAL {ev.time} {ev.team} {ev.scorer}"
            if ev.assists:
                s += f" ({', '.join(ev.assists)})"
            s += f" {ev.resulting_score}"
            if ev.strength in _MARKER_OF_STRENGTH:
                s += " " + _MARKER_OF_STRENGTH[ev.strength]
            lines.append(s)
        elif isinstance(ev, Penalty):
            lines.append(f"PENALTY {ev.time} {ev.team} {ev.player} {ev.penalty_minutes}")
        elif isinstance(ev, Save):
            lines.append(f"SAVES {ev.team} {ev.goalie} {ev.count}")
    return "\n".join(lines) + "\n"


# -- pairing --------------------------------------------------------------

MIN_STEM = 4
_WORD_RE = re.compile(r"\w+", re.UNICODE)


def _stem_len(word: str) -> int:
    # inflected forms keep at least MIN_STEM leading characters of the name
    return min(len(word), max(MIN_STEM, len(word) - 3))


def count_mentions(text: str, team: str) -> int:
    """Case-insensitive, suffix-tolerant occurrences of a (possibly multiword) team name."""
    tokens = [t.casefold() for t in _WORD_RE.findall(text)]
    parts = [p.casefold() for p in _WORD_RE.findall(team)]
    if not parts:
        return 0
    stems = [p[: _stem_len(p)] for p in parts]
    n = 0
    for i in range(len(tokens) - len(parts) + 1):
        if all(tokens[i + k].startswith(stems[k]) for k in range(len(parts))):
            n += 1
    return n


def mentioned_teams(article: ArticleDocument, teams) -> frozenset[str]:
    return frozenset(t for t in teams if count_mentions(article.raw_text, t) > 0)


@dataclass
class PairingResult:
    pairs: list[tuple[str, str]] = field(default_factory=list)
    unpaired_games: list[str] = field(default_factory=list)
    unpaired_articles: list[str] = field(default_factory=list)


def pairing_predicate(game: GameRecord, article: ArticleDocument) -> bool:
    """Date within one day after the game and both team names mentioned."""
    if (article.date - game.date).days not in (0, 1):
        return False
    er = game.end_result
    return all(count_mentions(article.raw_text, t) > 0 for t in (er.home_team, er.guest_team))


def pair_articles(games: list[GameRecord], articles: list[ArticleDocument]) -> PairingResult:
    """Pair each article with at most one game by date and team mentions.

    The game whose two teams are mentioned most often wins; ties leave the
    article unpaired. A game may receive several articles.
    """
    by_date: dict[dt.date, list[GameRecord]] = {}
    for g in games:
        by_date.setdefault(g.date, []).append(g)
    out = PairingResult()
    paired_games: set[str] = set()
    for k, art in enumerate(articles):
        art_id = art.id or str(k)
        scores: Counter = Counter()
        for delta in (0, 1):
            for g in by_date.get(art.date - dt.timedelta(days=delta), []):
                er = g.end_result
                counts = [count_mentions(art.raw_text, t) for t in (er.home_team, er.guest_team)]
                if min(counts) > 0:
                    scores[g.id] = sum(counts)
        ranked = scores.most_common(2)
        if not ranked or (len(ranked) == 2 and ranked[0][1] == ranked[1][1]):
            out.unpaired_articles.append(art_id)
            continue
        out.pairs.append((ranked[0][0], art_id))
        paired_games.add(ranked[0][0])
    out.unpaired_games = [g.id for g in games if g.id not in paired_games]
    return out
