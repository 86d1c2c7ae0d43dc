"""Event linearization, target tokenization and length buckets."""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

from .game_model import (
    GOAL_FLAGS,
    AlignedExample,
    EndResult,
    Event,
    GameContext,
    Goal,
    LengthBucket,
    Penalty,
    Resolution,
    Save,
    Score,
)

# Attribute order per event type. Every sequence starts with length and type.
ATTRIBUTE_ORDER = {
    "result": ("home", "guest", "score", "periods", "resolution"),
    "goal": ("scorer", "assists", "team", "score", "time", "period", "strength", "flag"),
    "penalty": ("player", "team", "time", "period", "minutes"),
    "save": ("goalie", "team", "saves"),
}
TYPE_TAG = {EndResult: "result", Goal: "goal", Penalty: "penalty", Save: "save"}

_TOKEN_RE = re.compile(
    r"""
    \d+(?:\.\d+)*                # numbers, clock times 39.54, dates 1.2.2018
  | (?<=\w):\w+                  # attached case suffix, Ässät:stä
  | [^\W\d_]\w*(?:-\w+)*         # words, hyphenated names
  | [^\w\s]                      # any other single symbol
    """,
    re.VERBOSE | re.UNICODE,
)
_DASHES = str.maketrans({"–": "-", "—": "-", "−": "-"})
_CATEGORICAL_RE = re.compile(r"<(\w+)>[^<>\s]+</\1>")
_OPEN_RE = re.compile(r"<(\w+)>")
_CLOSE_RE = re.compile(r"</(\w+)>")


def tokenize_target(text: str) -> list[str]:
    """Split text into tokens; score dashes and final punctuation become tokens."""
    return _TOKEN_RE.findall(text.translate(_DASHES))


def detokenize(tokens: Sequence[str]) -> str:
    """Inverse of :func:`tokenize_target` for normally spaced text."""
    s = " ".join(tokens)
    s = re.sub(r" ([,.:;!?)])", r"\1", s)
    s = re.sub(r"\( ", "(", s)
    s = re.sub(r"(?<=\d) - (?=\d)", "-", s)
    return s


def is_tag(token: str) -> bool:
    return bool(_CATEGORICAL_RE.fullmatch(token) or _OPEN_RE.fullmatch(token) or _CLOSE_RE.fullmatch(token))


def check_token_sequence(tokens: Sequence[str]) -> None:
    """Raise ValueError on empty tokens or badly nested value tags."""
    stack = []
    for tok in tokens:
        if not tok or tok.isspace():
            raise ValueError("empty token")
        if _CATEGORICAL_RE.fullmatch(tok):
            continue
        if m := _OPEN_RE.fullmatch(tok):
            stack.append(m.group(1))
        elif m := _CLOSE_RE.fullmatch(tok):
            if not stack or stack.pop() != m.group(1):
                raise ValueError(f"unbalanced tag {tok}")
    if stack:
        raise ValueError(f"unclosed tags {stack}")


def _score_tokens(s: Score) -> list[str]:
    return [str(s.home), "-", str(s.guest)]


def _value(name: str, tokens: list[str]) -> list[str]:
    return [f"<{name}>", *tokens, f"</{name}>"]


def _cat(name: str, value) -> str:
    return f"<{name}>{value}</{name}>"


def _names(name: str) -> list[str]:
    return name.split()


def linearize_event(event: Event, context: GameContext | None, bucket: LengthBucket | str) -> list[str]:
    """Tagged token sequence for one event; names and numbers stay copyable."""
    bucket = LengthBucket(bucket)
    out = [_cat("length", bucket.value), _cat("type", TYPE_TAG[type(event)])]
    if isinstance(event, EndResult):
        out += _value("home", _names(event.home_team))
        out += _value("guest", _names(event.guest_team))
        out += _value("score", _score_tokens(event.final_score))
        periods = ["("]
        for k, p in enumerate(event.period_scores):
            if k:
                periods.append(",")
            periods += _score_tokens(p)
        periods.append(")")
        out += _value("periods", periods)
        if event.resolution is not Resolution.REGULATION:
            out.append(_cat("resolution", event.resolution.value))
    elif isinstance(event, Goal):
        out += _value("scorer", _names(event.scorer))
        if event.assists:
            assists = []
            for k, a in enumerate(event.assists):
                if k:
                    assists.append(",")
                assists += _names(a)
            out += _value("assists", assists)
        out += _value("team", _names(event.team))
        out += _value("score", _score_tokens(event.resulting_score))
        out += _value("time", [str(event.time)])
        out.append(_cat("period", event.period))
        out.append(_cat("strength", event.strength.value))
        out += [_cat("flag", f) for f in GOAL_FLAGS if f in event.derived]
    elif isinstance(event, Penalty):
        out += _value("player", _names(event.player))
        out += _value("team", _names(event.team))
        out += _value("time", [str(event.time)])
        out.append(_cat("period", event.time.period))
        out += _value("minutes", [str(event.penalty_minutes)])
    elif isinstance(event, Save):
        out += _value("goalie", _names(event.goalie))
        out += _value("team", _names(event.team))
        out += _value("saves", [str(event.count)])
    else:
        raise TypeError(f"not an event: {event!r}")
    return out


def with_bucket(source: Sequence[str], bucket: LengthBucket | str) -> list[str]:
    """Swap the length token of an already linearized source."""
    return [_cat("length", LengthBucket(bucket).value), *source[1:]]


@dataclass(frozen=True)
class LengthBuckets:
    t1: int
    t2: int
    degenerate: bool = False

    def bucket(self, n_tokens: int) -> LengthBucket:
        if n_tokens <= self.t1:
            return LengthBucket.SHORT
        if n_tokens <= self.t2:
            return LengthBucket.MEDIUM
        return LengthBucket.LONG

    def to_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, d: dict) -> "LengthBuckets":
        return cls(int(d["t1"]), int(d["t2"]), bool(d.get("degenerate", False)))


def assign_length_buckets(train_targets: Iterable[Sequence[str] | int]) -> LengthBuckets:
    """Tertile thresholds over target token counts of the training split.

    Group sizes are n//3 each with the remainder going to the upper groups.
    Values equal to a threshold fall in the lower bucket, so heavy ties make
    the groups uneven; that case is flagged as degenerate.
    """
    counts = sorted(c if isinstance(c, int) else len(c) for c in train_targets)
    n = len(counts)
    if n < 3:
        return LengthBuckets(-1, sys.maxsize, degenerate=True)
    base, rem = divmod(n, 3)
    sizes = [base, base + (rem == 2), base + (rem >= 1)]
    t1 = counts[sizes[0] - 1]
    t2 = counts[sizes[0] + sizes[1] - 1]
    realised = [
        sum(c <= t1 for c in counts),
        sum(t1 < c <= t2 for c in counts),
        sum(c > t2 for c in counts),
    ]
    return LengthBuckets(t1, t2, degenerate=max(realised) - min(realised) > 1)


def example_pair(ex: AlignedExample) -> tuple[list[str], list[str]]:
    """(source tokens, target tokens) for an aligned example."""
    return linearize_event(ex.event, ex.context, ex.length_bucket), tokenize_target(ex.text)


def write_parallel(examples: Iterable[AlignedExample], src_path, tgt_path) -> int:
    n = 0
    with open(src_path, "w", encoding="utf-8") as fs, open(tgt_path, "w", encoding="utf-8") as ft:
        for ex in examples:
            src, tgt = example_pair(ex)
            fs.write(" ".join(src) + "\n")
            ft.write(" ".join(tgt) + "\n")
            n += 1
    return n
