"""Seeded synthetic games, template references and gold selections.

Templates come in three surface variants per event (short, medium, long),
picked by a hash of the event. Every short variant is 8-9 tokens, medium
10-14 and long 15 or more, and the variant weights (45/35/20) put the corpus
tertile thresholds into the gaps between those ranges, so the length bucket
identifies the variant.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .game_model import (
    AlignedExample,
    EndResult,
    Event,
    GameContext,
    GameRecord,
    GameTime,
    Goal,
    LengthBucket,
    Penalty,
    Resolution,
    Save,
    Score,
    Strength,
    derive_features,
    event_to_dict,
    sort_events,
)
from .linearization import LengthBuckets, assign_length_buckets, tokenize_target

TEAMS = (
    "Ässät", "Blues", "HIFK", "HPK", "Ilves", "JYP", "Jokerit", "KalPa",
    "Kärpät", "Lukko", "Pelicans", "SaiPa", "Sport", "Tappara", "TPS", "KooKoo",
)
_STEMS = (
    "Aal", "Ahl", "Hei", "Hyv", "Jaa", "Jus", "Kai", "Kan", "Kar", "Kes", "Kiv", "Kok",
    "Kor", "Kos", "Kuu", "Laa", "Lah", "Lai", "Lep", "Lin", "Maa", "Mak", "Mer", "Mus",
    "Nie", "Nur", "Ojo", "Paa", "Pel", "Pih", "Pit", "Puu", "Raa", "Rin", "Ruo", "Saa",
    "Sal", "Sep", "Sil", "Suo", "Taa", "Tik", "Toi", "Tuo", "Vaa", "Val", "Ves", "Vir",
)
_ENDINGS = (
    "tonen", "kinen", "nen", "la", "lä", "vaara", "mäki", "järvi", "salo", "koski",
    "lahti", "niemi", "aho", "ranta", "lampi", "saari", "oja", "kallio", "korpi", "vuori",
)
_SYLLABLES = (
    "ka", "ko", "ku", "la", "lo", "mi", "mu", "na", "no", "pa", "pe", "ri", "ro", "sa",
    "se", "ta", "te", "va", "vi", "hä", "jo", "ju", "ry", "tö", "sy", "le", "ni", "ha",
)
_RARE_ENDINGS = ("nen", "la", "lä", "inen", "o", "ainen")

STRENGTH_WORD = {
    Strength.EVEN: "tasakentin",
    Strength.POWER_PLAY: "ylivoimalla",
    Strength.SHORT_HANDED: "alivoimalla",
    Strength.PENALTY_SHOT: "rangaistuslaukauksesta",
    Strength.EMPTY_NET: "tyhjiin",
}
# (flag, two-token headline); the first matching flag wins
HEADLINES = (
    ("deciding", "teki voittomaalin"),
    ("tying", "tasoitti pelin"),
    ("opening", "avasi maalinteon"),
    ("go_ahead", "nosti johtoon"),
    ("final", "viimeisteli lukemat"),
    (None, "teki maalin"),
)
ORDINAL = {1: "ensimmäisessä", 2: "toisessa", 3: "kolmannessa", 4: "neljännessä"}
RESOLUTION_WORD = {
    Resolution.REGULATION: "maalein",
    Resolution.OVERTIME: "jatkoajalla",
    Resolution.SHOOTOUT: "voittolaukauskilpailussa",
}
RESOLUTION_PHRASE = {
    Resolution.REGULATION: "varsinaisella peliajalla",
    Resolution.OVERTIME: "jatkoajan jälkeen",
    Resolution.SHOOTOUT: "voittolaukauskilpailun jälkeen",
}
VARIANT_WEIGHTS = (0.45, 0.35, 0.20)
PENALTY_MINUTE_PROBS = {2: 0.80, 4: 0.06, 5: 0.03, 10: 0.08, 20: 0.02, 25: 0.01}
STRENGTH_PROBS = {
    Strength.EVEN: 0.70,
    Strength.POWER_PLAY: 0.20,
    Strength.SHORT_HANDED: 0.04,
    Strength.PENALTY_SHOT: 0.01,
    Strength.EMPTY_NET: 0.05,
}


def default_player_pool() -> tuple[str, ...]:
    return tuple(s + e for s in _STEMS for e in _ENDINGS)


def default_heldout_names(n: int = 60) -> tuple[str, ...]:
    # two-stem names never produced by the pool or the rare-name generator
    out = []
    for i in range(n):
        a, b = _STEMS[i % len(_STEMS)], _STEMS[(7 * i + 3) % len(_STEMS)].lower()
        out.append(f"{a}{b}{_ENDINGS[i % len(_ENDINGS)]}")
    return tuple(dict.fromkeys(out))


@dataclass(frozen=True)
class SynthConfig:
    n_games: int = 2000
    seed: int = 0
    teams: tuple[str, ...] = TEAMS
    player_pool: tuple[str, ...] = field(default_factory=default_player_pool)
    heldout_names: tuple[str, ...] = field(default_factory=default_heldout_names)
    heldout_rate: float = 0.15  # per player slot, validation/test games only
    rare_name_rate: float = 0.10  # per player slot, freshly composed names
    mean_goals: float = 5.5
    penalty_rate: float = 8.0
    overtime_probability: float = 0.6  # tied after regulation: decided in overtime
    start_date: dt.date = dt.date(2017, 9, 1)

    def __post_init__(self):
        if not self.teams or len(self.teams) < 2 or not self.player_pool or not self.heldout_names:
            raise ValueError("name pools must be nonempty")
        for p in (self.heldout_rate, self.rare_name_rate, self.overtime_probability):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")
        if set(self.heldout_names) & set(self.player_pool):
            raise ValueError("held-out names overlap the player pool")


def game_splits(config: SynthConfig) -> dict[int, str]:
    """Game index -> train/validation/test via a seeded shuffle (80/10/10)."""
    order = np.random.default_rng([config.seed, 7]).permutation(config.n_games)
    n_train = int(round(config.n_games * 0.8))
    n_val = int(round(config.n_games * 0.1))
    out = {}
    for rank, idx in enumerate(order.tolist()):
        out[idx] = "train" if rank < n_train else "validation" if rank < n_train + n_val else "test"
    return out


class _Names:
    def __init__(self, config: SynthConfig, rng: np.random.Generator, allow_heldout: bool):
        self.config = config
        self.rng = rng
        self.allow_heldout = allow_heldout
        pool = config.player_pool
        weights = 1.0 / np.arange(1, len(pool) + 1) ** 0.6
        self.pool_p = weights / weights.sum()
        self.banned = set(config.heldout_names)

    def rare(self) -> str:
        while True:
            k = int(self.rng.integers(2, 4))
            syl = "".join(self.rng.choice(_SYLLABLES, size=k))
            name = (syl + str(self.rng.choice(_RARE_ENDINGS))).capitalize()
            if name not in self.banned:
                return name

    def draw(self) -> str:
        u = self.rng.random()
        if self.allow_heldout and u < self.config.heldout_rate:
            return str(self.rng.choice(self.config.heldout_names))
        if u > 1 - self.config.rare_name_rate:
            return self.rare()
        return str(self.config.player_pool[self.rng.choice(len(self.config.player_pool), p=self.pool_p)])


def _categorical(rng: np.random.Generator, probs: dict):
    keys = list(probs)
    return keys[rng.choice(len(keys), p=np.array(list(probs.values())))]


def simulate_game(config: SynthConfig, game_index: int, split: str | None = None) -> GameRecord:
    """A rule-consistent game, deterministic in (seed, game_index)."""
    if split is None:
        split = game_splits(config)[game_index] if game_index < config.n_games else "test"
    rng = np.random.default_rng([config.seed, game_index])
    names = _Names(config, rng, allow_heldout=split != "train")
    ti = rng.choice(len(config.teams), size=2, replace=False)
    home, guest = config.teams[ti[0]], config.teams[ti[1]]

    n_home = int(rng.poisson(config.mean_goals / 2))
    n_guest = int(rng.poisson(config.mean_goals / 2))
    resolution = Resolution.REGULATION
    if n_home == n_guest:
        resolution = Resolution.OVERTIME if rng.random() < config.overtime_probability else Resolution.SHOOTOUT
    n_reg = n_home + n_guest
    seconds = np.sort(rng.choice(np.arange(1, 3601), size=n_reg, replace=False)).tolist()
    sides = ["home"] * n_home + ["guest"] * n_guest
    rng.shuffle(sides)
    ot_winner = None
    if resolution is not Resolution.REGULATION:
        ot_winner = "home" if rng.random() < 0.5 else "guest"
        if resolution is Resolution.OVERTIME:
            seconds.append(int(rng.integers(3601, 3901)))
            sides.append(ot_winner)

    events: list[Event] = []
    h = g = 0
    per_period = [[0, 0] for _ in range(4)]
    for sec, side in zip(seconds, sides):
        t = GameTime.from_seconds(sec)
        if side == "home":
            h += 1
        else:
            g += 1
        per_period[t.period - 1][side == "guest"] += 1
        n_assists = int(rng.choice(3, p=[0.1, 0.3, 0.6]))
        scorer = names.draw()
        assists = []
        while len(assists) < n_assists:
            a = names.draw()
            if a != scorer and a not in assists:
                assists.append(a)
        events.append(
            Goal(scorer, tuple(assists), home if side == "home" else guest, Score(h, g), t, t.period,
                 _categorical(rng, STRENGTH_PROBS))
        )
    final = [h, g]
    if resolution is Resolution.SHOOTOUT:
        k = 0 if ot_winner == "home" else 1
        final[k] += 1
        per_period[3][k] += 1

    n_pen = int(rng.poisson(config.penalty_rate))
    for sec in np.sort(rng.integers(1, 3601, size=n_pen)).tolist():
        events.append(
            Penalty(names.draw(), home if rng.random() < 0.5 else guest, GameTime.from_seconds(sec),
                    _categorical(rng, PENALTY_MINUTE_PROBS))
        )
    for team in (home, guest):
        events.append(Save(names.draw(), team, int(rng.binomial(45, 0.6))))

    n_periods = 3 if resolution is Resolution.REGULATION else 4
    er = EndResult(home, guest, Score(*final), tuple(Score(*p) for p in per_period[:n_periods]), resolution)
    date = config.start_date + dt.timedelta(days=game_index // 6)
    return GameRecord(f"G{game_index:05d}", date, sort_events([er, *events]))


def gold_select(game: GameRecord) -> list[int]:
    """Reference selection rule: result, flagged goals, long penalties, 30+ saves."""
    out = []
    for ev in game.events:
        if isinstance(ev, EndResult):
            keep = True
        elif isinstance(ev, Goal):
            keep = bool(ev.derived)
        elif isinstance(ev, Penalty):
            keep = ev.penalty_minutes >= 10
        else:
            keep = ev.count >= 30
        out.append(int(keep))
    return out


def _variant(event: Event) -> int:
    digest = hashlib.sha256(json.dumps(event_to_dict(event), sort_keys=True).encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    acc = 0.0
    for k, w in enumerate(VARIANT_WEIGHTS):
        acc += w
        if u < acc:
            return k
    return len(VARIANT_WEIGHTS) - 1


def _headline(goal: Goal) -> str:
    for flag, words in HEADLINES:
        if flag is None or flag in goal.derived:
            return words
    raise AssertionError("unreachable")


def render(event: Event, variant: int) -> str:
    """Template text for one event; variant 0/1/2 is short/medium/long."""
    if isinstance(event, EndResult):
        s = event.final_score
        home_won = s.home > s.guest
        w, l = (event.home_team, event.guest_team) if home_won else (event.guest_team, event.home_team)
        ws, ls = (s.home, s.guest) if home_won else (s.guest, s.home)
        if variant == 0:
            return f"{w} kaatoi {l}:n {RESOLUTION_WORD[event.resolution]} {ws}-{ls}."
        if variant == 1:
            return f"{w} vei voiton {l}:stä maalein {ws}-{ls} {RESOLUTION_PHRASE[event.resolution]}."
        periods = ", ".join(
            f"{p.home}-{p.guest}" if home_won else f"{p.guest}-{p.home}" for p in event.period_scores
        )
        return f"{w} vei voiton {l}:stä maalein {ws}-{ls} ({periods})."
    if isinstance(event, Goal):
        head = f"{event.team}:n {event.scorer} {_headline(event)} ajassa {event.time} {STRENGTH_WORD[event.strength]}"
        if variant == 0:
            return head + "."
        head += f", tilanne {event.resulting_score}"
        if variant == 1:
            return head + "."
        if len(event.assists) == 2:
            return head + f", syöttäjinä {event.assists[0]} ja {event.assists[1]}."
        if len(event.assists) == 1:
            return head + f", syöttäjänä {event.assists[0]}."
        return head + ", ilman syöttöä."
    if isinstance(event, Penalty):
        m, t = event.penalty_minutes, event.time
        if variant == 0:
            return f"{event.player} sai {m} minuutin jäähyn ajassa {t}."
        if variant == 1:
            return f"{event.team}:n {event.player} sai {m} minuutin jäähyn {ORDINAL[t.period]} erässä."
        return (
            f"Tuomari määräsi {event.team}:n {event.player}:lle {m} minuutin jäähyn rikkeestä "
            f"ajassa {t} {ORDINAL[t.period]} erässä."
        )
    if isinstance(event, Save):
        if variant == 0:
            return f"{event.team}:n maalivahti {event.goalie} torjui {event.count} laukausta."
        if variant == 1:
            return f"{event.team}:n maalivahti {event.goalie} torjui ottelussa yhteensä {event.count} laukausta."
        return (
            f"{event.team}:n maalivahti {event.goalie} oli vahvassa vireessä ja torjui ottelussa "
            f"yhteensä {event.count} vastustajan laukausta."
        )
    raise TypeError(f"not an event: {event!r}")


def verbalize(
    event: Event, context: GameContext | None = None, buckets: LengthBuckets | None = None
) -> tuple[str, LengthBucket | None]:
    """Deterministic reference text; the bucket is filled in once thresholds exist."""
    text = render(event, _variant(event))
    bucket = buckets.bucket(len(tokenize_target(text))) if buckets is not None else None
    return text, bucket


@dataclass
class SynthCorpus:
    config: SynthConfig
    games: list[GameRecord]
    gold: dict[str, list[int]]
    splits: dict[str, list[str]]  # split name -> game ids
    examples: dict[str, list[AlignedExample]]  # split name -> aligned examples
    buckets: LengthBuckets

    def games_in(self, split: str) -> list[GameRecord]:
        ids = set(self.splits[split])
        return [g for g in self.games if g.id in ids]

    def manifest(self) -> dict:
        return {
            "seed": self.config.seed,
            "n_games": self.config.n_games,
            "splits": self.splits,
            "buckets": self.buckets.to_dict(),
        }


def build_corpus(config: SynthConfig = SynthConfig()) -> SynthCorpus:
    """Games, gold selections, aligned examples and game-level 80/10/10 splits."""
    split_of = game_splits(config)
    games = [derive_features(simulate_game(config, i, split_of[i])) for i in range(config.n_games)]
    gold = {g.id: gold_select(g) for g in games}
    splits: dict[str, list[str]] = {"train": [], "validation": [], "test": []}
    for i, g in enumerate(games):
        splits[split_of[i]].append(g.id)

    texts = {}
    for g in games:
        for k, (ev, keep) in enumerate(zip(g.events, gold[g.id])):
            if keep:
                texts[(g.id, k)] = verbalize(ev, g.context)[0]
    train_ids = set(splits["train"])
    buckets = assign_length_buckets(
        [len(tokenize_target(t)) for (gid, _), t in texts.items() if gid in train_ids]
    )
    examples: dict[str, list[AlignedExample]] = {s: [] for s in splits}
    for i, g in enumerate(games):
        ctx = g.context
        for k, (ev, keep) in enumerate(zip(g.events, gold[g.id])):
            if keep:
                text = texts[(g.id, k)]
                bucket = buckets.bucket(len(tokenize_target(text)))
                examples[split_of[i]].append(AlignedExample(ev, ctx, text, bucket, g.id))
    return SynthCorpus(config, games, gold, splits, examples, buckets)


def names_in_event(event: Event) -> set[str]:
    if isinstance(event, Goal):
        return {event.scorer, *event.assists}
    if isinstance(event, Penalty):
        return {event.player}
    if isinstance(event, Save):
        return {event.goalie}
    return set()
