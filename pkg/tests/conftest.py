import datetime as dt
import os

import pytest
from hypothesis import HealthCheck, settings

from hockeygen.game_model import EndResult, GameRecord, GameTime, Goal, Resolution, Score, Strength, sort_events

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

HOME, GUEST = "Ässät", "Blues"


def make_game(goals, periods=None, resolution=Resolution.REGULATION, extra=(), game_id="g1", final=None):
    """Game from a list of (side, 'MM.SS') goals where side is 'h' or 'g'."""
    h = g = 0
    evs = []
    per = [[0, 0] for _ in range(3)]
    for k, (side, t) in enumerate(goals):
        if side == "h":
            h += 1
        else:
            g += 1
        time = GameTime.parse(t)
        p = time.period
        while len(per) < p:
            per.append([0, 0])
        per[p - 1][0 if side == "h" else 1] += 1
        evs.append(Goal(f"P{k}", (), HOME if side == "h" else GUEST, Score(h, g), time, p, Strength.EVEN))
    final = final or Score(h, g)
    if periods is None:
        periods = tuple(Score(a, b) for a, b in per)
    er = EndResult(HOME, GUEST, final, tuple(periods), resolution)
    return GameRecord(game_id, dt.date(2018, 2, 1), sort_events([er, *evs, *extra]))


@pytest.fixture(scope="session")
def small_corpus():
    from hockeygen.synth_corpus import SynthConfig, build_corpus

    return build_corpus(SynthConfig(n_games=200, seed=3))


@pytest.fixture(scope="session")
def full_corpus():
    from hockeygen.synth_corpus import SynthConfig, build_corpus

    return build_corpus(SynthConfig())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
