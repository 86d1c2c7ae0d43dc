"""Command-line pipeline: parse, pair, synth, select-*, gen-*, report, stats, eval.

Errors are reported on stderr as one JSON line
``{"error": <kind>, "code": <code>, "message": <text>}`` where kind is
``config`` (bad arguments, config file, missing model) or ``data`` (bad input
content). Exit codes: 2 for config faults, 3 for data faults.

Configuration is a flat ``key = value`` file (INI syntax, optional
``[hockeygen]`` header) with dotted keys such as ``crf.c1`` or
``pg.hidden_dim``; environment variables ``HOCKEYGEN_<SECTION>_<KEY>``
(e.g. ``HOCKEYGEN_PG_MAX_STEPS=2000``) override the file. See
:func:`config_keys` for the full list.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import re
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .game_model import (
    EVENT_TYPES,
    AlignedExample,
    EndResult,
    GameRecord,
    GameValidationError,
    derive_features,
    dump_jsonl,
    example_from_dict,
    example_to_dict,
    game_from_dict,
    game_to_dict,
    load_jsonl,
)
from .linearization import LengthBuckets, example_pair, tokenize_target, write_parallel
from .metrics import EvalPair, corpus_wer, evaluate, sttr
from .selection_crf import (
    SELECT,
    CrfModel,
    CrfTrainConfig,
    crf_predict,
    crf_train,
    evaluate_selection,
    featurize_sequence,
)
from .stats_parser import ArticleDocument, ParseError, StatsDocument, pair_articles, parse_stats_file
from .synth_corpus import SynthConfig, build_corpus

ENV_PREFIX = "HOCKEYGEN_"
SPLITS = ("train", "validation", "test")


class PipelineError(Exception):
    kind = "data"

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class ConfigError(PipelineError):
    kind = "config"


class DataError(PipelineError):
    kind = "data"


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = "data"
    model_dir: str = "models"
    output_dir: str = "out"


@dataclass(frozen=True)
class MetricOptions:
    ignore_punctuation: bool = False
    sttr_segment: int = 1000


def _pg_config_cls():
    from .pointer_generator import PgConfig

    return PgConfig


_SYNTH_KEYS = (
    "n_games", "seed", "heldout_rate", "rare_name_rate", "mean_goals", "penalty_rate", "overtime_probability",
)


def _sections() -> dict[str, tuple[type, tuple[str, ...]]]:
    def names(cls):
        return tuple(f.name for f in dataclasses.fields(cls))

    pg = _pg_config_cls()
    return {
        "paths": (PathsConfig, names(PathsConfig)),
        "crf": (CrfTrainConfig, names(CrfTrainConfig)),
        "pg": (pg, names(pg)),
        "synth": (SynthConfig, _SYNTH_KEYS),
        "metrics": (MetricOptions, names(MetricOptions)),
    }


def config_keys() -> list[str]:
    return [f"{sec}.{k}" for sec, (_, keys) in _sections().items() for k in keys]


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    crf: CrfTrainConfig = field(default_factory=CrfTrainConfig)
    pg: object = None  # PgConfig, filled lazily so torch is only imported when needed
    synth: SynthConfig = field(default_factory=SynthConfig)
    metrics: MetricOptions = field(default_factory=MetricOptions)

    def __post_init__(self):
        if self.pg is None:
            object.__setattr__(self, "pg", _pg_config_cls()())

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "PipelineConfig":
        """Build from flat dotted keys with string values; unknown keys are rejected."""
        sections = _sections()
        grouped: dict[str, dict[str, str]] = {}
        for key, raw in values.items():
            sec, _, name = key.partition(".")
            if sec not in sections or name not in sections[sec][1]:
                raise ConfigError("unknown_key", f"unknown config key {key!r}")
            grouped.setdefault(sec, {})[name] = raw
        base = cls()
        parts = {}
        for sec in sections:
            current = getattr(base, sec)
            kwargs = {}
            for name, raw in grouped.get(sec, {}).items():
                kwargs[name] = _coerce(raw, type(getattr(current, name)), f"{sec}.{name}")
            try:
                parts[sec] = dataclasses.replace(current, **kwargs) if kwargs else current
            except (TypeError, ValueError) as e:
                raise ConfigError("invalid_value", f"[{sec}] {e}") from e
        return cls(**parts)

    @classmethod
    def load(cls, path=None, environ: Mapping[str, str] | None = None) -> "PipelineConfig":
        values: dict[str, str] = {}
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError("config_missing", f"config file not found: {path}")
            text = p.read_text(encoding="utf-8")
            if not re.search(r"^\s*\[", text, re.M):
                text = "[hockeygen]\n" + text
            parser = configparser.ConfigParser(interpolation=None)
            parser.optionxform = str
            try:
                parser.read_string(text, source=str(path))
            except configparser.Error as e:
                raise ConfigError("config_syntax", str(e)) from e
            for sec in parser.sections():
                if sec != "hockeygen":
                    raise ConfigError("unknown_section", f"unknown config section [{sec}]")
                values.update(parser[sec])
        env = os.environ if environ is None else environ
        known = {k.replace(".", "_").upper(): k for k in config_keys()}
        for var, raw in env.items():
            if var.startswith(ENV_PREFIX):
                key = known.get(var[len(ENV_PREFIX) :])
                if key is None:
                    raise ConfigError("unknown_key", f"unknown config environment variable {var}")
                values[key] = raw
        return cls.from_mapping(values)


def _coerce(raw: str, kind: type, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError("invalid_value", f"{key}: cannot parse {raw!r} as {kind.__name__}") from e


# -- corpus directory ---------------------------------------------------------


@dataclass
class CorpusData:
    games: list[GameRecord]
    labels: dict[str, list[int]]
    splits: dict[str, list[str]]
    examples: dict[str, list[AlignedExample]]
    buckets: LengthBuckets | None

    def games_in(self, split: str) -> list[GameRecord]:
        ids = set(self.splits.get(split, []))
        return [g for g in self.games if g.id in ids]


def write_corpus_dir(corpus, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_jsonl((game_to_dict(g) for g in corpus.games), out / "games.jsonl")
    dump_jsonl(({"id": gid, "labels": lab} for gid, lab in corpus.gold.items()), out / "labels.jsonl")
    for split, exs in corpus.examples.items():
        dump_jsonl((example_to_dict(e) for e in exs), out / f"examples.{split}.jsonl")
        write_parallel(exs, out / f"{split}.src", out / f"{split}.tgt")
    manifest = corpus.manifest()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError("missing_input", f"{what} not found: {path}")
    return path


def read_corpus_dir(path) -> CorpusData:
    d = Path(path)
    _require(d, "corpus directory")
    try:
        manifest = json.loads(_require(d / "manifest.json", "corpus manifest").read_text(encoding="utf-8"))
        games = [derive_features(game_from_dict(r)) for r in load_jsonl(_require(d / "games.jsonl", "games"))]
        labels = {r["id"]: list(r["labels"]) for r in load_jsonl(d / "labels.jsonl")} if (
            d / "labels.jsonl"
        ).exists() else {}
        examples = {
            s: [example_from_dict(r) for r in load_jsonl(d / f"examples.{s}.jsonl")]
            for s in SPLITS
            if (d / f"examples.{s}.jsonl").exists()
        }
    except (KeyError, ValueError, GameValidationError) as e:
        raise DataError("bad_corpus", f"{d}: {e}") from e
    b = manifest.get("buckets")
    return CorpusData(games, labels, manifest.get("splits", {}), examples, LengthBuckets.from_dict(b) if b else None)


# -- report assembly ----------------------------------------------------------


@dataclass(frozen=True)
class Report:
    text: str
    sentences: tuple[str, ...]
    selected: tuple[int, ...]  # event indices in the game
    flagged: tuple[int, ...]  # events whose generation failed or was truncated
    unk_count: int


def run_report(game: GameRecord, crf: CrfModel, pg, beam_size: int | None = None) -> Report:
    """Select events, generate a sentence per event and join them chronologically.

    ``pg`` is a :class:`~hockeygen.pointer_generator.TrainedGenerator` or any
    object with a ``generate(event, context, beam_size)`` method.
    """
    game = derive_features(game)
    labels = crf_predict(crf, featurize_sequence(game))
    selected = [i for i, lab in enumerate(labels) if lab == SELECT]
    if not selected:
        selected = [i for i, ev in enumerate(game.events) if isinstance(ev, EndResult)]
    # EndResult first, remaining events in game (time) order
    selected.sort(key=lambda i: (not isinstance(game.events[i], EndResult), i))
    sentences, flagged, unk = [], [], 0
    for i in selected:
        try:
            gen = pg.generate(game.events[i], game.context, beam_size)
        except Exception:  # noqa: BLE001 - one bad event must not sink the report
            flagged.append(i)
            continue
        if gen.flagged:
            flagged.append(i)
        unk += gen.unk_count
        if gen.text:
            sentences.append(gen.text)
    return Report(" ".join(sentences), tuple(sentences), tuple(selected), tuple(flagged), unk)


# -- corpus statistics ----------------------------------------------------------

_SENTENCE_END = re.compile(r"[.!?](?:\s|$)")


@dataclass(frozen=True)
class CorpusStats:
    games: int = 0
    events: int = 0
    events_by_type: dict = field(default_factory=dict)
    aligned_events: int = 0
    aligned_by_type: dict = field(default_factory=dict)
    aligned_spans: int = 0
    sentences: int = 0
    tokens: int = 0
    unique_tokens: int = 0
    sttr_words: float = 0.0
    sttr_lemmas: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_table(self) -> str:
        rows = [("games", self.games), ("events", self.events)]
        rows += [(f"events[{k}]", v) for k, v in self.events_by_type.items()]
        rows += [("aligned events", self.aligned_events)]
        rows += [(f"aligned[{k}]", v) for k, v in self.aligned_by_type.items()]
        rows += [
            ("aligned spans", self.aligned_spans),
            ("sentences", self.sentences),
            ("tokens", self.tokens),
            ("unique tokens", self.unique_tokens),
            ("STTR (words)", f"{self.sttr_words:.4f}"),
        ]
        if self.sttr_lemmas is not None:
            rows.append(("STTR (lemmas)", f"{self.sttr_lemmas:.4f}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def count_sentences(text: str) -> int:
    n = len(_SENTENCE_END.findall(text.strip()))
    return max(n, 1) if text.strip() else 0


def corpus_stats(
    games: Sequence[GameRecord],
    examples: Sequence[AlignedExample],
    lemmatize: Callable[[str], str] | Mapping[str, str] | None = None,
    sttr_segment: int = 1000,
) -> CorpusStats:
    """Counts and lexical diversity of a dataset of games and aligned texts.

    One example is one aligned span. Several spans can align to the same event;
    ``aligned_events`` counts distinct (game, event) pairs.
    """
    if not games and not examples:
        return CorpusStats(events_by_type={k: 0 for k in EVENT_TYPES}, aligned_by_type={k: 0 for k in EVENT_TYPES})
    ev_types = Counter(ev.type_name for g in games for ev in g.events)
    aligned_keys = {(ex.game_id, ex.event) for ex in examples}
    al_types = Counter(ev.type_name for _, ev in aligned_keys)
    tokens = [tok for ex in examples for tok in tokenize_target(ex.text)]
    lemma_sttr = None
    if lemmatize is not None:
        if isinstance(lemmatize, Mapping):
            lemmas = [lemmatize.get(t, t) for t in tokens]
        else:
            lemmas = [lemmatize(t) for t in tokens]
        lemma_sttr = sttr(lemmas, sttr_segment) if lemmas else 0.0
    return CorpusStats(
        games=len(games),
        events=sum(len(g.events) for g in games),
        events_by_type={k: ev_types.get(k, 0) for k in EVENT_TYPES},
        aligned_events=len(aligned_keys),
        aligned_by_type={k: al_types.get(k, 0) for k in EVENT_TYPES},
        aligned_spans=len(examples),
        sentences=sum(count_sentences(ex.text) for ex in examples),
        tokens=len(tokens),
        unique_tokens=len(set(tokens)),
        sttr_words=sttr(tokens, sttr_segment) if tokens else 0.0,
        sttr_lemmas=lemma_sttr,
    )


# -- subcommands ----------------------------------------------------------------


def _emit(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False, sort_keys=True))


def _parse_games(paths: Sequence[str]) -> list[GameRecord]:
    games = []
    for p in paths:
        _require(Path(p), "stats file")
        try:
            games.append(derive_features(parse_stats_file(StatsDocument.from_path(p))))
        except ParseError as e:
            raise DataError("parse_error", f"{p}: {e}") from e
        except GameValidationError as e:
            raise DataError("invalid_game", f"{p}: {e}") from e
    return games


def cmd_parse(args, cfg) -> int:
    games = _parse_games(args.stats)
    if args.output:
        dump_jsonl((game_to_dict(g) for g in games), args.output)
    else:
        for g in games:
            _emit(game_to_dict(g))
    return 0


def _article_paths(items: Sequence[str]) -> list[Path]:
    out = []
    for item in items:
        p = _require(Path(item), "article path")
        out.extend(sorted(p.glob("*.txt")) if p.is_dir() else [p])
    return out


def cmd_pair(args, cfg) -> int:
    try:
        games = [game_from_dict(r) for r in load_jsonl(_require(Path(args.games), "games file"))]
        articles = [ArticleDocument.from_path(p) for p in _article_paths(args.articles)]
    except (KeyError, ValueError) as e:
        raise DataError("bad_input", str(e)) from e
    res = pair_articles(games, articles)
    records = [{"game": g, "article": a} for g, a in res.pairs]
    if args.output:
        dump_jsonl(records, args.output)
    else:
        for r in records:
            _emit(r)
    print(
        json.dumps(
            {"pairs": len(res.pairs), "unpaired_games": len(res.unpaired_games),
             "unpaired_articles": len(res.unpaired_articles)}
        ),
        file=sys.stderr,
    )
    return 0


def cmd_synth(args, cfg) -> int:
    synth = cfg.synth
    if args.games is not None or args.seed is not None:
        synth = dataclasses.replace(
            synth,
            n_games=synth.n_games if args.games is None else args.games,
            seed=synth.seed if args.seed is None else args.seed,
        )
    corpus = build_corpus(synth)
    manifest = write_corpus_dir(corpus, args.output)
    _emit({"games": len(corpus.games), "examples": {k: len(v) for k, v in corpus.examples.items()},
           "buckets": manifest["buckets"]})
    return 0


def _selection_data(corpus: CorpusData, split: str):
    games = corpus.games_in(split)
    missing = [g.id for g in games if g.id not in corpus.labels]
    if missing:
        raise DataError("missing_labels", f"no gold labels for games {missing[:5]}")
    return [(featurize_sequence(g), corpus.labels[g.id]) for g in games], games


def cmd_select_train(args, cfg) -> int:
    corpus = read_corpus_dir(args.corpus)
    data, _ = _selection_data(corpus, args.split)
    if not data:
        raise DataError("empty_split", f"no games in split {args.split!r}")
    model = crf_train(data, cfg.crf)
    model.save(args.output)
    _emit({"games": len(data), "features": len(model.feature_registry), "objective": model.final_objective})
    return 0


def _load_crf(path) -> CrfModel:
    try:
        return CrfModel.load(_require(Path(path), "CRF model"))
    except ValueError as e:
        raise ConfigError("bad_model", f"{path}: {e}") from e


def _load_generator(path):
    from .pointer_generator import CheckpointError, TrainedGenerator

    try:
        return TrainedGenerator.load(_require(Path(path), "generator checkpoint"))
    except (CheckpointError, KeyError, ValueError) as e:
        raise ConfigError("bad_model", f"{path}: {e}") from e


def cmd_select_eval(args, cfg) -> int:
    corpus = read_corpus_dir(args.corpus)
    model = _load_crf(args.model)
    data, games = _selection_data(corpus, args.split)
    pred = [crf_predict(model, seq) for seq, _ in data]
    types = [[ev.type_name for ev in g.events] for g in games]
    scores = evaluate_selection(pred, [lab for _, lab in data], types)
    _emit({
        "split": args.split,
        "overall": dataclasses.asdict(scores.overall),
        "by_type": {k: dataclasses.asdict(v) for k, v in scores.by_type.items()},
    })
    return 0


def cmd_gen_train(args, cfg) -> int:
    from .pointer_generator import TrainedGenerator, TrainingDiverged, train

    corpus = read_corpus_dir(args.corpus)
    pg = cfg.pg
    if args.max_steps is not None:
        pg = dataclasses.replace(pg, max_steps=args.max_steps)
    train_pairs = [example_pair(e) for e in corpus.examples.get("train", [])]
    val_pairs = [example_pair(e) for e in corpus.examples.get("validation", [])]
    if not train_pairs:
        raise DataError("empty_split", "no training examples")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if args.resume is not None:
        _require(Path(args.resume), "resume checkpoint")
    try:
        res = train(
            train_pairs, val_pairs, pg, checkpoint_dir=out / "checkpoints", log_path=out / "train.log",
            resume_from=args.resume,
        )
    except TrainingDiverged as e:
        raise DataError("diverged", str(e)) from e
    TrainedGenerator(res.model, res.vocab, corpus.buckets).save(out / "model.pgen", {"best_step": res.best_step})
    _emit({"best_step": res.best_step, "last_step": res.last_step, "best_score": res.best_score,
           "model": str(out / "model.pgen")})
    return 0


def generation_eval(gen, examples: Sequence[AlignedExample], mode: str = "gold", beam_size=None) -> dict:
    """Event-level metrics; ``mode`` is ``gold`` (reference length bucket) or ``confidence``."""
    from .linearization import linearize_event
    from .pointer_generator import decode

    hyps, refs = [], []
    for ex in examples:
        if mode == "gold":
            d = decode(gen.model, gen.vocab, linearize_event(ex.event, ex.context, ex.length_bucket), beam_size)
            hyps.append(list(d.tokens))
        else:
            hyps.append(list(gen.generate(ex.event, ex.context, beam_size).tokens))
        refs.append(tokenize_target(ex.text))
    if not hyps:
        raise DataError("empty_split", "no examples to evaluate")
    report = evaluate([EvalPair.of(h, [r]) for h, r in zip(hyps, refs)], with_wer=True)
    return {**json.loads(report.to_text()), "examples": len(hyps), "mode": mode}


def cmd_gen_eval(args, cfg) -> int:
    corpus = read_corpus_dir(args.corpus)
    gen = _load_generator(args.model)
    _emit(generation_eval(gen, corpus.examples.get(args.split, []), args.mode, args.beam_size))
    return 0


def cmd_report(args, cfg) -> int:
    import torch

    torch.set_num_threads(1)
    games = _parse_games([args.stats])
    crf = _load_crf(args.crf)
    gen = _load_generator(args.gen)
    rep = run_report(games[0], crf, gen, args.beam_size)
    print(rep.text)
    if rep.flagged or rep.unk_count:
        print(json.dumps({"flagged_events": list(rep.flagged), "unk_count": rep.unk_count}), file=sys.stderr)
    return 0


def cmd_stats(args, cfg) -> int:
    corpus = read_corpus_dir(args.corpus)
    splits = SPLITS if args.split == "all" else (args.split,)
    games = [g for s in splits for g in corpus.games_in(s)]
    examples = [e for s in splits for e in corpus.examples.get(s, [])]
    lemmas = None
    if args.lemmas:
        try:
            lemmas = json.loads(_require(Path(args.lemmas), "lemma file").read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError("bad_input", f"{args.lemmas}: {e}") from e
    st = corpus_stats(games, examples, lemmas, cfg.metrics.sttr_segment)
    print(json.dumps(st.to_dict(), sort_keys=True) if args.json else st.to_table())
    return 0


def _read_lines(path) -> list[str]:
    return _require(Path(path), "text file").read_text(encoding="utf-8").splitlines()


def cmd_eval(args, cfg) -> int:
    hyps = _read_lines(args.hyp)
    ref_sets = [_read_lines(r) for r in args.ref]
    for path, refs in zip(args.ref, ref_sets):
        if len(refs) != len(hyps):
            raise DataError(
                "line_count_mismatch", f"line count mismatch: {args.hyp} has {len(hyps)}, {path} has {len(refs)}"
            )
    corpus = []
    for i, h in enumerate(hyps):
        refs = [tokenize_target(rs[i]) for rs in ref_sets]
        if any(not r for r in refs):
            raise DataError("empty_reference", f"empty reference on line {i + 1}")
        corpus.append(EvalPair.of(tokenize_target(h), refs))
    report = evaluate(corpus)
    out = json.loads(report.to_text())
    out["wer"] = corpus_wer(((p.hypothesis, p.references[0]) for p in corpus), cfg.metrics.ignore_punctuation)
    _emit(out)
    return 0


# -- entry point ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("usage", f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hockeygen", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value config file")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", help="stats files -> games JSONL")
    s.add_argument("stats", nargs="+")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("pair", help="pair games with news articles")
    s.add_argument("--games", required=True)
    s.add_argument("--articles", nargs="+", required=True, help="article files or directories of *.txt")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_pair)

    s = sub.add_parser("synth", help="build the synthetic corpus")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--games", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    for name, func in (("select-train", cmd_select_train), ("select-eval", cmd_select_eval)):
        s = sub.add_parser(name, help="train / evaluate the event selection CRF")
        s.add_argument("--corpus", required=True)
        if name == "select-train":
            s.add_argument("-o", "--output", required=True)
            s.add_argument("--split", default="train")
        else:
            s.add_argument("--model", required=True)
            s.add_argument("--split", default="test")
        s.set_defaults(func=func)

    s = sub.add_parser("gen-train", help="train the pointer-generator")
    s.add_argument("--corpus", required=True)
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--resume", help="training checkpoint to resume from")
    s.add_argument("--max-steps", type=int)
    s.set_defaults(func=cmd_gen_train)

    s = sub.add_parser("gen-eval", help="event-level generation metrics")
    s.add_argument("--corpus", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--mode", choices=("gold", "confidence"), default="gold")
    s.add_argument("--beam-size", type=int)
    s.set_defaults(func=cmd_gen_eval)

    s = sub.add_parser("report", help="full pipeline on one stats file")
    s.add_argument("stats")
    s.add_argument("--crf", required=True)
    s.add_argument("--gen", required=True)
    s.add_argument("--beam-size", type=int)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("stats", help="corpus counts and lexical diversity")
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", choices=(*SPLITS, "all"), default="all")
    s.add_argument("--lemmas", help="JSON object mapping tokens to lemmas")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("eval", help="metric suite on line-aligned hypothesis/reference files")
    s.add_argument("--hyp", required=True)
    s.add_argument("--ref", required=True, action="append")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = PipelineConfig.load(args.config)
        return args.func(args, cfg)
    except PipelineError as e:
        print(json.dumps({"error": e.kind, "code": e.code, "message": str(e)}, ensure_ascii=False), file=sys.stderr)
        return 2 if e.kind == "config" else 3


if __name__ == "__main__":
    sys.exit(main())
