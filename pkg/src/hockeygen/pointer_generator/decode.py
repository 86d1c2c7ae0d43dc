"""Greedy and beam decoding, and length-variant generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import torch

from ..game_model import Event, GameContext, LengthBucket
from ..linearization import LengthBuckets, detokenize, is_tag, linearize_event
from .data import encode_pair, make_batch
from .model import DecoderState, Encoded, PointerGenerator
from .vocab import BOS_ID, EOS_ID, PAD_ID, UNK, Vocabulary


@dataclass(frozen=True)
class Decoded:
    tokens: tuple[str, ...]  # without EOS
    logprobs: tuple[float, ...]  # one per token plus EOS
    truncated: bool = False

    @property
    def confidence(self) -> float:
        return sum(self.logprobs) / len(self.logprobs)


def _masked_log(dist: torch.Tensor) -> torch.Tensor:
    logp = torch.log(dist)
    logp[:, PAD_ID] = -math.inf
    logp[:, BOS_ID] = -math.inf
    return logp


def _encode_one(model: PointerGenerator, vocab: Vocabulary, source: Sequence[str]):
    pair = encode_pair(vocab, source)
    batch = make_batch([pair])
    enc, state = model.encode(batch.src, batch.src_ext, batch.src_len, batch.n_oov)
    return pair, enc, state


def _max_len(model: PointerGenerator, max_len: int | None) -> int:
    return model.config.max_decode_len if max_len is None else max_len


@torch.no_grad()
def greedy_decode(
    model: PointerGenerator, vocab: Vocabulary, source: Sequence[str], max_len: int | None = None
) -> Decoded:
    return greedy_decode_batch(model, vocab, [source], max_len)[0]


@torch.no_grad()
def greedy_decode_batch(
    model: PointerGenerator, vocab: Vocabulary, sources: Sequence[Sequence[str]], max_len: int | None = None
) -> list[Decoded]:
    """Greedy decoding of several sources at once.

    A sequence that reaches ``max_len`` tokens without EOS gets EOS forced and
    is marked truncated.
    """
    was_training = model.training
    model.eval()
    try:
        max_len = _max_len(model, max_len)
        pairs = [encode_pair(vocab, s) for s in sources]
        batch = make_batch(pairs)
        enc, state = model.encode(batch.src, batch.src_ext, batch.src_len, batch.n_oov)
        n = len(pairs)
        prev = torch.full((n,), BOS_ID, dtype=torch.long)
        ids: list[list[int]] = [[] for _ in range(n)]
        lps: list[list[float]] = [[] for _ in range(n)]
        done = [False] * n
        truncated = [False] * n
        for step in range(max_len + 1):
            dist, state = model.decode_step(state, prev, enc)
            logp = _masked_log(dist)
            if step == max_len:
                choice = torch.full((n,), EOS_ID, dtype=torch.long)
            else:
                choice = logp.argmax(dim=1)
            for i in range(n):
                if done[i]:
                    continue
                tok = int(choice[i])
                lps[i].append(float(logp[i, tok]))
                if tok == EOS_ID:
                    done[i] = True
                    truncated[i] = step == max_len
                else:
                    ids[i].append(tok)
            if all(done):
                break
            prev = choice
        return [
            Decoded(tuple(vocab.token(t, p.oovs) for t in ids[i]), tuple(lps[i]), truncated[i])
            for i, p in enumerate(pairs)
        ]
    finally:
        model.train(was_training)


def _select_state(state: DecoderState, idx: torch.Tensor) -> DecoderState:
    return DecoderState(
        [h[idx] for h in state.h],
        [c[idx] for c in state.c],
        state.feed[idx],
        state.coverage[idx],
        None if state.attention is None else state.attention[idx],
        None if state.p_gen is None else state.p_gen[idx],
    )


def _expand(enc: Encoded, k: int) -> Encoded:
    rep = lambda x: x.expand(k, *x.shape[1:])  # noqa: E731
    return Encoded(rep(enc.outputs), rep(enc.projected), rep(enc.mask), rep(enc.src_ext), enc.n_oov)


@torch.no_grad()
def beam_search(
    model: PointerGenerator,
    vocab: Vocabulary,
    source: Sequence[str],
    beam_size: int | None = None,
    max_len: int | None = None,
) -> Decoded:
    """Beam search ranked by summed log-probability; beam_size=1 is greedy."""
    k = model.config.beam_size if beam_size is None else beam_size
    if k < 1:
        raise ValueError("beam_size must be >= 1")
    max_len = _max_len(model, max_len)
    was_training = model.training
    model.eval()
    try:
        pair, enc, state = _encode_one(model, vocab, source)
        # alive hypotheses: (score, ids, logprobs)
        alive: list[tuple[float, list[int], list[float]]] = [(0.0, [], [])]
        finished: list[tuple[float, list[int], list[float], bool]] = []
        prev = torch.tensor([BOS_ID])
        for step in range(max_len + 1):
            dist, state = model.decode_step(state, prev, _expand(enc, len(alive)))
            logp = _masked_log(dist)
            if step == max_len:
                for b, (score, ids, lps) in enumerate(alive):
                    lp = float(logp[b, EOS_ID])
                    finished.append((score + lp, ids, lps + [lp], True))
                break
            total = logp + torch.tensor([a[0] for a in alive], dtype=logp.dtype)[:, None]
            flat = total.view(-1)
            top = torch.topk(flat, min(k, flat.numel()))
            width = total.shape[1]
            new_alive, keep = [], []
            for score, pos in zip(top.values.tolist(), top.indices.tolist()):
                b, tok = divmod(pos, width)
                _, ids, lps = alive[b]
                lp = float(logp[b, tok])
                if tok == EOS_ID:
                    finished.append((score, ids, lps + [lp], False))
                else:
                    new_alive.append((score, ids + [tok], lps + [lp]))
                    keep.append((b, tok))
            best_done = max((f[0] for f in finished), default=-math.inf)
            if len(finished) >= k or not new_alive or new_alive[0][0] < best_done:
                break
            alive = new_alive
            state = _select_state(state, torch.tensor([b for b, _ in keep]))
            prev = torch.tensor([t for _, t in keep])
        score, ids, lps, trunc = max(finished, key=lambda f: f[0])
        return Decoded(tuple(vocab.token(t, pair.oovs) for t in ids), tuple(lps), trunc)
    finally:
        model.train(was_training)


@dataclass(frozen=True)
class Generation:
    text: str
    confidence: float
    bucket: LengthBucket
    tokens: tuple[str, ...]
    flagged: bool = False
    candidates: dict = field(default_factory=dict)  # bucket -> Decoded

    @property
    def unk_count(self) -> int:
        return sum(t == UNK for t in self.tokens)


def decode(model, vocab, source, beam_size: int | None = None, max_len: int | None = None) -> Decoded:
    k = model.config.beam_size if beam_size is None else beam_size
    if k == 1:
        return greedy_decode(model, vocab, source, max_len)
    return beam_search(model, vocab, source, k, max_len)


def generate(
    model: PointerGenerator,
    vocab: Vocabulary,
    event: Event,
    context: GameContext | None = None,
    buckets: LengthBuckets | None = None,
    beam_size: int | None = None,
    max_len: int | None = None,
) -> Generation:
    """Decode all three length variants and keep the most confident one.

    ``buckets`` is accepted for symmetry with training; only the bucket names
    enter the source sequence.
    """
    cands = {}
    for b in LengthBucket:
        cands[b] = decode(model, vocab, linearize_event(event, context, b), beam_size, max_len)
    best = max(LengthBucket, key=lambda b: cands[b].confidence)  # first wins ties
    d = cands[best]
    tokens = tuple(t for t in d.tokens if not is_tag(t))
    flagged = d.truncated or len(tokens) != len(d.tokens)
    return Generation(detokenize(tokens), d.confidence, best, tokens, flagged, cands)
