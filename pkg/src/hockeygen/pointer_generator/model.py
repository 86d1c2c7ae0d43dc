"""Pointer-generator encoder-decoder with coverage attention."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .vocab import PAD_ID, UNK_ID


@dataclass(frozen=True)
class PgConfig:
    embedding_dim: int = 128
    hidden_dim: int = 128
    encoder_layers: int = 2
    decoder_layers: int = 2
    dropout: float = 0.3
    learning_rate: float = 0.0005
    batch_size: int = 32
    max_steps: int = 8000
    coverage_loss_weight: float = 1.0
    use_coverage: bool = True
    beam_size: int = 5
    max_decode_len: int = 60
    min_freq: int = 2
    max_grad_norm: float = 5.0
    checkpoint_every: int = 500
    selection: str = "loss"  # or "bleu"
    seed: int = 0

    def __post_init__(self):
        if min(self.embedding_dim, self.hidden_dim, self.encoder_layers, self.decoder_layers) <= 0:
            raise ValueError("dimensions must be positive")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (split over encoder directions)")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.selection not in ("loss", "bleu"):
            raise ValueError("selection must be 'loss' or 'bleu'")

    @classmethod
    def large(cls, **overrides) -> "PgConfig":
        return cls(**{"embedding_dim": 500, "hidden_dim": 500, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PgConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown PgConfig keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class DecoderState:
    h: list[torch.Tensor]  # per decoder layer, (B, H)
    c: list[torch.Tensor]
    feed: torch.Tensor  # previous attentional output, (B, H)
    coverage: torch.Tensor  # sum of past attention, (B, S)
    attention: torch.Tensor | None = None  # attention of the last step
    p_gen: torch.Tensor | None = None  # (B,)


@dataclass
class Encoded:
    outputs: torch.Tensor  # (B, S, H)
    projected: torch.Tensor  # (B, S, A) attention keys
    mask: torch.Tensor  # (B, S) True on real tokens
    src_ext: torch.Tensor  # (B, S) extended ids for copying
    n_oov: int


class PointerGenerator(nn.Module):
    def __init__(self, vocab_size: int, config: PgConfig):
        super().__init__()
        self.config = config
        self.vocab_size = vocab_size
        e, h = config.embedding_dim, config.hidden_dim
        self.embedding = nn.Embedding(vocab_size, e, padding_idx=PAD_ID)
        self.encoder = nn.LSTM(
            e,
            h // 2,
            num_layers=config.encoder_layers,
            bidirectional=True,
            batch_first=True,
            dropout=config.dropout if config.encoder_layers > 1 else 0.0,
        )
        self.decoder_cells = nn.ModuleList(
            [nn.LSTMCell(e + h if k == 0 else h, h) for k in range(config.decoder_layers)]
        )
        self.layer_dropout = nn.Dropout(config.dropout)
        self.attn_key = nn.Linear(h, h, bias=False)
        self.attn_query = nn.Linear(h, h)
        self.attn_coverage = nn.Linear(1, h, bias=False)
        self.attn_v = nn.Linear(h, 1, bias=False)
        self.attn_out = nn.Linear(2 * h, h, bias=False)
        self.generator = nn.Linear(h, vocab_size)
        self.copy_gate = nn.Linear(2 * h + e, 1)

    @property
    def device(self):
        return self.embedding.weight.device

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.embedding(ids.clamp_max(self.vocab_size - 1).masked_fill(ids >= self.vocab_size, UNK_ID))

    def encode(self, src: torch.Tensor, src_ext: torch.Tensor, lengths: torch.Tensor, n_oov: int):
        """Encoder states per source position plus the initial decoder state."""
        if src.shape[1] == 0 or int(lengths.min()) <= 0:
            raise ValueError("empty source sequence")
        b, s = src.shape
        packed = pack_padded_sequence(self.embed(src), lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, (h_n, c_n) = self.encoder(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=s)
        mask = torch.arange(s, device=src.device)[None, :] < lengths[:, None].to(src.device)
        enc = Encoded(out, self.attn_key(out), mask, src_ext, n_oov)

        def merge(x):  # (layers*2, B, H/2) -> per layer (B, H)
            x = x.view(self.config.encoder_layers, 2, b, -1)
            return [torch.cat([x[k, 0], x[k, 1]], dim=-1) for k in range(self.config.encoder_layers)]

        hs, cs = merge(h_n), merge(c_n)
        n_dec = self.config.decoder_layers
        hs = (hs + [torch.zeros_like(hs[0])] * n_dec)[:n_dec]
        cs = (cs + [torch.zeros_like(cs[0])] * n_dec)[:n_dec]
        state = DecoderState(
            hs, cs, torch.zeros(b, self.config.hidden_dim, dtype=out.dtype, device=out.device),
            torch.zeros(b, s, dtype=out.dtype, device=out.device),
        )
        return enc, state

    def _recurrence(self, state: DecoderState, x: torch.Tensor, enc: Encoded):
        """LSTM stack, coverage attention and input-feeding output for one step."""
        inp = torch.cat([x, state.feed], dim=-1)
        hs, cs = [], []
        for k, cell in enumerate(self.decoder_cells):
            if k:
                inp = self.layer_dropout(inp)
            h, c = cell(inp, (state.h[k], state.c[k]))
            hs.append(h)
            cs.append(c)
            inp = h
        top = hs[-1]

        cov_feat = state.coverage if self.config.use_coverage else torch.zeros_like(state.coverage)
        scores = self.attn_v(
            torch.tanh(enc.projected + self.attn_query(top)[:, None, :] + self.attn_coverage(cov_feat[..., None]))
        )[..., 0]
        scores = scores.masked_fill(~enc.mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        context = torch.bmm(attn[:, None, :], enc.outputs)[:, 0]
        feed = torch.tanh(self.attn_out(torch.cat([top, context], dim=-1)))
        return top, context, DecoderState(hs, cs, feed, state.coverage + attn, attn)

    def _gate(self, context, top, x, p_gen_override):
        if p_gen_override is None:
            return torch.sigmoid(self.copy_gate(torch.cat([context, top, x], dim=-1)))[..., 0]
        return torch.full_like(context[..., 0], float(p_gen_override))

    def decode_step(
        self,
        state: DecoderState,
        prev: torch.Tensor,
        enc: Encoded,
        p_gen_override: float | None = None,
    ) -> tuple[torch.Tensor, DecoderState]:
        """Distribution over vocabulary + source OOVs for the next token, and the new state.

        ``prev`` holds extended ids of the previous output; copied OOVs are fed
        back as UNK. The distribution is returned in float64: a float32
        softmax over a few thousand words drifts from 1 by around 1e-6.
        """
        x = self.embed(prev)
        top, context, new_state = self._recurrence(state, x, enc)
        attn = new_state.attention.double()
        p_vocab = torch.softmax(self.generator(new_state.feed).double(), dim=-1)
        p_gen = self._gate(context, top, x, p_gen_override)
        new_state.p_gen = p_gen
        p_gen = p_gen.double()
        b = prev.shape[0]
        dist = torch.zeros(b, self.vocab_size + enc.n_oov, dtype=p_vocab.dtype, device=p_vocab.device)
        dist[:, : self.vocab_size] = p_gen[:, None] * p_vocab
        dist = dist.scatter_add(1, enc.src_ext, (1 - p_gen)[:, None] * attn)
        return dist, new_state

    def forward(self, batch, p_gen_override: float | None = None):
        """Teacher-forced pass: (loss, nll per token, coverage penalty per token).

        Same mixture as :meth:`decode_step`, but only the target entry of each
        step's distribution is formed, after the recurrence has run.
        """
        enc, state = self.encode(batch.src, batch.src_ext, batch.src_len, batch.n_oov)
        xs = self.embed(batch.tgt_in)
        tops, contexts, feeds, attns, covs = [], [], [], [], []
        for t in range(batch.tgt_in.shape[1]):
            covs.append(state.coverage)
            top, context, state = self._recurrence(state, xs[:, t], enc)
            tops.append(top)
            contexts.append(context)
            feeds.append(state.feed)
            attns.append(state.attention)
        top, context, feed = torch.stack(tops, 1), torch.stack(contexts, 1), torch.stack(feeds, 1)
        attn, cov_before = torch.stack(attns, 1), torch.stack(covs, 1)  # (B, T, S)

        p_gen = self._gate(context, top, xs, p_gen_override)  # (B, T)
        log_vocab = torch.log_softmax(self.generator(feed), dim=-1)
        tgt = batch.tgt_out
        in_vocab = tgt < self.vocab_size
        p_vocab = log_vocab.gather(2, tgt.clamp_max(self.vocab_size - 1)[..., None])[..., 0].exp() * in_vocab
        copy_mask = batch.src_ext[:, None, :] == tgt[:, :, None]
        p_copy = (attn * copy_mask).sum(-1)
        p = p_gen * p_vocab + (1 - p_gen) * p_copy

        mask = batch.tgt_mask.to(p.dtype)
        n_tok = mask.sum()
        nll = (-torch.log(p.clamp_min(1e-30)) * mask).sum() / n_tok
        cov = (torch.minimum(attn, cov_before).sum(-1) * mask).sum() / n_tok
        loss = nll + (self.config.coverage_loss_weight * cov if self.config.use_coverage else 0.0)
        return loss, nll, cov
