from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocabulary


@dataclass(frozen=True)
class EncodedPair:
    source: tuple[str, ...]
    target: tuple[str, ...]
    src: tuple[int, ...]
    src_ext: tuple[int, ...]
    tgt_ext: tuple[int, ...]  # ends with EOS
    oovs: tuple[str, ...]


def encode_pair(vocab: Vocabulary, source: Sequence[str], target: Sequence[str] = ()) -> EncodedPair:
    if not source:
        raise ValueError("empty source sequence")
    oovs = vocab.source_oovs(source)
    return EncodedPair(
        tuple(source),
        tuple(target),
        tuple(vocab.encode(source)),
        tuple(vocab.encode_extended(source, oovs)),
        tuple(vocab.encode_extended(target, oovs)) + (EOS_ID,),
        tuple(oovs),
    )


@dataclass
class Batch:
    src: torch.Tensor
    src_ext: torch.Tensor
    src_len: torch.Tensor
    tgt_in: torch.Tensor
    tgt_out: torch.Tensor
    tgt_mask: torch.Tensor
    n_oov: int

    def __len__(self) -> int:
        return self.src.shape[0]


def _pad(rows: Sequence[Sequence[int]], width: int) -> torch.Tensor:
    return torch.tensor([list(r) + [PAD_ID] * (width - len(r)) for r in rows], dtype=torch.long)


def make_batch(pairs: Sequence[EncodedPair]) -> Batch:
    s = max(len(p.src) for p in pairs)
    t = max(len(p.tgt_ext) for p in pairs)
    return Batch(
        src=_pad([p.src for p in pairs], s),
        src_ext=_pad([p.src_ext for p in pairs], s),
        src_len=torch.tensor([len(p.src) for p in pairs], dtype=torch.long),
        tgt_in=_pad([(BOS_ID,) + p.tgt_ext[:-1] for p in pairs], t),
        tgt_out=_pad([p.tgt_ext for p in pairs], t),
        tgt_mask=_pad([[1] * len(p.tgt_ext) for p in pairs], t).bool(),
        n_oov=max(len(p.oovs) for p in pairs),
    )
