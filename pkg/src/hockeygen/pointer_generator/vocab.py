from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)


class Vocabulary:
    """Token <-> id map with fixed reserved ids and per-example copy extensions.

    Tokens outside the vocabulary map to UNK for embedding lookups and the
    vocabulary softmax, but a source OOV gets an extended id ``len(vocab) + k``
    so it can still be produced through the copy distribution.
    """

    def __init__(self, tokens: Sequence[str]):
        self.itos = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_freq: int = 2) -> "Vocabulary":
        counts = Counter(tok for seq in sequences for tok in seq)
        kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
        return cls(kept)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def source_oovs(self, source: Sequence[str]) -> list[str]:
        return list(dict.fromkeys(t for t in source if t not in self.stoi))

    def encode_extended(self, tokens: Sequence[str], oovs: Sequence[str]) -> list[int]:
        """Ids where source OOVs take extended ids; other unknowns become UNK."""
        ext = {t: len(self) + k for k, t in enumerate(oovs)}
        return [self.stoi.get(t, ext.get(t, UNK_ID)) for t in tokens]

    def token(self, ext_id: int, oovs: Sequence[str] = ()) -> str:
        if ext_id < len(self):
            return self.itos[ext_id]
        return oovs[ext_id - len(self)]
