"""Automatic evaluation: BLEU, NIST, ROUGE-L, CIDEr, WER and STTR.

Corpus inputs are sequences of ``EvalPair`` (or ``(hypothesis, references)``
tuples) over already tokenized text. Conventions follow the E2E challenge
scorer lineage: corpus-level BLEU/NIST, ROUGE-L with beta 1.2 averaged over
pairs, CIDEr with idf taken from the reference sets.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

Tokens = Sequence[str]
PUNCT_RE = re.compile(r"[^\w\s]+")
ROUGE_BETA = 1.2


class DegenerateIdf(UserWarning):
    """CIDEr on fewer than two distinct reference sets: every idf is zero."""
NIST_BETA = math.log(0.5) / math.log(1.5) ** 2


@dataclass(frozen=True)
class EvalPair:
    hypothesis: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError("EvalPair needs at least one reference")
        if any(len(r) == 0 for r in self.references):
            raise ValueError("empty reference")

    @classmethod
    def of(cls, hypothesis: Tokens, references) -> "EvalPair":
        if references and isinstance(references[0], str):
            references = [references]
        return cls(tuple(hypothesis), tuple(tuple(r) for r in references))


@dataclass(frozen=True)
class MetricReport:
    bleu: float
    nist: float
    rouge_l: float
    cider: float
    wer: float | None = None

    def to_text(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _pairs(corpus) -> list[EvalPair]:
    return [p if isinstance(p, EvalPair) else EvalPair.of(*p) for p in corpus]


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(corpus, max_n: int = 4) -> float:
    """Corpus BLEU, clipped counts, closest reference length, no smoothing."""
    pairs = _pairs(corpus)
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for p in pairs:
        hyp = p.hypothesis
        hyp_len += len(hyp)
        # closest reference length, ties go to the shorter reference
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in p.references)[1]
        for n in range(1, max_n + 1):
            h = ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in p.references:
                max_ref |= ngrams(r, n)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0 or min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * math.exp(log_prec)


def nist(corpus, max_n: int = 5) -> float:
    """NIST score: information-weighted co-occurrences times the length factor."""
    pairs = _pairs(corpus)
    ref_counts = [Counter() for _ in range(max_n + 1)]
    for p in pairs:
        for r in p.references:
            ref_counts[0][()] += len(r)
            for n in range(1, max_n + 1):
                ref_counts[n].update(ngrams(r, n))

    def info(g: tuple) -> float:
        return math.log2(ref_counts[len(g) - 1][g[:-1]] / ref_counts[len(g)][g])

    gained = [0.0] * max_n
    hyp_ngrams = [0] * max_n
    hyp_len = 0
    ref_len = 0.0
    for p in pairs:
        hyp = p.hypothesis
        hyp_len += len(hyp)
        ref_len += sum(len(r) for r in p.references) / len(p.references)
        for n in range(1, max_n + 1):
            h = ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in p.references:
                max_ref |= ngrams(r, n)
            gained[n - 1] += sum(min(c, max_ref[g]) * info(g) for g, c in h.items() if max_ref[g])
            hyp_ngrams[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0:
        return 0.0
    score = sum(g / t for g, t in zip(gained, hyp_ngrams) if t)
    ratio = min(hyp_len / ref_len, 1.0)
    return score * math.exp(NIST_BETA * math.log(ratio) ** 2)


def lcs_length(a: Tokens, b: Tokens) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(hypothesis: Tokens, references: Sequence[Tokens], beta: float = ROUGE_BETA) -> float:
    # precision and recall are maximised separately over references
    if not hypothesis:
        return 0.0
    prec = rec = 0.0
    for r in references:
        lcs = lcs_length(hypothesis, r)
        prec = max(prec, lcs / len(hypothesis))
        rec = max(rec, lcs / len(r))
    if prec == 0 or rec == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * prec * rec / (rec + b2 * prec)


def rouge_l(corpus, beta: float = ROUGE_BETA) -> float:
    pairs = _pairs(corpus)
    if not pairs:
        return 0.0
    return sum(rouge_l_pair(p.hypothesis, p.references, beta) for p in pairs) / len(pairs)


def cider(corpus, max_n: int = 4) -> float:
    """CIDEr: 10 x mean over n-gram orders of tf-idf cosine, averaged over references.

    Document frequency counts the reference sets containing an n-gram. With a
    single reference set every idf is zero and so is the score.
    """
    pairs = _pairs(corpus)
    if not pairs:
        return 0.0

    def counts(tokens: Tokens) -> Counter:
        c: Counter = Counter()
        for n in range(1, max_n + 1):
            c.update(ngrams(tokens, n))
        return c

    if len({p.references for p in pairs}) < 2:
        warnings.warn("CIDEr needs at least two distinct reference sets", DegenerateIdf, stacklevel=2)
    ref_counts = [[counts(r) for r in p.references] for p in pairs]
    df: Counter = Counter()
    for refs in ref_counts:
        df.update(set().union(*refs))
    log_n = math.log(len(pairs))

    def vec(c: Counter):
        v = [dict() for _ in range(max_n)]
        norm = [0.0] * max_n
        for g, tf in c.items():
            w = tf * (log_n - math.log(max(1.0, df[g])))
            v[len(g) - 1][g] = w
            norm[len(g) - 1] += w * w
        return v, [math.sqrt(x) for x in norm]

    total = 0.0
    for p, refs in zip(pairs, ref_counts):
        hv, hn = vec(counts(p.hypothesis))
        acc = 0.0
        for rc in refs:
            rv, rn = vec(rc)
            for n in range(max_n):
                dot = sum(w * rv[n].get(g, 0.0) for g, w in hv[n].items())
                if hn[n] and rn[n]:
                    dot /= hn[n] * rn[n]
                acc += dot
        total += 10.0 * acc / (max_n * len(refs))
    return total / len(pairs)


def edit_distance(hyp: Tokens, ref: Tokens) -> int:
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i]
        for j, h in enumerate(hyp, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def strip_punctuation(tokens: Tokens) -> list[str]:
    return [t for t in tokens if not PUNCT_RE.fullmatch(t)]


def wer(hypothesis: Tokens, reference: Tokens, ignore_punctuation: bool = False) -> float:
    """Token Levenshtein distance divided by reference length."""
    if ignore_punctuation:
        hypothesis, reference = strip_punctuation(hypothesis), strip_punctuation(reference)
    if not reference:
        raise ValueError("empty reference")
    return edit_distance(hypothesis, reference) / len(reference)


def corpus_wer(pairs: Iterable[tuple[Tokens, Tokens]], ignore_punctuation: bool = False) -> float:
    """Total edits over total reference tokens."""
    edits = length = 0
    for hyp, ref in pairs:
        if ignore_punctuation:
            hyp, ref = strip_punctuation(hyp), strip_punctuation(ref)
        if not ref:
            raise ValueError("empty reference")
        edits += edit_distance(hyp, ref)
        length += len(ref)
    return edits / length if length else 0.0


@dataclass(frozen=True)
class STTRResult:
    value: float
    segments: int
    discarded: int
    fallback: bool


def sttr_details(tokens: Tokens, segment: int = 1000) -> STTRResult:
    if not tokens:
        raise ValueError("empty token sequence")
    n_seg = len(tokens) // segment
    if n_seg == 0:
        return STTRResult(len(set(tokens)) / len(tokens), 0, 0, True)
    ratios = [len(set(tokens[k * segment : (k + 1) * segment])) / segment for k in range(n_seg)]
    return STTRResult(sum(ratios) / n_seg, n_seg, len(tokens) - n_seg * segment, False)


def sttr(tokens: Tokens, segment: int = 1000) -> float:
    """Standardized type-token ratio over full segments; plain TTR if too short."""
    return sttr_details(tokens, segment).value


def evaluate(corpus, with_wer: bool = False) -> MetricReport:
    pairs = _pairs(corpus)
    w = None
    if with_wer:
        w = corpus_wer((p.hypothesis, p.references[0]) for p in pairs)
    return MetricReport(bleu(pairs), nist(pairs), rouge_l(pairs), cider(pairs), w)
