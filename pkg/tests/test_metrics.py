import functools
import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hockeygen.metrics import (
    NIST_BETA,
    DegenerateIdf,
    EvalPair,
    MetricReport,
    bleu,
    cider,
    corpus_wer,
    edit_distance,
    evaluate,
    lcs_length,
    nist,
    rouge_l,
    rouge_l_pair,
    sttr,
    sttr_details,
    wer,
)

T = str.split


# -- independent oracles --------------------------------------------------------


def grams_at(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def nist_oracle(pairs, max_n=5):
    """Doddington NIST written out position by position."""
    refs_all = [r for _, refs in pairs for r in refs]
    total_words = sum(len(r) for r in refs_all)

    def occurrences(g):
        if not g:
            return total_words
        return sum(grams_at(r, len(g)).count(g) for r in refs_all)

    score = 0.0
    for n in range(1, max_n + 1):
        info_sum, hyp_total = 0.0, 0
        for hyp, refs in pairs:
            hyp_g = grams_at(hyp, n)
            hyp_total += len(hyp_g)
            for g in set(hyp_g):
                clip = min(hyp_g.count(g), max(grams_at(r, n).count(g) for r in refs))
                if clip:
                    info_sum += clip * math.log(occurrences(g[:-1]) / occurrences(g), 2)
        if hyp_total:
            score += info_sum / hyp_total
    c = sum(len(h) for h, _ in pairs)
    r = sum(sum(len(x) for x in refs) / len(refs) for _, refs in pairs)
    beta = math.log(0.5) / math.log(1.5) ** 2
    return score * math.exp(beta * math.log(min(c / r, 1.0)) ** 2)


def cider_oracle(pairs, max_n=4):
    """tf-idf vectors over one global n-gram index, cosine per order, x10."""
    index = sorted({g for h, refs in pairs for s in [h, *refs] for n in range(1, max_n + 1) for g in grams_at(s, n)})
    pos = {g: i for i, g in enumerate(index)}
    order = np.array([len(g) for g in index])
    n_docs = len(pairs)
    df = np.zeros(len(index))
    for _, refs in pairs:
        present = {g for r in refs for n in range(1, max_n + 1) for g in grams_at(r, n)}
        for g in present:
            df[pos[g]] += 1
    idf = np.log(n_docs) - np.log(np.maximum(df, 1.0))

    def vec(s):
        v = np.zeros(len(index))
        for n in range(1, max_n + 1):
            for g in grams_at(s, n):
                v[pos[g]] += 1
        return v * idf

    scores = []
    for h, refs in pairs:
        hv = vec(h)
        per_ref = []
        for r in refs:
            rv = vec(r)
            sims = []
            for n in range(1, max_n + 1):
                m = order == n
                a, b = hv[m], rv[m]
                na, nb = np.linalg.norm(a), np.linalg.norm(b)
                sims.append(float(a @ b) / (na * nb) if na and nb else float(a @ b))
            per_ref.append(np.mean(sims))
        scores.append(10 * np.mean(per_ref))
    return float(np.mean(scores))


@functools.lru_cache(maxsize=None)
def lev(a: tuple, b: tuple) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(lev(a[1:], b) + 1, lev(a, b[1:]) + 1, lev(a[1:], b[1:]) + (a[0] != b[0]))


def lcs_brute(a, b):
    for k in range(min(len(a), len(b)), 0, -1):
        subs = set(itertools.combinations(a, k))
        if any(s in subs for s in itertools.combinations(b, k)):
            return k
    return 0


CORPUS = [
    (T("Blues vei voiton Ässistä maalein 4 - 0 ."), [T("Blues vei voiton Ässät:stä maalein 4 - 0 .")]),
    (T("Koski teki maalin ajassa 12.30 ."), [T("Koski iski maalin ajassa 12.30 ."), T("Koski teki 1 - 0 .")]),
    (T("Aho torjui 35 kertaa ."), [T("Aho torjui 35 laukausta ottelussa .")]),
    (T("HIFK voitti Tapparan 3 - 2 jatkoajalla ."), [T("HIFK voitti 3 - 2 jatkoajalla Tapparan .")]),
]


# -- tests ----------------------------------------------------------------------


class TestBleu:
    def test_identity(self):
        assert bleu([(r[0], r) for _, r in CORPUS]) == pytest.approx(1.0)

    def test_brevity_toy(self):
        assert bleu([(T("a b c d e"), [T("a b c d e f")])]) == pytest.approx(math.exp(1 - 6 / 5), abs=1e-12)
        assert bleu([(T("a b c d e"), [T("a b c d e f")])]) == pytest.approx(0.81873, abs=1e-4)

    def test_disjoint(self):
        assert bleu([(T("x y z w"), [T("a b c d")])]) == 0.0

    def test_empty_hypothesis_corpus(self):
        assert bleu([((), [T("a b")])]) == 0.0

    def test_closest_reference_length(self):
        # hyp len 5 with refs of length 6 and 9: r = 6
        one = bleu([(T("a b c d e"), [T("a b c d e f")])])
        two = bleu([(T("a b c d e"), [T("a b c d e f"), T("a b c d e f g h i")])])
        assert one == pytest.approx(two)


class TestNist:
    def test_empty(self):
        assert nist([((), [T("a b")])]) == 0.0

    def test_matches_oracle(self):
        assert nist(CORPUS) == pytest.approx(nist_oracle(CORPUS), abs=1e-10)

    def test_two_sentence_oracle(self):
        pairs = [(T("the cat sat"), [T("the cat sat on the mat")]), (T("a dog ran"), [T("the dog ran away")])]
        assert nist(pairs) == pytest.approx(nist_oracle(pairs), abs=1e-10)

    def test_duplication_invariant(self):
        assert nist(CORPUS + CORPUS) == pytest.approx(nist(CORPUS), abs=1e-10)

    def test_beta_constant(self):
        assert NIST_BETA == pytest.approx(math.log(0.5) / math.log(1.5) ** 2)


class TestRouge:
    def test_identity(self):
        assert rouge_l([(T("a b c"), [T("a b c")])]) == 1.0

    def test_toy_formula(self):
        p, r, b2 = 1.0, 2 / 3, 1.2**2
        expected = (1 + b2) * p * r / (r + b2 * p)
        assert rouge_l([(T("a b"), [T("a c b")])]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.77215, abs=1e-5)

    def test_disjoint(self):
        assert rouge_l([(T("x y"), [T("a b")])]) == 0.0

    def test_multi_reference_max(self):
        single = rouge_l_pair(T("a b c"), [T("a x c")])
        multi = rouge_l_pair(T("a b c"), [T("a x c"), T("a b c d")])
        assert multi >= single

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            EvalPair.of(T("a"), [[]])


class TestCider:
    def test_disjoint(self):
        pairs = [(T("x y"), [T("a b")]), (T("z w"), [T("c d")])]
        assert cider(pairs) == 0.0

    def test_matches_oracle(self):
        assert cider(CORPUS) == pytest.approx(cider_oracle(CORPUS), abs=1e-10)

    def test_scaled_by_ten(self):
        pairs = [(r[0], r[:1]) for _, r in CORPUS]
        assert cider(pairs) == pytest.approx(10.0, abs=1e-10)

    def test_single_reference_set_flagged(self):
        with pytest.warns(DegenerateIdf):
            assert cider([(T("a b"), [T("a b")])]) == 0.0


class TestWer:
    def test_identity(self):
        assert wer(T("a b c"), T("a b c")) == 0.0

    def test_toy(self):
        assert wer(T("a x c"), T("a b c d")) == 0.5

    def test_empty_hypothesis(self):
        assert wer([], T("a b c")) == 1.0

    def test_empty_reference(self):
        with pytest.raises(ValueError):
            wer(T("a"), [])

    def test_ignore_punctuation(self):
        assert wer(T("a b ."), T("a b"), ignore_punctuation=True) == 0.0
        assert wer(T("a b ."), T("a b")) == 0.5

    def test_corpus_wer_pools_edits(self):
        assert corpus_wer([(T("a"), T("a b")), (T("c d e"), T("c d e"))]) == pytest.approx(1 / 5)


class TestSttr:
    def test_two_segments(self):
        seg1 = [f"w{i % 500}" for i in range(1000)]
        seg2 = [f"v{i % 300}" for i in range(1000)]
        assert sttr(seg1 + seg2) == 0.4

    def test_constant(self):
        assert sttr(["a"] * 3000) == pytest.approx(1 / 1000)

    def test_partial_segment_discarded(self):
        d = sttr_details([f"w{i}" for i in range(1500)])
        assert d.segments == 1 and d.discarded == 500 and not d.fallback and d.value == 1.0

    def test_short_fallback(self):
        d = sttr_details(T("a a b"))
        assert d.fallback and d.value == pytest.approx(2 / 3)


def test_report_text_keys():
    r = evaluate(CORPUS, with_wer=True)
    assert isinstance(r, MetricReport)
    assert set(__import__("json").loads(r.to_text())) == {"bleu", "nist", "rouge_l", "cider", "wer"}


# -- properties -------------------------------------------------------------------

words = st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8)
pairs_st = st.lists(st.tuples(words, st.lists(words, min_size=1, max_size=3)), min_size=2, max_size=6)


@given(words, words)
def test_wer_matches_recursive_oracle(h, r):
    assert edit_distance(h, r) == lev(tuple(h), tuple(r))
    assert 0 <= wer(h, r) <= max(1.0, len(h) / len(r))


@given(st.lists(st.sampled_from("abc"), max_size=7), st.lists(st.sampled_from("abc"), max_size=7))
def test_lcs_matches_brute_force(a, b):
    assert lcs_length(a, b) == lcs_brute(a, b)


@given(pairs_st, st.randoms(use_true_random=False))
def test_order_invariance_and_bounds(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateIdf)
        for f in (bleu, nist, rouge_l, cider):
            assert f(shuffled) == pytest.approx(f(pairs), abs=1e-9)
        assert 0 <= bleu(pairs) <= 1 and 0 <= rouge_l(pairs) <= 1
        assert nist(pairs) >= 0 and cider(pairs) >= -1e-12


@given(pairs_st)
def test_oracles_agree(pairs):
    assert nist(pairs) == pytest.approx(nist_oracle(pairs), abs=1e-10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateIdf)
        assert cider(pairs) == pytest.approx(cider_oracle(pairs), abs=1e-10)


@given(words, st.lists(words, min_size=1, max_size=3), words)
def test_added_reference_never_lowers_rouge(h, refs, extra):
    assert rouge_l_pair(h, refs + [extra]) >= rouge_l_pair(h, refs) - 1e-12


@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=10), st.data())
def test_wer_equal_length_substitutions(ref, data):
    idx = data.draw(st.sets(st.integers(0, len(ref) - 1)))
    hyp = [("z" if i in idx else t) for i, t in enumerate(ref)]
    assert wer(hyp, ref) == pytest.approx(len(idx) / len(ref))
