import math
import random

import pytest

from biaseval.core import Text
from biaseval.metrics.ngram import (IdfTable, NGramProfile, bleu, cider,
                                    meteor_lite, rouge_l, rouge_n, rouge_su4,
                                    simple_stem, ter)

T = Text


def test_ngram_profile_total():
    for n in range(1, 5):
        prof = NGramProfile.of(T("a b c d"), n)
        assert prof.total == max(0, 4 - n + 1)
    assert NGramProfile.of(T("a"), 3).total == 0


# --- BLEU -------------------------------------------------------------------

def test_bleu_identical():
    t = "the quick brown fox jumps over"
    assert bleu(T(t), [T(t)], max_n=4) == 1.0


def test_bleu_disjoint_unsmoothed_is_zero():
    assert bleu(T("aa bb cc"), [T("dd ee ff")], smoothing="none") == 0.0


def test_bleu_disjoint_epsilon_is_tiny_constant():
    a = bleu(T("aa"), [T("dd")])
    b = bleu(T("zz"), [T("qq")])
    assert 0.0 < a < 1e-8
    assert a == b  # same token lengths, same zero overlap


def test_bleu_hand_counted_golden():
    # p1 = 3/4, p2 = 2/3, BP = 1 (hyp longer than ref)
    value = bleu(T("the cat sat down"), [T("the cat sat")], max_n=2)
    assert value == pytest.approx(math.sqrt(0.75 * (2 / 3)), abs=1e-12)
    assert value == pytest.approx(0.7071, abs=1e-4)


def test_bleu_empty_hypothesis():
    assert bleu(T(""), [T("a b")]) == 0.0


def test_bleu_requires_reference():
    with pytest.raises(ValueError):
        bleu(T("a"), [])


def test_bleu_multi_ref_clipping():
    # "a a" gets both unigrams credited against a reference containing "a a"
    assert bleu(T("a a"), [T("a b"), T("a a")], max_n=1) == 1.0


def test_bleu_brevity_penalty():
    # identical content but hypothesis shorter than the reference
    value = bleu(T("the cat"), [T("the cat sat")], max_n=2)
    assert value == pytest.approx(math.exp(1 - 3 / 2), abs=1e-12)


# --- ROUGE ------------------------------------------------------------------

def test_rouge_identical():
    t = "four tokens exactly here"
    assert rouge_n(T(t), [T(t)], 1) == 1.0
    assert rouge_n(T(t), [T(t)], 2) == 1.0
    assert rouge_l(T(t), [T(t)]) == 1.0
    assert rouge_su4(T(t), [T(t)]) == 1.0


def test_rouge_disjoint():
    h, r = T("aa bb cc"), T("dd ee ff")
    assert rouge_n(h, [r], 1) == 0.0
    assert rouge_l(h, [r]) == 0.0
    assert rouge_su4(h, [r]) == 0.0


def test_rouge_l_hand_lcs():
    # LCS("a b c d", "a c d e") = 3 -> P = R = 3/4 -> F1 = 0.75
    assert rouge_l(T("a b c d"), [T("a c d e")]) == 0.75


def test_rouge_f1_symmetric_single_ref():
    h, r = T("a b c d"), T("a c d e f")
    for fn in (lambda x, y: rouge_n(x, [y], 1),
               lambda x, y: rouge_n(x, [y], 2),
               lambda x, y: rouge_l(x, [y]),
               lambda x, y: rouge_su4(x, [y])):
        assert fn(h, r) == fn(r, h)


def test_rouge_multi_ref_is_max():
    h = T("a b c")
    refs = [T("x y z"), T("a b q")]
    assert rouge_n(h, refs, 1) == rouge_n(h, [refs[1]], 1)


def test_rouge_su4_counts_unigrams():
    # no shared bigram but one shared unigram
    assert rouge_su4(T("a x"), [T("y a")]) > 0.0


def test_rouge_empty_inputs():
    assert rouge_n(T(""), [T("a")], 1) == 0.0
    assert rouge_l(T(""), [T("")]) == 0.0


# --- METEOR-lite ------------------------------------------------------------

def test_meteor_identical_penalty_formula():
    for n in (2, 5, 9):
        t = " ".join(f"tok{i}" for i in range(n))
        expected = 1.0 - 0.5 * (1.0 / n) ** 3
        assert meteor_lite(T(t), [T(t)]) == pytest.approx(expected, abs=1e-12)


def test_meteor_disjoint():
    assert meteor_lite(T("aa bb"), [T("cc dd")]) == 0.0


def test_meteor_synonym_stage():
    syn = {"woman": 0, "female": 0}
    # both unigrams align (one exact, one synonym), single chunk
    score = meteor_lite(T("a woman"), [T("a female")], synonyms=syn)
    assert score == pytest.approx(1.0 - 0.5 * (1 / 2) ** 3, abs=1e-12)
    assert meteor_lite(T("a woman"), [T("a female")]) < score


def test_meteor_stem_stage():
    with_stem = meteor_lite(T("the cats"), [T("the cat")], stemmer="simple")
    without = meteor_lite(T("the cats"), [T("the cat")], stemmer="none")
    assert with_stem > without


def test_meteor_recall_weight():
    # one of two hyp tokens matches the single-token reference:
    # P = 1/2, R = 1, Fmean = 10PR/(R+9P) = 10/11, one chunk of one match
    score = meteor_lite(T("a b"), [T("a")], stemmer="none")
    assert score == pytest.approx((10 * 0.5) / (1 + 4.5) * 0.5, abs=1e-12)


def test_simple_stem():
    assert simple_stem("cats") == "cat"
    assert simple_stem("ladies") == "lady"
    assert simple_stem("glass") == "glass"
    assert simple_stem("bus") == "bus"


# --- TER --------------------------------------------------------------------

def test_ter_identical():
    assert ter(T("a b c"), [T("a b c")]) == 0.0


def test_ter_empty_hypothesis():
    assert ter(T(""), [T("a b c")]) == 1.0


def test_ter_shift():
    # one shift repairs the swap: 1 edit / 2 reference tokens
    assert ter(T("b a"), [T("a b")]) == 0.5


def test_ter_substitution():
    assert ter(T("a x c"), [T("a b c")]) == pytest.approx(1 / 3)


def test_ter_multi_ref_min():
    assert ter(T("a b"), [T("x y z"), T("a b")]) == 0.0


def test_ter_empty_reference_is_error():
    with pytest.raises(ValueError):
        ter(T("a"), [T("")])


def test_ter_shift_of_longer_phrase():
    # moving the two-token phrase "c d" once beats character edits
    assert ter(T("c d a b"), [T("a b c d")]) == pytest.approx(1 / 4)


# --- CIDEr ------------------------------------------------------------------

def _toy_idf():
    docs = [[T("the cat sat on the mat")], [T("a dog ran in the park")]]
    return IdfTable.from_reference_sets(docs)


def test_cider_identical_max_similarity():
    idf = _toy_idf()
    s = T("the cat sat on the mat")
    assert cider(s, [s], idf) == pytest.approx(10.0, abs=1e-9)


def test_cider_disjoint():
    idf = _toy_idf()
    assert cider(T("zz qq pp"), [T("rr ss tt")], idf) == 0.0


def test_cider_hand_computed_unigram():
    # Two-document corpus; restrict to unigrams so the numbers are hand-sized.
    docs = [[T("a b")], [T("a c")]]
    idf = IdfTable.from_reference_sets(docs, max_n=1)
    # idf: a -> log(2/2) = 0, b and c -> log(2/1)
    w = math.log(2.0)
    # hyp "a b" vs ref "a c": vectors (a:0, b:w) and (a:0, c:w) share nothing
    # with nonzero weight -> cosine 0; equal lengths -> penalty 1
    assert cider(T("a b"), [T("a c")], idf, max_n=1) == 0.0
    # hyp "b" vs ref "a b": dot = w*w, norms w and w -> cosine 1, penalty
    # exp(-1/72)
    expected = 10.0 * math.exp(-1.0 / 72.0)
    assert cider(T("b"), [T("a b")], idf, max_n=1) == \
        pytest.approx(expected, abs=1e-12)


def test_cider_empty_idf_is_error():
    with pytest.raises(ValueError):
        cider(T("a"), [T("a")], IdfTable(document_frequencies={}, num_docs=1))


def test_idf_table_roundtrip(tmp_path):
    idf = _toy_idf()
    path = tmp_path / "idf.json"
    idf.save(path)
    loaded = IdfTable.load(path)
    assert loaded.num_docs == idf.num_docs
    assert loaded.document_frequencies == idf.document_frequencies


def test_idf_frequency_bound():
    with pytest.raises(ValueError):
        IdfTable(document_frequencies={"a": 3}, num_docs=2)


# --- bijective renaming invariance ------------------------------------------

def _rename(tokens, mapping):
    return " ".join(mapping[t] for t in tokens)


def test_renaming_invariance_counting_metrics():
    rng = random.Random(4)
    vocab = [f"w{i}" for i in range(12)]
    fresh = [f"v{i}" for i in range(12)]
    for trial in range(25):
        hyp = " ".join(rng.choices(vocab, k=rng.randint(1, 9)))
        refs = [" ".join(rng.choices(vocab, k=rng.randint(1, 9)))
                for _ in range(rng.randint(1, 3))]
        target = fresh[:]
        rng.shuffle(target)
        mapping = dict(zip(vocab, target))
        hyp2 = _rename(hyp.split(), mapping)
        refs2 = [_rename(r.split(), mapping) for r in refs]
        h, h2 = T(hyp), T(hyp2)
        rs, rs2 = [T(r) for r in refs], [T(r) for r in refs2]
        assert bleu(h, rs) == bleu(h2, rs2)
        assert rouge_n(h, rs, 1) == rouge_n(h2, rs2, 1)
        assert rouge_n(h, rs, 2) == rouge_n(h2, rs2, 2)
        assert rouge_l(h, rs) == rouge_l(h2, rs2)
        assert rouge_su4(h, rs) == rouge_su4(h2, rs2)
        assert ter(h, rs) == ter(h2, rs2)
        # METEOR with exact-only matching is also purely positional
        assert meteor_lite(h, rs, stemmer="none") == \
            meteor_lite(h2, rs2, stemmer="none")


def test_renaming_invariance_cider_with_renamed_idf():
    rng = random.Random(9)
    vocab = [f"w{i}" for i in range(8)]
    mapping = {w: f"v{i}" for i, w in enumerate(vocab)}
    docs = [[T(" ".join(rng.choices(vocab, k=6)))] for _ in range(4)]
    docs2 = [[T(_rename(d[0].tokens, mapping))] for d in docs]
    idf = IdfTable.from_reference_sets(docs)
    idf2 = IdfTable.from_reference_sets(docs2)
    hyp = " ".join(rng.choices(vocab, k=5))
    ref = " ".join(rng.choices(vocab, k=6))
    a = cider(T(hyp), [T(ref)], idf)
    b = cider(T(_rename(hyp.split(), mapping)),
              [T(_rename(ref.split(), mapping))], idf2)
    assert a == pytest.approx(b, abs=1e-12)


def test_score_ranges():
    rng = random.Random(11)
    vocab = ["a", "b", "c", "d"]
    for _ in range(40):
        h = T(" ".join(rng.choices(vocab, k=rng.randint(1, 6))))
        r = [T(" ".join(rng.choices(vocab, k=rng.randint(1, 6))))]
        assert 0.0 <= bleu(h, r) <= 1.0
        assert 0.0 <= rouge_n(h, r, 1) <= 1.0
        assert 0.0 <= rouge_l(h, r) <= 1.0
        assert 0.0 <= rouge_su4(h, r) <= 1.0
        assert 0.0 <= meteor_lite(h, r) <= 1.0
        assert ter(h, r) >= 0.0
