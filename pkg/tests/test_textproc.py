import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from pva.errors import EmptyVocabulary
from pva.textproc import (
    NGRAM_SEP,
    build_vocab,
    fnv1a_64,
    hash_ngram,
    load_stopwords,
    tfidf_vector,
    tokenize,
    word_ngrams,
)


def fnv1a_64_reference(data: bytes) -> int:
    # independent formulation: arbitrary-precision product, reduced at the end of each step
    h = 14695981039346656037
    for byte in data:
        h = ((h ^ byte) * 1099511628211) % 2**64
    return h


class TestTokenize:
    @pytest.mark.parametrize("text, expected", [
        ("Turn ON the lights!", ["turn", "on", "the", "lights"]),
        ("a I x", []),
        ("re: 3D-graphics", ["re", "3d", "graphics"]),
        ("snake_case words", ["snake", "case", "words"]),
        ("Übergröße straße", ["übergröße", "straße"]),
    ])
    def test_examples(self, text, expected):
        assert tokenize(text) == expected

    def test_duplicates_kept(self):
        assert tokenize("go go go") == ["go", "go", "go"]

    def test_stopwords(self):
        sw = load_stopwords()
        assert "the" in sw and len(sw) > 300
        assert tokenize("Turn ON the lights", sw) == ["turn", "lights"]

    def test_stopword_file(self, tmp_path):
        p = tmp_path / "sw.txt"
        p.write_text("Lights\n\nturn\n", encoding="utf-8")
        assert tokenize("Turn ON the lights", load_stopwords(p)) == ["on", "the"]

    @given(st.text())
    def test_tokens_are_lowercase_alnum(self, text):
        for t in tokenize(text):
            assert len(t) >= 2 and t == t.lower() and t.isalnum()


class TestBuildVocab:
    def test_counting(self):
        vocab, _ = build_vocab([["aa", "bb"], ["bb", "cc"]], min_df=1)
        assert vocab.tokens == ("aa", "bb", "cc")
        assert vocab.doc_frequency.tolist() == [1, 2, 1]
        assert vocab.num_documents == 2

    def test_min_df(self):
        vocab, _ = build_vocab([["aa", "bb"], ["bb", "cc"]], min_df=2)
        assert vocab.tokens == ("bb",)

    def test_max_df(self):
        vocab, _ = build_vocab([["aa", "bb"], ["bb", "cc"]], max_df_ratio=0.5)
        assert vocab.tokens == ("aa", "cc")

    def test_max_features_ties_lexicographic(self):
        docs = [["zz", "zz", "yy", "xx"], ["ww", "xx"]]
        # totals: zz 2, xx 2, yy 1, ww 1
        vocab, _ = build_vocab(docs, max_features=3)
        assert vocab.tokens == ("ww", "xx", "zz")

    def test_idf_formula(self):
        vocab, idf = build_vocab([["aa", "bb"], ["bb"], ["bb"]])
        assert vocab.num_documents == 3
        assert idf[vocab.token_to_index["aa"]] == pytest.approx(math.log(4 / 2) + 1, abs=1e-12)
        assert idf[vocab.token_to_index["aa"]] == pytest.approx(1.6931471805599454, abs=1e-12)

    def test_empty_vocabulary(self):
        with pytest.raises(EmptyVocabulary):
            build_vocab([["aa"], ["bb"]], min_df=2)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            build_vocab([["aa"]], min_df=0)
        with pytest.raises(ValueError):
            build_vocab([["aa"]], max_df_ratio=0)

    @given(st.lists(st.lists(st.sampled_from(["aa", "bb", "cc", "dd", "ee"]), min_size=1), min_size=1))
    def test_invariants(self, docs):
        vocab, idf = build_vocab(docs)
        assert set(vocab.tokens) == {t for d in docs for t in d}
        assert sorted(vocab.token_to_index.values()) == list(range(len(vocab)))
        assert np.all(vocab.doc_frequency >= 1) and np.all(vocab.doc_frequency <= vocab.num_documents)
        assert np.all(idf >= 1.0)
        order = np.argsort(vocab.doc_frequency, kind="stable")
        assert np.all(np.diff(idf[order]) <= 1e-15)

    def test_fingerprint_tracks_content(self):
        a, _ = build_vocab([["aa", "bb"]])
        b, _ = build_vocab([["aa", "bb"]])
        c, _ = build_vocab([["aa", "bc"]])
        assert a.fingerprint() == b.fingerprint() != c.fingerprint()


class TestTfidf:
    def test_single_token(self):
        vocab, idf = build_vocab([["aa", "aa"]])
        assert idf[0] == 1.0
        assert tfidf_vector(["aa", "aa"], vocab, idf).entries() == [(0, 1.0)]

    def test_symmetric_pair(self):
        vocab, idf = build_vocab([["aa", "bb"]])
        v = tfidf_vector(["aa", "bb"], vocab, idf)
        np.testing.assert_allclose(v.values, [1 / math.sqrt(2)] * 2, atol=1e-12)
        assert v.values[0] == pytest.approx(0.707107, abs=1e-6)

    def test_out_of_vocabulary(self):
        vocab, idf = build_vocab([["aa", "bb"]])
        v = tfidf_vector(["zz", "yy"], vocab, idf)
        assert len(v) == 0 and v.entries() == []

    def test_matches_dense_formula(self):
        docs = [["aa", "bb", "bb"], ["bb", "cc"], ["cc", "dd", "aa"]]
        vocab, idf = build_vocab(docs)
        dense = np.zeros(len(vocab))
        for t in ["aa", "bb", "bb", "dd", "zz"]:
            if t in vocab.token_to_index:
                dense[vocab.token_to_index[t]] += idf[vocab.token_to_index[t]]
        dense /= np.linalg.norm(dense)
        got = tfidf_vector(["aa", "bb", "bb", "dd", "zz"], vocab, idf).to_dense(len(vocab))
        np.testing.assert_allclose(got, dense, atol=1e-15)

    @given(st.lists(st.sampled_from(["aa", "bb", "cc", "dd", "zz"]), min_size=1))
    def test_unit_norm_and_sorted(self, tokens):
        vocab, idf = build_vocab([["aa", "bb"], ["cc", "dd", "aa"]])
        v = tfidf_vector(tokens, vocab, idf)
        if len(v):
            assert abs(v.norm() - 1.0) < 1e-9
            assert np.all(np.diff(v.indices) > 0)
            assert np.all(v.values != 0) and np.all(np.isfinite(v.values))


class TestNgrams:
    def test_bigrams(self):
        assert word_ngrams(["aa", "bb", "cc"], 2) == [f"aa{NGRAM_SEP}bb", f"bb{NGRAM_SEP}cc"]

    def test_too_short(self):
        assert word_ngrams(["aa"], 2) == []

    def test_max_n_one(self):
        assert word_ngrams(["aa", "bb", "cc"], 1) == []

    def test_trigrams(self):
        got = word_ngrams(["aa", "bb", "cc"], 3)
        assert got == ["aa\x1fbb", "bb\x1fcc", "aa\x1fbb\x1fcc"]


class TestHash:
    @pytest.mark.parametrize("data, expected", [
        # published FNV-1a 64-bit test vectors
        (b"", 0xCBF29CE484222325),
        (b"a", 0xAF63DC4C8601EC8C),
        (b"foobar", 0x85944171F73967E8),
    ])
    def test_published_vectors(self, data, expected):
        assert fnv1a_64(data) == expected

    def test_modulo(self):
        # 0xaf63dc4c8601ec8c = 12638187200555641996
        assert hash_ngram("a", 1000) == 996

    def test_single_bucket(self):
        assert hash_ngram("anything\x1fhere", 1) == 0

    @given(st.text(max_size=40))
    def test_matches_reference(self, text):
        data = text.encode("utf-8")
        assert fnv1a_64(data) == fnv1a_64_reference(data)
        assert hash_ngram(text, 2**21) == fnv1a_64_reference(data) % 2**21

    def test_rejects_zero_buckets(self):
        with pytest.raises(ValueError):
            hash_ngram("a", 0)
