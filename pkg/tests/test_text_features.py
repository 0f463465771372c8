import math

import numpy as np
import pytest

from crisisfilter.corpus import TokenizedDoc
from crisisfilter.text_features import (
    EmbeddingTable,
    Vocabulary,
    bow_matrix,
    bow_vector,
    build_vocab,
    handcrafted_features,
    load_embeddings,
    load_vocab,
    pool_embeddings,
    save_embeddings,
    save_vocab,
    tfidf_vector,
)


def doc(tokens, wc=None, cc=None, post_id="d"):
    return TokenizedDoc(
        post_id=post_id,
        tokens=tuple(tokens),
        raw_word_count=len(tokens) if wc is None else wc,
        raw_char_count=sum(map(len, tokens)) if cc is None else cc,
    )


# ---------------------------------------------------------------------------
# independent oracles


def tfidf_oracle(train_token_lists, tokens, tf_mode="length_norm"):
    """Two-pass brute force: dict doc-frequencies, then per-word tf * idf."""
    df: dict[str, int] = {}
    for toks in train_token_lists:
        for w in sorted(set(toks)):
            df[w] = df.get(w, 0) + 1
    n_docs = len(train_token_lists)
    out: dict[str, float] = {}
    for w in tokens:
        if w not in df:
            continue
        tf = tokens.count(w) / len(tokens) if tf_mode == "length_norm" else float(tokens.count(w))
        out[w] = tf * math.log(n_docs / df[w])
    return {w: v for w, v in out.items() if v != 0.0}


def dense_count_oracle(tokens, vocab):
    dense = np.zeros(len(vocab))
    for w in tokens:
        if w in vocab.word_to_index:
            dense[vocab.word_to_index[w]] += 1
    return dense


def random_corpus(rng, n_docs=50, vocab_cap=200):
    words = [f"w{i}" for i in range(rng.integers(5, vocab_cap))]
    return [
        doc(rng.choice(words, size=rng.integers(1, 30)).tolist(), post_id=f"d{i}")
        for i in range(n_docs)
    ]


# ---------------------------------------------------------------------------
# build_vocab


def test_build_vocab_counts():
    v = build_vocab([doc(["a", "b"]), doc(["b", "c"])])
    assert len(v) == 3
    assert v.n_docs == 2
    df = {w: v.doc_freq[i] for w, i in v.word_to_index.items()}
    assert df == {"a": 1, "b": 2, "c": 1}


def test_build_vocab_doc_frequency_not_term_frequency():
    v = build_vocab([doc(["x", "x", "x"])])
    assert len(v) == 1
    assert v.doc_freq[v.word_to_index["x"]] == 1


def test_build_vocab_first_appearance_order():
    v = build_vocab([doc(["b", "a"]), doc(["c", "a"])])
    assert v.word_to_index == {"b": 0, "a": 1, "c": 2}


def test_build_vocab_random_matches_membership_oracle():
    rng = np.random.default_rng(7)
    docs = random_corpus(rng)
    v = build_vocab(docs)
    for w, i in v.word_to_index.items():
        brute = sum(1 for d in docs if w in d.tokens)
        assert v.doc_freq[i] == brute
    assert v.n_docs == len(docs)


def test_build_vocab_empty_rejected():
    with pytest.raises(ValueError):
        build_vocab([])


# ---------------------------------------------------------------------------
# bow_vector


def test_bow_basic():
    v = build_vocab([doc(["a", "b"])])
    sv = bow_vector(doc(["a", "a", "b"]), v)
    assert sv.indices.tolist() == [0, 1]
    assert sv.values.tolist() == [2.0, 1.0]


def test_bow_oov_only():
    v = build_vocab([doc(["a"])])
    sv = bow_vector(doc(["zz", "yy"]), v)
    assert len(sv.indices) == 0


def test_bow_random_matches_dense_oracle():
    rng = np.random.default_rng(11)
    docs = random_corpus(rng)
    v = build_vocab(docs[:30])
    for d in docs:
        assert np.array_equal(bow_vector(d, v).to_dense(), dense_count_oracle(d.tokens, v))


def test_vocab_size_constant_across_transforms():
    rng = np.random.default_rng(5)
    docs = random_corpus(rng)
    v = build_vocab(docs[:25])
    size = len(v)
    for d in docs[25:]:
        bow_vector(d, v)
        tfidf_vector(d, v)
    assert len(v) == size


# ---------------------------------------------------------------------------
# tfidf_vector


def test_tfidf_everywhere_word_weight_zero():
    docs = [doc(["a", "b"]), doc(["a", "c"])]
    v = build_vocab(docs)
    sv = tfidf_vector(doc(["a"]), v)
    assert v.word_to_index["a"] not in sv.indices  # idf = ln(1) = 0, omitted


def test_tfidf_hand_example():
    docs = [doc(["a", "b"]), doc(["a", "c"])]
    v = build_vocab(docs)
    sv = tfidf_vector(doc(["a", "b"]), v)
    dense = sv.to_dense()
    assert dense[v.word_to_index["a"]] == 0.0
    expected_b = 0.5 * math.log(2.0)  # = 0.34657359027997264
    assert abs(dense[v.word_to_index["b"]] - expected_b) < 1e-12
    assert abs(expected_b - 0.3466) < 5e-5


@pytest.mark.parametrize("tf_mode", ["length_norm", "raw_count"])
def test_tfidf_random_matches_bruteforce_oracle(tf_mode):
    rng = np.random.default_rng(23)
    for trial in range(5):
        docs = random_corpus(rng)
        v = build_vocab(docs)
        for d in docs:
            got = tfidf_vector(d, v, tf_mode)
            want = tfidf_oracle([list(x.tokens) for x in docs], list(d.tokens), tf_mode)
            dense = got.to_dense()
            assert len(got.indices) == len(want)
            for w, val in want.items():
                assert abs(dense[v.word_to_index[w]] - val) <= 1e-9


def test_tfidf_zero_iff_absent_or_everywhere():
    rng = np.random.default_rng(3)
    docs = random_corpus(rng, n_docs=20, vocab_cap=30)
    v = build_vocab(docs)
    for d in docs:
        dense = tfidf_vector(d, v).to_dense()
        counts = dense_count_oracle(d.tokens, v)
        for w, i in v.word_to_index.items():
            expect_zero = counts[i] == 0 or v.doc_freq[i] == v.n_docs
            assert (dense[i] == 0.0) == expect_zero


def test_tf_mass_bounded_by_one():
    rng = np.random.default_rng(9)
    docs = random_corpus(rng, n_docs=30, vocab_cap=40)
    v = build_vocab(docs[:20])
    for d in docs:
        counts = dense_count_oracle(d.tokens, v)
        tf_sum = counts.sum() / len(d.tokens)
        assert tf_sum <= 1.0 + 1e-12
        if all(w in v.word_to_index for w in d.tokens):
            assert abs(tf_sum - 1.0) <= 1e-12


def test_bow_tfidf_same_support_except_idf_zero():
    rng = np.random.default_rng(31)
    docs = random_corpus(rng, n_docs=15, vocab_cap=25)
    v = build_vocab(docs)
    for d in docs:
        bow = set(bow_vector(d, v).indices.tolist())
        tfi = set(tfidf_vector(d, v).indices.tolist())
        zero_idf = {i for i in range(len(v)) if v.doc_freq[i] == v.n_docs}
        assert bow - tfi == bow & zero_idf
        assert tfi <= bow


# ---------------------------------------------------------------------------
# embeddings


def test_load_embeddings_fixture(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("cat 1.0 0.0 2.5 -1.0\ndog 0.5 0.5 0.5 0.5\nfish 0 0 0 1\n", encoding="utf-8")
    t = load_embeddings(p)
    assert t.dim == 4
    assert len(t) == 3
    assert np.allclose(t.vectors["cat"], [1.0, 0.0, 2.5, -1.0])


def test_load_embeddings_ragged_line(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("cat 1 2 3 4\ndog 1 2 3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2"):
        load_embeddings(p)


def test_load_embeddings_non_numeric(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("cat 1 2 x 4\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 1"):
        load_embeddings(p)


def test_embeddings_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    t = EmbeddingTable(dim=6, vectors={f"w{i}": rng.standard_normal(6) for i in range(20)})
    save_embeddings(t, tmp_path / "emb.txt")
    back = load_embeddings(tmp_path / "emb.txt")
    assert back.dim == t.dim
    assert set(back.vectors) == set(t.vectors)
    for w in t.vectors:
        assert np.array_equal(back.vectors[w], t.vectors[w])


def test_pool_embeddings_no_match_is_zero():
    t = EmbeddingTable(dim=3, vectors={"a": np.ones(3)})
    out = pool_embeddings(doc(["x", "y"]), t)
    assert np.array_equal(out, np.zeros(3))


def test_pool_embeddings_single_word():
    vec = np.array([1.0, -2.0, 3.0])
    t = EmbeddingTable(dim=3, vectors={"a": vec})
    assert np.array_equal(pool_embeddings(doc(["a", "zz"]), t), vec)


def test_pool_embeddings_mean():
    t = EmbeddingTable(dim=2, vectors={"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})
    assert np.allclose(pool_embeddings(doc(["a", "b"]), t), [0.5, 0.5])


def test_pool_embeddings_multiplicity():
    t = EmbeddingTable(dim=1, vectors={"a": np.array([1.0]), "b": np.array([4.0])})
    out = pool_embeddings(doc(["a", "a", "b"]), t)
    assert np.allclose(out, [2.0])


def test_pool_embeddings_convex_bounds():
    rng = np.random.default_rng(29)
    t = EmbeddingTable(dim=4, vectors={f"w{i}": rng.standard_normal(4) for i in range(10)})
    for _ in range(50):
        toks = rng.choice([f"w{i}" for i in range(10)], size=rng.integers(1, 8)).tolist()
        out = pool_embeddings(doc(toks), t)
        used = np.array([t.vectors[w] for w in toks])
        assert np.all(out >= used.min(axis=0) - 1e-12)
        assert np.all(out <= used.max(axis=0) + 1e-12)


# ---------------------------------------------------------------------------
# handcrafted


def test_handcrafted_example():
    d = doc(["flood", "houston"], wc=3, cc=16)
    assert np.array_equal(handcrafted_features(d), [3.0, 16.0])


def test_handcrafted_empty():
    assert np.array_equal(handcrafted_features(doc([], wc=0, cc=0)), [0.0, 0.0])


def test_handcrafted_random_matches_counting_oracle():
    from crisisfilter.corpus import preprocess

    rng = np.random.default_rng(41)
    alphabet = list("abc XY.#@!12é")
    for _ in range(100):
        s = "".join(rng.choice(alphabet, size=rng.integers(0, 40)))
        got = handcrafted_features(preprocess(s, set()))
        assert got[0] == len(s.split())
        assert got[1] == len(s)


# ---------------------------------------------------------------------------
# vocab serialization (used by the saved-pipeline bundle)


def test_vocab_roundtrip(tmp_path):
    docs = [doc(["b", "a"]), doc(["c", "a"])]
    v = build_vocab(docs)
    save_vocab(v, tmp_path / "vocab.txt")
    back = load_vocab(tmp_path / "vocab.txt")
    assert back.word_to_index == v.word_to_index
    assert back.n_docs == v.n_docs
    assert np.array_equal(back.doc_freq, v.doc_freq)


def test_bow_matrix_rows_match_vectors():
    rng = np.random.default_rng(19)
    docs = random_corpus(rng, n_docs=12, vocab_cap=20)
    v = build_vocab(docs)
    M = bow_matrix(docs, v)
    assert M.shape == (12, len(v))
    for i, d in enumerate(docs):
        assert np.array_equal(M[i].toarray().ravel(), bow_vector(d, v).to_dense())
