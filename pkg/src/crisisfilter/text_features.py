"""Text feature families: bag-of-words, tf-idf, pooled word embeddings, counts.

The vocabulary and all document-frequency statistics come from training
documents only; transforming unseen documents silently skips out-of-vocabulary
tokens and never grows the vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedDoc

TF_MODES = ("length_norm", "raw_count")


@dataclass(frozen=True)
class Vocabulary:
    """Training vocabulary: dense word indices plus document frequencies."""

    word_to_index: dict[str, int]
    doc_freq: np.ndarray  # per-index count of training docs containing the word
    n_docs: int

    def __len__(self) -> int:
        return len(self.word_to_index)


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs with no explicit zeros."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices) and (
            np.any(np.diff(self.indices) <= 0) or self.indices[-1] >= self.dim or self.indices[0] < 0
        ):
            raise ValueError("indices must be strictly increasing and inside [0, dim)")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class EmbeddingTable:
    """Pre-trained word vectors, all of one fixed dimension."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)


def build_vocab(train_docs: list[TokenizedDoc]) -> Vocabulary:
    """Index every distinct training token in first-appearance order.

    doc_freq counts documents containing a word, not occurrences.
    """
    if not train_docs:
        raise ValueError("build_vocab needs at least one document")
    word_to_index: dict[str, int] = {}
    doc_freq: list[int] = []
    for doc in train_docs:
        seen: set[str] = set()
        for w in doc.tokens:  # token order, not set order: index assignment must
            if w in seen:  # not depend on the process hash seed
                continue
            seen.add(w)
            idx = word_to_index.get(w)
            if idx is None:
                word_to_index[w] = len(doc_freq)
                doc_freq.append(1)
            else:
                doc_freq[idx] += 1
    return Vocabulary(
        word_to_index=word_to_index,
        doc_freq=np.asarray(doc_freq, dtype=np.int64),
        n_docs=len(train_docs),
    )


def _counts(doc: TokenizedDoc, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    pairs = sorted(
        (vocab.word_to_index[w], c)
        for w, c in Counter(doc.tokens).items()
        if w in vocab.word_to_index
    )
    if not pairs:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    idx, cnt = zip(*pairs)
    return np.asarray(idx, dtype=np.int64), np.asarray(cnt, dtype=np.float64)


def bow_vector(doc: TokenizedDoc, vocab: Vocabulary) -> SparseVector:
    """Occurrence counts over the training vocabulary; OOV tokens skipped."""
    idx, cnt = _counts(doc, vocab)
    return SparseVector(dim=len(vocab), indices=idx, values=cnt)


def tfidf_vector(doc: TokenizedDoc, vocab: Vocabulary, tf_mode: str = "length_norm") -> SparseVector:
    """tf-idf weights: tf(w) * ln(N / df(w)).

    tf is the within-document count divided by the document's total token
    count (including out-of-vocabulary tokens); tf_mode="raw_count" uses the
    bare count instead. Words present in every training document get weight 0
    and are omitted from the output.
    """
    if tf_mode not in TF_MODES:
        raise ValueError(f"tf_mode must be one of {TF_MODES}, got {tf_mode!r}")
    idx, cnt = _counts(doc, vocab)
    if len(idx) == 0:
        return SparseVector(dim=len(vocab), indices=idx, values=cnt)
    tf = cnt / len(doc.tokens) if tf_mode == "length_norm" else cnt
    idf = np.log(vocab.n_docs / vocab.doc_freq[idx])
    weights = tf * idf
    keep = weights != 0.0
    return SparseVector(dim=len(vocab), indices=idx[keep], values=weights[keep])


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a word-vector text file: one ``word v1 v2 ... vD`` line per word.

    The dimension is taken from the first line; ragged or non-numeric lines
    are fatal and name the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"embedding file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ValueError(f"{path}: line {lineno}: expected 'word v1 ... vD'")
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: non-numeric value ({exc})") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(
                    f"{path}: line {lineno}: vector length {len(vec)} != table dim {dim}"
                )
            vectors[word] = vec
    if dim is None:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, vectors=vectors)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write a table back in the text format load_embeddings reads (exact round-trip)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for word, vec in table.vectors.items():
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def pool_embeddings(doc: TokenizedDoc, table: EmbeddingTable) -> np.ndarray:
    """Mean of the embeddings of in-table tokens, counted with multiplicity.

    With no in-table tokens the pooled vector stays all-zero.
    """
    acc = np.zeros(table.dim)
    n = 0
    for w in doc.tokens:
        vec = table.vectors.get(w)
        if vec is not None:
            acc += vec
            n += 1
    return acc / n if n else acc


def handcrafted_features(doc: TokenizedDoc) -> np.ndarray:
    """Two count features of the raw text: (word count, character count)."""
    return np.array([doc.raw_word_count, doc.raw_char_count], dtype=np.float64)


def bow_matrix(docs: list[TokenizedDoc], vocab: Vocabulary) -> sp.csr_matrix:
    return _stack_sparse([bow_vector(d, vocab) for d in docs], len(vocab))


def tfidf_matrix(
    docs: list[TokenizedDoc], vocab: Vocabulary, tf_mode: str = "length_norm"
) -> sp.csr_matrix:
    return _stack_sparse([tfidf_vector(d, vocab, tf_mode) for d in docs], len(vocab))


def embedding_matrix(docs: list[TokenizedDoc], table: EmbeddingTable) -> np.ndarray:
    return np.vstack([pool_embeddings(d, table) for d in docs]) if docs else np.zeros((0, table.dim))


def handcrafted_matrix(docs: list[TokenizedDoc]) -> np.ndarray:
    return (
        np.vstack([handcrafted_features(d) for d in docs]) if docs else np.zeros((0, 2))
    )


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Versioned text serialization, one ``word doc_freq`` line per index."""
    order = sorted(vocab.word_to_index.items(), key=lambda kv: kv[1])
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("vocabulary v1\n")
        fh.write(f"n_docs {vocab.n_docs}\n")
        for word, idx in order:
            fh.write(f"{word} {vocab.doc_freq[idx]}\n")


def load_vocab(path: str | Path) -> Vocabulary:
    with Path(path).open("r", encoding="utf-8") as fh:
        if fh.readline().strip() != "vocabulary v1":
            raise ValueError(f"{path}: unknown vocabulary format")
        n_docs = int(fh.readline().split()[1])
        word_to_index: dict[str, int] = {}
        doc_freq: list[int] = []
        for line in fh:
            word, df = line.split()
            word_to_index[word] = len(doc_freq)
            doc_freq.append(int(df))
    return Vocabulary(
        word_to_index=word_to_index, doc_freq=np.asarray(doc_freq, dtype=np.int64), n_docs=n_docs
    )


def _stack_sparse(rows: list[SparseVector], dim: int) -> sp.csr_matrix:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(r.indices)
    indices = np.concatenate([r.indices for r in rows]) if rows else np.empty(0, dtype=np.int64)
    data = np.concatenate([r.values for r in rows]) if rows else np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), dim))
