"""Loading labeled multimodal posts, tweet-style text preprocessing, and splits.

The on-disk corpus format is UTF-8 TSV with header
``post_id\ttext\timage_ids\tlabel\tevent``; ``image_ids`` is a comma-joined
list (may be empty) and ``label`` is one of ``informative`` /
``not_informative``. Stopword files hold one lowercase word per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

LABEL_INFORMATIVE = 1
LABEL_NOT_INFORMATIVE = 0

LABEL_NAMES = {"informative": LABEL_INFORMATIVE, "not_informative": LABEL_NOT_INFORMATIVE}
LABEL_STRINGS = {v: k for k, v in LABEL_NAMES.items()}

CORPUS_HEADER = ("post_id", "text", "image_ids", "label", "event")

URL_RE = re.compile(r"(?:https?://|www\.)\S+")
MENTION_RE = re.compile(r"@\w+")
# Uppercase-only on purpose: processed tokens are lowercase, so re-running
# preprocess on joined tokens can never re-trigger the retweet rule.
RT_PREFIX_RE = re.compile(r"^\s*RT\b[:\s]*")
SYMBOL_RE = re.compile(r"[\W_]+", re.UNICODE)


class CorpusFormatError(ValueError):
    """Raised when a posts file violates the documented TSV contract."""


@dataclass(frozen=True)
class Post:
    """One social-media item: text, optional image references, binary label."""

    post_id: str
    raw_text: str
    image_ids: tuple[str, ...]
    label: int
    event: str


@dataclass(frozen=True)
class Corpus:
    posts: tuple[Post, ...]
    label_counts: dict[int, int]

    @classmethod
    def from_posts(cls, posts) -> "Corpus":
        posts = tuple(posts)
        counts = {LABEL_INFORMATIVE: 0, LABEL_NOT_INFORMATIVE: 0}
        for p in posts:
            counts[p.label] += 1
        return cls(posts=posts, label_counts=counts)

    def __len__(self) -> int:
        return len(self.posts)


@dataclass(frozen=True)
class TokenizedDoc:
    """Preprocessed token list plus pre-cleaning word/character counts."""

    post_id: str
    tokens: tuple[str, ...]
    raw_word_count: int
    raw_char_count: int


@dataclass(frozen=True)
class SplitIndices:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratio: float


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a stopword file (one word per line); defaults to the packaged list."""
    if path is None:
        text = resources.files("crisisfilter").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_corpus(path: str | Path) -> Corpus:
    """Load a labeled posts TSV.

    Malformed rows are fatal: a missing or unknown label, a duplicate
    post_id, or a wrong field count raises CorpusFormatError naming the
    offending line (header is line 1).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"posts file not found: {path}")
    posts: list[Post] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != CORPUS_HEADER:
            raise CorpusFormatError(
                f"{path}: line 1: bad header {header!r}, expected {list(CORPUS_HEADER)}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(CORPUS_HEADER):
                raise CorpusFormatError(
                    f"{path}: line {lineno}: expected {len(CORPUS_HEADER)} fields, got {len(fields)}"
                )
            post_id, text, image_ids, label, event = fields
            if not post_id:
                raise CorpusFormatError(f"{path}: line {lineno}: empty post_id")
            if post_id in seen_ids:
                raise CorpusFormatError(f"{path}: line {lineno}: duplicate post_id {post_id!r}")
            if label not in LABEL_NAMES:
                raise CorpusFormatError(
                    f"{path}: line {lineno}: unknown label {label!r}, expected one of {sorted(LABEL_NAMES)}"
                )
            seen_ids.add(post_id)
            images = tuple(i for i in image_ids.split(",") if i)
            posts.append(Post(post_id, text, images, LABEL_NAMES[label], event))
    return Corpus.from_posts(posts)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the same TSV format load_corpus reads (round-trips)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("\t".join(CORPUS_HEADER) + "\n")
        for p in corpus.posts:
            text = re.sub(r"[\t\n\r]+", " ", p.raw_text)
            fh.write(
                "\t".join([p.post_id, text, ",".join(p.image_ids), LABEL_STRINGS[p.label], p.event])
                + "\n"
            )


def preprocess(raw_text: str, stopwords: frozenset[str] | set[str], post_id: str = "") -> TokenizedDoc:
    """Clean one post's text into tokens.

    Fixed order: record raw counts, strip URLs, strip the leading retweet
    marker and @-mentions, strip non-alphanumeric symbols, lowercase,
    whitespace-tokenize, drop stopwords. Raw counts are taken on the
    untouched text (whitespace token count and unicode character count).
    """
    raw_word_count = len(raw_text.split())
    raw_char_count = len(raw_text)
    text = URL_RE.sub(" ", raw_text)
    text = RT_PREFIX_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    text = SYMBOL_RE.sub(" ", text)
    tokens = tuple(t for t in text.lower().split() if t not in stopwords)
    return TokenizedDoc(
        post_id=post_id,
        tokens=tokens,
        raw_word_count=raw_word_count,
        raw_char_count=raw_char_count,
    )


def tokenize_corpus(corpus: Corpus, stopwords: frozenset[str] | set[str]) -> list[TokenizedDoc]:
    return [preprocess(p.raw_text, stopwords, post_id=p.post_id) for p in corpus.posts]


def split(corpus: Corpus, ratio: float, seed: int) -> SplitIndices:
    """Seeded shuffled train/test split of the corpus load order.

    |train| = round(ratio * N). Same (corpus, ratio, seed) always yields the
    same split.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    if len(corpus) == 0:
        raise ValueError("cannot split an empty corpus")
    ids = [p.post_id for p in corpus.posts]
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = round(ratio * len(ids))
    train_ids = tuple(ids[i] for i in perm[:n_train])
    test_ids = tuple(ids[i] for i in perm[n_train:])
    return SplitIndices(train_ids=train_ids, test_ids=test_ids, seed=seed, ratio=ratio)
