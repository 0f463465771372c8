"""Synthetic desk-scale multimodal fixtures.

Generates a labeled posts file plus matching embedding and image-feature
files with a controlled signal layout: a weak surface-word signal (reachable
by bag-of-words/tf-idf), a synonym-cluster signal expressed through many
rare words that share an embedding direction (reachable only through pooled
embeddings), and an independent image-space signal. Informative posts also
run longer, so the count features carry a little signal too.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Post, save_corpus
from .image_features import ImageFeatureTable, save_image_features
from .text_features import EmbeddingTable, save_embeddings

_SYLLABLES = [
    "ba", "co", "da", "fe", "gi", "ho", "ju", "ka", "lo", "me",
    "ni", "po", "qua", "ri", "su", "ta", "vu", "wa", "xe", "zo",
]


@dataclass(frozen=True)
class SynthSettings:
    n_posts: int = 2000
    seed: int = 13
    embed_dim: int = 50
    image_dim: int = 64
    n_common_words: int = 300
    n_weak_words: int = 24
    n_cluster_words: int = 600
    informative_rate: float = 0.55
    cluster_word_prob: float = 0.85  # informative posts carrying cluster words
    cluster_embed_coherence: float = 0.75
    weak_signal_tilt: float = 2.2  # frequency multiplier of weak words in positives
    image_strength: float = 1.4
    image_noise: float = 1.0
    missing_image_rate: float = 0.08
    two_image_rate: float = 0.07
    oov_rate: float = 0.1  # vocabulary words deliberately absent from the embedding table
    event: str = "synthstorm"


def _make_word(rng: np.random.Generator, n_syll: int) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(n_syll))


def _word_pool(rng: np.random.Generator, count: int, n_syll: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < count:
        w = _make_word(rng, n_syll)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def generate(settings: SynthSettings = SynthSettings()):
    """Build (corpus, embedding table, image table) in memory."""
    rng = np.random.default_rng(settings.seed)
    common = _word_pool(rng, settings.n_common_words, 2)
    weak = _word_pool(rng, settings.n_weak_words, 3)
    cluster = _word_pool(rng, settings.n_cluster_words, 4)
    fillers = ["the", "a", "and", "of", "to", "in", "is", "it", "for", "on"]

    # zipf-ish draw over common words
    common_p = 1.0 / np.arange(1, len(common) + 1)
    common_p /= common_p.sum()

    def unit(v: np.ndarray) -> np.ndarray:
        return v / np.linalg.norm(v)

    cluster_dir = unit(rng.standard_normal(settings.embed_dim))
    vectors: dict[str, np.ndarray] = {}
    coh = settings.cluster_embed_coherence
    for w in common + weak:
        if rng.random() >= settings.oov_rate:
            vectors[w] = unit(rng.standard_normal(settings.embed_dim))
    for w in cluster:
        if rng.random() >= settings.oov_rate:
            noise = unit(rng.standard_normal(settings.embed_dim))
            vectors[w] = unit(coh * cluster_dir + (1.0 - coh) * noise)

    image_dir = rng.standard_normal(settings.image_dim)
    image_dir /= np.linalg.norm(image_dir)

    posts: list[Post] = []
    image_vectors: dict[str, np.ndarray] = {}
    for i in range(settings.n_posts):
        label = int(rng.random() < settings.informative_rate)
        n_words = 3 + rng.poisson(9 + (4 if label else 0))

        words: list[str] = []
        for _ in range(n_words):
            r = rng.random()
            if r < 0.25:
                words.append(str(rng.choice(fillers)))
            elif r < 0.40:
                tilt = settings.weak_signal_tilt if label else 1.0
                p = np.ones(len(weak))
                p[: len(weak) // 2] *= tilt  # first half of the weak pool favors positives
                p[len(weak) // 2 :] *= settings.weak_signal_tilt / tilt
                p /= p.sum()
                words.append(str(rng.choice(weak, p=p)))
            else:
                words.append(str(rng.choice(common, p=common_p)))
        if label and rng.random() < settings.cluster_word_prob:
            for _ in range(int(rng.integers(1, 3))):
                words.append(str(rng.choice(cluster)))
        elif not label and rng.random() < 0.1:
            words.append(str(rng.choice(cluster)))
        rng.shuffle(words)

        # social-media noise the preprocessor must strip
        text = " ".join(words)
        if rng.random() < 0.25:
            text = f"RT @user{rng.integers(100)}: " + text
        if rng.random() < 0.3:
            text += f" http://t.co/{_make_word(rng, 2)}"
        if rng.random() < 0.2:
            text += " #" + (str(rng.choice(common[:50])) if rng.random() < 0.7 else "news")
        if rng.random() < 0.3:
            text = text.replace(" ", ", ", 1)

        post_id = f"p{i:05d}"
        u = rng.random()
        if u < settings.missing_image_rate:
            image_ids: tuple[str, ...] = ()
        elif u < settings.missing_image_rate + settings.two_image_rate:
            image_ids = (f"{post_id}_img0", f"{post_id}_img1")
        else:
            image_ids = (f"{post_id}_img0",)
        sign = 1.0 if label else -1.0
        for img in image_ids:
            image_vectors[img] = (
                sign * settings.image_strength * image_dir
                + settings.image_noise * rng.standard_normal(settings.image_dim)
            )
        posts.append(
            Post(
                post_id=post_id,
                raw_text=text,
                image_ids=image_ids,
                label=label,
                event=settings.event,
            )
        )

    corpus = Corpus.from_posts(posts)
    table = EmbeddingTable(dim=settings.embed_dim, vectors=vectors)
    images = ImageFeatureTable(dim=settings.image_dim, vectors=image_vectors)
    return corpus, table, images


def write_fixtures(out_dir: str | Path, settings: SynthSettings = SynthSettings()) -> dict[str, Path]:
    """Generate and write the full fixture set; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus, table, images = generate(settings)
    paths = {
        "posts": out / "posts.tsv",
        "embeddings": out / "embeddings.txt",
        "image_features": out / "image_features.txt",
        "stopwords": out / "stopwords.txt",
    }
    save_corpus(corpus, paths["posts"])
    save_embeddings(table, paths["embeddings"])
    save_image_features(images, paths["image_features"])
    from importlib import resources

    paths["stopwords"].write_text(
        resources.files("crisisfilter").joinpath("data/stopwords.txt").read_text("utf-8"),
        encoding="utf-8",
    )
    return paths
