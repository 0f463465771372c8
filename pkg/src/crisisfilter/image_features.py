"""Precomputed per-image CNN feature ingestion and per-post aggregation.

Feature file contract (shared with the offline extractor): UTF-8 text, first
line ``dim <D>``, then one ``image_id v1 ... vD`` record per image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Post


@dataclass(frozen=True)
class ImageFeatureTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class ImageCoverage:
    """Per-run counter of posts that fell back to the zero vector."""

    posts_seen: int = 0
    posts_without_features: int = 0


def load_image_features(path: str | Path) -> ImageFeatureTable:
    """Load an image feature file; the header dim is enforced per record.

    A wrong-length record, a duplicate image_id, or a non-finite value is
    fatal and names the offending image_id.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image feature file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "dim":
            raise ValueError(f"{path}: bad header {header!r}, expected 'dim <D>'")
        dim = int(header[1])
        if dim <= 0:
            raise ValueError(f"{path}: non-positive dim {dim}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            image_id = parts[0]
            if image_id in vectors:
                raise ValueError(f"{path}: line {lineno}: duplicate image_id {image_id!r}")
            if len(parts) - 1 != dim:
                raise ValueError(
                    f"{path}: line {lineno}: image_id {image_id!r} has {len(parts) - 1} values, expected {dim}"
                )
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}: line {lineno}: non-finite value for image_id {image_id!r}")
            vectors[image_id] = vec
    return ImageFeatureTable(dim=dim, vectors=vectors)


def save_image_features(table: ImageFeatureTable, path: str | Path) -> None:
    """Write a table in the format load_image_features reads (exact round-trip)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"dim {table.dim}\n")
        for image_id, vec in table.vectors.items():
            fh.write(image_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def post_image_vector(
    post: Post, table: ImageFeatureTable, coverage: ImageCoverage | None = None
) -> np.ndarray:
    """One dense image vector per post.

    A single image maps to its vector verbatim; several images to their
    element-wise mean; a post with no usable image ids gets the zero vector
    and bumps the coverage counter (never fatal).
    """
    if coverage is not None:
        coverage.posts_seen += 1
    found = [table.vectors[i] for i in post.image_ids if i in table.vectors]
    if not found:
        if coverage is not None:
            coverage.posts_without_features += 1
        return np.zeros(table.dim)
    if len(found) == 1:
        return found[0].copy()
    return np.mean(found, axis=0)


def image_matrix(
    posts: list[Post], table: ImageFeatureTable, coverage: ImageCoverage | None = None
) -> np.ndarray:
    if not posts:
        return np.zeros((0, table.dim))
    return np.vstack([post_image_vector(p, table, coverage) for p in posts])
