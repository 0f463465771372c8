"""Per-block truncated SVD, block scaling, and fused feature assembly.

Projectors are fitted on training rows only (uncentered matrices). Fused
vectors follow a fixed block layout: text (bow or tfidf), embed, image,
handcrafted. The handcrafted block never passes through SVD and is
concatenated raw; the other blocks are L2-normalized per post when block
normalization is on.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .text_features import SparseVector

BLOCK_ORDER = ("bow", "tfidf", "embed", "image", "handcrafted")

_DENSE_MAX = 512  # below this min-dimension, fit via exact dense SVD


@dataclass(frozen=True)
class FeatureBlock:
    """Named per-post feature matrix (rows follow post order)."""

    name: str
    matrix: np.ndarray | sp.spmatrix

    def __post_init__(self):
        if self.name not in BLOCK_ORDER:
            raise ValueError(f"unknown block name {self.name!r}, expected one of {BLOCK_ORDER}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class SvdProjector:
    """Top-k right-singular basis of one block's training matrix."""

    block: str
    k: int
    singular_values: np.ndarray  # non-increasing, length k
    basis: np.ndarray  # (k, block width), orthonormal rows

    @property
    def width(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class FusedVector:
    values: np.ndarray
    offsets: dict[str, tuple[int, int]]

    def block(self, name: str) -> np.ndarray:
        lo, hi = self.offsets[name]
        return self.values[lo:hi]


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude coordinate of each basis vector positive."""
    out = basis.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def svd_fit(block: FeatureBlock, k: int, seed: int = 0) -> SvdProjector:
    """Fit a rank-k truncated SVD of the (uncentered) block matrix.

    Small blocks use an exact dense decomposition; larger ones a seeded
    randomized range finder with power iterations, so results are
    deterministic for a fixed seed.
    """
    n, m = block.shape
    if not 1 <= k <= min(n, m):
        raise ValueError(f"rank k={k} out of range for {n}x{m} block {block.name!r}")
    A = block.matrix
    nonzero = A.nnz > 0 if sp.issparse(A) else np.any(A != 0.0)
    if not nonzero:
        raise ValueError(f"block {block.name!r} is all zeros; no singular direction defined")

    if min(n, m) <= _DENSE_MAX or k >= min(n, m) - 2:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        _, s, vt = np.linalg.svd(dense, full_matrices=False)
        basis, sigma = vt[:k], s[:k]
    else:
        basis, sigma = _randomized_svd(A, k, seed)

    return SvdProjector(
        block=block.name,
        k=k,
        singular_values=np.asarray(sigma, dtype=np.float64),
        basis=_fix_signs(np.asarray(basis, dtype=np.float64)),
    )


def _randomized_svd(A, k: int, seed: int, oversample: int = 10, n_power: int = 6):
    """Seeded range-finder truncated SVD (Gaussian sketch + power iterations)."""
    n, m = A.shape
    p = min(m, k + oversample)
    rng = np.random.default_rng(seed)
    Y = A @ rng.standard_normal((m, p))
    Q, _ = np.linalg.qr(Y)
    for _ in range(n_power):
        Q, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Q)
    B = Q.T @ A  # (p, m); dense even for sparse A
    B = np.asarray(B.todense()) if sp.issparse(B) else B
    _, s, vt = np.linalg.svd(B, full_matrices=False)
    return vt[:k], s[:k]


def svd_project(proj: SvdProjector, row) -> np.ndarray:
    """Project one row (or a row-stacked matrix) onto the fitted basis."""
    if isinstance(row, SparseVector):
        if row.dim != proj.width:
            raise ValueError(f"row width {row.dim} != projector width {proj.width}")
        return proj.basis[:, row.indices] @ row.values
    if sp.issparse(row):
        if row.shape[1] != proj.width:
            raise ValueError(f"row width {row.shape[1]} != projector width {proj.width}")
        return np.asarray((row @ proj.basis.T).todense()) if sp.issparse(row @ proj.basis.T) else row @ proj.basis.T
    arr = np.asarray(row, dtype=np.float64)
    if arr.shape[-1] != proj.width:
        raise ValueError(f"row width {arr.shape[-1]} != projector width {proj.width}")
    return arr @ proj.basis.T


@dataclass(frozen=True)
class Standardizer:
    """Per-feature train mean/std scaling for the raw handcrafted block."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def fuse(blocks: list[tuple[str, np.ndarray]], normalize: bool = True) -> FusedVector:
    """Concatenate one post's block vectors in the fixed layout.

    With normalize on, every block except the raw handcrafted one is scaled
    to unit L2 norm (all-zero blocks stay zero).
    """
    if not blocks:
        raise ValueError("fuse needs at least one block")
    names = [n for n, _ in blocks]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate block names in {names}")
    order = sorted(range(len(blocks)), key=lambda i: BLOCK_ORDER.index(names[i]))
    parts: list[np.ndarray] = []
    offsets: dict[str, tuple[int, int]] = {}
    pos = 0
    for i in order:
        name, vec = blocks[i]
        vec = np.asarray(vec, dtype=np.float64)
        if normalize and name != "handcrafted":
            norm = float(np.linalg.norm(vec))
            if norm > 0.0:
                vec = vec / norm
        offsets[name] = (pos, pos + vec.shape[-1])
        pos += vec.shape[-1]
        parts.append(vec)
    return FusedVector(values=np.concatenate(parts), offsets=offsets)


def fuse_matrix(
    blocks: list[tuple[str, np.ndarray]], normalize: bool = True
) -> tuple[np.ndarray, dict[str, tuple[int, int]]]:
    """Row-wise fuse over matrices of per-post block rows."""
    if not blocks:
        raise ValueError("fuse_matrix needs at least one block")
    n_rows = blocks[0][1].shape[0]
    for name, M in blocks:
        if M.shape[0] != n_rows:
            raise ValueError(f"block {name!r} has {M.shape[0]} rows, expected {n_rows}")
    order = sorted(range(len(blocks)), key=lambda i: BLOCK_ORDER.index(blocks[i][0]))
    parts: list[np.ndarray] = []
    offsets: dict[str, tuple[int, int]] = {}
    pos = 0
    for i in order:
        name, M = blocks[i]
        M = np.asarray(M, dtype=np.float64)
        if normalize and name != "handcrafted":
            norms = np.linalg.norm(M, axis=1, keepdims=True)
            M = np.divide(M, norms, out=M.copy(), where=norms > 0.0)
        offsets[name] = (pos, pos + M.shape[1])
        pos += M.shape[1]
        parts.append(M)
    return np.hstack(parts), offsets


def save_standardizer(std: Standardizer, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("standardizer v1\n")
        fh.write("mean " + " ".join(repr(float(v)) for v in std.mean) + "\n")
        fh.write("std " + " ".join(repr(float(v)) for v in std.std) + "\n")


def load_standardizer(path: str | Path) -> Standardizer:
    with Path(path).open("r", encoding="utf-8") as fh:
        if fh.readline().strip() != "standardizer v1":
            raise ValueError(f"{path}: unknown standardizer format")
        mean = np.array([float(v) for v in fh.readline().split()[1:]])
        std = np.array([float(v) for v in fh.readline().split()[1:]])
    return Standardizer(mean=mean, std=std)


def save_projector(proj: SvdProjector, path: str | Path) -> None:
    """Versioned text serialization with exact decimal round-trip."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("svdprojector v1\n")
        fh.write(f"block {proj.block}\n")
        fh.write(f"k {proj.k}\n")
        fh.write(f"width {proj.width}\n")
        fh.write("sigma " + " ".join(repr(float(s)) for s in proj.singular_values) + "\n")
        for row in proj.basis:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_projector(path: str | Path) -> SvdProjector:
    with Path(path).open("r", encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != "svdprojector v1":
            raise ValueError(f"{path}: unknown projector format {magic!r}")
        block = fh.readline().split()[1]
        k = int(fh.readline().split()[1])
        width = int(fh.readline().split()[1])
        sigma = np.array([float(x) for x in fh.readline().split()[1:]], dtype=np.float64)
        basis = np.array(
            [[float(x) for x in fh.readline().split()] for _ in range(k)], dtype=np.float64
        )
    if basis.shape != (k, width) or len(sigma) != k:
        raise ValueError(f"{path}: inconsistent projector dimensions")
    return SvdProjector(block=block, k=k, singular_values=sigma, basis=basis)
