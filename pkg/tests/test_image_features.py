import numpy as np
import pytest

from crisisfilter.corpus import Post
from crisisfilter.image_features import (
    ImageCoverage,
    ImageFeatureTable,
    image_matrix,
    load_image_features,
    post_image_vector,
    save_image_features,
)


def post(pid, image_ids):
    return Post(post_id=pid, raw_text="t", image_ids=tuple(image_ids), label=1, event="e")


def test_load_fixture(tmp_path):
    p = tmp_path / "feat.txt"
    p.write_text("dim 8\nimgA 1 2 3 4 5 6 7 8\nimgB 0 0 0 0 0 0 0 1\n", encoding="utf-8")
    t = load_image_features(p)
    assert t.dim == 8
    assert len(t) == 2
    assert np.array_equal(t.vectors["imgA"], np.arange(1.0, 9.0))


def test_load_rejects_wrong_length(tmp_path):
    p = tmp_path / "feat.txt"
    p.write_text("dim 8\nimgA 1 2 3 4 5 6 7\n", encoding="utf-8")
    with pytest.raises(ValueError, match="imgA"):
        load_image_features(p)


def test_load_rejects_duplicate_id(tmp_path):
    p = tmp_path / "feat.txt"
    p.write_text("dim 2\nimgA 1 2\nimgA 3 4\n", encoding="utf-8")
    with pytest.raises(ValueError, match="duplicate"):
        load_image_features(p)


def test_load_rejects_non_finite(tmp_path):
    p = tmp_path / "feat.txt"
    p.write_text("dim 2\nimgA 1 nan\n", encoding="utf-8")
    with pytest.raises(ValueError, match="imgA"):
        load_image_features(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image_features(tmp_path / "none.txt")


def test_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(3)
    t = ImageFeatureTable(dim=5, vectors={f"i{k}": rng.standard_normal(5) for k in range(10)})
    save_image_features(t, tmp_path / "f.txt")
    back = load_image_features(tmp_path / "f.txt")
    assert back.dim == t.dim
    assert set(back.vectors) == set(t.vectors)
    for k in t.vectors:
        assert np.array_equal(back.vectors[k], t.vectors[k])


def test_single_image_verbatim():
    v = np.array([1.0, 2.0, 3.0])
    t = ImageFeatureTable(dim=3, vectors={"a": v})
    assert np.array_equal(post_image_vector(post("p", ["a"]), t), v)


def test_multi_image_mean_and_order_invariance():
    t = ImageFeatureTable(dim=2, vectors={"a": np.array([2.0, 0.0]), "b": np.array([0.0, 2.0])})
    m1 = post_image_vector(post("p", ["a", "b"]), t)
    m2 = post_image_vector(post("p", ["b", "a"]), t)
    assert np.array_equal(m1, [1.0, 1.0])
    assert np.array_equal(m1, m2)


def test_missing_images_zero_vector_and_counter():
    t = ImageFeatureTable(dim=4, vectors={"a": np.ones(4)})
    cov = ImageCoverage()
    out = post_image_vector(post("p", []), t, cov)
    assert np.array_equal(out, np.zeros(4))
    out2 = post_image_vector(post("q", ["nope"]), t, cov)
    assert np.array_equal(out2, np.zeros(4))
    post_image_vector(post("r", ["a"]), t, cov)
    assert cov.posts_seen == 3
    assert cov.posts_without_features == 2


def test_coverage_matches_bruteforce_scan():
    rng = np.random.default_rng(8)
    t = ImageFeatureTable(dim=3, vectors={f"i{k}": rng.standard_normal(3) for k in range(20)})
    posts = []
    for i in range(100):
        ids = [f"i{rng.integers(0, 40)}" for _ in range(rng.integers(0, 3))]
        posts.append(post(f"p{i}", ids))
    cov = ImageCoverage()
    M = image_matrix(posts, t, cov)
    brute = sum(1 for p in posts if not any(i in t.vectors for i in p.image_ids))
    assert cov.posts_without_features == brute
    assert M.shape == (100, 3)
    for i, p in enumerate(posts):
        usable = [t.vectors[x] for x in p.image_ids if x in t.vectors]
        want = np.mean(usable, axis=0) if usable else np.zeros(3)
        assert np.allclose(M[i], want)
