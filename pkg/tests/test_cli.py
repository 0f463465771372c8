import os
from pathlib import Path

import numpy as np
import pytest
import yaml

from crisisfilter import cli
from crisisfilter.eval import read_report_tsv

LIGHT = {
    "split_ratio": 0.8,
    "seed": 7,
    "k_text": 30,
    "k_embed": 15,
    "k_image": 15,
    "gbdt": {"n_trees": 25, "num_leaves": 15, "min_data_in_leaf": 10, "max_bins": 63},
    "linear": {"epochs": 150},
}


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixtures")
    rc = cli.main(["make-fixtures", "--out", str(d), "--n-posts", "300", "--seed", "13"])
    assert rc == 0
    return d


def make_config(fixture_dir, out_dir, **overrides):
    cfg = {
        "corpus": str(fixture_dir / "posts.tsv"),
        "stopwords": str(fixture_dir / "stopwords.txt"),
        "embeddings": str(fixture_dir / "embeddings.txt"),
        "image_features": str(fixture_dir / "image_features.txt"),
        "output_dir": str(out_dir),
        **LIGHT,
        **overrides,
    }
    path = out_dir / "config.yaml"
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


def test_make_fixtures_outputs(fixture_dir):
    for name in ("posts.tsv", "embeddings.txt", "image_features.txt", "stopwords.txt", "config.yaml"):
        assert (fixture_dir / name).exists()
    from crisisfilter.corpus import load_corpus

    corpus = load_corpus(fixture_dir / "posts.tsv")
    assert len(corpus) == 300


def test_run_two_schemes(fixture_dir, tmp_path, capsys):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T2+M1", "T2+M3"])
    rc = cli.main(["run", "--config", str(cfg)])
    assert rc == 0
    reports = read_report_tsv(tmp_path / "out" / "reports" / "report.tsv")
    assert [r.scheme for r in reports] == ["T2+M1", "T2+M3"]
    table = (tmp_path / "out" / "reports" / "report.txt").read_text()
    assert "M1 Acc" in table and "M3 AUC" in table
    assert (tmp_path / "out" / "models" / "T2_M3" / "model.txt").exists()
    assert (tmp_path / "out" / "effective_config.yaml").exists()


def test_run_missing_embeddings_exit_3(fixture_dir, tmp_path, capsys):
    missing = str(tmp_path / "nowhere" / "emb.txt")
    cfg = make_config(
        fixture_dir, tmp_path / "out", schemes=["T3+M1"], embeddings=missing
    )
    rc = cli.main(["run", "--config", str(cfg)])
    assert rc == 3
    assert missing in capsys.readouterr().err


def test_run_invalid_config_exit_2(fixture_dir, tmp_path, capsys):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T9+M1"])
    assert cli.main(["run", "--config", str(cfg)]) == 2
    cfg2 = make_config(fixture_dir, tmp_path / "out2", not_a_key=1)
    assert cli.main(["run", "--config", str(cfg2)]) == 2
    cfg3 = make_config(fixture_dir, tmp_path / "out3", split_ratio=1.5)
    assert cli.main(["run", "--config", str(cfg3)]) == 2


def test_rerun_byte_identical_report(fixture_dir, tmp_path):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T3+I1+M3", "T2+M1"])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    first = (tmp_path / "out" / "reports" / "report.tsv").read_bytes()
    assert cli.main(["run", "--config", str(cfg)]) == 0
    second = (tmp_path / "out" / "reports" / "report.tsv").read_bytes()
    assert first == second


def test_effective_config_roundtrip(fixture_dir, tmp_path):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T2+M3"])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    report1 = (tmp_path / "out" / "reports" / "report.tsv").read_bytes()
    effective = tmp_path / "out" / "effective_config.yaml"
    data = yaml.safe_load(effective.read_text())
    data["output_dir"] = str(tmp_path / "out2")
    redo = tmp_path / "redo.yaml"
    redo.write_text(yaml.safe_dump(data), encoding="utf-8")
    assert cli.main(["run", "--config", str(redo)]) == 0
    report2 = (tmp_path / "out2" / "reports" / "report.tsv").read_bytes()
    assert report1 == report2


def test_env_var_default_config(fixture_dir, tmp_path, monkeypatch):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T1+M1"])
    monkeypatch.setenv(cli.CONFIG_ENV_VAR, str(cfg))
    assert cli.main(["run"]) == 0
    assert (tmp_path / "out" / "reports" / "report.tsv").exists()


def test_featurize_cache_hits_and_rank_scope(fixture_dir, tmp_path, capsys):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T2+I1+M3"])
    assert cli.main(["featurize", "--config", str(cfg)]) == 0
    first = capsys.readouterr().out
    assert "written" in first and "cache hit" not in first
    assert cli.main(["featurize", "--config", str(cfg)]) == 0
    second = capsys.readouterr().out
    assert "written" not in second and "cache hit" in second

    # changing an svd rank must miss only the projector artifacts
    cfg2 = make_config(fixture_dir, tmp_path / "out", schemes=["T2+I1+M3"], k_text=25)
    assert cli.main(["featurize", "--config", str(cfg2)]) == 0
    third = capsys.readouterr().out
    for line in third.strip().splitlines():
        rest = line.split(": ", 1)[1]
        artifact, status = rest.rsplit(": ", 1)
        if artifact == "projector:tfidf":
            assert status == "written"
        else:
            assert status == "cache hit", line  # only the re-ranked projector misses


def test_featurize_corrupted_cache_regenerates(fixture_dir, tmp_path, capsys):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T2+M3"])
    assert cli.main(["featurize", "--config", str(cfg)]) == 0
    capsys.readouterr()
    cache = tmp_path / "out" / "cache"
    victim = sorted(cache.glob("block_*.npz"))[0]
    victim.write_bytes(b"garbage")
    assert cli.main(["featurize", "--config", str(cfg)]) == 0
    out = capsys.readouterr()
    assert "corrupted" in out.err
    assert "written" in out.out


def test_run_uses_cache_and_matches_uncached(fixture_dir, tmp_path):
    cfg_a = make_config(fixture_dir, tmp_path / "a", schemes=["T2+I1+M3"])
    assert cli.main(["featurize", "--config", str(cfg_a)]) == 0
    assert cli.main(["run", "--config", str(cfg_a)]) == 0
    cfg_b = make_config(fixture_dir, tmp_path / "b", schemes=["T2+I1+M3"])
    assert cli.main(["run", "--config", str(cfg_b)]) == 0
    ra = (tmp_path / "a" / "reports" / "report.tsv").read_text()
    rb = (tmp_path / "b" / "reports" / "report.tsv").read_text()
    assert ra == rb


def test_threads_do_not_change_output(fixture_dir, tmp_path):
    cfg1 = make_config(fixture_dir, tmp_path / "t1", schemes=["T2+M1", "T2+M3"], threads=1)
    cfg8 = make_config(fixture_dir, tmp_path / "t8", schemes=["T2+M1", "T2+M3"], threads=8)
    assert cli.main(["run", "--config", str(cfg1)]) == 0
    assert cli.main(["run", "--config", str(cfg8)]) == 0
    assert (tmp_path / "t1" / "reports" / "report.tsv").read_bytes() == (
        tmp_path / "t8" / "reports" / "report.tsv"
    ).read_bytes()


def test_inspect_block_magnitudes(fixture_dir, tmp_path, capsys):
    out = tmp_path / "out"
    cfg = make_config(fixture_dir, out, schemes=["T3+I1+M3"])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    capsys.readouterr()

    from crisisfilter.corpus import load_corpus, save_corpus, Corpus, Post

    corpus = load_corpus(fixture_dir / "posts.tsv")
    no_image = next(p for p in corpus.posts if not p.image_ids)
    with_image = next(p for p in corpus.posts if p.image_ids)
    twin = Post("twin", with_image.raw_text, with_image.image_ids, with_image.label, with_image.event)
    probe = Corpus.from_posts([no_image, with_image, twin])
    probe_path = tmp_path / "probe.tsv"
    save_corpus(probe, probe_path)

    rc = cli.main(
        ["inspect", "--config", str(cfg), "--model", str(out / "models" / "T3+I1+M3".replace("+", "_")), "--posts", str(probe_path)]
    )
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header = lines[0].split("\t")
    img_col = header.index("|image|")
    rows = {l.split("\t")[0]: l.split("\t") for l in lines[1:]}
    assert float(rows[no_image.post_id][img_col]) == 0.0
    assert float(rows[with_image.post_id][img_col]) > 0.0
    assert rows[with_image.post_id][1] == rows["twin"][1]  # identical posts, identical score


def test_inspect_scores_match_run(fixture_dir, tmp_path, capsys):
    out = tmp_path / "out"
    cfg = make_config(fixture_dir, out, schemes=["T2+M3"])
    assert cli.main(["run", "--config", str(cfg)]) == 0
    capsys.readouterr()

    from crisisfilter.corpus import load_corpus, load_stopwords, split, save_corpus, Corpus
    from crisisfilter.eval import PipelineSettings, SchemeResources, run_scheme_full, score_posts
    from crisisfilter.gbdt import GbdtConfig

    corpus = load_corpus(fixture_dir / "posts.tsv")
    settings = PipelineSettings(
        seed=7, k_text=30, k_embed=15, k_image=15,
        gbdt=GbdtConfig(n_trees=25, num_leaves=15, min_data_in_leaf=10, max_bins=63),
        lr_epochs=150,
    )
    resources = SchemeResources(stopwords=load_stopwords(fixture_dir / "stopwords.txt"))
    indices = split(corpus, 0.8, 7)
    by_id = {p.post_id: p for p in corpus.posts}
    test_posts = [by_id[i] for i in indices.test_ids][:10]
    _, pipeline = run_scheme_full(corpus, "T2+M3", resources, settings)
    want = score_posts(pipeline, test_posts, resources)

    probe_path = tmp_path / "probe.tsv"
    save_corpus(Corpus.from_posts(test_posts), probe_path)
    rc = cli.main(
        ["inspect", "--config", str(cfg), "--model", str(out / "models" / "T2_M3"), "--posts", str(probe_path)]
    )
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()[1:]
    got = [float(l.split("\t")[1]) for l in lines]
    assert np.allclose(got, want, atol=5e-7)  # printed at 6 decimals


def test_seeds_mode_mean_sd(fixture_dir, tmp_path, capsys):
    cfg = make_config(fixture_dir, tmp_path / "out", schemes=["T2+M1"])
    rc = cli.main(["run", "--config", str(cfg), "--seeds", "1,2,3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "mean +- sd" in out
    reports = read_report_tsv(tmp_path / "out" / "reports" / "report.tsv")
    assert len(reports) == 3
    assert sorted({r.seed for r in reports}) == [1, 2, 3]
