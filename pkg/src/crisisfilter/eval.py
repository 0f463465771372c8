"""Metrics, the schemes grid, and end-to-end scheme evaluation.

A scheme is one (text features, image flag, model) combination: text T1
(bag-of-words), T2 (tf-idf) or T3 (tf-idf + pooled embeddings), optional I1
image features, and model M1 (logistic regression), M3 (GBDT with one-side
sampling and feature bundling) or M3-plain (the same engine with both
accelerations disabled, standing in for the external boosted-tree baseline).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from . import gbdt as gbdt_mod
from . import linear as linear_mod
from .corpus import Corpus, Post, SplitIndices, split, tokenize_corpus
from .fusion import FeatureBlock, Standardizer, SvdProjector, fuse_matrix, svd_fit, svd_project
from .gbdt import GbdtConfig
from .image_features import ImageCoverage, ImageFeatureTable, image_matrix
from .text_features import (
    EmbeddingTable,
    Vocabulary,
    bow_matrix,
    build_vocab,
    embedding_matrix,
    handcrafted_matrix,
    tfidf_matrix,
)

TEXT_CHOICES = ("T1", "T2", "T3")
MODEL_CHOICES = ("M1", "M3", "M3-plain")
FEATURE_SETS = ("T1", "T2", "T3", "T2+I1", "T3+I1")  # the evaluated grid


@dataclass(frozen=True)
class SchemeId:
    text: str
    image: bool
    model: str

    def __post_init__(self):
        if self.text not in TEXT_CHOICES:
            raise ValueError(f"unknown text feature choice {self.text!r}")
        if self.model not in MODEL_CHOICES:
            raise ValueError(f"unknown model choice {self.model!r}")
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(
                f"feature set {self.feature_set!r} is outside the evaluated grid {FEATURE_SETS}"
            )

    @property
    def feature_set(self) -> str:
        return self.text + ("+I1" if self.image else "")

    def __str__(self) -> str:
        return f"{self.feature_set}+{self.model}"

    @classmethod
    def parse(cls, s: str) -> "SchemeId":
        parts = s.split("+")
        if parts and parts[-1] == "plain" and len(parts) >= 2:
            parts = parts[:-2] + [parts[-2] + "+plain"]  # tolerate T2+I1+M3+plain
        model = parts[-1].replace("+plain", "-plain")
        if model == "M2":
            raise ValueError(
                "M2 (the external boosted-tree system) is not reimplemented; "
                "use M3-plain, the bundled engine with sampling and bundling disabled"
            )
        rest = parts[:-1]
        if not rest:
            raise ValueError(f"cannot parse scheme {s!r}")
        text = rest[0]
        image = len(rest) > 1
        if image and (len(rest) != 2 or rest[1] != "I1"):
            raise ValueError(f"cannot parse scheme {s!r}")
        return cls(text=text, image=image, model=model)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    event: str
    scheme: str
    accuracy: float
    auc: float
    confusion: Confusion
    seed: int
    config_digest: str


def accuracy(scores, labels, threshold: float = 0.5) -> tuple[float, Confusion]:
    """Fraction of correct decisions at the threshold (score >= t is positive)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise ValueError("accuracy of an empty score list is undefined")
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores vs {len(labels)} labels")
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    tn = int(np.sum(~pred & ~pos))
    fn = int(np.sum(~pred & pos))
    return (tp + tn) / len(scores), Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def auc(scores, labels) -> float:
    """Area under the ROC curve as the rank statistic.

    Equals the fraction of (positive, negative) pairs ranked correctly, with
    half credit for ties.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise ValueError(f"length mismatch: {len(scores)} scores vs {len(labels)} labels")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Scheme pipeline


@dataclass
class SchemeResources:
    stopwords: frozenset[str]
    embeddings: EmbeddingTable | None = None
    image_features: ImageFeatureTable | None = None


@dataclass
class CacheContext:
    """Optional disk-backed reuse of feature blocks and fitted projectors.

    `cache` is any object with get_matrix/put_matrix/get_projector/
    put_projector; `digests` carries content digests of the input files so
    cache keys change whenever inputs do.
    """

    cache: object
    digests: dict[str, str]

    def matrix_key(self, name: str, tf_mode: str, ratio: float, seed: int, part: str) -> str:
        relevant = {
            "bow": ("corpus", "stopwords"),
            "tfidf": ("corpus", "stopwords"),
            "embed": ("corpus", "stopwords", "embeddings"),
            "image": ("corpus", "image_features"),
            "handcrafted": ("corpus", "stopwords"),
        }[name]
        material = json.dumps(
            {
                "block": name,
                "tf_mode": tf_mode if name == "tfidf" else None,
                "ratio": ratio,
                "seed": seed,
                "part": part,
                "digests": {k: self.digests.get(k, "") for k in relevant},
            },
            sort_keys=True,
        )
        return hashlib.sha256(material.encode()).hexdigest()[:24]

    def projector_key(self, matrix_key: str, k: int, seed: int) -> str:
        return hashlib.sha256(f"proj|{matrix_key}|{k}|{seed}".encode()).hexdigest()[:24]


@dataclass(frozen=True)
class PipelineSettings:
    split_ratio: float = 0.8
    seed: int = 7
    tf_mode: str = "length_norm"
    k_text: int = 100
    k_embed: int = 100
    k_image: int = 100
    normalize_blocks: bool = True
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    lr_l2: float = 1e-4
    lr_epochs: int = 500
    lr_step_size: float = 0.1

    def digest(self, scheme: "SchemeId") -> str:
        blob = json.dumps({"scheme": str(scheme), **asdict(self)}, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@dataclass
class FittedPipeline:
    """Everything needed to score unseen posts under one scheme."""

    scheme: SchemeId
    settings: PipelineSettings
    vocab: Vocabulary
    projectors: dict[str, SvdProjector]
    standardizer: Standardizer
    model_kind: str  # "linear" | "gbdt"
    model: object
    coverage: ImageCoverage | None = None


def _check_resources(scheme: SchemeId, resources: SchemeResources) -> None:
    if scheme.text == "T3" and resources.embeddings is None:
        raise ValueError(f"scheme {scheme} needs an embedding table but none was provided")
    if scheme.image and resources.image_features is None:
        raise ValueError(f"scheme {scheme} needs an image feature table but none was provided")


def _raw_blocks(
    scheme: SchemeId,
    posts: list[Post],
    docs,
    vocab: Vocabulary,
    resources: SchemeResources,
    tf_mode: str,
    coverage: ImageCoverage | None,
    ctx: CacheContext | None = None,
    ratio: float = 0.0,
    seed: int = 0,
    part: str = "",
):
    builders = {}
    text_name = "bow" if scheme.text == "T1" else "tfidf"
    if scheme.text == "T1":
        builders["bow"] = lambda: bow_matrix(docs, vocab)
    else:
        builders["tfidf"] = lambda: tfidf_matrix(docs, vocab, tf_mode)
    if scheme.text == "T3":
        builders["embed"] = lambda: embedding_matrix(docs, resources.embeddings)
    if scheme.image:
        builders["image"] = lambda: image_matrix(posts, resources.image_features, coverage)
    builders["handcrafted"] = lambda: handcrafted_matrix(docs)

    blocks = []
    for name, build in builders.items():
        M = None
        if ctx is not None:
            M = ctx.cache.get_matrix(ctx.matrix_key(name, tf_mode, ratio, seed, part))
        if M is None:
            M = build()
            if ctx is not None:
                ctx.cache.put_matrix(ctx.matrix_key(name, tf_mode, ratio, seed, part), M)
        blocks.append((name, M))
    return blocks


def _block_ranks(settings: PipelineSettings) -> dict[str, int]:
    return {
        "bow": settings.k_text,
        "tfidf": settings.k_text,
        "embed": settings.k_embed,
        "image": settings.k_image,
    }


def fit_pipeline(
    corpus: Corpus,
    indices: SplitIndices,
    scheme: SchemeId,
    resources: SchemeResources,
    settings: PipelineSettings,
    ctx: CacheContext | None = None,
) -> FittedPipeline:
    """Fit vocabulary, projectors, and the scheme's model on train rows only."""
    _check_resources(scheme, resources)
    by_id = {p.post_id: p for p in corpus.posts}
    train_posts = [by_id[i] for i in indices.train_ids]
    train_labels = np.array([p.label for p in train_posts], dtype=np.float64)
    train_docs = tokenize_corpus(Corpus.from_posts(train_posts), resources.stopwords)
    vocab = build_vocab(train_docs)

    coverage = ImageCoverage() if scheme.image else None
    blocks = _raw_blocks(
        scheme, train_posts, train_docs, vocab, resources, settings.tf_mode, coverage,
        ctx, settings.split_ratio, settings.seed, "train",
    )

    ranks = _block_ranks(settings)
    projectors: dict[str, SvdProjector] = {}
    standardizer = None
    projected = []
    for name, M in blocks:
        if name == "handcrafted":
            standardizer = Standardizer.fit(M)
            projected.append((name, standardizer.transform(M)))
            continue
        k = min(ranks[name], M.shape[0], M.shape[1])
        proj = None
        if ctx is not None:
            mkey = ctx.matrix_key(name, settings.tf_mode, settings.split_ratio, settings.seed, "train")
            pkey = ctx.projector_key(mkey, k, settings.seed)
            proj = ctx.cache.get_projector(pkey)
        if proj is None:
            proj = svd_fit(FeatureBlock(name, M), k, seed=settings.seed)
            if ctx is not None:
                ctx.cache.put_projector(pkey, proj)
        projectors[name] = proj
        projected.append((name, svd_project(proj, M)))

    X_train, _ = fuse_matrix(projected, normalize=settings.normalize_blocks)

    if scheme.model == "M1":
        model_kind = "linear"
        model = linear_mod.lr_train(
            X_train,
            train_labels,
            l2=settings.lr_l2,
            epochs=settings.lr_epochs,
            step_size=settings.lr_step_size,
            seed=settings.seed,
        )
    else:
        cfg = replace(settings.gbdt, seed=settings.seed)
        if scheme.model == "M3-plain":
            cfg = replace(cfg, goss_top_rate=1.0, goss_other_rate=0.0, efb_enabled=False)
        model_kind = "gbdt"
        model = gbdt_mod.train(cfg, X_train, train_labels)

    return FittedPipeline(
        scheme=scheme,
        settings=settings,
        vocab=vocab,
        projectors=projectors,
        standardizer=standardizer,
        model_kind=model_kind,
        model=model,
        coverage=coverage,
    )


def transform_posts(
    pipeline: FittedPipeline, posts: list[Post], resources: SchemeResources
) -> tuple[np.ndarray, dict[str, tuple[int, int]]]:
    """Featurize posts with the train-fitted vocabulary and projectors."""
    docs = tokenize_corpus(Corpus.from_posts(posts), resources.stopwords)
    blocks = _raw_blocks(
        pipeline.scheme, posts, docs, pipeline.vocab, resources, pipeline.settings.tf_mode, None
    )
    projected = []
    for name, M in blocks:
        if name == "handcrafted":
            projected.append((name, pipeline.standardizer.transform(M)))
        else:
            projected.append((name, svd_project(pipeline.projectors[name], M)))
    return fuse_matrix(projected, normalize=pipeline.settings.normalize_blocks)


def score_posts(
    pipeline: FittedPipeline, posts: list[Post], resources: SchemeResources
) -> np.ndarray:
    X, _ = transform_posts(pipeline, posts, resources)
    if pipeline.model_kind == "linear":
        return np.atleast_1d(linear_mod.lr_predict(pipeline.model, X))
    return np.atleast_1d(gbdt_mod.predict(pipeline.model, X))


def run_scheme_full(
    corpus: Corpus,
    scheme: SchemeId | str,
    resources: SchemeResources,
    settings: PipelineSettings,
    ctx: CacheContext | None = None,
) -> tuple[EvalReport, FittedPipeline]:
    """run_scheme, but also hands back the fitted pipeline for persistence."""
    if isinstance(scheme, str):
        scheme = SchemeId.parse(scheme)
    _check_resources(scheme, resources)
    indices = split(corpus, settings.split_ratio, settings.seed)
    pipeline = fit_pipeline(corpus, indices, scheme, resources, settings, ctx)
    by_id = {p.post_id: p for p in corpus.posts}
    test_posts = [by_id[i] for i in indices.test_ids]
    test_docs = tokenize_corpus(Corpus.from_posts(test_posts), resources.stopwords)
    blocks = _raw_blocks(
        scheme, test_posts, test_docs, pipeline.vocab, resources, settings.tf_mode, None,
        ctx, settings.split_ratio, settings.seed, "test",
    )
    projected = []
    for name, M in blocks:
        if name == "handcrafted":
            projected.append((name, pipeline.standardizer.transform(M)))
        else:
            projected.append((name, svd_project(pipeline.projectors[name], M)))
    X_test, _ = fuse_matrix(projected, normalize=settings.normalize_blocks)
    if pipeline.model_kind == "linear":
        scores = np.atleast_1d(linear_mod.lr_predict(pipeline.model, X_test))
    else:
        scores = np.atleast_1d(gbdt_mod.predict(pipeline.model, X_test))
    labels = np.array([p.label for p in test_posts])
    acc, confusion = accuracy(scores, labels)
    events = {p.event for p in corpus.posts}
    report = EvalReport(
        event=events.pop() if len(events) == 1 else "all",
        scheme=str(scheme),
        accuracy=acc,
        auc=auc(scores, labels),
        confusion=confusion,
        seed=settings.seed,
        config_digest=settings.digest(scheme),
    )
    return report, pipeline


def run_scheme(
    corpus: Corpus,
    scheme: SchemeId | str,
    resources: SchemeResources,
    settings: PipelineSettings,
    ctx: CacheContext | None = None,
) -> EvalReport:
    """Train on the seeded split's train rows, score its test rows.

    Fully deterministic from (corpus, scheme, settings.seed).
    """
    report, _ = run_scheme_full(corpus, scheme, resources, settings, ctx)
    return report


def featurize_scheme(
    corpus: Corpus,
    scheme: SchemeId | str,
    resources: SchemeResources,
    settings: PipelineSettings,
    ctx: CacheContext,
) -> dict[str, bool]:
    """Materialize every cacheable artifact for a scheme; True means cache hit."""
    if isinstance(scheme, str):
        scheme = SchemeId.parse(scheme)
    _check_resources(scheme, resources)
    indices = split(corpus, settings.split_ratio, settings.seed)
    by_id = {p.post_id: p for p in corpus.posts}
    status: dict[str, bool] = {}
    ranks = _block_ranks(settings)
    parts = {"train": indices.train_ids, "test": indices.test_ids}
    vocab = None
    for part, ids in parts.items():
        posts = [by_id[i] for i in ids]
        docs = tokenize_corpus(Corpus.from_posts(posts), resources.stopwords)
        if part == "train":
            vocab = build_vocab(docs)
        blocks = _raw_blocks(
            scheme, posts, docs, vocab, resources, settings.tf_mode, None,
            None, settings.split_ratio, settings.seed, part,
        )
        for name, M in blocks:
            key = ctx.matrix_key(name, settings.tf_mode, settings.split_ratio, settings.seed, part)
            hit = ctx.cache.get_matrix(key) is not None
            status[f"{name}/{part}"] = hit
            if not hit:
                ctx.cache.put_matrix(key, M)
            if part == "train" and name != "handcrafted":
                k = min(ranks[name], M.shape[0], M.shape[1])
                pkey = ctx.projector_key(key, k, settings.seed)
                phit = ctx.cache.get_projector(pkey) is not None
                status[f"projector:{name}"] = phit
                if not phit:
                    ctx.cache.put_projector(pkey, svd_fit(FeatureBlock(name, M), k, seed=settings.seed))
    return status


# ---------------------------------------------------------------------------
# Pipeline persistence (everything cmd_inspect needs to rescore posts)


def save_pipeline(pipeline: FittedPipeline, dir_path: str | Path) -> None:
    from .fusion import save_projector, save_standardizer
    from .text_features import save_vocab

    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": "pipeline v1",
        "scheme": str(pipeline.scheme),
        "model_kind": pipeline.model_kind,
        "settings": asdict(pipeline.settings),
        "projectors": sorted(pipeline.projectors),
    }
    (d / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
    save_vocab(pipeline.vocab, d / "vocab.txt")
    for name, proj in pipeline.projectors.items():
        save_projector(proj, d / f"proj_{name}.txt")
    save_standardizer(pipeline.standardizer, d / "standardizer.txt")
    if pipeline.model_kind == "linear":
        linear_mod.save_model(pipeline.model, d / "model.txt")
    else:
        gbdt_mod.save_model(pipeline.model, d / "model.txt")


def load_pipeline(dir_path: str | Path) -> FittedPipeline:
    from .fusion import load_projector, load_standardizer
    from .text_features import load_vocab

    d = Path(dir_path)
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    if meta.get("format") != "pipeline v1":
        raise ValueError(f"{d}: unknown pipeline format")
    s = dict(meta["settings"])
    s["gbdt"] = GbdtConfig(**s["gbdt"])
    settings = PipelineSettings(**s)
    projectors = {name: load_projector(d / f"proj_{name}.txt") for name in meta["projectors"]}
    if meta["model_kind"] == "linear":
        model = linear_mod.load_model(d / "model.txt")
    else:
        model = gbdt_mod.load_model(d / "model.txt")
    return FittedPipeline(
        scheme=SchemeId.parse(meta["scheme"]),
        settings=settings,
        vocab=load_vocab(d / "vocab.txt"),
        projectors=projectors,
        standardizer=load_standardizer(d / "standardizer.txt"),
        model_kind=meta["model_kind"],
        model=model,
    )


# ---------------------------------------------------------------------------
# Reporting


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def report_table(reports: list[EvalReport]) -> str:
    """Render the grid: rows event x feature set, columns model x metric."""
    if not reports:
        raise ValueError("no reports to render")
    cells = {(r.event, r.scheme): r for r in reports}
    events = list(dict.fromkeys(r.event for r in reports))
    models = [m for m in MODEL_CHOICES if any(r.scheme.endswith("+" + m) for r in reports)]
    header = ["event", "features"]
    for m in models:
        header += [f"{m} Acc", f"{m} AUC"]
    rows = [header]
    for event in events:
        for fs in FEATURE_SETS:
            line = [event, fs]
            found = False
            for m in models:
                r = cells.get((event, f"{fs}+{m}"))
                if r is None:
                    line += ["-", "-"]
                else:
                    line += [_pct(r.accuracy), _pct(r.auc)]
                    found = True
            if found:
                rows.append(line)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    out = []
    for i, row in enumerate(rows):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    if any(r.scheme.endswith("M3-plain") for r in reports):
        out.append("")
        out.append("M3-plain: bundled GBDT engine with one-side sampling and feature bundling disabled")
        out.append("(ablation standing in for the external boosted-tree baseline).")
    return "\n".join(out) + "\n"


REPORT_COLUMNS = ("event", "scheme", "accuracy", "auc", "tp", "fp", "tn", "fn", "seed")


def write_report_tsv(reports: list[EvalReport], path: str | Path) -> None:
    """Machine-readable report; full-precision values, byte-stable per run."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("\t".join(REPORT_COLUMNS) + "\n")
        for r in reports:
            c = r.confusion
            fh.write(
                "\t".join(
                    [r.event, r.scheme, repr(r.accuracy), repr(r.auc)]
                    + [str(v) for v in (c.tp, c.fp, c.tn, c.fn, r.seed)]
                )
                + "\n"
            )


def read_report_tsv(path: str | Path) -> list[EvalReport]:
    reports = []
    with Path(path).open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"{path}: bad report header {header!r}")
        for line in fh:
            ev, scheme, acc, a, tp, fp, tn, fn, seed = line.rstrip("\n").split("\t")
            reports.append(
                EvalReport(
                    event=ev,
                    scheme=scheme,
                    accuracy=float(acc),
                    auc=float(a),
                    confusion=Confusion(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn)),
                    seed=int(seed),
                    config_digest="",
                )
            )
    return reports
