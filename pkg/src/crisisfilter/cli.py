"""Command-line entry point: run, featurize, inspect, make-fixtures.

An experiment is described by one YAML config file (flags override file
values; CRISISFILTER_CONFIG sets the default path). Outputs land under the
configured output directory in reports/, models/, and cache/.

Exit codes: 0 ok, 1 runtime failure, 2 invalid config, 3 missing resource.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import yaml

from . import eval as eval_mod
from . import synth
from .corpus import load_corpus, load_stopwords
from .eval import (
    CacheContext,
    PipelineSettings,
    SchemeId,
    SchemeResources,
    load_pipeline,
    report_table,
    save_pipeline,
    write_report_tsv,
)
from .fusion import load_projector, save_projector
from .gbdt import GbdtConfig
from .image_features import load_image_features
from .text_features import load_embeddings

CONFIG_ENV_VAR = "CRISISFILTER_CONFIG"

DEFAULT_SCHEMES = [
    f"{fs}+{m}" for fs in eval_mod.FEATURE_SETS for m in ("M1", "M3-plain", "M3")
]


class ConfigError(Exception):
    """Invalid configuration (exit 2)."""


class ResourceError(Exception):
    """A referenced input file is missing (exit 3)."""


@dataclass
class RunConfig:
    corpus: str = ""
    output_dir: str = "out"
    stopwords: str | None = None  # None -> packaged list
    embeddings: str | None = None
    image_features: str | None = None
    split_ratio: float = 0.8
    seed: int = 7
    tf_mode: str = "length_norm"
    k_text: int = 100
    k_embed: int = 100
    k_image: int = 100
    normalize_blocks: bool = True
    schemes: list[str] = field(default_factory=lambda: list(DEFAULT_SCHEMES))
    threads: int = 1
    gbdt: dict = field(default_factory=dict)
    linear: dict = field(default_factory=dict)

    def settings(self) -> PipelineSettings:
        try:
            gbdt_cfg = GbdtConfig(**self.gbdt)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad gbdt config: {exc}") from None
        lin = dict(self.linear)
        unknown = set(lin) - {"l2", "epochs", "step_size"}
        if unknown:
            raise ConfigError(f"unknown linear config keys: {sorted(unknown)}")
        try:
            return PipelineSettings(
                split_ratio=self.split_ratio,
                seed=self.seed,
                tf_mode=self.tf_mode,
                k_text=self.k_text,
                k_embed=self.k_embed,
                k_image=self.k_image,
                normalize_blocks=self.normalize_blocks,
                gbdt=gbdt_cfg,
                lr_l2=lin.get("l2", 1e-4),
                lr_epochs=lin.get("epochs", 500),
                lr_step_size=lin.get("step_size", 0.1),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | None, overrides: dict, require_corpus: bool = True) -> RunConfig:
    data: dict = {}
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: config must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**data)
    if require_corpus and not cfg.corpus:
        raise ConfigError("config needs a 'corpus' path")
    if not cfg.schemes:
        raise ConfigError("scheme list must be nonempty")
    if not 0.0 < cfg.split_ratio < 1.0:
        raise ConfigError(f"split_ratio must be in (0, 1), got {cfg.split_ratio}")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for s in cfg.schemes:
        try:
            SchemeId.parse(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    cfg.settings()  # validate numeric sub-configs up front
    return cfg


def _require(path: str | None, what: str) -> None:
    if path is not None and not Path(path).exists():
        raise ResourceError(f"{what} file not found: {path}")


def _load_resources(cfg: RunConfig) -> tuple[SchemeResources, dict[str, str]]:
    schemes = [SchemeId.parse(s) for s in cfg.schemes]
    needs_embed = any(s.text == "T3" for s in schemes)
    needs_image = any(s.image for s in schemes)
    _require(cfg.corpus, "corpus")
    _require(cfg.stopwords, "stopwords")
    if needs_embed:
        if cfg.embeddings is None:
            raise ResourceError("a T3 scheme is configured but no embeddings path is set")
        _require(cfg.embeddings, "embeddings")
    if needs_image:
        if cfg.image_features is None:
            raise ResourceError("an I1 scheme is configured but no image_features path is set")
        _require(cfg.image_features, "image features")
    resources = SchemeResources(
        stopwords=load_stopwords(cfg.stopwords),
        embeddings=load_embeddings(cfg.embeddings) if needs_embed and cfg.embeddings else None,
        image_features=(
            load_image_features(cfg.image_features) if needs_image and cfg.image_features else None
        ),
    )
    digests = {"corpus": _file_digest(cfg.corpus)}
    digests["stopwords"] = _file_digest(cfg.stopwords) if cfg.stopwords else "packaged"
    if cfg.embeddings:
        digests["embeddings"] = _file_digest(cfg.embeddings)
    if cfg.image_features:
        digests["image_features"] = _file_digest(cfg.image_features)
    return resources, digests


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:24]


class DiskFeatureCache:
    """Content-keyed block matrices and projectors under cache/."""

    def __init__(self, dir_path: str | Path):
        self.dir = Path(dir_path)
        self.dir.mkdir(parents=True, exist_ok=True)

    def get_matrix(self, key: str):
        path = self.dir / f"block_{key}.npz"
        if not path.exists():
            return None
        try:
            with np.load(path) as z:
                if str(z["kind"]) == "csr":
                    return sp.csr_matrix(
                        (z["data"], z["indices"], z["indptr"]), shape=tuple(z["shape"])
                    )
                return z["dense"]
        except Exception as exc:  # corrupted cache: regenerate
            print(f"warning: discarding corrupted cache file {path} ({exc})", file=sys.stderr)
            path.unlink(missing_ok=True)
            return None

    def put_matrix(self, key: str, M) -> None:
        path = self.dir / f"block_{key}.npz"
        if sp.issparse(M):
            M = M.tocsr()
            np.savez(path, kind="csr", data=M.data, indices=M.indices, indptr=M.indptr, shape=M.shape)
        else:
            np.savez(path, kind="dense", dense=np.asarray(M))

    def get_projector(self, key: str):
        path = self.dir / f"proj_{key}.txt"
        if not path.exists():
            return None
        try:
            return load_projector(path)
        except Exception as exc:
            print(f"warning: discarding corrupted cache file {path} ({exc})", file=sys.stderr)
            path.unlink(missing_ok=True)
            return None

    def put_projector(self, key: str, proj) -> None:
        save_projector(proj, self.dir / f"proj_{key}.txt")


def _dump_effective_config(cfg: RunConfig, path: Path) -> None:
    path.write_text(yaml.safe_dump(asdict(cfg), sort_keys=True), encoding="utf-8")


def cmd_run(cfg: RunConfig, seeds: list[int] | None = None) -> int:
    corpus = load_corpus(cfg.corpus)
    resources, digests = _load_resources(cfg)
    out = Path(cfg.output_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "models").mkdir(parents=True, exist_ok=True)
    ctx = CacheContext(cache=DiskFeatureCache(out / "cache"), digests=digests)
    _dump_effective_config(cfg, out / "effective_config.yaml")

    seed_list = seeds if seeds else [cfg.seed]
    reports = []
    for seed in seed_list:
        settings = replace(cfg.settings(), seed=seed)

        def one(scheme: str):
            return eval_mod.run_scheme_full(corpus, scheme, resources, settings, ctx)

        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(one, cfg.schemes))
        else:
            results = [one(s) for s in cfg.schemes]
        for scheme, (report, pipeline) in zip(cfg.schemes, results):
            reports.append(report)
            if seed == seed_list[0]:
                save_pipeline(pipeline, out / "models" / scheme.replace("+", "_"))

    write_report_tsv(reports, out / "reports" / "report.tsv")
    table = report_table(reports[: len(cfg.schemes)])
    if len(seed_list) > 1:
        table += "\n" + _seed_summary(reports, cfg.schemes, seed_list)
    (out / "reports" / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"\nwrote {out / 'reports' / 'report.tsv'}")
    return 0


def _seed_summary(reports, schemes, seed_list) -> str:
    by_scheme: dict[str, list] = {s: [] for s in schemes}
    for r in reports:
        by_scheme[r.scheme].append(r)
    lines = [f"mean +- sd over seeds {seed_list}:"]
    for s in schemes:
        accs = np.array([r.accuracy for r in by_scheme[s]])
        aucs = np.array([r.auc for r in by_scheme[s]])
        lines.append(
            f"  {s}: acc {100 * accs.mean():.2f}% +- {100 * accs.std(ddof=1):.2f}  "
            f"auc {100 * aucs.mean():.2f}% +- {100 * aucs.std(ddof=1):.2f}"
        )
    return "\n".join(lines) + "\n"


def cmd_featurize(cfg: RunConfig) -> int:
    corpus = load_corpus(cfg.corpus)
    resources, digests = _load_resources(cfg)
    out = Path(cfg.output_dir)
    ctx = CacheContext(cache=DiskFeatureCache(out / "cache"), digests=digests)
    settings = cfg.settings()
    seen: set[str] = set()
    for scheme in cfg.schemes:
        fs = SchemeId.parse(scheme).feature_set
        if fs in seen:
            continue
        seen.add(fs)
        status = eval_mod.featurize_scheme(corpus, scheme, resources, settings, ctx)
        for artifact, hit in sorted(status.items()):
            print(f"{fs}: {artifact}: {'cache hit' if hit else 'written'}")
    return 0


def cmd_inspect(model_dir: str, posts_path: str, cfg: RunConfig) -> int:
    if not Path(model_dir).exists():
        raise ResourceError(f"model directory not found: {model_dir}")
    _require(posts_path, "posts")
    pipeline = load_pipeline(model_dir)
    scheme = pipeline.scheme
    if scheme.text == "T3" and cfg.embeddings is None:
        raise ResourceError(f"model {scheme} needs embeddings; set 'embeddings' in the config")
    if scheme.image and cfg.image_features is None:
        raise ResourceError(f"model {scheme} needs image features; set 'image_features' in the config")
    _require(cfg.embeddings, "embeddings")
    _require(cfg.image_features, "image features")
    resources = SchemeResources(
        stopwords=load_stopwords(cfg.stopwords),
        embeddings=load_embeddings(cfg.embeddings) if scheme.text == "T3" else None,
        image_features=load_image_features(cfg.image_features) if scheme.image else None,
    )
    posts = list(load_corpus(posts_path).posts)
    X, offsets = eval_mod.transform_posts(pipeline, posts, resources)
    if pipeline.model_kind == "linear":
        from .linear import lr_predict

        probs = np.atleast_1d(lr_predict(pipeline.model, X))
    else:
        from .gbdt import predict

        probs = np.atleast_1d(predict(pipeline.model, X))
    names = sorted(offsets, key=lambda n: offsets[n][0])
    print("post_id\tprobability\t" + "\t".join(f"|{n}|" for n in names))
    for i, p in enumerate(posts):
        mags = [float(np.linalg.norm(X[i, lo:hi])) for lo, hi in (offsets[n] for n in names)]
        print(f"{p.post_id}\t{probs[i]:.6f}\t" + "\t".join(f"{m:.4f}" for m in mags))
    return 0


def cmd_make_fixtures(out_dir: str, n_posts: int, seed: int) -> int:
    paths = synth.write_fixtures(out_dir, synth.SynthSettings(n_posts=n_posts, seed=seed))
    for name, p in paths.items():
        print(f"{name}: {p}")
    config = {
        "corpus": str(paths["posts"]),
        "stopwords": str(paths["stopwords"]),
        "embeddings": str(paths["embeddings"]),
        "image_features": str(paths["image_features"]),
        "output_dir": str(Path(out_dir) / "out"),
        "seed": seed,
    }
    cfg_path = Path(out_dir) / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    print(f"config: {cfg_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisisfilter",
        description="Multimodal relevancy classification over a schemes grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help=f"YAML config path (default: ${CONFIG_ENV_VAR})")
        p.add_argument("--corpus", help="posts TSV path")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--stopwords")
        p.add_argument("--embeddings")
        p.add_argument("--image-features", dest="image_features")
        p.add_argument("--seed", type=int)
        p.add_argument("--schemes", help="comma-separated scheme list, e.g. T3+I1+M3,T2+M1")
        p.add_argument("--threads", type=int)

    p_run = sub.add_parser("run", help="evaluate the configured schemes grid")
    add_config_args(p_run)
    p_run.add_argument("--seeds", help="comma-separated seed list for mean +- sd reporting")

    p_feat = sub.add_parser("featurize", help="precompute cached feature blocks and projectors")
    add_config_args(p_feat)

    p_ins = sub.add_parser("inspect", help="score posts with a saved model, with block magnitudes")
    add_config_args(p_ins)
    p_ins.add_argument("--model", required=True, help="saved model directory (under models/)")
    p_ins.add_argument("--posts", required=True, help="posts TSV to score")

    p_fix = sub.add_parser("make-fixtures", help="emit the synthetic desk-scale dataset")
    p_fix.add_argument("--out", required=True)
    p_fix.add_argument("--n-posts", type=int, default=2000)
    p_fix.add_argument("--seed", type=int, default=13)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("corpus", "output_dir", "stopwords", "embeddings", "image_features", "seed", "threads")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "schemes", None):
        out["schemes"] = [s.strip() for s in args.schemes.split(",") if s.strip()]
    return out


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "make-fixtures":
            return cmd_make_fixtures(args.out, args.n_posts, args.seed)
        cfg = load_config(args.config, _overrides(args), require_corpus=args.command != "inspect")
        if args.command == "run":
            seeds = None
            if args.seeds:
                seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            return cmd_run(cfg, seeds)
        if args.command == "featurize":
            return cmd_featurize(cfg)
        if args.command == "inspect":
            return cmd_inspect(args.model, args.posts, cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
