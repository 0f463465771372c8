"""From-scratch histogram gradient-boosted trees for binary logistic loss.

Implements the two training accelerations of fast GBDT systems as
independent toggles: gradient-based one-side sampling (keep all
large-gradient rows, sample and reweight the small-gradient remainder) and
exclusive feature bundling (pack rarely co-occurring sparse features into
shared histogram columns). Bundling here is a histogram-pass compression
only: split search and tree routing always work in original feature space,
so conflict-free bundles are exactly lossless.

Trees grow leaf-wise (best split gain first) up to a leaf budget. All ties
break deterministically: lowest feature index, then lowest bin, then lowest
leaf id.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 200
    learning_rate: float = 0.1
    num_leaves: int = 31
    min_data_in_leaf: int = 20
    max_bins: int = 255
    goss_top_rate: float = 0.2
    goss_other_rate: float = 0.1
    efb_enabled: bool = True
    efb_max_conflict_rate: float = 0.0
    lambda_l2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must be in [2, 255]")
        if not 0.0 <= self.goss_top_rate <= 1.0 or not 0.0 <= self.goss_other_rate <= 1.0:
            raise ValueError("goss rates must be in [0, 1]")
        if self.goss_top_rate + self.goss_other_rate > 1.0:
            raise ValueError("goss_top_rate + goss_other_rate must be <= 1")
        if self.efb_max_conflict_rate < 0.0:
            raise ValueError("efb_max_conflict_rate must be >= 0")
        if self.lambda_l2 < 0.0:
            raise ValueError("lambda_l2 must be >= 0")


@dataclass(frozen=True)
class BinMapper:
    """Quantile bin upper bounds for one feature; bin(x) = #{bounds < x}."""

    bounds: np.ndarray
    zero_bin: int
    has_zeros: bool

    @property
    def n_bins(self) -> int:
        return len(self.bounds) + 1

    def bin_values(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.bounds, x, side="left").astype(np.uint8)


@dataclass(frozen=True)
class FeatureBundle:
    """Features sharing one histogram column, with disjoint bin ranges."""

    members: tuple[int, ...]
    offsets: tuple[int, ...]
    n_bins: int


@dataclass
class Tree:
    feature: np.ndarray  # -1 on leaves
    bin_threshold: np.ndarray  # train-time bin id; go left when bin <= t
    threshold: np.ndarray  # raw-value equivalent; go left when x <= thr
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # learning-rate-scaled leaf weight

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class GbdtModel:
    init_score: float
    trees: list[Tree]
    mappers: list[BinMapper]
    bundles: list[FeatureBundle]
    config: GbdtConfig
    n_features: int
    stats: dict = field(default_factory=dict)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_gradients(scores: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row gradient p - y and hessian p(1 - p) of the logistic loss."""
    p = _sigmoid(scores)
    return p - y, p * (1.0 - p)


# ---------------------------------------------------------------------------
# Binning


def _quantile_bounds(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Boundary values splitting sorted data into ~equal-population bins."""
    s = np.sort(values)
    pos = (np.arange(1, n_bins) * len(s)) // n_bins
    return np.unique(s[pos])


def _fit_bin_mapper(col: np.ndarray, max_bins: int) -> BinMapper:
    distinct = np.unique(col)
    has_zeros = bool(np.any(col == 0.0))
    if len(distinct) <= 1:
        bounds = np.empty(0, dtype=np.float64)
    elif len(distinct) <= max_bins:
        bounds = np.unique((distinct[:-1] + distinct[1:]) / 2.0)
    elif not has_zeros:
        bounds = _quantile_bounds(col, max_bins)
    else:
        # zeros get a dedicated bin: quantile-bin the nonzero values, then
        # insert boundaries isolating exactly 0.0
        nz = col[col != 0.0]
        has_neg = bool(np.any(nz < 0.0))
        budget = max_bins - 2 - (1 if has_neg else 0)
        extra = [0.0]
        if has_neg:
            extra.append(float(nz[nz < 0.0].max()) / 2.0)
        bounds = np.unique(np.concatenate([_quantile_bounds(nz, budget + 1), np.array(extra)]))
    zero_bin = int(np.searchsorted(bounds, 0.0, side="left"))
    return BinMapper(bounds=bounds, zero_bin=zero_bin, has_zeros=has_zeros)


def bin_features(X: np.ndarray, max_bins: int) -> tuple[np.ndarray, list[BinMapper]]:
    """Quantile-bin every column of a finite training matrix.

    Constant features get a single bin; sparse features keep exact zero in a
    bin of its own so bundling can tell zero from nonzero.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("training matrix contains non-finite values")
    mappers = [_fit_bin_mapper(X[:, f], max_bins) for f in range(X.shape[1])]
    binned = np.empty(X.shape, dtype=np.uint8, order="F")
    for f, m in enumerate(mappers):
        binned[:, f] = m.bin_values(X[:, f])
    return binned, mappers


# ---------------------------------------------------------------------------
# Exclusive feature bundling


def efb_bundle(
    binned: np.ndarray, mappers: list[BinMapper], max_conflict_rate: float
) -> list[FeatureBundle]:
    """Greedily bundle features whose nonzero rows rarely collide.

    Features are visited in descending nonzero-count order and placed into
    the first bundle whose conflict fraction (rows with >= 2 nonzero
    members) stays within max_conflict_rate, else start a new bundle.
    Returned bundles are sorted by their smallest member so bundle layout is
    independent of the visiting order.
    """
    n_rows, n_features = binned.shape
    nonzero = [
        (binned[:, f] != m.zero_bin) if m.has_zeros else np.ones(n_rows, dtype=bool)
        for f, m in enumerate(mappers)
    ]
    counts = np.array([int(nz.sum()) for nz in nonzero])
    order = np.argsort(-counts, kind="stable")

    member_lists: list[list[int]] = []
    occupancy: list[np.ndarray] = []  # per-row count of nonzero members
    conflicts: list[int] = []  # rows with >= 2 nonzero members
    budget = max_conflict_rate * n_rows + 1e-9
    for f in order:
        nz = nonzero[f]
        placed = False
        for bi in range(len(member_lists)):
            added = int(np.sum(nz & (occupancy[bi] == 1)))
            if conflicts[bi] + added <= budget:
                member_lists[bi].append(int(f))
                conflicts[bi] += added
                occupancy[bi] += nz
                placed = True
                break
        if not placed:
            member_lists.append([int(f)])
            occupancy.append(nz.astype(np.int32))
            conflicts.append(0)

    bundles = []
    for members in sorted(member_lists, key=min):
        members = sorted(members)
        if len(members) == 1:
            f = members[0]
            bundles.append(FeatureBundle((f,), (0,), mappers[f].n_bins))
        else:
            offsets, pos = [], 1  # bundle bin 0 reserved for all-members-zero
            for f in members:
                offsets.append(pos)
                pos += mappers[f].n_bins
            bundles.append(FeatureBundle(tuple(members), tuple(offsets), pos))
    return bundles


def singleton_bundles(mappers: list[BinMapper]) -> list[FeatureBundle]:
    return [FeatureBundle((f,), (0,), m.n_bins) for f, m in enumerate(mappers)]


def _bundle_columns(
    binned: np.ndarray, mappers: list[BinMapper], bundles: list[FeatureBundle]
) -> list[np.ndarray]:
    """One histogram column per bundle (singletons reuse the raw bin column)."""
    cols = []
    for b in bundles:
        if len(b.members) == 1:
            cols.append(np.ascontiguousarray(binned[:, b.members[0]], dtype=np.int32))
            continue
        col = np.zeros(binned.shape[0], dtype=np.int32)
        for f, off in zip(b.members, b.offsets):
            m = mappers[f]
            nz = (binned[:, f] != m.zero_bin) if m.has_zeros else np.ones(len(col), dtype=bool)
            col[nz] = off + binned[nz, f].astype(np.int32)
        cols.append(col)
    return cols


class _TrainContext:
    """Precomputed flat layouts shared by every histogram pass of a run.

    `codes` holds, per row and bundle, the bundle's bin already offset into
    one flat bin space, so a node histogram is a single bincount over the
    raveled row block. The feature-flat layout (feature-major, bin-minor)
    drives the vectorized split search; `gather_idx` maps each feature-flat
    position back into bundle-flat histogram space.
    """

    def __init__(self, binned, mappers, bundles):
        n = binned.shape[0]
        n_features = len(mappers)
        bundle_starts = np.zeros(len(bundles) + 1, dtype=np.int64)
        for i, b in enumerate(bundles):
            bundle_starts[i + 1] = bundle_starts[i] + b.n_bins
        self.total_bins = int(bundle_starts[-1])
        cols = _bundle_columns(binned, mappers, bundles)
        self.codes = np.empty((n, len(bundles)), dtype=np.int32)
        for i, col in enumerate(cols):
            self.codes[:, i] = col + bundle_starts[i]
        self.n_bundles = len(bundles)

        # padded (feature, bin) layout: row-wise cumulative sums are then
        # bitwise identical to independent per-feature cumulative sums
        self.f_nbins = np.array([m.n_bins for m in mappers], dtype=np.int64)
        self.n_features = n_features
        self.max_nb = int(self.f_nbins.max())
        pad_slot = self.total_bins  # histogram arrays carry one always-zero slot
        self.gather_idx = np.full((n_features, self.max_nb), pad_slot, dtype=np.int64)
        in_multi = np.zeros(n_features, dtype=bool)
        for bi, b in enumerate(bundles):
            multi = len(b.members) > 1
            for f, off in zip(b.members, b.offsets):
                nb = mappers[f].n_bins
                self.gather_idx[f, :nb] = bundle_starts[bi] + off + np.arange(nb)
                in_multi[f] = multi
        self.multi_features = np.flatnonzero(in_multi)
        self.zero_bins = np.array([m.zero_bin for m in mappers], dtype=np.int64)
        self.last_bin = self.f_nbins - 1  # index of each feature's final cumsum entry
        bin_idx = np.arange(self.max_nb)[None, :]
        self.cand_mask = bin_idx < self.last_bin[:, None]
        self.scratch = _Scratch(n_features, self.max_nb)


class _Scratch:
    """Reusable buffers so split search allocates little per call."""

    def __init__(self, n_features: int, max_nb: int):
        shape = (n_features, max_nb)
        self.stat = np.empty((3,) + shape)
        self.cum = np.empty((3,) + shape)
        self.right = np.empty((3,) + shape)
        self.gain = np.empty(shape)
        self.tmp = np.empty(shape)
        self.valid = np.empty(shape, dtype=bool)


# ---------------------------------------------------------------------------
# Gradient-based one-side sampling


def goss_sample(
    gradients: np.ndarray, a: float, b: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """One-side sampling: all of the ceil(a*n) largest-|gradient| rows at
    weight 1 plus ceil(b*n) seeded-uniform rows from the remainder at weight
    (1 - a) / b. Returns ascending row indices with aligned weights.
    """
    if a + b > 1.0:
        raise ValueError("goss rates must satisfy a + b <= 1")
    n = len(gradients)
    if a >= 1.0:
        return np.arange(n), np.ones(n)
    n_top = math.ceil(a * n)
    order = np.argsort(-np.abs(gradients), kind="stable")
    top = order[:n_top]
    if b == 0.0:
        idx = np.sort(top)
        return idx, np.ones(len(idx))
    rest = order[n_top:]
    n_other = min(math.ceil(b * n), len(rest))
    rng = np.random.default_rng(seed)
    sampled = rest[rng.choice(len(rest), size=n_other, replace=False)]
    idx = np.concatenate([top, sampled])
    weights = np.concatenate([np.ones(len(top)), np.full(len(sampled), (1.0 - a) / b)])
    sort = np.argsort(idx)
    return idx[sort], weights[sort]


# ---------------------------------------------------------------------------
# Tree growing

_EMPTY = np.empty(0)


class _LeafState:
    __slots__ = ("node_id", "rows", "hist", "grad", "hess", "best")

    def __init__(self, node_id, rows, hist, grad, hess, best=None):
        self.node_id = node_id
        self.rows = rows
        self.hist = hist  # (3, total_bundle_bins): g, h, count
        self.grad = grad
        self.hess = hess
        self.best = best  # (gain, feature, bin)


def _build_hist(ctx: _TrainContext, rows, gw, hw, touched=None):
    """Node histogram: one flat bincount per statistic over all bundles.

    One trailing always-zero slot backs the padded positions of the split
    search's (feature, bin) layout.
    """
    if touched is not None:
        touched[rows] = True
    c = ctx.codes[rows].ravel()
    size = ctx.total_bins + 1
    hist = np.empty((3, size))
    hist[0] = np.bincount(c, weights=np.repeat(gw[rows], ctx.n_bundles), minlength=size)
    hist[1] = np.bincount(c, weights=np.repeat(hw[rows], ctx.n_bundles), minlength=size)
    hist[2] = np.bincount(c, minlength=size)
    return hist


def _find_best_split(leaf, ctx: _TrainContext, lam, min_data):
    """Best (gain, feature, bin) over all features at once.

    Stats live in a padded (feature, bin) matrix whose row-wise cumulative
    sums equal independent per-feature scans bit for bit; the raveled layout
    is feature-major/bin-minor, so the first argmax position realizes the
    lowest-feature-then-lowest-bin tie rule.
    """
    if len(leaf.rows) < 2 * min_data:
        return None
    sc = ctx.scratch
    for s in range(3):
        np.take(leaf.hist[s], ctx.gather_idx, out=sc.stat[s])
    if len(ctx.multi_features):
        # rows where every bundle member is zero live in bundle bin 0 or
        # another member's range; fold them back into each member's zero bin
        mf = ctx.multi_features
        for s, total in ((0, leaf.grad), (1, leaf.hess), (2, float(len(leaf.rows)))):
            seg = sc.stat[s][mf].sum(axis=1)
            sc.stat[s][mf, ctx.zero_bins[mf]] += total - seg

    feats = np.arange(ctx.n_features)
    for s in range(3):
        np.cumsum(sc.stat[s], axis=1, out=sc.cum[s])
        # right side = per-feature total (last cumsum entry) minus left side
        np.subtract(sc.cum[s, feats, ctx.last_bin][:, None], sc.cum[s], out=sc.right[s])

    gl, hl, cl = sc.cum
    gr, hr, cr = sc.right
    np.greater_equal(cl, min_data, out=sc.valid)
    sc.valid &= cr >= min_data
    sc.valid &= ctx.cand_mask
    if lam <= 0.0:  # hessians are nonnegative, so lam > 0 guarantees positivity
        sc.valid &= hl + lam > 0.0
        sc.valid &= hr + lam > 0.0
    if not np.any(sc.valid):
        return None
    tot_g = sc.cum[0, feats, ctx.last_bin][:, None]
    tot_h = sc.cum[1, feats, ctx.last_bin][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        # gain = GL^2/(HL+lam) + GR^2/(HR+lam) - GP^2/(HP+lam)
        np.add(hl, lam, out=sc.tmp)
        np.divide(gl, sc.tmp, out=sc.gain)
        sc.gain *= gl
        np.add(hr, lam, out=sc.tmp)
        np.divide(gr, sc.tmp, out=sc.tmp)
        sc.tmp *= gr
        sc.gain += sc.tmp
        sc.gain -= tot_g * tot_g / (tot_h + lam)
    sc.gain[~sc.valid] = -np.inf
    pos = int(np.argmax(sc.gain))
    if not sc.gain.ravel()[pos] > 0.0:
        return None
    return float(sc.gain.ravel()[pos]), pos // ctx.max_nb, pos % ctx.max_nb


def _grow_tree(binned, ctx, mappers, rows, gw, hw, config, touched=None):
    lam = config.lambda_l2
    min_data = config.min_data_in_leaf
    lr = config.learning_rate

    feature = [-1]
    bin_thr = [-1]
    left = [-1]
    right = [-1]

    def make_leaf(node_id, node_rows):
        leaf = _LeafState(
            node_id, node_rows, None, float(np.sum(gw[node_rows])), float(np.sum(hw[node_rows]))
        )
        if len(node_rows) >= 2 * min_data:  # otherwise no split can be valid
            leaf.hist = _build_hist(ctx, node_rows, gw, hw, touched)
            leaf.best = _find_best_split(leaf, ctx, lam, min_data)
            leaf.hist = None  # only the chosen split is needed from here on
        return leaf

    leaves = [make_leaf(0, rows)]

    while len(leaves) < config.num_leaves:
        target = None
        for leaf in leaves:  # ascending node id; strict > keeps earliest on ties
            if leaf.best is not None and (target is None or leaf.best[0] > target.best[0]):
                target = leaf
        if target is None:
            break
        _, f, t = target.best
        go_left = binned[target.rows, f] <= t
        rows_l, rows_r = target.rows[go_left], target.rows[~go_left]

        nid = target.node_id
        feature[nid] = f
        bin_thr[nid] = t
        lid, rid = len(feature), len(feature) + 1
        left[nid], right[nid] = lid, rid
        feature += [-1, -1]
        bin_thr += [-1, -1]
        left += [-1, -1]
        right += [-1, -1]

        leaves.remove(target)
        leaves.append(make_leaf(lid, rows_l))
        leaves.append(make_leaf(rid, rows_r))
        leaves.sort(key=lambda l: l.node_id)

    n_nodes = len(feature)
    value = np.zeros(n_nodes)
    for leaf in leaves:
        denom = leaf.hess + lam
        value[leaf.node_id] = -lr * leaf.grad / denom if denom > 0.0 else 0.0

    thr = np.full(n_nodes, np.nan)
    for nid in range(n_nodes):
        if feature[nid] >= 0:
            thr[nid] = mappers[feature[nid]].bounds[bin_thr[nid]]
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        bin_threshold=np.asarray(bin_thr, dtype=np.int32),
        threshold=thr,
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=value,
    )


def _apply_tree(tree: Tree, X: np.ndarray, binned: bool) -> np.ndarray:
    """Vectorized routing; binned routing and raw-value routing agree exactly."""
    n = X.shape[0]
    out = np.zeros(n)
    stack = [(0, np.arange(n))]
    while stack:
        nid, idx = stack.pop()
        if tree.feature[nid] < 0:
            out[idx] = tree.value[nid]
            continue
        col = X[idx, tree.feature[nid]]
        go_left = col <= (tree.bin_threshold[nid] if binned else tree.threshold[nid])
        stack.append((int(tree.left[nid]), idx[go_left]))
        stack.append((int(tree.right[nid]), idx[~go_left]))
    return out


# ---------------------------------------------------------------------------
# Training / prediction


def train(config: GbdtConfig, X, y, collect_stats: bool = False) -> GbdtModel:
    """Boosted training under logistic loss.

    Per iteration: gradients/hessians from current scores, one-side sampling,
    one leaf-wise tree on the sampled rows, then a score update on all rows.
    """
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, n_features = X.shape
    if len(y) != n:
        raise ValueError("X and y row counts differ")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    if len(np.unique(y)) < 2:
        raise ValueError("training needs both classes present")
    if n < 2 * config.min_data_in_leaf:
        raise ValueError(f"need at least {2 * config.min_data_in_leaf} rows, got {n}")

    binned, mappers = bin_features(X, config.max_bins)
    if all(m.n_bins < 2 for m in mappers):
        raise ValueError("degenerate matrix: every feature is constant")
    if config.efb_enabled:
        bundles = efb_bundle(binned, mappers, config.efb_max_conflict_rate)
    else:
        bundles = singleton_bundles(mappers)
    ctx = _TrainContext(binned, mappers, bundles)

    base = float(np.mean(y))
    init_score = math.log(base / (1.0 - base))
    scores = np.full(n, init_score)
    a, b = config.goss_top_rate, config.goss_other_rate
    iter_seeds = np.random.SeedSequence(config.seed).generate_state(config.n_trees)

    trees: list[Tree] = []
    stats: dict = {"rows_touched": [], "sample_sizes": []} if collect_stats else {}
    touched = np.zeros(n, dtype=bool) if collect_stats else None
    gw = np.zeros(n)
    hw = np.zeros(n)
    for m in range(config.n_trees):
        g, h = logistic_gradients(scores, y)
        if a >= 1.0:
            rows, w = np.arange(n), np.ones(n)
        else:
            rows, w = goss_sample(g, a, b, int(iter_seeds[m]))
        if len(rows) == 0:
            raise ValueError("GOSS sampled zero rows; raise goss_top_rate/goss_other_rate")
        gw.fill(0.0)
        hw.fill(0.0)
        gw[rows] = g[rows] * w
        hw[rows] = h[rows] * w
        if touched is not None:
            touched.fill(False)
        tree = _grow_tree(binned, ctx, mappers, rows, gw, hw, config, touched)
        scores += _apply_tree(tree, binned, binned=True)
        trees.append(tree)
        if collect_stats:
            stats["rows_touched"].append(int(touched.sum()))
            stats["sample_sizes"].append(len(rows))

    return GbdtModel(
        init_score=init_score,
        trees=trees,
        mappers=mappers,
        bundles=bundles,
        config=config,
        n_features=n_features,
        stats=stats,
    )


def predict(model: GbdtModel, x) -> np.ndarray | float:
    """Probability of the positive class, strictly inside (0, 1)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = arr[None, :] if single else arr
    if X.shape[1] != model.n_features:
        raise ValueError(f"input width {X.shape[1]} != model width {model.n_features}")
    scores = np.full(X.shape[0], model.init_score)
    for tree in model.trees:
        scores += _apply_tree(tree, X, binned=False)
    p = np.clip(_sigmoid(scores), 1e-15, 1.0 - 1e-15)
    return float(p[0]) if single else p


def raw_scores(model: GbdtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    scores = np.full(X.shape[0], model.init_score)
    for tree in model.trees:
        scores += _apply_tree(tree, X, binned=False)
    return scores


# ---------------------------------------------------------------------------
# Serialization (versioned text; exact decimal round-trip)


def save_model(model: GbdtModel, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("gbdtmodel v1\n")
        fh.write("config " + json.dumps(asdict(model.config), sort_keys=True) + "\n")
        fh.write(f"init_score {model.init_score!r}\n")
        fh.write(f"n_features {model.n_features}\n")
        fh.write(f"mappers {len(model.mappers)}\n")
        for m in model.mappers:
            fh.write(
                f"mapper {m.zero_bin} {int(m.has_zeros)} "
                + " ".join(repr(float(b)) for b in m.bounds)
                + "\n"
            )
        fh.write(f"bundles {len(model.bundles)}\n")
        for b in model.bundles:
            fh.write(
                "bundle "
                + ",".join(map(str, b.members))
                + " "
                + ",".join(map(str, b.offsets))
                + f" {b.n_bins}\n"
            )
        fh.write(f"trees {len(model.trees)}\n")
        for t in model.trees:
            fh.write(f"tree {t.n_nodes}\n")
            for i in range(t.n_nodes):
                fh.write(
                    f"{t.feature[i]} {t.bin_threshold[i]} {float(t.threshold[i])!r} "
                    f"{t.left[i]} {t.right[i]} {float(t.value[i])!r}\n"
                )


def load_model(path: str | Path) -> GbdtModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        if fh.readline().strip() != "gbdtmodel v1":
            raise ValueError(f"{path}: unknown model format")
        config = GbdtConfig(**json.loads(fh.readline().split(" ", 1)[1]))
        init_score = float(fh.readline().split()[1])
        n_features = int(fh.readline().split()[1])
        n_mappers = int(fh.readline().split()[1])
        mappers = []
        for _ in range(n_mappers):
            parts = fh.readline().split()
            mappers.append(
                BinMapper(
                    bounds=np.array([float(x) for x in parts[3:]], dtype=np.float64),
                    zero_bin=int(parts[1]),
                    has_zeros=bool(int(parts[2])),
                )
            )
        n_bundles = int(fh.readline().split()[1])
        bundles = []
        for _ in range(n_bundles):
            parts = fh.readline().split()
            bundles.append(
                FeatureBundle(
                    members=tuple(int(x) for x in parts[1].split(",")),
                    offsets=tuple(int(x) for x in parts[2].split(",")),
                    n_bins=int(parts[3]),
                )
            )
        n_trees = int(fh.readline().split()[1])
        trees = []
        for _ in range(n_trees):
            n_nodes = int(fh.readline().split()[1])
            rows = [fh.readline().split() for _ in range(n_nodes)]
            trees.append(
                Tree(
                    feature=np.array([int(r[0]) for r in rows], dtype=np.int32),
                    bin_threshold=np.array([int(r[1]) for r in rows], dtype=np.int32),
                    threshold=np.array([float(r[2]) for r in rows]),
                    left=np.array([int(r[3]) for r in rows], dtype=np.int32),
                    right=np.array([int(r[4]) for r in rows], dtype=np.int32),
                    value=np.array([float(r[5]) for r in rows]),
                )
            )
    return GbdtModel(
        init_score=init_score,
        trees=trees,
        mappers=mappers,
        bundles=bundles,
        config=config,
        n_features=n_features,
    )
