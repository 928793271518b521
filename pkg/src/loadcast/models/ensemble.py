"""From-scratch tree ensembles: gradient-boosted trees and random forest.

Trees are grown best-first (leaf-wise) up to ``max_leaves`` using
histogram split search: numeric features are pre-binned into at most
``n_bins`` equal-frequency bins, categorical features are split by greedy
category-subset ordering on mean target. Boosted mode fits squared-loss
residuals sequentially with leaf values ``sum(residual) / (count + l2)``;
bagged mode averages trees fit on bootstrap samples.

Ties during split search break toward the lowest feature index, then the
lowest threshold, so results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, InsufficientDataError, SchemaError

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GBDTParams:
    n_trees: int = 200
    learning_rate: float = 0.08
    max_leaves: int = 31
    min_samples_leaf: int = 20
    feature_fraction: float = 1.0
    row_subsample: float = 1.0
    l2_leaf_reg: float = 1.0
    n_bins: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.max_leaves < 2:
            raise ConfigError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if not 0 < self.feature_fraction <= 1 or not 0 < self.row_subsample <= 1:
            raise ConfigError("feature_fraction and row_subsample must be in (0, 1]")
        if self.l2_leaf_reg < 0:
            raise ConfigError("l2_leaf_reg must be >= 0")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be >= 2")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "learning_rate": self.learning_rate,
            "max_leaves": self.max_leaves,
            "min_samples_leaf": self.min_samples_leaf,
            "feature_fraction": self.feature_fraction,
            "row_subsample": self.row_subsample,
            "l2_leaf_reg": self.l2_leaf_reg,
            "n_bins": self.n_bins,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; node 0 is the root, feature -1 marks a leaf.

    Numeric splits send ``x[feature] <= threshold`` left; categorical splits
    send rows whose raw value is in ``categories[node]`` left (unseen
    categories go right).
    """

    feature: np.ndarray
    threshold: np.ndarray
    categories: tuple
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        if len(X) == 0:
            return out
        stack = [(0, np.arange(len(X)))]
        while stack:
            nid, idx = stack.pop()
            f = int(self.feature[nid])
            if f < 0:
                out[idx] = self.value[nid]
                continue
            if self.categories[nid] is not None:
                go_left = np.isin(X[idx, f], self.categories[nid])
            else:
                go_left = X[idx, f] <= self.threshold[nid]
            stack.append((int(self.left[nid]), idx[go_left]))
            stack.append((int(self.right[nid]), idx[~go_left]))
        return out


@dataclass(frozen=True)
class TreeEnsembleModel:
    mode: str  # "boosted" or "bagged"
    params: GBDTParams
    base_score: float
    trees: tuple
    feature_names: tuple
    categorical: tuple
    train_loss: tuple = field(default=())
    fitted: bool = True

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"expected {len(self.feature_names)} feature columns, got shape {X.shape}"
            )
        if len(X) == 0:
            return np.zeros(0)
        if self.mode == "boosted":
            out = np.full(len(X), self.base_score)
            for tree in self.trees:
                out += tree.predict(X)
            return out
        out = np.zeros(len(X))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


# ---------------------------------------------------------------------------
# Pre-binning


class _Binner:
    """Maps raw columns to small integer codes for histogram accumulation."""

    def __init__(self, X: np.ndarray, categorical: tuple, n_bins: int):
        n, p = X.shape
        self.is_cat = tuple(categorical)
        self.thresholds: list = [None] * p  # numeric: candidate split values
        self.cat_values: list = [None] * p  # categorical: sorted raw values
        self.n_codes = np.empty(p, dtype=np.int64)
        codes = np.empty((n, p), dtype=np.uint16)
        for j in range(p):
            col = X[:, j]
            if self.is_cat[j]:
                values, inverse = np.unique(col, return_inverse=True)
                self.cat_values[j] = values
                codes[:, j] = inverse
                self.n_codes[j] = len(values)
            else:
                uniq = np.unique(col)
                if len(uniq) > n_bins:
                    qs = np.quantile(col, np.linspace(0, 1, n_bins + 1)[1:-1], method="lower")
                    cuts = np.unique(qs)
                    # threshold between a cut value and the next distinct value
                    nxt = np.searchsorted(uniq, cuts, side="right")
                    keep = nxt < len(uniq)
                    thr = (cuts[keep] + uniq[nxt[keep]]) / 2.0
                else:
                    thr = (uniq[:-1] + uniq[1:]) / 2.0
                self.thresholds[j] = thr
                codes[:, j] = np.searchsorted(thr, col, side="left")
                self.n_codes[j] = len(thr) + 1
        self.codes = codes
        self.offsets = np.concatenate([[0], np.cumsum(self.n_codes)])
        self.total_bins = int(self.offsets[-1])


# ---------------------------------------------------------------------------
# Growth


class _Growth:
    """Mutable tree under construction, in code space."""

    __slots__ = ("nodes", "leaf_rows")

    def __init__(self):
        self.nodes: list[dict] = []
        self.leaf_rows: dict[int, np.ndarray] = {}

    def new_node(self, rows: np.ndarray) -> int:
        nid = len(self.nodes)
        self.nodes.append({"feature": -1, "bin": -1, "cats": None, "left": -1, "right": -1, "value": 0.0})
        self.leaf_rows[nid] = rows
        return nid


def _best_split(binner: _Binner, grad: np.ndarray, rows: np.ndarray, feats: np.ndarray,
                min_leaf: int, lam: float):
    """Best (gain, feature, bin-or-category-set) over ``feats`` at this node."""
    if len(rows) < 2 * min_leaf:
        return None
    sub = binner.codes[np.ix_(rows, feats)].astype(np.int64)
    sub += binner.offsets[feats][None, :]
    flat = sub.ravel()
    weights = np.repeat(grad[rows], len(feats))
    g_hist = np.bincount(flat, weights=weights, minlength=binner.total_bins)
    n_hist = np.bincount(flat, minlength=binner.total_bins)

    g_total = float(grad[rows].sum())
    n_total = len(rows)
    parent = g_total * g_total / (n_total + lam)

    best = None  # (gain, feat, kind, payload)
    for f in feats:
        lo, hi = binner.offsets[f], binner.offsets[f + 1]
        gs, ns = g_hist[lo:hi], n_hist[lo:hi]
        if binner.is_cat[f]:
            present = np.flatnonzero(ns > 0)
            if len(present) < 2:
                continue
            means = gs[present] / ns[present]
            order = present[np.lexsort((present, means))]
            og, on = gs[order], ns[order]
        else:
            og, on = gs, ns
        if len(og) < 2:  # constant column at this node
            continue
        gl = np.cumsum(og)[:-1]
        nl = np.cumsum(on)[:-1]
        gr = g_total - gl
        nr = n_total - nl
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = gl * gl / (nl + lam) + gr * gr / (nr + lam) - parent
        gain[(nl < min_leaf) | (nr < min_leaf)] = -np.inf
        b = int(np.argmax(gain))
        g = float(gain[b])
        if g > _MIN_GAIN and (best is None or g > best[0]):
            if binner.is_cat[f]:
                best = (g, int(f), "cat", frozenset(int(c) for c in order[: b + 1]))
            else:
                best = (g, int(f), "num", b)
    return best


def _grow_tree(binner: _Binner, grad: np.ndarray, rows: np.ndarray, rng: np.random.Generator,
               params: GBDTParams, lam: float, leaf_scale: float, per_node_features: bool,
               fixed_feats: np.ndarray):
    """Grow one tree best-first; returns (Tree, leaf predictions for all rows)."""
    growth = _Growth()
    p = binner.codes.shape[1]

    def node_feats() -> np.ndarray:
        if not per_node_features:
            return fixed_feats
        k = max(1, int(np.ceil(params.feature_fraction * p)))
        if k >= p:
            return np.arange(p)
        return np.sort(rng.choice(p, size=k, replace=False))

    root = growth.new_node(rows)
    candidates: dict[int, tuple] = {}
    split = _best_split(binner, grad, rows, node_feats(), params.min_samples_leaf, lam)
    if split is not None:
        candidates[root] = split
    n_leaves = 1
    while n_leaves < params.max_leaves and candidates:
        # highest gain wins; ties go to the node created first
        nid = min(candidates, key=lambda k: (-candidates[k][0], k))
        gain, f, kind, payload = candidates.pop(nid)
        node_rows = growth.leaf_rows.pop(nid)
        codes_f = binner.codes[node_rows, f]
        if kind == "cat":
            left_mask = np.isin(codes_f, np.fromiter(payload, dtype=np.uint16))
        else:
            left_mask = codes_f <= payload
        lid = growth.new_node(node_rows[left_mask])
        rid = growth.new_node(node_rows[~left_mask])
        node = growth.nodes[nid]
        node["feature"] = f
        node["bin"] = payload if kind == "num" else -1
        node["cats"] = payload if kind == "cat" else None
        node["left"], node["right"] = lid, rid
        for child in (lid, rid):
            s = _best_split(binner, grad, growth.leaf_rows[child], node_feats(),
                            params.min_samples_leaf, lam)
            if s is not None:
                candidates[child] = s
        n_leaves += 1

    m = len(growth.nodes)
    feature = np.full(m, -1, dtype=np.int32)
    threshold = np.full(m, np.nan)
    left = np.full(m, -1, dtype=np.int32)
    right = np.full(m, -1, dtype=np.int32)
    value = np.zeros(m)
    categories: list = [None] * m
    pred = np.zeros(len(grad))
    for nid, node in enumerate(growth.nodes):
        if node["feature"] >= 0:
            f = node["feature"]
            feature[nid] = f
            left[nid], right[nid] = node["left"], node["right"]
            if node["cats"] is not None:
                raw = binner.cat_values[f][sorted(node["cats"])]
                categories[nid] = np.array(sorted(float(v) for v in raw))
            else:
                threshold[nid] = binner.thresholds[f][node["bin"]]
        else:
            node_rows = growth.leaf_rows[nid]
            v = leaf_scale * float(grad[node_rows].sum()) / (len(node_rows) + lam)
            value[nid] = v
            pred[np.unique(node_rows)] = v  # rows may repeat under bootstrap
    tree = Tree(feature, threshold, tuple(categories), left, right, value)
    # out-of-sample rows (subsampling/bootstrap) still need this tree's output
    uncovered = np.ones(len(grad), dtype=bool)
    uncovered[rows] = False
    if uncovered.any():
        pred[uncovered] = _predict_codes(tree, growth, binner, np.flatnonzero(uncovered))
    return tree, pred


def _predict_codes(tree: Tree, growth: _Growth, binner: _Binner, idx: np.ndarray) -> np.ndarray:
    out = np.empty(len(idx))
    stack = [(0, np.arange(len(idx)))]
    while stack:
        nid, pos = stack.pop()
        f = int(tree.feature[nid])
        if f < 0:
            out[pos] = tree.value[nid]
            continue
        node = growth.nodes[nid]
        codes_f = binner.codes[idx[pos], f]
        if node["cats"] is not None:
            go_left = np.isin(codes_f, np.fromiter(node["cats"], dtype=np.uint16))
        else:
            go_left = codes_f <= node["bin"]
        stack.append((int(tree.left[nid]), pos[go_left]))
        stack.append((int(tree.right[nid]), pos[~go_left]))
    return out


# ---------------------------------------------------------------------------
# Fitting and prediction


def fit_ensemble(params: GBDTParams, mode: str, matrix) -> TreeEnsembleModel:
    """Fit a boosted or bagged tree ensemble on a feature matrix.

    ``matrix`` provides ``X`` (n x p floats), ``y`` (kW targets),
    ``columns`` and per-column ``categorical`` flags (see features module).
    """
    if mode not in ("boosted", "bagged"):
        raise ConfigError(f"mode must be 'boosted' or 'bagged', got {mode!r}")
    X = np.asarray(matrix.X, dtype=float)
    y = np.asarray(matrix.y, dtype=float)
    n, p = X.shape if X.ndim == 2 else (0, 0)
    if n == 0 or p == 0:
        raise InsufficientDataError("feature matrix is empty")
    if n < params.min_samples_leaf:
        raise InsufficientDataError(
            f"{n} rows is fewer than min_samples_leaf={params.min_samples_leaf}"
        )
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    if not np.all(np.isfinite(y)):
        raise DataError("target vector contains non-finite values")

    binner = _Binner(X, tuple(matrix.categorical), params.n_bins)
    rng = np.random.default_rng(params.seed)
    trees: list[Tree] = []
    losses: list[float] = []

    if mode == "boosted":
        base = float(y.mean())
        pred = np.full(n, base)
        n_rows = max(1, int(np.ceil(params.row_subsample * n)))
        n_feats = max(1, int(np.ceil(params.feature_fraction * p)))
        for _ in range(params.n_trees):
            rows = (np.sort(rng.choice(n, size=n_rows, replace=False))
                    if n_rows < n else np.arange(n))
            feats = (np.sort(rng.choice(p, size=n_feats, replace=False))
                     if n_feats < p else np.arange(p))
            residual = y - pred
            tree, tree_pred = _grow_tree(
                binner, residual, rows, rng, params, params.l2_leaf_reg,
                leaf_scale=params.learning_rate, per_node_features=False, fixed_feats=feats,
            )
            trees.append(tree)
            pred += tree_pred
            losses.append(float(np.sqrt(np.mean((y - pred) ** 2))))
        return TreeEnsembleModel(
            mode="boosted", params=params, base_score=base, trees=tuple(trees),
            feature_names=tuple(matrix.columns), categorical=tuple(matrix.categorical),
            train_loss=tuple(losses),
        )

    # bagged: bootstrap rows, per-split feature sampling, unregularized means
    running = np.zeros(n)
    for k in range(params.n_trees):
        rows = np.sort(rng.choice(n, size=n, replace=True))
        tree, tree_pred = _grow_tree(
            binner, y, rows, rng, params, lam=0.0,
            leaf_scale=1.0, per_node_features=True, fixed_feats=np.arange(p),
        )
        trees.append(tree)
        running += tree_pred
        losses.append(float(np.sqrt(np.mean((y - running / (k + 1)) ** 2))))
    return TreeEnsembleModel(
        mode="bagged", params=params, base_score=0.0, trees=tuple(trees),
        feature_names=tuple(matrix.columns), categorical=tuple(matrix.categorical),
        train_loss=tuple(losses),
    )


def predict_ensemble(model: TreeEnsembleModel, rows, columns=None) -> np.ndarray:
    """Predict kW for each row; rows may be a FeatureMatrix or a 2-D array.

    When ``columns`` accompanies an array, they are matched to the model's
    schema by name (order-insensitive); unknown or missing names raise.
    """
    if not model.fitted:
        raise SchemaError("model is not fitted")
    if columns is None and hasattr(rows, "columns"):
        columns = tuple(rows.columns)
        rows = rows.X
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise SchemaError(f"expected a 2-D row array, got shape {X.shape}")
    if columns is not None:
        columns = tuple(columns)
        if columns != model.feature_names:
            unknown = set(columns) - set(model.feature_names)
            missing = set(model.feature_names) - set(columns)
            if unknown or missing:
                raise SchemaError(
                    f"row schema mismatch: unknown={sorted(unknown)} missing={sorted(missing)}"
                )
            order = [columns.index(name) for name in model.feature_names]
            X = X[:, order]
    elif X.shape[1] != len(model.feature_names):
        raise SchemaError(
            f"expected {len(model.feature_names)} columns, got {X.shape[1]}"
        )
    return model.predict(X)
