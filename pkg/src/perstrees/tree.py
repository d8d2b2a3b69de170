"""Greedy personalization trees.

A tree is grown by recursive partitioning: at each node a random subset
of features is drawn, every strict-gap cut position along each drawn
feature is scored by the summed impurity of the two sides, and the best
feasible cut is taken. Splitting continues while feasible cuts exist and
the depth bound allows; leaves prescribe the treatment with the smallest
mean outcome among their eligible treatments.

The sweep walks each feature in sorted order moving one point at a time
from the right side to the left, maintaining per-treatment counts and
outcome sums incrementally (realized as per-treatment prefix sums), so a
node costs one sort plus a linear pass per drawn feature.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaError
from .risk import best_treatment
from .seeding import make_rng


@dataclass(frozen=True)
class PtConfig:
    """Tree-growing settings.

    Attributes:
        n_min_leaf: minimum subjects per treatment on each side of a cut
            (strict mode), or the eligibility threshold for a treatment
            to be prescribable (scarce mode).
        delta_max: depth bound; None means unbounded.
        n_features: features drawn per node; None means all.
        scarce_mode: allow nodes missing some treatments, prescribing
            only among treatments with at least n_min_leaf subjects.
        seed: seed for the per-node feature draws.
    """

    n_min_leaf: int = 1
    delta_max: int = None
    n_features: int = None
    scarce_mode: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_min_leaf < 1:
            raise ConfigError("n_min_leaf must be at least 1")
        if self.delta_max is not None and self.delta_max < 0:
            raise ConfigError("delta_max must be non-negative")
        if self.n_features is not None and self.n_features < 1:
            raise ConfigError("n_features must be positive")


@dataclass(frozen=True)
class Split:
    """A chosen cut: route left iff x[feature] <= threshold."""

    feature: int
    threshold: float
    impurity: float


def sweep_feature(x, t, y, m, n_min_leaf, scarce_mode=False):
    """Score every cut position along one feature.

    Position j (1..k-1) puts the first j points of the sorted order on
    the left. Returns a dict of arrays over positions: left/right
    per-treatment counts and outcome sums, the strict-gap mask, the
    feasibility mask, the candidate impurity I, and the midpoint
    thresholds. Exposed for instrumentation; `best_split` consumes it.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    k = x.size
    if k < 2:
        empty = np.empty((0, m))
        return {
            "order": np.empty(0, dtype=np.int64),
            "counts_left": empty.astype(np.int64),
            "sums_left": empty,
            "counts_right": empty.astype(np.int64),
            "sums_right": empty,
            "gap": np.empty(0, dtype=bool),
            "feasible": np.empty(0, dtype=bool),
            "impurity": np.empty(0),
            "threshold": np.empty(0),
        }
    order = np.argsort(x, kind="stable")
    xs, ts, ys = x[order], t[order], y[order]
    onehot = ts[:, None] == np.arange(1, m + 1)[None, :]
    cum_counts = np.cumsum(onehot, axis=0)
    cum_sums = np.cumsum(np.where(onehot, ys[:, None], 0.0), axis=0)

    counts_left = cum_counts[:-1]
    sums_left = cum_sums[:-1]
    counts_right = cum_counts[-1] - counts_left
    sums_right = cum_sums[-1] - sums_left
    gap = xs[:-1] < xs[1:]
    k_left = np.arange(1, k, dtype=np.float64)
    k_right = k - k_left

    def side_min(counts, sums):
        with np.errstate(divide="ignore", invalid="ignore"):
            means = np.where(counts > 0, sums / counts, np.inf)
        if scarce_mode:
            eligible = counts >= n_min_leaf
            means = np.where(eligible, means, np.inf)
            defined = eligible.any(axis=1)
        else:
            defined = (counts >= n_min_leaf).all(axis=1)
        return means.min(axis=1), defined

    min_left, ok_left = side_min(counts_left, sums_left)
    min_right, ok_right = side_min(counts_right, sums_right)
    feasible = ok_left & ok_right & gap
    score = k_left * min_left + k_right * min_right
    return {
        "order": order,
        "counts_left": counts_left,
        "sums_left": sums_left,
        "counts_right": counts_right,
        "sums_right": sums_right,
        "gap": gap,
        "feasible": feasible,
        "impurity": score,
        "threshold": (xs[:-1] + xs[1:]) / 2.0,
    }


def best_split(ds, indices, features, config):
    """Best feasible cut for a node subsample, or None.

    Features are scanned in the given order, positions in ascending
    order; ties keep the first candidate encountered.

    Args:
        ds: dataset.
        indices: rows belonging to the node.
        features: feature ids to consider, in draw order.
        config: PtConfig.

    Returns:
        Split or None when no feasible cut exists.
    """
    idx = np.asarray(indices, dtype=np.int64)
    t = ds.T[idx]
    y = ds.Y[idx]
    best = None
    for f in features:
        sweep = sweep_feature(
            ds.X[idx, f], t, y, ds.m, config.n_min_leaf, scarce_mode=config.scarce_mode
        )
        score = np.where(sweep["feasible"], sweep["impurity"], np.inf)
        if score.size == 0:
            continue
        pos = int(np.argmin(score))
        if not np.isfinite(score[pos]):
            continue
        if best is None or score[pos] < best.impurity:
            best = Split(
                feature=int(f),
                threshold=float(sweep["threshold"][pos]),
                impurity=float(score[pos]),
            )
    return best


@dataclass(frozen=True)
class TreeNode:
    """Internal node (split, left, right) or leaf (treatment, counts, means)."""

    split: Split = None
    left: "TreeNode" = None
    right: "TreeNode" = None
    treatment: int = None
    counts: tuple = None
    means: tuple = None

    @property
    def is_leaf(self):
        return self.split is None


def _leaf(ds, idx, config):
    t = ds.T[idx]
    y = ds.Y[idx]
    counts = np.bincount(t - 1, minlength=ds.m)
    sums = np.bincount(t - 1, weights=y, minlength=ds.m)
    with np.errstate(divide="ignore", invalid="ignore"):
        means = np.where(counts > 0, sums / counts, np.nan)
    treatment, _ = best_treatment(
        t, y, ds.m, scarce_mode=config.scarce_mode, n_min_leaf=config.n_min_leaf
    )
    return TreeNode(
        treatment=treatment,
        counts=tuple(int(c) for c in counts),
        means=tuple(float(v) for v in means),
    )


def _grow(ds, idx, depth, config, rng, n_features):
    if config.delta_max is not None and depth >= config.delta_max:
        return _leaf(ds, idx, config)
    features = rng.choice(ds.d, size=n_features, replace=False)
    split = best_split(ds, idx, features, config)
    if split is None:
        return _leaf(ds, idx, config)
    mask = ds.X[idx, split.feature] <= split.threshold
    left = _grow(ds, idx[mask], depth + 1, config, rng, n_features)
    right = _grow(ds, idx[~mask], depth + 1, config, rng, n_features)
    return TreeNode(split=split, left=left, right=right)


def fit_pt(ds, config=None):
    """Grow a personalization tree on the full dataset.

    Feature draws consume the seeded generator in pre-order (node, left
    subtree, right subtree), so identical data and config reproduce the
    tree exactly.
    """
    config = config or PtConfig()
    if ds.n == 0:
        raise ConfigError("cannot fit a tree on an empty dataset")
    n_features = ds.d if config.n_features is None else config.n_features
    if not 1 <= n_features <= ds.d:
        raise ConfigError(f"n_features must lie in 1..{ds.d}")
    rng = make_rng(config.seed)
    root = _grow(ds, np.arange(ds.n), 0, config, rng, n_features)
    return PersonalizationTree(root=root, m=ds.m, d=ds.d)


@dataclass(frozen=True)
class PersonalizationTree:
    """Fitted tree policy."""

    root: TreeNode
    m: int
    d: int

    def prescribe(self, x):
        node = self.root
        while not node.is_leaf:
            if x[node.split.feature] <= node.split.threshold:
                node = node.left
            else:
                node = node.right
        return node.treatment

    # alias: trees are predictors as well as policies
    predict = prescribe

    def predict_many(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)

        def route(node, rows):
            if rows.size == 0:
                return
            if node.is_leaf:
                out[rows] = node.treatment
                return
            mask = X[rows, node.split.feature] <= node.split.threshold
            route(node.left, rows[mask])
            route(node.right, rows[~mask])

        route(self.root, np.arange(len(X)))
        return out

    def leaf_ids(self, X):
        """Leaf index in 1..n_leaves (left-to-right order) for each row."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)
        counter = [0]

        def route(node, rows):
            if node.is_leaf:
                counter[0] += 1
                out[rows] = counter[0]
                return
            mask = X[rows, node.split.feature] <= node.split.threshold
            route(node.left, rows[mask])
            route(node.right, rows[~mask])

        route(self.root, np.arange(len(X)))
        return out

    @property
    def n_leaves(self):
        def count(node):
            return 1 if node.is_leaf else count(node.left) + count(node.right)

        return count(self.root)

    @property
    def depth(self):
        def deep(node):
            return 0 if node.is_leaf else 1 + max(deep(node.left), deep(node.right))

        return deep(self.root)


def _node_to_doc(node):
    if node.is_leaf:
        means = [None if np.isnan(v) else float(v) for v in node.means]
        return {
            "leaf": {
                "treatment": int(node.treatment),
                "counts": [int(c) for c in node.counts],
                "means": means,
            }
        }
    return {
        "split": {"feature": int(node.split.feature), "threshold": float(node.split.threshold)},
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def _node_from_doc(doc, m):
    if "leaf" in doc:
        leaf = doc["leaf"]
        counts = leaf["counts"]
        means = leaf["means"]
        if len(counts) != m or len(means) != m:
            raise SchemaError("leaf counts/means must have one entry per treatment")
        if not 1 <= leaf["treatment"] <= m:
            raise SchemaError("leaf treatment out of range")
        return TreeNode(
            treatment=int(leaf["treatment"]),
            counts=tuple(int(c) for c in counts),
            means=tuple(float("nan") if v is None else float(v) for v in means),
        )
    if "split" not in doc:
        raise SchemaError("tree node must hold either a split or a leaf")
    sp = doc["split"]
    return TreeNode(
        split=Split(feature=int(sp["feature"]), threshold=float(sp["threshold"]), impurity=0.0),
        left=_node_from_doc(doc["left"], m),
        right=_node_from_doc(doc["right"], m),
    )


def tree_to_doc(tree):
    """JSON-ready document for a fitted tree."""
    return {"kind": "pt", "m": int(tree.m), "d": int(tree.d), "root": _node_to_doc(tree.root)}


def tree_from_doc(doc):
    if doc.get("kind") != "pt":
        raise SchemaError(f"expected a pt document, got kind {doc.get('kind')!r}")
    m = int(doc["m"])
    return PersonalizationTree(root=_node_from_doc(doc["root"], m), m=m, d=int(doc["d"]))


def save_tree(tree, path):
    with open(path, "w") as fh:
        json.dump(tree_to_doc(tree), fh, indent=2)
        fh.write("\n")


def load_tree(path):
    with open(path) as fh:
        return tree_from_doc(json.load(fh))
