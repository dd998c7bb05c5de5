"""Binary classification tree over covariates (Gini splits).

Grown greedily: every (covariate, midpoint-threshold) pair is scored by
its Gini impurity decrease and the best one wins; ties go to the lowest
covariate index, then the smallest threshold. Rows with a value below
the threshold go left. There is no cost-complexity pruning; growth stops
on depth, leaf size or insufficient gain. Trees are immutable once grown
and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class TreeParams:
    """Stopping rules: depth, minimum rows per leaf, minimum Gini decrease.

    ``class_weight`` optionally reweights the (0, 1) classes inside the
    impurity computation; prediction stays majority-by-weighted-count.
    """

    max_depth: int = 5
    min_leaf: int = 20
    min_split_gain: float = 1e-4
    class_weight: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.min_split_gain < 0:
            raise ValueError("min_split_gain cannot be negative")
        if min(self.class_weight) <= 0:
            raise ValueError("class weights must be positive")


@dataclass
class TreeNode:
    """One node; internal nodes carry a (feature, threshold) split.

    ``prediction`` is the majority class (ties predict 0), ``proportion``
    the share of the predicted class, ``fraction`` the share of all
    training records reaching this node.
    """

    n0: int
    n1: int
    prediction: int
    proportion: float
    fraction: float
    feature: str | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def gini(n0: float, n1: float) -> float:
    """Gini impurity of a two-class count pair."""
    total = n0 + n1
    if total == 0:
        return 0.0
    p = n0 / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, params: TreeParams):
    """Best (feature_idx, threshold, gain) or None when nothing splittable."""
    w0, w1 = params.class_weight
    n = y.size
    c1 = float(y.sum())
    c0 = float(n - c1)
    parent = gini(w0 * c0, w1 * c1)
    best = None  # (gain, feat, thresh)
    for f in range(X.shape[1]):
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = y[order]
        change = np.flatnonzero(sv[:-1] != sv[1:])
        if change.size == 0:
            continue
        cum1 = np.cumsum(sy)
        n_left = change + 1
        n_right = n - n_left
        ok = (n_left >= params.min_leaf) & (n_right >= params.min_leaf)
        if not np.any(ok):
            continue
        left1 = cum1[change].astype(float)
        left0 = n_left - left1
        right1 = c1 - left1
        right0 = c0 - left0
        wl = np.maximum(w0 * left0 + w1 * left1, 1e-300)
        wr = np.maximum(w0 * right0 + w1 * right1, 1e-300)
        gl = 1.0 - ((w0 * left0) ** 2 + (w1 * left1) ** 2) / wl ** 2
        gr = 1.0 - ((w0 * right0) ** 2 + (w1 * right1) ** 2) / wr ** 2
        child = (wl * gl + wr * gr) / (wl + wr)
        gains = np.where(ok, parent - child, -np.inf)
        j = int(np.argmax(gains))
        if gains[j] == -np.inf:
            continue
        thresh = 0.5 * (sv[change[j]] + sv[change[j] + 1])
        # strict improvement required, so earlier features / smaller
        # thresholds win exact ties
        if best is None or gains[j] > best[0]:
            best = (float(gains[j]), f, float(thresh))
    return best


def _grow(X: np.ndarray, y: np.ndarray, names: list[str], params: TreeParams,
          depth: int, total: int) -> TreeNode:
    n1 = int(y.sum())
    n0 = int(y.size - n1)
    w0, w1 = params.class_weight
    pred = 1 if w1 * n1 > w0 * n0 else 0
    prop = (n1 if pred == 1 else n0) / max(y.size, 1)
    node = TreeNode(n0=n0, n1=n1, prediction=pred, proportion=prop,
                    fraction=y.size / total)
    if n0 == 0 or n1 == 0 or depth >= params.max_depth \
            or y.size < 2 * params.min_leaf:
        return node
    best = _best_split(X, y, params)
    if best is None or best[0] < params.min_split_gain:
        return node
    _gain, f, thresh = best
    go_left = X[:, f] < thresh
    node.feature = names[f]
    node.threshold = thresh
    node.left = _grow(X[go_left], y[go_left], names, params, depth + 1, total)
    node.right = _grow(X[~go_left], y[~go_left], names, params, depth + 1, total)
    return node


def grow_tree(features: np.ndarray, labels: np.ndarray,
              params: TreeParams | None = None,
              feature_names: list[str] | None = None) -> TreeNode:
    """Grow a classification tree on a covariate matrix (no intercept).

    Labels must be binary 0/1. Deterministic: identical inputs give an
    identical tree.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    if X.shape[0] == 0:
        raise ValueError("no rows to grow a tree on")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must align with feature rows")
    uniq = np.unique(y)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueError("labels must be binary 0/1")
    y = y.astype(int)
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise ValueError("feature_names must match feature columns")
    params = params or TreeParams()
    return _grow(X, y, list(feature_names), params, depth=0, total=X.shape[0])


def predict_tree(t: TreeNode, row) -> tuple[int, float]:
    """Route one covariate mapping to a leaf; (prediction, proportion).

    ``row`` maps covariate name -> value; values below a node's threshold
    go left, values at or above it go right.
    """
    node = t
    while not node.is_leaf:
        if node.feature not in row:
            raise KeyError(f"row is missing covariate {node.feature!r}")
        node = node.left if row[node.feature] < node.threshold else node.right
    return node.prediction, node.proportion


def _to_dict(node: TreeNode) -> dict:
    out = {
        "n0": node.n0,
        "n1": node.n1,
        "prediction": node.prediction,
        "proportion": node.proportion,
        "fraction": node.fraction,
    }
    if not node.is_leaf:
        out["feature"] = node.feature
        out["threshold"] = node.threshold
        out["left"] = _to_dict(node.left)
        out["right"] = _to_dict(node.right)
    return out


def _from_dict(d: dict) -> TreeNode:
    node = TreeNode(n0=int(d["n0"]), n1=int(d["n1"]),
                    prediction=int(d["prediction"]),
                    proportion=float(d["proportion"]),
                    fraction=float(d["fraction"]))
    if "feature" in d:
        node.feature = d["feature"]
        node.threshold = float(d["threshold"])
        node.left = _from_dict(d["left"])
        node.right = _from_dict(d["right"])
    return node


def _render_text(node: TreeNode, lines: list[str], indent: int) -> None:
    pad = "  " * indent
    total = max(node.n0 + node.n1, 1)
    shares = f"n0={node.n0} n1={node.n1} ({100.0 * node.n0 / total:.1f}% / " \
             f"{100.0 * node.n1 / total:.1f}%)"
    if node.is_leaf:
        lines.append(f"{pad}leaf: class {node.prediction}  {shares}  "
                     f"records {100.0 * node.fraction:.1f}%")
    else:
        lines.append(f"{pad}[{node.feature} < {node.threshold!r}]  {shares}  "
                     f"records {100.0 * node.fraction:.1f}%")
        _render_text(node.left, lines, indent + 1)
        _render_text(node.right, lines, indent + 1)


def export_tree(t: TreeNode, fmt: str = "json") -> str:
    """Serialize a tree: "json" round-trips exactly, "text" is for reading."""
    if fmt == "json":
        return json.dumps(_to_dict(t), indent=1, sort_keys=True) + "\n"
    if fmt == "text":
        lines: list[str] = []
        _render_text(t, lines, 0)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def import_tree(doc: str) -> TreeNode:
    """Inverse of export_tree(fmt="json")."""
    return _from_dict(json.loads(doc))


def tree_splits(t: TreeNode, max_depth: int = 2) -> list[tuple[str, float, int]]:
    """(feature, threshold, depth) for internal nodes down to max_depth."""
    out: list[tuple[str, float, int]] = []

    def walk(node: TreeNode, depth: int):
        if node.is_leaf or depth >= max_depth:
            return
        out.append((node.feature, node.threshold, depth))
        walk(node.left, depth + 1)
        walk(node.right, depth + 1)

    walk(t, 0)
    return out
