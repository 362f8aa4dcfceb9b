"""From-scratch gradient-boosted decision trees with logistic loss.

Second-order boosting, exact greedy split search over sorted feature
values, L2 leaf regularization, and a weighted positive class. Trees store
final raw-margin increments (the learning rate is baked into leaf values at
build time), so raw_margin(x) = base_score + sum of reached leaf values.
Training is fully deterministic: exact splits plus fixed tie-breaking
(lowest feature index, then lowest threshold) leave nothing to chance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .config import RunConfig
from .dataset import NONSEIZURE, PPS, FrameDataset, cv_folds
from .errors import DimensionMismatch, EmptyDataset, SchemaError, SingleClassDataset


@dataclass(frozen=True)
class GbdtParams:
    rounds: int = 100
    depth: int = 4
    learning_rate: float = 0.1
    lam: float = 1.0
    min_child_weight: float = 1.0
    pos_weight: float | None = None  # None -> n_neg / n_pos

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "GbdtParams":
        return cls(
            rounds=cfg.rounds,
            depth=cfg.depth,
            learning_rate=cfg.learning_rate,
            lam=cfg.lam,
            min_child_weight=cfg.min_child_weight,
            pos_weight=cfg.pos_weight,
        )


@dataclass(eq=False)
class Tree:
    """Node-major regression tree. feature < 0 marks a leaf.

    Internal node i sends a row left iff x[feature[i]] < threshold[i];
    left/right hold child node indices; value is the leaf's raw-margin
    increment; cover is the training-row count that reached the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        """Raw-margin increment of the leaf each row of X lands in."""
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            at_internal = np.flatnonzero(self.feature[idx] >= 0)
            if len(at_internal) == 0:
                break
            node = idx[at_internal]
            go_left = X[at_internal, self.feature[node]] < self.threshold[node]
            idx[at_internal] = np.where(go_left, self.left[node], self.right[node])
        return self.value[idx]

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}


def _best_split(Xn: np.ndarray, gn: np.ndarray, hn: np.ndarray,
                lam: float, min_child_weight: float):
    """Exact greedy split over all features of one node's rows.

    Candidates are midpoints between adjacent distinct sorted values; both
    children must carry at least min_child_weight hessian mass. Returns
    (feature, threshold) of the max-gain split, ties resolved to the lowest
    feature index then lowest threshold, or None when no candidate has
    strictly positive gain.
    """
    r = Xn.shape[0]
    if r < 2:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    V = np.take_along_axis(Xn, order, axis=0)
    GL = np.cumsum(gn[order], axis=0)[:-1]
    HL = np.cumsum(hn[order], axis=0)[:-1]
    G, H = gn.sum(), hn.sum()
    GR, HR = G - GL, H - HL
    ok = (V[1:] > V[:-1]) & (HL >= min_child_weight) & (HR >= min_child_weight) \
        & (HL + lam > 0) & (HR + lam > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G * G / (H + lam)
    gain = np.where(ok, gain, -np.inf)
    # transpose so the flat argmax scans feature-major: lowest feature index
    # wins ties, then the lowest threshold within a feature
    flat = int(np.argmax(gain.T))
    best = gain.T.flat[flat]
    if not best > 0:
        return None
    f, i = divmod(flat, r - 1)
    return f, 0.5 * (V[i, f] + V[i + 1, f])


def _grow(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: GbdtParams) -> Tree:
    """Grow one tree depth-first to params.depth on gradients g, hessians h."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    cover: list[int] = []

    def build(rows: np.ndarray, depth: int) -> int:
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(len(rows))
        found = None
        if depth < params.depth and len(rows) >= 2:
            found = _best_split(X[rows], g[rows], h[rows], params.lam,
                                params.min_child_weight)
        if found is None:
            G, H = g[rows].sum(), h[rows].sum()
            value[idx] = -params.learning_rate * G / (H + params.lam)
            return idx
        f, thr = found
        go_left = X[rows, f] < thr
        feature[idx] = f
        threshold[idx] = thr
        left[idx] = build(rows[go_left], depth + 1)
        right[idx] = build(rows[~go_left], depth + 1)
        return idx

    build(np.arange(X.shape[0]), 0)
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        cover=np.asarray(cover, dtype=np.int64),
    )


@dataclass(eq=False)
class GbdtModel:
    trees: tuple[Tree, ...]
    base_score: float
    params: GbdtParams
    feature_names: tuple[str, ...]
    n_features: int
    train_logloss: tuple[float, ...]

    def raw_margin_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} feature columns, got shape {X.shape}"
            )
        margins = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            margins += tree.leaf_values(X)
        return margins

    def raw_margin(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or len(x) != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {x.shape}")
        return float(self.raw_margin_batch(x[None, :])[0])

    def predict_batch(self, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        probs = expit(self.raw_margin_batch(X))
        return np.where(probs >= threshold, PPS, NONSEIZURE).astype(np.int8)

    def predict(self, x: np.ndarray, threshold: float = 0.5) -> int:
        x = np.asarray(x, dtype=np.float64)
        return int(self.predict_batch(x[None, :], threshold)[0])

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "params": {f.name: getattr(self.params, f.name) for f in fields(GbdtParams)},
            "feature_names": list(self.feature_names),
            "n_features": self.n_features,
            "train_logloss": list(self.train_logloss),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "cover": t.cover.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GbdtModel":
        required = {"base_score", "params", "feature_names", "n_features",
                    "train_logloss", "trees"}
        if not isinstance(doc, dict) or set(doc) != required:
            raise SchemaError(f"model document must have exactly keys {sorted(required)}")
        param_names = {f.name for f in fields(GbdtParams)}
        if set(doc["params"]) != param_names:
            raise SchemaError(f"model params must have exactly keys {sorted(param_names)}")
        trees = tuple(
            Tree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                value=np.asarray(t["value"], dtype=np.float64),
                cover=np.asarray(t["cover"], dtype=np.int64),
            )
            for t in doc["trees"]
        )
        return cls(
            trees=trees,
            base_score=float(doc["base_score"]),
            params=GbdtParams(**doc["params"]),
            feature_names=tuple(doc["feature_names"]),
            n_features=int(doc["n_features"]),
            train_logloss=tuple(doc["train_logloss"]),
        )

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "GbdtModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _weighted_logloss(margins: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    losses = np.logaddexp(0.0, np.where(y == PPS, -margins, margins))
    return float((w * losses).sum() / w.sum())


def train(X: np.ndarray, y: np.ndarray, params: GbdtParams,
          feature_names=None) -> GbdtModel:
    """Boost `rounds` trees on (X, y in {0, 1}).

    The positive class carries weight pos_weight (default n_neg/n_pos,
    balancing the classes), the base score is the weighted prior log-odds
    log(sum w_pos / sum w_neg), and train_logloss records the weighted mean
    logistic loss at the base score and after every round.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise SchemaError(f"X shape {X.shape} inconsistent with {len(y)} labels")
    if X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    n_pos = int((y == PPS).sum())
    n_neg = int((y == NONSEIZURE).sum())
    if n_pos + n_neg != len(y):
        raise SchemaError("labels must be 0 (non-seizure) or 1 (PPS)")
    if n_pos == 0 or n_neg == 0:
        raise SingleClassDataset("training requires both classes present")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    feature_names = tuple(feature_names)
    if len(feature_names) != X.shape[1]:
        raise SchemaError(f"{len(feature_names)} feature names for {X.shape[1]} columns")

    pos_weight = params.pos_weight if params.pos_weight is not None else n_neg / n_pos
    w = np.where(y == PPS, pos_weight, 1.0)
    base_score = math.log((pos_weight * n_pos) / n_neg)
    margins = np.full(len(y), base_score, dtype=np.float64)
    losses = [_weighted_logloss(margins, y, w)]
    trees = []
    for _ in range(params.rounds):
        p = expit(margins)
        g = w * (p - (y == PPS))
        h = w * p * (1.0 - p)
        tree = _grow(X, g, h, params)
        margins += tree.leaf_values(X)
        losses.append(_weighted_logloss(margins, y, w))
        trees.append(tree)
    return GbdtModel(
        trees=tuple(trees),
        base_score=base_score,
        params=params,
        feature_names=feature_names,
        n_features=X.shape[1],
        train_logloss=tuple(losses),
    )


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "Metrics":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        tp = int(((y_true == PPS) & (y_pred == PPS)).sum())
        fp = int(((y_true == NONSEIZURE) & (y_pred == PPS)).sum())
        tn = int(((y_true == NONSEIZURE) & (y_pred == NONSEIZURE)).sum())
        fn = int(((y_true == PPS) & (y_pred == NONSEIZURE)).sum())
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(tp, fp, tn, fn, precision, recall, f1)


def evaluate(model: GbdtModel, ds: FrameDataset, threshold: float = 0.5) -> Metrics:
    if ds.n_frames == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    return Metrics.from_predictions(ds.y, model.predict_batch(ds.X, threshold))


@dataclass(frozen=True)
class CvResult:
    fold_metrics: tuple[Metrics, ...]
    mean_f1: float
    mean_precision: float
    mean_recall: float


def cross_validate(ds: FrameDataset, cfg: RunConfig) -> CvResult:
    """k-fold stratified CV; metrics averaged over folds."""
    params = GbdtParams.from_config(cfg)
    fold_metrics = []
    for train_ds, val_ds in cv_folds(ds, cfg.folds, cfg.seed):
        model = train(train_ds.X, train_ds.y, params, ds.feature_names)
        fold_metrics.append(evaluate(model, val_ds))
    return CvResult(
        fold_metrics=tuple(fold_metrics),
        mean_f1=float(np.mean([m.f1 for m in fold_metrics])),
        mean_precision=float(np.mean([m.precision for m in fold_metrics])),
        mean_recall=float(np.mean([m.recall for m in fold_metrics])),
    )
