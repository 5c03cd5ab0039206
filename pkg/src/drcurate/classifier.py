"""Binary good/bad quality classifier: training, evaluation, persistence.

Two model kinds behind one interface: L2-regularized logistic regression
(full-batch gradient descent with backtracking, z-scored inputs) and the
random forest of :mod:`drcurate.forest`. "good" is the positive class
throughout - the F2 scoring exists to keep good images from being thrown
away. Models serialize to a versioned JSON document that carries the
feature schema, standardization statistics and (optionally) a background
sample for Shapley explanations, so a model file is self-contained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CurationError, atomic_write_text
from .forest import fit_forest, forest_predict

GOOD, BAD = "good", "bad"


class ClassifierError(CurationError):
    pass


class SchemaMismatchError(ClassifierError):
    pass


def labels_to_int(labels) -> np.ndarray:
    out = []
    for lab in labels:
        if lab not in (GOOD, BAD):
            raise ClassifierError(f"label must be 'good' or 'bad', got {lab!r}")
        out.append(1 if lab == GOOD else 0)
    return np.asarray(out, dtype=np.int64)


@dataclass
class ClassifierModel:
    kind: str  # "logistic" | "forest"
    schema: tuple[str, ...]
    # logistic payload
    weights: np.ndarray | None = None
    bias: float = 0.0
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    # forest payload
    trees: list[dict[str, np.ndarray]] = field(default_factory=list)
    tree_seeds: tuple[int, ...] = ()
    params: dict = field(default_factory=dict)
    class_weight: bool = False
    background: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("logistic", "forest"):
            raise ClassifierError(f"unknown model kind {self.kind!r}")
        if self.kind == "logistic" and self.weights is not None:
            if len(self.weights) != len(self.schema):
                raise ClassifierError("weight vector length does not match schema")
        for tree in self.trees:
            feats = tree["feature"]
            if feats.max(initial=-1) >= len(self.schema):
                raise ClassifierError("tree split index outside schema")
            probs = tree["prob"]
            if ((probs < 0) | (probs > 1)).any():
                raise ClassifierError("leaf probabilities must lie in [0, 1]")

    def check_schema(self, schema) -> None:
        if tuple(schema) != self.schema:
            raise SchemaMismatchError(f"feature schema {tuple(schema)} != model schema {self.schema}")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.schema):
            raise SchemaMismatchError(
                f"expected {len(self.schema)} features ({', '.join(self.schema)}), got {X.shape[1]}"
            )
        if self.kind == "logistic":
            z = (X - self.mean) / self.std
            return 1.0 / (1.0 + np.exp(-(z @ self.weights + self.bias)))
        return forest_predict(self.trees, X)


def predict(model: ClassifierModel, features: np.ndarray, schema=None) -> tuple[float, str]:
    """(probability of good, label at the 0.5 threshold) for one vector."""
    if schema is not None:
        model.check_schema(schema)
    p = float(model.predict_proba(np.asarray(features, dtype=np.float64).reshape(1, -1))[0])
    return p, (GOOD if p >= 0.5 else BAD)


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def _logloss(z, y, sw, w, l2):
    # numerically stable log(1 + exp(-|z|)) formulation
    m = np.maximum(z, 0.0)
    nll = sw * (m - y * z + np.log(np.exp(-m) + np.exp(z - m)))
    return float(nll.mean() + 0.5 * l2 * (w @ w))


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    schema,
    l2: float = 1e-3,
    epochs: int = 500,
    lr: float = 0.5,
    class_weight: bool = False,
) -> ClassifierModel:
    """Full-batch gradient descent on L2-regularized log-loss.

    Inputs are z-scored with training statistics (stored in the model);
    the learning rate is halved whenever a step would increase the training
    loss, so the loss trace is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ClassifierError("non-finite feature values in training matrix")
    if X.shape[0] == 0:
        raise ClassifierError("empty training set")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    Z = (X - mean) / std
    n, d = Z.shape
    sw = np.ones(n)
    if class_weight:
        n_good = max(y.sum(), 1.0)
        n_bad = max(n - y.sum(), 1.0)
        sw = np.where(y == 1, n / (2.0 * n_good), n / (2.0 * n_bad))
    w = np.zeros(d)
    b = 0.0
    loss = _logloss(Z @ w + b, y, sw, w, l2)
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(Z @ w + b)))
        g = sw * (p - y)
        gw = Z.T @ g / n + l2 * w
        gb = float(g.mean())
        while lr > 1e-12:
            w2 = w - lr * gw
            b2 = b - lr * gb
            new_loss = _logloss(Z @ w2 + b2, y, sw, w2, l2)
            if new_loss <= loss:
                w, b, loss = w2, b2, new_loss
                break
            lr /= 2.0
        if lr <= 1e-12:
            break
    return ClassifierModel(
        kind="logistic", schema=tuple(schema), weights=w, bias=b, mean=mean, std=std,
        class_weight=class_weight,
    )


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    schema,
    n_trees: int = 200,
    max_depth: int = 8,
    min_leaf: int = 2,
    seed: int = 0,
    class_weight: bool = False,
) -> ClassifierModel:
    """CART/Gini random forest (see :mod:`drcurate.forest`)."""
    trees, seeds = fit_forest(
        X, np.asarray(y), n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf,
        seed=seed, class_weight=class_weight,
    )
    return ClassifierModel(
        kind="forest", schema=tuple(schema), trees=trees, tree_seeds=tuple(int(s) for s in seeds),
        params={"n_trees": n_trees, "max_depth": max_depth, "min_leaf": min_leaf, "seed": seed},
        class_weight=class_weight,
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f2: float
    accuracy: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f2": self.f2,
            "accuracy": self.accuracy, "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
        }


def evaluate(model: ClassifierModel, X: np.ndarray, y: np.ndarray) -> EvalReport:
    """Confusion counts and F2 = 5PR/(4P+R) with "good" positive.

    Precision, recall and F2 fall back to 0 when their denominators are 0.
    """
    y = np.asarray(y)
    if y.size == 0:
        raise ClassifierError("empty test set")
    pred = (model.predict_proba(X) >= 0.5).astype(np.int64)
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f2 = 5.0 * precision * recall / (4.0 * precision + recall) if 4.0 * precision + recall else 0.0
    accuracy = (tp + tn) / y.size
    return EvalReport(precision, recall, f2, accuracy, tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# Dataset splitting and grid search
# ---------------------------------------------------------------------------

def split_dataset(ids, labels, ratio: float = 0.7, seed: int = 0) -> tuple[list, list]:
    """Stratified train/test split, deterministic for a fixed seed."""
    if not 0.0 < ratio < 1.0:
        raise ClassifierError("ratio must be strictly between 0 and 1 (both splits nonempty)")
    by_class: dict[str, list] = {}
    for i, lab in zip(ids, labels):
        if lab is None:
            raise ClassifierError(f"image {i!r} has no quality label")
        by_class.setdefault(lab, []).append(i)
    rng = np.random.RandomState(seed)
    train, test = [], []
    for lab in sorted(by_class):
        members = sorted(by_class[lab])
        if len(members) < 2:
            raise ClassifierError(f"class {lab!r} has fewer than 2 members; cannot stratify")
        order = rng.permutation(len(members))
        n_train = int(round(ratio * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        chosen = [members[k] for k in order]
        train.extend(chosen[:n_train])
        test.extend(chosen[n_train:])
    return sorted(train), sorted(test)


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    assign = np.empty(y.size, dtype=np.int64)
    rng = np.random.RandomState(seed)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < folds:
            raise ClassifierError(f"class {cls} has {idx.size} members, fewer than {folds} folds")
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = np.arange(idx.size) % folds
    return assign


def _fit_cell(params: dict, X, y, seed: int) -> ClassifierModel:
    kind = params.get("kind", "forest")
    p = {k: v for k, v in params.items() if k != "kind"}
    if kind == "forest":
        return train_forest(X, y, [str(i) for i in range(X.shape[1])], seed=seed, **p)
    if kind == "logistic":
        return train_logistic(X, y, [str(i) for i in range(X.shape[1])], **p)
    raise ClassifierError(f"unknown model kind {kind!r}")


def _model_size_key(params: dict) -> float:
    if params.get("kind", "forest") == "forest":
        return float(params.get("n_trees", 200))
    return -float(params.get("l2", 1e-3))  # larger l2 = smaller model


def default_grid(kind: str = "forest") -> list[dict]:
    if kind == "forest":
        return [
            {"kind": "forest", "n_trees": n, "max_depth": d}
            for n in (100, 200)
            for d in (4, 8)
        ]
    return [{"kind": "logistic", "l2": l2} for l2 in (1e-3, 1e-2, 1e-1)]


def grid_search(
    grid: list[dict],
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 5,
    seed: int = 0,
) -> tuple[dict, list[dict]]:
    """Cross-validated F2 over the grid; returns (best params, cv table).

    Ties break toward higher accuracy, then the smaller model (fewer trees
    or larger l2), then grid order.
    """
    if not grid:
        raise ClassifierError("parameter grid is empty")
    y = np.asarray(y)
    assign = _stratified_folds(y, folds, seed)
    table = []
    for cell_idx, params in enumerate(grid):
        f2s, accs = [], []
        for k in range(folds):
            tr, te = assign != k, assign == k
            model = _fit_cell(params, X[tr], y[tr], seed=seed + k)
            rep = evaluate(model, X[te], y[te])
            f2s.append(rep.f2)
            accs.append(rep.accuracy)
        table.append(
            {
                "params": dict(params),
                "fold_f2": [float(v) for v in f2s],
                "mean_f2": float(np.mean(f2s)),
                "mean_accuracy": float(np.mean(accs)),
            }
        )
    best = min(
        range(len(grid)),
        key=lambda i: (
            -table[i]["mean_f2"],
            -table[i]["mean_accuracy"],
            _model_size_key(grid[i]),
            i,
        ),
    )
    return dict(grid[best]), table


def write_cv_table(path: str | Path, table: list[dict]) -> None:
    param_keys = sorted({k for row in table for k in row["params"]})
    header = param_keys + ["mean_f2", "mean_accuracy", "fold_f2"]
    lines = [",".join(header)]
    for row in table:
        cells = [str(row["params"].get(k, "")) for k in param_keys]
        cells.append(repr(row["mean_f2"]))
        cells.append(repr(row["mean_accuracy"]))
        cells.append(";".join(repr(v) for v in row["fold_f2"]))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Model persistence (versioned JSON)
# ---------------------------------------------------------------------------

MODEL_VERSION = 1


def save_model(model: ClassifierModel, path: str | Path) -> None:
    doc: dict = {
        "version": MODEL_VERSION,
        "kind": model.kind,
        "schema": list(model.schema),
        "class_weight": model.class_weight,
    }
    if model.kind == "logistic":
        doc["logistic"] = {
            "weights": [float(v) for v in model.weights],
            "bias": float(model.bias),
            "mean": [float(v) for v in model.mean],
            "std": [float(v) for v in model.std],
        }
    else:
        doc["forest"] = {
            "params": model.params,
            "tree_seeds": list(model.tree_seeds),
            "trees": [
                {
                    "feature": t["feature"].tolist(),
                    "threshold": t["threshold"].tolist(),
                    "left": t["left"].tolist(),
                    "right": t["right"].tolist(),
                    "prob": t["prob"].tolist(),
                }
                for t in model.trees
            ],
        }
    if model.background is not None:
        doc["background"] = [[float(v) for v in row] for row in model.background]
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> ClassifierModel:
    path = Path(path)
    if not path.is_file():
        raise ClassifierError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("version") != MODEL_VERSION:
        raise ClassifierError(f"unsupported model version {doc.get('version')!r}")
    kind = doc["kind"]
    background = np.asarray(doc["background"], dtype=np.float64) if doc.get("background") else None
    if kind == "logistic":
        payload = doc["logistic"]
        return ClassifierModel(
            kind="logistic",
            schema=tuple(doc["schema"]),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            mean=np.asarray(payload["mean"], dtype=np.float64),
            std=np.asarray(payload["std"], dtype=np.float64),
            class_weight=bool(doc.get("class_weight", False)),
            background=background,
        )
    payload = doc["forest"]
    trees = [
        {
            "feature": np.asarray(t["feature"], dtype=np.int32),
            "threshold": np.asarray(t["threshold"], dtype=np.float64),
            "left": np.asarray(t["left"], dtype=np.int32),
            "right": np.asarray(t["right"], dtype=np.int32),
            "prob": np.asarray(t["prob"], dtype=np.float64),
        }
        for t in payload["trees"]
    ]
    return ClassifierModel(
        kind="forest",
        schema=tuple(doc["schema"]),
        trees=trees,
        tree_seeds=tuple(payload.get("tree_seeds", ())),
        params=payload.get("params", {}),
        class_weight=bool(doc.get("class_weight", False)),
        background=background,
    )
