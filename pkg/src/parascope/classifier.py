"""Multi-label paragraph classification over embeddings.

Four independent sigmoid heads (one per information category) fit by
full-batch gradient descent on mean binary cross-entropy with L2
regularization. The evaluation report covers per-class precision,
recall, F1 and support plus micro / macro / weighted / samples averages.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .embedding import EmbeddingVector
from .errors import DimensionMismatchError, EmptyCategoryError, InvalidInputError


class Category(IntEnum):
    """Information categories; index order is the report's class order."""

    DATA = 0
    SENSING = 1
    MODEL = 2
    SYSTEM = 3


CATEGORY_NAMES = [c.name.lower() for c in Category]
NUM_CATEGORIES = len(CATEGORY_NAMES)


def category_from_name(name: str) -> Category:
    try:
        return Category[name.strip().upper()]
    except KeyError:
        raise InvalidInputError(
            f"unknown category {name!r}; expected one of {CATEGORY_NAMES}"
        ) from None


@dataclass
class LabelRecord:
    """Explicit per-paragraph category labels; `irrelevant` marks a
    paragraph as belonging to no category (and implies an empty label set)."""

    paragraph_id: str
    labels: set[Category] = field(default_factory=set)
    irrelevant: bool = False

    def validate(self) -> None:
        if self.irrelevant and self.labels:
            raise InvalidInputError("an irrelevant paragraph cannot carry labels")


@dataclass
class DatasetRecord:
    paragraph_id: str
    text: str
    embedding: np.ndarray
    label_vector: np.ndarray  # shape (4,), values in {0, 1}
    split: str  # "train" | "test"


@dataclass
class Dataset:
    records: list[DatasetRecord]
    provider_id: str
    model_id: str
    seed: int
    test_fraction: float

    def _matrix(self, split: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
        rows = [r for r in self.records if r.split == split]
        if not rows:
            dim = self.records[0].embedding.shape[0] if self.records else 0
            return (
                np.zeros((0, dim)),
                np.zeros((0, NUM_CATEGORIES)),
                [],
            )
        X = np.stack([np.asarray(r.embedding, dtype=np.float64) for r in rows])
        Y = np.stack([np.asarray(r.label_vector, dtype=np.float64) for r in rows])
        return X, Y, [r.paragraph_id for r in rows]

    def train_matrix(self):
        return self._matrix("train")

    def test_matrix(self):
        return self._matrix("test")


def split_assignments(n: int, test_fraction: float, seed: int) -> list[str]:
    """Deterministic seeded train/test assignment over record order."""
    if not 0.0 <= test_fraction < 1.0:
        raise InvalidInputError(f"test_fraction must be in [0, 1), got {test_fraction}")
    n_test = int(round(n * test_fraction))
    n_test = min(n_test, max(n - 1, 0))  # keep the train split non-empty
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    test_indices = set(order[:n_test].tolist())
    return ["test" if i in test_indices else "train" for i in range(n)]


def build_dataset(
    rows: Sequence[tuple[str, str, np.ndarray, set[Category]]],
    provider_id: str,
    model_id: str,
    seed: int,
    test_fraction: float = 0.2,
    required_categories: Sequence[Category] = tuple(Category),
) -> Dataset:
    """Assemble a Dataset from (paragraph_id, text, embedding, labels) rows.

    Rows with an empty label set are allowed (irrelevant rows included on
    request), but every required category must have at least one example.
    """
    empty = [
        CATEGORY_NAMES[c] for c in required_categories
        if not any(c in labels for _, _, _, labels in rows)
    ]
    if empty:
        raise EmptyCategoryError(
            f"categories with zero labeled examples: {', '.join(empty)}", empty
        )
    splits = split_assignments(len(rows), test_fraction, seed)
    records = []
    for (paragraph_id, text, embedding, labels), split in zip(rows, splits):
        vector = np.zeros(NUM_CATEGORIES, dtype=np.float64)
        for cat in labels:
            vector[int(cat)] = 1.0
        records.append(
            DatasetRecord(
                paragraph_id=paragraph_id,
                text=text,
                embedding=np.asarray(embedding, dtype=np.float64),
                label_vector=vector,
                split=split,
            )
        )
    return Dataset(
        records=records,
        provider_id=provider_id,
        model_id=model_id,
        seed=seed,
        test_fraction=test_fraction,
    )


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass
class LinearLabelModel:
    """One sigmoid head per category: probability_j = sigmoid(w_j . x + b_j)."""

    weights: np.ndarray  # shape (4, dim)
    biases: np.ndarray  # shape (4,)
    provider_id: str
    model_id: str
    config: TrainConfig
    degenerate_heads: list[int] = field(default_factory=list)
    loss_history: list[float] = field(default_factory=list)
    id: str = field(default_factory=lambda: uuid.uuid4().hex)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float):
    """Per-head loss (mean BCE + l2*||w||^2) and probabilities.

    BCE is computed as logaddexp(0, z) - y*z, which equals
    -[y*log(p) + (1-y)*log(1-p)] without overflow.
    """
    Z = X @ W.T + b  # (n, heads)
    bce = np.mean(np.logaddexp(0.0, Z) - Y * Z, axis=0)
    reg = l2 * np.sum(W * W, axis=1)
    return bce + reg, sigmoid(Z)


def _gradients(W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float):
    _, P = _forward(W, b, X, Y, l2)
    n = X.shape[0]
    residual = P - Y  # (n, heads)
    grad_w = residual.T @ X / n + 2.0 * l2 * W
    grad_b = residual.mean(axis=0)
    return grad_w, grad_b


def head_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Loss of a single head; the units the gradient check differentiates."""
    losses, _ = _forward(
        np.asarray(w, dtype=np.float64)[None, :],
        np.asarray([b], dtype=np.float64),
        X,
        np.asarray(y, dtype=np.float64)[:, None],
        l2,
    )
    return float(losses[0])


def head_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    grad_w, grad_b = _gradients(
        np.asarray(w, dtype=np.float64)[None, :],
        np.asarray([b], dtype=np.float64),
        X,
        np.asarray(y, dtype=np.float64)[:, None],
        l2,
    )
    return grad_w[0], float(grad_b[0])


def train(dataset: Dataset, config: TrainConfig | None = None) -> LinearLabelModel:
    """Fit the four heads by full-batch gradient descent from zero init.

    Deterministic given the dataset and config. A head whose training
    column is all-one or all-zero still trains but is flagged degenerate.
    """
    config = config or TrainConfig()
    X, Y, _ = dataset.train_matrix()
    if X.shape[0] == 0:
        raise InvalidInputError("training requires a non-empty train split")
    dim = X.shape[1]
    W = np.zeros((NUM_CATEGORIES, dim), dtype=np.float64)
    b = np.zeros(NUM_CATEGORIES, dtype=np.float64)

    degenerate = [
        j for j in range(NUM_CATEGORIES)
        if Y[:, j].min() == Y[:, j].max()
    ]
    history = []
    for _ in range(config.epochs):
        losses, _ = _forward(W, b, X, Y, config.l2)
        history.append(float(np.mean(losses)))
        grad_w, grad_b = _gradients(W, b, X, Y, config.l2)
        W -= config.learning_rate * grad_w
        b -= config.learning_rate * grad_b
    losses, _ = _forward(W, b, X, Y, config.l2)
    history.append(float(np.mean(losses)))

    return LinearLabelModel(
        weights=W,
        biases=b,
        provider_id=dataset.provider_id,
        model_id=dataset.model_id,
        config=config,
        degenerate_heads=degenerate,
        loss_history=history,
    )


def predict(
    model: LinearLabelModel,
    embedding: EmbeddingVector | np.ndarray,
    threshold: float = 0.5,
) -> tuple[np.ndarray, set[Category]]:
    """Per-head probabilities and the categories at or above the threshold."""
    values = embedding.values if isinstance(embedding, EmbeddingVector) else embedding
    x = np.asarray(values, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionMismatchError(
            f"model expects dim {model.dim}, got vector of shape {x.shape}"
        )
    probs = sigmoid(model.weights @ x + model.biases)
    labels = {Category(j) for j in range(NUM_CATEGORIES) if probs[j] >= threshold}
    return probs, labels


def predict_matrix(model: LinearLabelModel, X: np.ndarray, threshold: float = 0.5):
    probs = sigmoid(X @ model.weights.T + model.biases)
    return probs, (probs >= threshold).astype(np.float64)


@dataclass
class MetricRow:
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False


@dataclass
class ClassificationReport:
    classes: dict[str, MetricRow]
    averages: dict[str, MetricRow]  # micro, macro, weighted, samples
    total_support: int

    def to_dict(self) -> dict:
        def row(r: MetricRow) -> dict:
            return {
                "precision": r.precision,
                "recall": r.recall,
                "f1": r.f1,
                "support": r.support,
                "zero_division": r.zero_division,
            }

        return {
            "classes": {name: row(r) for name, r in self.classes.items()},
            "averages": {name: row(r) for name, r in self.averages.items()},
            "total_support": self.total_support,
        }


def _safe_div(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return float(num) / float(den), False


def multilabel_report(y_true: np.ndarray, y_pred: np.ndarray) -> ClassificationReport:
    """Standard multi-label precision/recall/F1 aggregations.

    Zero-division cases (e.g. a class never predicted) report 0.0 and set
    the row's zero_division flag rather than yielding NaN.
    """
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    if y_true.shape != y_pred.shape or y_true.ndim != 2:
        raise InvalidInputError("label matrices must share shape (n_samples, n_classes)")
    n_classes = y_true.shape[1]

    tp = np.sum(y_true & y_pred, axis=0).astype(float)
    fp = np.sum(~y_true & y_pred, axis=0).astype(float)
    fn = np.sum(y_true & ~y_pred, axis=0).astype(float)
    support = np.sum(y_true, axis=0).astype(int)

    classes: dict[str, MetricRow] = {}
    per_class = []
    for j in range(n_classes):
        precision, pz = _safe_div(tp[j], tp[j] + fp[j])
        recall, rz = _safe_div(tp[j], tp[j] + fn[j])
        f1, fz = _safe_div(2 * precision * recall, precision + recall)
        row = MetricRow(precision, recall, f1, int(support[j]), pz or rz or fz)
        classes[CATEGORY_NAMES[j] if j < NUM_CATEGORIES else str(j)] = row
        per_class.append(row)

    total_support = int(support.sum())

    micro_p, mpz = _safe_div(tp.sum(), tp.sum() + fp.sum())
    micro_r, mrz = _safe_div(tp.sum(), tp.sum() + fn.sum())
    micro_f, mfz = _safe_div(2 * micro_p * micro_r, micro_p + micro_r)
    micro = MetricRow(micro_p, micro_r, micro_f, total_support, mpz or mrz or mfz)

    macro = MetricRow(
        sum(r.precision for r in per_class) / n_classes,
        sum(r.recall for r in per_class) / n_classes,
        sum(r.f1 for r in per_class) / n_classes,
        total_support,
        any(r.zero_division for r in per_class),
    )

    if total_support > 0:
        weighted = MetricRow(
            sum(r.precision * r.support for r in per_class) / total_support,
            sum(r.recall * r.support for r in per_class) / total_support,
            sum(r.f1 * r.support for r in per_class) / total_support,
            total_support,
            any(r.zero_division for r in per_class if r.support),
        )
    else:
        weighted = MetricRow(0.0, 0.0, 0.0, 0, True)

    inter = np.sum(y_true & y_pred, axis=1).astype(float)
    pred_sizes = np.sum(y_pred, axis=1).astype(float)
    true_sizes = np.sum(y_true, axis=1).astype(float)
    sp, sr, sf = [], [], []
    sample_zero = False
    for i in range(y_true.shape[0]):
        p, pz = _safe_div(inter[i], pred_sizes[i])
        r, rz = _safe_div(inter[i], true_sizes[i])
        f, fz = _safe_div(2 * inter[i], pred_sizes[i] + true_sizes[i])
        sample_zero = sample_zero or pz or rz or fz
        sp.append(p)
        sr.append(r)
        sf.append(f)
    n_samples = max(len(sp), 1)
    samples = MetricRow(
        sum(sp) / n_samples,
        sum(sr) / n_samples,
        sum(sf) / n_samples,
        total_support,
        sample_zero,
    )

    return ClassificationReport(
        classes=classes,
        averages={"micro": micro, "macro": macro, "weighted": weighted, "samples": samples},
        total_support=total_support,
    )


def evaluate(
    model: LinearLabelModel, dataset: Dataset, threshold: float = 0.5
) -> ClassificationReport:
    X, Y, _ = dataset.test_matrix()
    if X.shape[0] == 0:
        raise InvalidInputError("evaluation requires a non-empty test split")
    _, y_pred = predict_matrix(model, X, threshold)
    return multilabel_report(Y, y_pred)


def format_report(report: ClassificationReport) -> str:
    """Aligned plain-text classification report.

    Class rows are indexed 0..3 (data, sensing, model, system) followed by
    the micro / macro / weighted / samples average rows.
    """
    header = f"{'':>14}{'precision':>11}{'recall':>10}{'f1-score':>10}{'support':>10}"
    lines = [header, ""]
    for name, row in report.classes.items():
        index = CATEGORY_NAMES.index(name) if name in CATEGORY_NAMES else name
        label = f"{index} ({name})" if name in CATEGORY_NAMES else str(name)
        lines.append(
            f"{label:>14}{row.precision:>11.2f}{row.recall:>10.2f}"
            f"{row.f1:>10.2f}{row.support:>10d}"
        )
    lines.append("")
    for name in ("micro", "macro", "weighted", "samples"):
        row = report.averages[name]
        lines.append(
            f"{name + ' avg':>14}{row.precision:>11.2f}{row.recall:>10.2f}"
            f"{row.f1:>10.2f}{row.support:>10d}"
        )
    return "\n".join(lines)
