"""
Mesh-grouped crossvalidation and classification metrics.

Elements of one mesh are strongly correlated, so folds are formed over
meshes: every element is predicted by a model that never saw any element of
its own mesh. Predictions from all folds are pooled into one set of
records and scored as if they came from a single experiment.
"""
import csv
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from loguru import logger

from .config import (
    DEFAULT_FOLDS, DEFAULT_SEED, DEFAULT_THRESHOLD, Label, PR_CURVE_HEADER, PR_GRID_SIZE,
    PREDICTION_HEADER, REPORT_FORMAT_VERSION, REPORT_THRESHOLDS
)
from .errors import ConfigError, DatasetError, FoldAssignmentError, MeshFormatError, MeshgradeError
from .features import build_dataset
from .models import train_model
from .models.common import predict_rework


@dataclass(frozen=True)
class FoldAssignment:
    """Mesh id to fold index in 0..n_folds-1."""
    folds: dict
    n_folds: int
    seed: int

    def fold_of(self, mesh_id):
        return self.folds[mesh_id]

    def meshes_in(self, fold):
        """Mesh ids of one fold, sorted."""
        return sorted(m for m, f in self.folds.items() if f == fold)

    def sizes(self):
        """Number of meshes per fold."""
        return [len(self.meshes_in(fold)) for fold in range(self.n_folds)]


def assign_folds(mesh_ids, n_folds=DEFAULT_FOLDS, seed=DEFAULT_SEED):
    """
    Seeded partition of meshes into folds of near-equal size.

    The sorted ids are shuffled with the seed and dealt round-robin, so fold
    sizes differ by at most one and the result does not depend on the order
    the ids are given in.

    Args:
        mesh_ids (iterable): Mesh identifiers; duplicates are ignored
        n_folds (int): Number of folds F
        seed (int): Shuffle seed

    Returns:
        FoldAssignment: The partition.

    Raises:
        FoldAssignmentError: If F < 1 or F exceeds the number of meshes.
    """
    unique = sorted(set(mesh_ids))
    if n_folds < 1:
        raise FoldAssignmentError(f"number of folds must be positive, got {n_folds}")
    if n_folds > len(unique):
        raise FoldAssignmentError(f"cannot split {len(unique)} meshes into {n_folds} folds")
    order = np.random.default_rng(seed).permutation(len(unique))
    folds = {unique[index]: position % n_folds for position, index in enumerate(order)}
    return FoldAssignment(folds, n_folds, seed)


@dataclass(frozen=True, eq=False)
class Predictions:
    """
    Pooled per-element prediction records.

    ``ground_truth`` holds 1 for rework and 0 for passed; ``folds`` holds the
    fold that predicted each row, or is None when unknown.
    """
    mesh_ids: np.ndarray
    element_ids: np.ndarray
    probabilities: np.ndarray
    ground_truth: np.ndarray
    folds: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.probabilities)

    def subset(self, mask):
        return Predictions(self.mesh_ids[mask], self.element_ids[mask], self.probabilities[mask],
                           self.ground_truth[mask], None if self.folds is None else self.folds[mask])


def predictions_for(model, dataset, folds=None):
    """Prediction records of a trained model on a labelled dataset."""
    if dataset.labels is None:
        raise DatasetError("evaluation needs labelled rows")
    return Predictions(dataset.mesh_ids, dataset.element_ids,
                       np.asarray(model.predict_proba(dataset.features), dtype=float),
                       np.asarray(dataset.labels, dtype=np.int8), folds)


def run_crossval(meshes, config, n_folds=DEFAULT_FOLDS, seed=DEFAULT_SEED, layout=None,
                 dataset=None, progress=None):
    """
    Mesh-grouped crossvalidation with pooled predictions.

    Features depend only on the element's own mesh, so the dataset is built
    once and split by fold. The model of fold f is trained with seed + f.

    Args:
        meshes (list): LabeledMesh entries, all fully labelled
        config (TrainConfig): Model kind and hyperparameters
        n_folds (int): Number of folds, at least 2
        seed (int): Seed of the fold assignment and the fold models
        layout (FeatureLayout): Feature layout; defaults to the standard one
        dataset (Dataset): Prebuilt dataset of ``meshes``, to skip featurizing
        progress (callable): Called as progress(stage, done, total) per fold

    Returns:
        Predictions: One record per element, each predicted exactly once.

    Raises:
        FoldAssignmentError: If F < 2 or F exceeds the number of meshes.
    """
    if n_folds < 2:
        raise FoldAssignmentError(f"crossvalidation needs at least 2 folds, got {n_folds}")
    if dataset is None:
        dataset = build_dataset(meshes, layout)
    assignment = assign_folds(dataset.mesh_ids.tolist(), n_folds, seed)
    row_folds = np.array([assignment.fold_of(m) for m in dataset.mesh_ids], dtype=np.int64)
    probabilities = np.empty(len(dataset))

    for fold in range(n_folds):
        test = row_folds == fold
        fold_config = dataclasses.replace(config, seed=seed + fold)
        try:
            model = train_model(dataset.subset(~test), fold_config, dataset.layout)
            probabilities[test] = model.predict_proba(dataset.features[test])
        except MeshgradeError as exc:
            logger.error(f"fold {fold}: {exc}")
            raise
        logger.debug(f"fold {fold}: {int(test.sum())} test rows from "
                     f"{len(assignment.meshes_in(fold))} meshes")
        if progress is not None:
            progress('crossval', fold + 1, n_folds)

    return Predictions(dataset.mesh_ids, dataset.element_ids, probabilities,
                       np.asarray(dataset.labels, dtype=np.int8), row_folds)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts (or shares) of the four prediction outcomes; rework is positive."""
    tp: float
    tn: float
    fp: float
    fn: float

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_shares(cls, tp, tn, fp, fn):
        """Build from percentage shares, as reported in result tables."""
        return cls(float(tp), float(tn), float(fp), float(fn))

    def shares(self):
        """(tp, tn, fp, fn) as percentages of the total."""
        total = self.total
        return tuple(100.0 * v / total for v in (self.tp, self.tn, self.fp, self.fn))


def confusion_from_predictions(records, threshold=DEFAULT_THRESHOLD):
    """
    Confusion matrix of records at one decision threshold.

    Args:
        records (Predictions): Pooled prediction records
        threshold (float): An element is predicted rework iff prob >= threshold

    Returns:
        ConfusionMatrix: Counts that partition the records.

    Raises:
        DatasetError: If there are no records.
    """
    if len(records) == 0:
        raise DatasetError("no prediction records")
    predicted = predict_rework(records.probabilities, threshold)
    actual = np.asarray(records.ground_truth).astype(bool)
    return ConfusionMatrix(
        tp=float(np.sum(predicted & actual)),
        tn=float(np.sum(~predicted & ~actual)),
        fp=float(np.sum(predicted & ~actual)),
        fn=float(np.sum(~predicted & actual)),
    )


@dataclass(frozen=True)
class ClassificationMetrics:
    """
    Precision, recall, accuracy and F1 of one confusion matrix.

    Undefined precision (no predicted rework) or recall (no actual rework)
    is reported as 0 with the matching ``*_defined`` flag cleared.
    """
    precision: float
    recall: float
    accuracy: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self, digits=4):
        return {
            'precision': round(self.precision, digits),
            'recall': round(self.recall, digits),
            'accuracy': round(self.accuracy, digits),
            'f1': round(self.f1, digits),
            'precision_defined': self.precision_defined,
            'recall_defined': self.recall_defined,
        }


def classification_metrics(cm):
    """
    Args:
        cm (ConfusionMatrix): Counts or shares

    Returns:
        ClassificationMetrics: The four scores.

    Raises:
        DatasetError: If the matrix is empty.
    """
    if not cm.total > 0:
        raise DatasetError("confusion matrix is empty")
    predicted = cm.tp + cm.fp
    actual = cm.tp + cm.fn
    precision = cm.tp / predicted if predicted > 0 else 0.0
    recall = cm.tp / actual if actual > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ClassificationMetrics(
        precision=precision,
        recall=recall,
        accuracy=(cm.tp + cm.tn) / cm.total,
        f1=f1,
        precision_defined=predicted > 0,
        recall_defined=actual > 0,
    )


def trivial_baseline(records):
    """Confusion matrix of the predictor that passes every element."""
    if len(records) == 0:
        raise DatasetError("no prediction records")
    positives = float(np.sum(records.ground_truth))
    return ConfusionMatrix(tp=0.0, tn=float(len(records)) - positives, fp=0.0, fn=positives)


@dataclass(frozen=True, eq=False)
class PrCurve:
    """Precision and recall per threshold, thresholds strictly increasing."""
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    precision_defined: np.ndarray

    def __len__(self):
        return len(self.thresholds)

    def points(self):
        return list(zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()))

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(PR_CURVE_HEADER)
        for threshold, precision, recall in self.points():
            writer.writerow([repr(threshold), repr(precision), repr(recall)])
        return buffer.getvalue()


def default_threshold_grid(size=PR_GRID_SIZE):
    """Evenly spaced thresholds 0.00..1.00."""
    return np.round(np.linspace(0.0, 1.0, size), 10)


def _check_grid(thresholds):
    grid = np.asarray(thresholds, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ConfigError("threshold grid must be a non-empty list")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise ConfigError("thresholds must be strictly increasing within [0, 1]")
    return grid


def pr_curve(records, thresholds=None):
    """
    Precision/recall curve over a threshold grid.

    Args:
        records (Predictions): Pooled prediction records
        thresholds (list): Strictly increasing thresholds in [0, 1];
                           defaults to 101 values 0.00..1.00

    Returns:
        PrCurve: One point per threshold.
    """
    if len(records) == 0:
        raise DatasetError("no prediction records")
    grid = _check_grid(default_threshold_grid() if thresholds is None else thresholds)
    actual = np.asarray(records.ground_truth).astype(bool)
    positives = np.sort(records.probabilities[actual])
    negatives = np.sort(records.probabilities[~actual])
    tp = len(positives) - np.searchsorted(positives, grid, side='left')
    fp = len(negatives) - np.searchsorted(negatives, grid, side='left')
    predicted = tp + fp
    precision = np.divide(tp, predicted, out=np.zeros(len(grid)), where=predicted > 0)
    recall = tp / len(positives) if len(positives) else np.zeros(len(grid))
    return PrCurve(grid, precision, recall.astype(float), predicted > 0)


def best_threshold(records, thresholds=None):
    """
    Grid threshold with the highest F1; ties go to the lowest threshold.

    Returns:
        tuple: (threshold, ClassificationMetrics at that threshold)
    """
    grid = _check_grid(default_threshold_grid() if thresholds is None else thresholds)
    scored = [(classification_metrics(confusion_from_predictions(records, t)), float(t)) for t in grid]
    metrics, threshold = max(scored, key=lambda item: (item[0].f1, -item[1]))
    return threshold, metrics


def fold_metrics(records, threshold=DEFAULT_THRESHOLD):
    """
    Per-fold metrics and their unweighted mean, the alternative to pooling.

    Args:
        records (Predictions): Records carrying fold indices
        threshold (float): Decision threshold

    Returns:
        tuple: (dict fold -> ClassificationMetrics, mean ClassificationMetrics)
    """
    if records.folds is None:
        raise DatasetError("records carry no fold indices")
    per_fold = {}
    for fold in np.unique(records.folds):
        subset = records.subset(records.folds == fold)
        per_fold[int(fold)] = classification_metrics(confusion_from_predictions(subset, threshold))
    values = list(per_fold.values())
    mean = ClassificationMetrics(
        precision=float(np.mean([m.precision for m in values])),
        recall=float(np.mean([m.recall for m in values])),
        accuracy=float(np.mean([m.accuracy for m in values])),
        f1=float(np.mean([m.f1 for m in values])),
        precision_defined=all(m.precision_defined for m in values),
        recall_defined=all(m.recall_defined for m in values),
    )
    return per_fold, mean


def crossval_report(records, config=None, n_folds=None, seed=None, layout=None,
                    thresholds=REPORT_THRESHOLDS):
    """
    Structured crossvalidation report.

    The share table has one row per threshold with TP/TN/FP/FN percentages
    rounded to two decimals, followed by the four metrics.

    Args:
        records (Predictions): Pooled prediction records
        config (TrainConfig): Echoed into the report when given
        n_folds (int): Echoed into the report when given
        seed (int): Echoed into the report when given
        layout (FeatureLayout): Echoed into the report when given
        thresholds (tuple): Thresholds of the share table

    Returns:
        dict: Plain data, ready for ``report_to_text``.
    """
    table = []
    for threshold in thresholds:
        cm = confusion_from_predictions(records, threshold)
        tp, tn, fp, fn = (round(v, 2) for v in cm.shares())
        row = {'threshold': float(threshold), 'tp': tp, 'tn': tn, 'fp': fp, 'fn': fn}
        row.update(classification_metrics(cm).to_dict())
        table.append(row)

    threshold, best = best_threshold(records)
    baseline = classification_metrics(trivial_baseline(records))
    report = {
        'format': REPORT_FORMAT_VERSION,
        'elements': len(records),
        'meshes': len(set(records.mesh_ids.tolist())),
        'rework_share': round(float(np.mean(records.ground_truth)), 6),
        'table': table,
        'best_threshold': {'threshold': threshold, **best.to_dict()},
        'trivial_baseline': {'accuracy': round(baseline.accuracy, 6), 'recall': baseline.recall},
    }
    if records.folds is not None:
        per_fold, mean = fold_metrics(records, DEFAULT_THRESHOLD)
        report['per_fold'] = {
            'threshold': DEFAULT_THRESHOLD,
            'folds': {fold: m.to_dict() for fold, m in per_fold.items()},
            'mean': mean.to_dict(),
        }
    if config is not None:
        report['config'] = config.to_dict()
    if n_folds is not None:
        report['n_folds'] = n_folds
    if seed is not None:
        report['seed'] = seed
    if layout is not None:
        report['layout'] = layout.to_dict()
    return report


def report_to_text(report):
    return yaml.safe_dump(report, sort_keys=False, default_flow_style=False)


def predictions_to_csv(records):
    """Delimited text ``mesh_id,element_id,probability,ground_truth``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(PREDICTION_HEADER)
    for row in range(len(records)):
        truth = Label.REWORK if records.ground_truth[row] else Label.PASSED
        writer.writerow([records.mesh_ids[row], int(records.element_ids[row]),
                         repr(float(records.probabilities[row])), truth.value])
    return buffer.getvalue()


def predictions_from_csv(text):
    """Read records written by ``predictions_to_csv`` (fold indices are not stored)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != PREDICTION_HEADER:
        raise MeshFormatError(f"prediction table header must be {','.join(PREDICTION_HEADER)}")
    rows = [row for row in reader if row]
    try:
        truth = [Label(row[3]) for row in rows]
        return Predictions(
            np.array([row[0] for row in rows], dtype=object),
            np.array([int(row[1]) for row in rows], dtype=np.int64),
            np.array([float(row[2]) for row in rows], dtype=float),
            np.array([label is Label.REWORK for label in truth], dtype=np.int8),
        )
    except (IndexError, ValueError) as exc:
        raise MeshFormatError(f"malformed prediction row: {exc}") from None


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
