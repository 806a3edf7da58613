"""
Helpers shared by both classifiers.
"""
import numpy as np

from ..config import Label
from ..errors import DatasetError, DimensionMismatchError


def as_matrix(x, n_features):
    """
    View one feature vector or a batch of them as a 2-D float array.

    Args:
        x (array-like): Shape (D,) or (N, D)
        n_features (int): Expected dimension D

    Returns:
        tuple: (matrix of shape (N, D), whether the input was a single vector)

    Raises:
        DimensionMismatchError: If the last axis is not D.
    """
    array = np.asarray(x, dtype=float)
    single = array.ndim == 1
    matrix = array[None, :] if single else array
    if matrix.ndim != 2 or matrix.shape[1] != n_features:
        raise DimensionMismatchError(
            f"expected feature vectors of length {n_features}, got shape {array.shape}")
    return matrix, single


def training_arrays(data):
    """
    Feature matrix and 0/1 labels of a labelled dataset.

    Raises:
        DatasetError: If the dataset is empty or unlabelled.
    """
    if len(data) == 0:
        raise DatasetError("cannot train on an empty dataset")
    if data.labels is None:
        raise DatasetError("training needs labelled rows")
    features = np.asarray(data.features, dtype=float)
    if features.ndim != 2:
        raise DatasetError("feature vectors have inconsistent lengths")
    return features, np.asarray(data.labels, dtype=np.int64)


def apply_threshold(prob, threshold):
    """
    Turn a rework probability into a label; the boundary counts as rework.

    Args:
        prob (float): Probability of rework in [0, 1]
        threshold (float): Decision threshold in [0, 1]

    Returns:
        Label: REWORK iff prob >= threshold.
    """
    return Label.REWORK if prob >= threshold else Label.PASSED


def predict_rework(probabilities, threshold):
    """Vectorised ``apply_threshold``: boolean array, True for rework."""
    return np.asarray(probabilities, dtype=float) >= threshold
