"""
Plain helpers shared by several test modules.
"""
import numpy as np

from src.meshgrade.config import Property
from src.meshgrade.features import Dataset, FeatureLayout
from src.meshgrade.mesh import Element, Mesh, Node

# Reference pooled shares (TP, TN, FP, FN in percent) with the precision,
# recall, accuracy and F1 derived from them, per model and threshold.
REFERENCE_ROWS = [
    ('extratrees', 0.25, (2.84, 86.25, 10.75, 0.16), (0.21, 0.95, 0.89, 0.34)),
    ('extratrees', 0.50, (2.32, 92.45, 4.55, 0.68), (0.34, 0.77, 0.95, 0.47)),
    ('extratrees', 0.75, (1.32, 95.78, 1.22, 1.68), (0.52, 0.44, 0.97, 0.48)),
    ('fnn', 0.25, (2.63, 88.76, 8.25, 0.37), (0.24, 0.88, 0.91, 0.38)),
    ('fnn', 0.50, (2.32, 91.53, 5.47, 0.68), (0.30, 0.77, 0.94, 0.43)),
    ('fnn', 0.75, (1.77, 93.98, 3.03, 1.23), (0.37, 0.59, 0.96, 0.45)),
]


def make_mesh(points, faces):
    """Mesh with node ids 1..n and element ids 1..m from plain lists."""
    nodes = tuple(Node(i + 1, tuple(float(c) for c in p)) for i, p in enumerate(points))
    elements = tuple(Element(j + 1, tuple(face)) for j, face in enumerate(faces))
    return Mesh(nodes, elements)


def blob_dataset(n_per_class=100, n_features=2, separation=4.0, seed=0):
    """
    Two Gaussian blobs, passed around the origin and rework around
    ``separation`` on every axis, as a Dataset with a matching layout.
    """
    rng = np.random.default_rng(seed)
    passed = rng.normal(0.0, 1.0, size=(n_per_class, n_features))
    rework = rng.normal(separation, 1.0, size=(n_per_class, n_features))
    features = np.vstack([passed, rework])
    labels = np.concatenate([np.zeros(n_per_class), np.ones(n_per_class)]).astype(np.int8)
    n = len(labels)
    layout = FeatureLayout(K=0, properties=tuple(Property)[:n_features], aggregators=('min',))
    return Dataset(np.array(["blobs"] * n, dtype=object), np.arange(1, n + 1), features, labels, layout)
