"""
Neighbourhood feature construction.

Every element gets a constant-size feature tensor: for each distance
k = 0..K, each property, and each aggregator, the aggregate of that property
over the elements at exactly distance k (the k-ring frontier). The tensor is
flattened k-major, then property, then aggregator, into the feature vector
the models consume.
"""
import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from loguru import logger

from .config import (
    Aggregator, DEFAULT_AGGREGATORS, DEFAULT_K, DEFAULT_PROPERTIES, EMPTY_FRONTIER_FILL,
    K0Mode, Label, Property
)
from .errors import ConfigError, DatasetError, MeshFormatError, UnlabelledElementError
from .graph import build_graph, frontier, frontier_matrices, reduce_rows
from .metrics import compute_property_table

_AGGREGATE_FUNCTIONS = {
    Aggregator.MIN: np.min,
    Aggregator.MAX: np.max,
    Aggregator.MEAN: np.mean,
}


def _enum_values(enum, values, what):
    members = []
    for value in values:
        try:
            members.append(enum(value))
        except ValueError:
            choices = ", ".join(member.value for member in enum)
            raise ConfigError(f"unknown {what} {value!r}, choose from {choices}") from None
    return tuple(members)


@dataclass(frozen=True)
class FeatureLayout:
    """
    Hyperparameters that fix the shape and column order of feature vectors.

    ``k0_mode`` controls the k = 0 slice, whose aggregates all equal the
    element's own properties: FULL keeps every aggregator, DEDUPLICATE keeps
    one value per property, DROP leaves the slice out.
    """
    K: int = DEFAULT_K
    properties: tuple = DEFAULT_PROPERTIES
    aggregators: tuple = DEFAULT_AGGREGATORS
    k0_mode: K0Mode = K0Mode.FULL

    def __post_init__(self):
        object.__setattr__(self, 'properties', _enum_values(Property, self.properties, 'property'))
        object.__setattr__(self, 'aggregators', _enum_values(Aggregator, self.aggregators, 'aggregator'))
        object.__setattr__(self, 'k0_mode', _enum_values(K0Mode, (self.k0_mode,), 'k = 0 mode')[0])
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError(f"K must be a non-negative integer, got {self.K!r}")
        if not self.properties or not self.aggregators:
            raise ConfigError("at least one property and one aggregator are required")
        if self.dimension == 0:
            raise ConfigError("dropping k = 0 with K = 0 leaves no features")

    @property
    def dimension(self):
        m, n = len(self.properties), len(self.aggregators)
        if self.k0_mode is K0Mode.FULL:
            return (self.K + 1) * m * n
        if self.k0_mode is K0Mode.DEDUPLICATE:
            return m + self.K * m * n
        return self.K * m * n

    def column_names(self):
        """Feature names in vector order, e.g. ``k2.warpage.max``."""
        names = []
        for k in range(self.K + 1):
            if k == 0 and self.k0_mode is K0Mode.DROP:
                continue
            for prop in self.properties:
                if k == 0 and self.k0_mode is K0Mode.DEDUPLICATE:
                    names.append(f"k0.{prop.value}")
                    continue
                names.extend(f"k{k}.{prop.value}.{agg.value}" for agg in self.aggregators)
        return names

    def to_dict(self):
        return {
            'K': self.K,
            'properties': [p.value for p in self.properties],
            'aggregators': [a.value for a in self.aggregators],
            'k0_mode': self.k0_mode.value,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(int(data['K']), tuple(data['properties']), tuple(data['aggregators']),
                   K0Mode(data['k0_mode']))


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Aggregates of one element, indexed (k, property, aggregator)."""
    values: np.ndarray
    properties: tuple
    aggregators: tuple

    @property
    def K(self):
        return self.values.shape[0] - 1

    @classmethod
    def from_vector(cls, vector, layout):
        """
        Reshape a FULL-mode feature vector back into its tensor.

        Args:
            vector (np.ndarray): Flat vector of length (K+1)*m*n
            layout (FeatureLayout): Layout the vector was built with

        Returns:
            FeatureTensor: The original tensor.
        """
        if layout.k0_mode is not K0Mode.FULL:
            raise ConfigError("only FULL layouts can be reshaped into a tensor")
        shape = (layout.K + 1, len(layout.properties), len(layout.aggregators))
        return cls(np.asarray(vector, dtype=float).reshape(shape),
                   layout.properties, layout.aggregators)


def aggregate(values, agg):
    """
    Apply one aggregator to a multiset of reals.

    Args:
        values (iterable): Property values, duplicates retained
        agg (Aggregator): Statistic to apply

    Returns:
        float: The statistic, or the fill value 0 for an empty input.
    """
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        return EMPTY_FRONTIER_FILL
    return float(_AGGREGATE_FUNCTIONS[Aggregator(agg)](values))


def feature_tensor(element_id, table, graph, K=DEFAULT_K,
                   properties=DEFAULT_PROPERTIES, aggregators=DEFAULT_AGGREGATORS):
    """
    Feature tensor of a single element from its frontiers.

    Args:
        element_id (int): Element of the graph
        table (PropertyTable): Properties covering every frontier member
        graph (NeighbourhoodGraph): Element graph
        K (int): Largest frontier distance
        properties (tuple): Properties to aggregate, in order
        aggregators (tuple): Aggregators to apply, in order

    Returns:
        FeatureTensor: Array of shape (K+1, m, n).

    Raises:
        UnknownElementError: If the element is not in the graph.
    """
    properties = tuple(Property(p) for p in properties)
    aggregators = tuple(Aggregator(a) for a in aggregators)
    columns = [table.columns.index(p.value) for p in properties]
    values = np.zeros((K + 1, len(properties), len(aggregators)))
    for k in range(K + 1):
        members = sorted(frontier(graph, element_id, k))
        rows = np.array([table.row(e)[columns] for e in members]).reshape(len(members), len(columns))
        for i in range(len(properties)):
            for j, agg in enumerate(aggregators):
                values[k, i, j] = aggregate(rows[:, i], agg)
    return FeatureTensor(values, properties, aggregators)


def flatten(tensor, k0_mode=K0Mode.FULL):
    """
    Reshape a tensor into a feature vector (k-major, property, aggregator).

    Args:
        tensor (FeatureTensor): Tensor to flatten
        k0_mode (K0Mode): Treatment of the k = 0 slice

    Returns:
        np.ndarray: Flat float vector.
    """
    k0_mode = K0Mode(k0_mode)
    rest = tensor.values[1:].ravel()
    if k0_mode is K0Mode.FULL:
        return tensor.values.ravel().copy()
    if k0_mode is K0Mode.DEDUPLICATE:
        return np.concatenate([tensor.values[0, :, 0], rest])
    return rest.copy()


def feature_matrix(table, graph, layout):
    """
    Feature vectors of every element at once, from sparse frontier matrices.

    Args:
        table (PropertyTable): Properties of the graph's mesh
        graph (NeighbourhoodGraph): Element graph, same element order as ``table``
        layout (FeatureLayout): Vector layout

    Returns:
        np.ndarray: (n_elements, layout.dimension) float array.
    """
    if not np.array_equal(table.element_ids, graph.element_ids):
        raise DatasetError("property table and graph cover different elements")
    n = len(graph)
    columns = [table.columns.index(p.value) for p in layout.properties]
    blocks = []
    for k, matrix in enumerate(frontier_matrices(graph, layout.K)):
        if k == 0:
            own = table.values[:, columns]
            if layout.k0_mode is K0Mode.FULL:
                blocks.append(np.repeat(own, len(layout.aggregators), axis=1))
            elif layout.k0_mode is K0Mode.DEDUPLICATE:
                blocks.append(own)
            continue
        counts = np.diff(matrix.indptr)
        block = np.zeros((n, len(columns) * len(layout.aggregators)))
        for i, column in enumerate(columns):
            member_values = table.values[matrix.indices, column]
            for j, agg in enumerate(layout.aggregators):
                if agg is Aggregator.MIN:
                    result = reduce_rows(np.minimum, member_values, matrix.indptr, EMPTY_FRONTIER_FILL)
                elif agg is Aggregator.MAX:
                    result = reduce_rows(np.maximum, member_values, matrix.indptr, EMPTY_FRONTIER_FILL)
                else:
                    sums = reduce_rows(np.add, member_values, matrix.indptr, 0.0)
                    result = np.where(counts > 0, sums / np.maximum(counts, 1), EMPTY_FRONTIER_FILL)
                block[:, i * len(layout.aggregators) + j] = result
        blocks.append(block)
    return np.hstack(blocks)


def featurize_mesh(mesh, layout, graph=None):
    """
    Property table and feature matrix of a mesh.

    Args:
        mesh (Mesh): Valid mesh
        layout (FeatureLayout): Vector layout
        graph (NeighbourhoodGraph): Graph of ``mesh``; built when omitted

    Returns:
        tuple: (element_ids, feature matrix, PropertyTable)
    """
    if graph is None:
        graph = build_graph(mesh)
    table = compute_property_table(mesh, graph)
    return mesh.element_ids.copy(), feature_matrix(table, graph, layout), table


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Feature rows of one or more meshes.

    ``labels`` holds 1 for rework and 0 for passed, or is None for
    unlabelled data used only for prediction.
    """
    mesh_ids: np.ndarray
    element_ids: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    layout: FeatureLayout = field(default_factory=FeatureLayout)

    def __post_init__(self):
        n = len(self.element_ids)
        if len(self.mesh_ids) != n or self.features.shape[0] != n:
            raise DatasetError("dataset columns have different lengths")
        if self.features.ndim != 2:
            raise DatasetError("feature matrix must be two-dimensional")
        if self.labels is not None and len(self.labels) != n:
            raise DatasetError("label column has a different length")

    def __len__(self):
        return len(self.element_ids)

    @property
    def dimension(self):
        return self.features.shape[1]

    def subset(self, mask):
        """Rows selected by a boolean mask or index array."""
        return Dataset(self.mesh_ids[mask], self.element_ids[mask], self.features[mask],
                       None if self.labels is None else self.labels[mask], self.layout)


def build_dataset(meshes, layout=None):
    """
    Feature rows for a collection of labelled meshes.

    Rows are ordered by mesh id, then element id.

    Args:
        meshes (list): LabeledMesh entries, each fully labelled
        layout (FeatureLayout): Vector layout; defaults to K = 4, all
                                properties, min/max/mean

    Returns:
        Dataset: One row per element of every mesh.

    Raises:
        UnlabelledElementError: If some element has no label.
        DatasetError: If no meshes are given or mesh ids repeat.
    """
    layout = layout or FeatureLayout()
    meshes = sorted(meshes, key=lambda entry: entry.mesh_id)
    if not meshes:
        raise DatasetError("no meshes to build a dataset from")
    ids = [entry.mesh_id for entry in meshes]
    if len(set(ids)) != len(ids):
        raise DatasetError("mesh ids must be unique")

    mesh_ids, element_ids, features, labels = [], [], [], []
    for entry in meshes:
        if entry.labels is None or not entry.labels.covers(entry.mesh):
            missing = [e.id for e in entry.mesh.elements
                       if entry.labels is None or e.id not in entry.labels]
            raise UnlabelledElementError(
                f"mesh {entry.mesh_id}: {len(missing)} elements unlabelled, first {missing[0]}")
        ids_, matrix, _ = featurize_mesh(entry.mesh, layout)
        mesh_ids.append(np.full(len(ids_), entry.mesh_id, dtype=object))
        element_ids.append(ids_)
        features.append(matrix)
        labels.append(entry.labels.as_array(ids_))
        logger.debug(f"featurized mesh {entry.mesh_id}: {len(ids_)} elements")

    return Dataset(np.concatenate(mesh_ids), np.concatenate(element_ids),
                   np.vstack(features), np.concatenate(labels), layout)


@dataclass(frozen=True)
class DatasetSummary:
    """Class balance of a dataset overall and per mesh."""
    n_meshes: int
    n_elements: int
    n_rework: int
    rework_share: float
    worst_mesh_id: str
    worst_mesh_share: float
    meshes_without_rework: int
    smallest_mesh: int
    median_mesh: float
    largest_mesh: int


def dataset_summary(dataset):
    """
    Summarise the class balance of a labelled dataset.

    Args:
        dataset (Dataset): Labelled dataset

    Returns:
        DatasetSummary: Overall and per-mesh statistics.
    """
    if dataset.labels is None or len(dataset) == 0:
        raise DatasetError("summary needs a non-empty labelled dataset")
    mesh_ids, inverse, sizes = np.unique(dataset.mesh_ids.astype(str), return_inverse=True,
                                         return_counts=True)
    rework = np.bincount(inverse.ravel(), weights=dataset.labels, minlength=len(mesh_ids))
    shares = rework / sizes
    worst = int(np.argmax(shares))
    return DatasetSummary(
        n_meshes=len(mesh_ids),
        n_elements=len(dataset),
        n_rework=int(dataset.labels.sum()),
        rework_share=float(dataset.labels.mean()),
        worst_mesh_id=str(mesh_ids[worst]),
        worst_mesh_share=float(shares[worst]),
        meshes_without_rework=int(np.sum(rework == 0)),
        smallest_mesh=int(sizes.min()),
        median_mesh=float(np.median(sizes)),
        largest_mesh=int(sizes.max()),
    )


def dataset_to_csv(dataset):
    """
    Delimited-text export with header ``mesh_id,element_id,f_0,...,label``.

    Columns f_i follow the layout's k-major/property/aggregator order;
    the label column is empty for unlabelled rows.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['mesh_id', 'element_id'] + [f"f_{i}" for i in range(dataset.dimension)] + ['label'])
    for row in range(len(dataset)):
        if dataset.labels is None:
            label = ''
        else:
            label = Label.REWORK.value if dataset.labels[row] else Label.PASSED.value
        writer.writerow([dataset.mesh_ids[row], int(dataset.element_ids[row])]
                        + [repr(float(v)) for v in dataset.features[row]] + [label])
    return buffer.getvalue()


def dataset_from_csv(text, layout=None):
    """Read a dataset written by ``dataset_to_csv``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[:2] != ['mesh_id', 'element_id'] or header[-1] != 'label':
        raise MeshFormatError("feature table header must start with mesh_id,element_id and end with label")
    rows = [row for row in reader if row]
    dimension = len(header) - 3
    layout = layout or FeatureLayout()
    if layout.dimension != dimension:
        raise DatasetError(f"feature table has {dimension} columns, layout expects {layout.dimension}")
    labels = [row[-1] for row in rows]
    return Dataset(
        np.array([row[0] for row in rows], dtype=object),
        np.array([int(row[1]) for row in rows], dtype=np.int64),
        np.array([[float(v) for v in row[2:-1]] for row in rows]).reshape(len(rows), dimension),
        None if any(label == '' for label in labels)
        else np.array([label == Label.REWORK.value for label in labels], dtype=np.int8),
        layout,
    )
