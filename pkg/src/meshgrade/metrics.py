"""
Per-element quality metrics.

This module computes the seven low-level element properties used as
classification features: skewness, aspect ratio, warpage, area, curvature
(angle between neighbouring element normals), and the triangle and border
flags. Every measure is implemented once as a kernel over a batch of
elements with the same node count; the single-element functions and the
table computation both call the kernels.

All angles are in degrees and computed with atan2 of the cross and dot
products, which stays accurate for nearly parallel vectors.
"""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .config import (
    DEGENERACY_TOLERANCE, TIE_TOLERANCE, PROPERTY_NAMES, PROPERTY_TABLE_HEADER, Property
)
from .errors import DegenerateGeometryError, MeshFormatError
from .graph import build_graph, reduce_rows


@dataclass(frozen=True, eq=False)
class PropertyTable:
    """One row of the seven properties per element, rows sorted by element id."""
    element_ids: np.ndarray
    values: np.ndarray
    columns: tuple = PROPERTY_NAMES

    def __len__(self):
        return len(self.element_ids)

    def row(self, element_id):
        """Property row of one element as a float array."""
        index = np.searchsorted(self.element_ids, element_id)
        if index >= len(self.element_ids) or self.element_ids[index] != element_id:
            raise KeyError(element_id)
        return self.values[index]

    def column(self, prop):
        """All values of one Property, in element-id order."""
        return self.values[:, self.columns.index(Property(prop).value)]


# ---------------------------------------------------------------------------
# Kernels over (n, v, 3) point batches
# ---------------------------------------------------------------------------

def _norm(vectors):
    return np.sqrt(np.einsum('...i,...i->...', vectors, vectors))


def _angle(a, b):
    """Angle in degrees between vector batches, in [0, 180]."""
    return np.degrees(np.arctan2(_norm(np.cross(a, b)), np.einsum('...i,...i->...', a, b)))


def _fold(angles):
    """Unoriented angle in [0, 90]."""
    return np.minimum(angles, 180.0 - angles)


def _max_edge_sq(points):
    edges = np.roll(points, -1, axis=1) - points
    return np.einsum('nvi,nvi->nv', edges, edges).max(axis=1)


def _raise_degenerate(bad, ids, what):
    if np.any(bad):
        raise DegenerateGeometryError(what, int(ids[np.argmax(bad)]))


def _newell(points):
    """Sum of cross products over the cyclic edge fan (twice the vector area)."""
    centred = points - points.mean(axis=1, keepdims=True)
    return np.cross(centred, np.roll(centred, -1, axis=1)).sum(axis=1)


def _unit_normals(points, ids):
    normals = _newell(points)
    magnitude = _norm(normals)
    _raise_degenerate(magnitude <= DEGENERACY_TOLERANCE * _max_edge_sq(points), ids,
                      "degenerate element, nodes are collinear or coincide")
    return normals / magnitude[:, None]


def _triangle_area(a, b, c):
    return 0.5 * _norm(np.cross(b - a, c - a))


def _areas(points):
    if points.shape[1] == 3:
        return _triangle_area(points[:, 0], points[:, 1], points[:, 2])
    return (_triangle_area(points[:, 0], points[:, 1], points[:, 2])
            + _triangle_area(points[:, 0], points[:, 2], points[:, 3]))


def _aspect_ratios(points, ids):
    """
    Long/short side of the minimum-area enclosing rectangle in the best-fit plane.

    The minimum over hull-edge orientations is attained by some hull edge;
    with at most four nodes every node pair is tried, which contains all
    hull edges and only adds valid enclosing rectangles. Among rectangles of
    equal area the most elongated one is reported.
    """
    _unit_normals(points, ids)
    centred = points - points.mean(axis=1, keepdims=True)
    _, _, vh = np.linalg.svd(centred)
    projected = np.einsum('nvj,nkj->nvk', centred, vh[:, :2, :])

    first, second = np.triu_indices(points.shape[1], 1)
    directions = projected[:, second] - projected[:, first]
    lengths = _norm(directions)
    usable = lengths > 0
    u = np.where(usable[..., None], directions / np.where(usable, lengths, 1.0)[..., None], 0.0)
    w = np.stack([-u[..., 1], u[..., 0]], axis=-1)

    along = np.einsum('npk,nvk->npv', u, projected)
    across = np.einsum('npk,nvk->npv', w, projected)
    extent_a = along.max(axis=2) - along.min(axis=2)
    extent_b = across.max(axis=2) - across.min(axis=2)
    area = np.where(usable, extent_a * extent_b, np.inf)

    long_side = np.maximum(extent_a, extent_b)
    short_side = np.minimum(extent_a, extent_b)
    best = area.min(axis=1)
    _raise_degenerate(~np.isfinite(best) | (best <= 0), ids, "enclosing rectangle has zero width")
    candidates = usable & (area <= best[:, None] * (1.0 + TIE_TOLERANCE))
    ratio = np.where(candidates, long_side / np.where(short_side > 0, short_side, 1.0), -np.inf)
    return ratio.max(axis=1)


def _skewness(points, ids):
    if points.shape[1] == 3:
        return np.zeros(len(points))
    mid = 0.5 * (points + np.roll(points, -1, axis=1))
    first = mid[:, 2] - mid[:, 0]
    second = mid[:, 3] - mid[:, 1]
    scale = DEGENERACY_TOLERANCE * _max_edge_sq(points)
    _raise_degenerate((_norm(first) ** 2 <= scale) | (_norm(second) ** 2 <= scale), ids,
                      "zero-length median")
    return 90.0 - _fold(_angle(first, second))


def _warpage(points, ids):
    if points.shape[1] == 3:
        return np.zeros(len(points))
    p0, p1, p2, p3 = (points[:, i] for i in range(4))
    halves = (
        (np.cross(p1 - p0, p2 - p0), np.cross(p2 - p0, p3 - p0)),  # diagonal 1-3
        (np.cross(p2 - p1, p3 - p1), np.cross(p3 - p1, p0 - p1)),  # diagonal 2-4
    )
    scale = DEGENERACY_TOLERANCE * _max_edge_sq(points)
    for a, b in halves:
        _raise_degenerate((_norm(a) <= scale) | (_norm(b) <= scale), ids,
                          "degenerate triangle in diagonal split")
    return np.maximum(_angle(*halves[0]), _angle(*halves[1]))


# ---------------------------------------------------------------------------
# Single-element measures
# ---------------------------------------------------------------------------

def _batch(element, mesh):
    return mesh.element_points(element)[None], np.array([element.id])


def element_normal(element, mesh):
    """
    Unit normal of an element (Newell construction, follows winding).

    Args:
        element (Element): Element of ``mesh``
        mesh (Mesh): Owning mesh

    Returns:
        np.ndarray: Unit 3-vector.

    Raises:
        DegenerateGeometryError: If the nodes are collinear or coincide.
    """
    return _unit_normals(*_batch(element, mesh))[0]


def element_area(element, mesh):
    """Area; quadrilaterals are split along the diagonal from node 1 to node 3."""
    return float(_areas(_batch(element, mesh)[0])[0])


def aspect_ratio(element, mesh):
    """Aspect ratio of the minimum rectangle containing the element, >= 1."""
    return float(_aspect_ratios(*_batch(element, mesh))[0])


def skewness(element, mesh):
    """Deviation from 90 degrees of the angle between the medians; 0 for triangles."""
    return float(_skewness(*_batch(element, mesh))[0])


def warpage(element, mesh):
    """Largest angle between the two halves over both diagonal splits; 0 for triangles."""
    return float(_warpage(*_batch(element, mesh))[0])


def curvature_angle(element, mesh, graph):
    """
    Largest unoriented normal angle between an element and its 1-ring.

    Args:
        element (Element): Element of ``mesh``
        mesh (Mesh): Owning mesh
        graph (NeighbourhoodGraph): Graph built from ``mesh``

    Returns:
        float: Degrees in [0, 90]; 0 for an element without neighbours.
    """
    neighbours = graph.neighbours(element.id)
    if not neighbours:
        return 0.0
    normal = element_normal(element, mesh)
    others = np.array([element_normal(mesh.element(n), mesh) for n in neighbours])
    return float(_fold(_angle(np.broadcast_to(normal, others.shape), others)).max())


# ---------------------------------------------------------------------------
# Whole-mesh measures
# ---------------------------------------------------------------------------

def _points_by_arity(mesh):
    """Yield (element positions, point batch, element ids) per node count."""
    connectivity = mesh.connectivity
    triangles = mesh.triangle_mask
    for mask, width in ((triangles, 3), (~triangles, 4)):
        positions = np.nonzero(mask)[0]
        if len(positions):
            yield positions, mesh.coordinates[connectivity[positions, :width]], mesh.element_ids[positions]


def element_normals(mesh):
    """Unit normals of all elements, in element-id order."""
    normals = np.zeros((len(mesh.elements), 3))
    for positions, points, ids in _points_by_arity(mesh):
        normals[positions] = _unit_normals(points, ids)
    return normals


def curvature_angles(mesh, graph, normals=None):
    """Curvature of every element, in element-id order."""
    if normals is None:
        normals = element_normals(mesh)
    rows = np.repeat(np.arange(len(graph)), np.diff(graph.indptr))
    angles = _fold(_angle(normals[rows], normals[graph.indices]))
    return reduce_rows(np.maximum, angles, graph.indptr, fill=0.0)


def border_flags(mesh):
    """
    Flag elements having an edge that no other element shares.

    Args:
        mesh (Mesh): Valid mesh

    Returns:
        np.ndarray: int8 flags (1 = border) in element-id order.
    """
    connectivity = mesh.connectivity
    arity = np.where(mesh.triangle_mask, 3, 4)
    owners, starts, ends = [], [], []
    for column in range(4):
        present = column < arity
        following = np.where(column + 1 < arity, column + 1, 0)
        rows = np.nonzero(present)[0]
        owners.append(rows)
        starts.append(connectivity[rows, column])
        ends.append(connectivity[rows, following[rows]])
    owners = np.concatenate(owners)
    a, b = np.concatenate(starts), np.concatenate(ends)
    edges = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
    _, inverse, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
    flags = np.zeros(len(mesh.elements), dtype=np.int8)
    flags[owners[counts[inverse.ravel()] == 1]] = 1
    return flags


def compute_property_table(mesh, graph=None):
    """
    Compute the seven element properties for a whole mesh.

    Args:
        mesh (Mesh): Valid mesh
        graph (NeighbourhoodGraph): Graph of ``mesh``; built when omitted

    Returns:
        PropertyTable: Columns skewness, aspect_ratio, warpage, area,
                       curvature, is_triangle, is_border.

    Raises:
        DegenerateGeometryError: Naming the first offending element.
    """
    if graph is None:
        graph = build_graph(mesh)
    values = np.zeros((len(mesh.elements), len(PROPERTY_NAMES)))
    normals = np.zeros((len(mesh.elements), 3))
    for positions, points, ids in _points_by_arity(mesh):
        normals[positions] = _unit_normals(points, ids)
        values[positions, 0] = _skewness(points, ids)
        values[positions, 1] = _aspect_ratios(points, ids)
        values[positions, 2] = _warpage(points, ids)
        values[positions, 3] = _areas(points)
    values[:, 4] = curvature_angles(mesh, graph, normals)
    values[:, 5] = mesh.triangle_mask.astype(float)
    values[:, 6] = border_flags(mesh)
    return PropertyTable(mesh.element_ids.copy(), values)


def property_table_to_csv(table):
    """
    Delimited-text export, one row per element sorted by id.

    Args:
        table (PropertyTable): Table to export

    Returns:
        str: CSV text with the ``element_id,skewness,...`` header.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(PROPERTY_TABLE_HEADER)
    flag_columns = {table.columns.index(Property.IS_TRIANGLE.value),
                    table.columns.index(Property.IS_BORDER.value)}
    for element_id, row in zip(table.element_ids, table.values):
        writer.writerow([int(element_id)] + [int(v) if i in flag_columns else repr(float(v))
                                             for i, v in enumerate(row)])
    return buffer.getvalue()


def property_table_from_csv(text):
    """Read a table written by ``property_table_to_csv``."""
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != PROPERTY_TABLE_HEADER:
        raise MeshFormatError(f"unexpected property table header {header}")
    rows = [row for row in reader if row]
    ids = np.array([int(row[0]) for row in rows], dtype=np.int64)
    values = np.array([[float(v) for v in row[1:]] for row in rows]).reshape(len(rows), len(PROPERTY_NAMES))
    return PropertyTable(ids, values)
