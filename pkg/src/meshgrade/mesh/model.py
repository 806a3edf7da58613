"""
Mesh data model for the meshgrade toolkit.

This module provides the immutable node, element, mesh, and label-set
types. Construction performs no validation so that broken documents can
still be inspected; ``validation.validate_mesh`` checks the invariants.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple, Optional

import numpy as np

from ..config import ElementKind, Label


@dataclass(frozen=True)
class Node:
    """A point in 3-space identified by a positive integer id."""
    id: int
    position: tuple

    @property
    def xyz(self):
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class Element:
    """A triangle or quadrilateral given by its node ids in winding order."""
    id: int
    node_ids: tuple

    @property
    def kind(self):
        """ElementKind derived from the node count."""
        return ElementKind.TRIANGLE if len(self.node_ids) == 3 else ElementKind.QUADRILATERAL

    @property
    def is_triangle(self):
        return len(self.node_ids) == 3

    def edges(self):
        """
        Edges as unordered node-id pairs, in cyclic order.

        Returns:
            list: Tuples (a, b) with a < b.
        """
        ids = self.node_ids
        return [tuple(sorted((ids[i], ids[(i + 1) % len(ids)]))) for i in range(len(ids))]

    def reversed(self):
        """The same element with opposite winding."""
        return Element(self.id, tuple(reversed(self.node_ids)))


@dataclass(frozen=True)
class Mesh:
    """
    A quad-dominant shell mesh.

    Nodes and elements are stored sorted by id. Derived arrays are computed
    lazily and cached; the mesh itself never changes after construction.
    """
    nodes: tuple
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, 'nodes', tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, 'elements', tuple(sorted(self.elements, key=lambda e: e.id)))

    def __len__(self):
        return len(self.elements)

    @cached_property
    def node_index(self):
        """Map node id -> row in ``coordinates``."""
        return {node.id: i for i, node in enumerate(self.nodes)}

    @cached_property
    def element_index(self):
        """Map element id -> position in ``elements``."""
        return {element.id: i for i, element in enumerate(self.elements)}

    @cached_property
    def coordinates(self):
        """Node positions as an (n_nodes, 3) float array."""
        if not self.nodes:
            return np.zeros((0, 3))
        return np.array([node.position for node in self.nodes], dtype=float)

    @cached_property
    def element_ids(self):
        """Element ids as a sorted int64 array."""
        return np.array([element.id for element in self.elements], dtype=np.int64)

    @cached_property
    def connectivity(self):
        """
        Element node rows as an (n_elements, 4) array of coordinate indices.

        Triangles are padded with -1 in the last column.
        """
        rows = np.full((len(self.elements), 4), -1, dtype=np.int64)
        for i, element in enumerate(self.elements):
            rows[i, :len(element.node_ids)] = [self.node_index[n] for n in element.node_ids]
        return rows

    @cached_property
    def triangle_mask(self):
        return self.connectivity[:, 3] < 0

    def node(self, node_id):
        return self.nodes[self.node_index[node_id]]

    def element(self, element_id):
        return self.elements[self.element_index[element_id]]

    def element_points(self, element):
        """
        Positions of an element's nodes in winding order.

        Args:
            element (Element): Element of this mesh

        Returns:
            np.ndarray: (3, 3) or (4, 3) array.
        """
        return self.coordinates[[self.node_index[n] for n in element.node_ids]]

    def with_positions(self, coordinates):
        """
        A copy of the mesh with every node moved.

        Args:
            coordinates (np.ndarray): (n_nodes, 3) positions in node-id order

        Returns:
            Mesh: New mesh sharing this mesh's topology.
        """
        nodes = tuple(Node(node.id, tuple(float(c) for c in xyz))
                      for node, xyz in zip(self.nodes, np.asarray(coordinates, dtype=float)))
        return Mesh(nodes, self.elements)


@dataclass(frozen=True)
class LabelSet:
    """Map from element id to Label."""
    labels: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'labels', dict(sorted(self.labels.items())))

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, element_id):
        return self.labels[element_id]

    def __contains__(self, element_id):
        return element_id in self.labels

    def items(self):
        return self.labels.items()

    @classmethod
    def uniform(cls, element_ids, label=Label.PASSED):
        return cls({int(e): label for e in element_ids})

    @classmethod
    def from_rework(cls, element_ids, rework_ids):
        """Label ``rework_ids`` as rework and every other id as passed."""
        rework = set(int(e) for e in rework_ids)
        return cls({int(e): Label.REWORK if int(e) in rework else Label.PASSED for e in element_ids})

    @property
    def rework_ids(self):
        return frozenset(e for e, label in self.labels.items() if label is Label.REWORK)

    def share(self):
        """Fraction of labelled elements marked rework (0 for an empty set)."""
        return len(self.rework_ids) / len(self.labels) if self.labels else 0.0

    def covers(self, mesh):
        """Whether every element of ``mesh`` has a label."""
        return all(element.id in self.labels for element in mesh.elements)

    def as_array(self, element_ids):
        """
        Labels as 0/1 ints in the given element order (1 = rework).

        Raises:
            KeyError: If an element id is unlabelled.
        """
        return np.array([self.labels[int(e)] is Label.REWORK for e in element_ids], dtype=np.int8)


class LabeledMesh(NamedTuple):
    """A mesh paired with its identifier and, optionally, its ground truth."""
    mesh_id: str
    mesh: Mesh
    labels: Optional[LabelSet] = None
