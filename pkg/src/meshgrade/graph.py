"""
Element neighbourhood graph.

Each element of a mesh is a vertex; two vertices are adjacent whenever the
elements share at least one node. This module builds the graph from a
node-to-elements inverted index and answers k-ring neighbourhood and
frontier queries, one element at a time or for all elements at once.
"""
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import UnknownElementError


@dataclass(frozen=True, eq=False)
class NeighbourhoodGraph:
    """
    Immutable element adjacency in compressed sparse row form.

    Rows and columns are positions in ``element_ids`` (sorted ascending);
    each row's neighbour positions are sorted, so neighbour ids are too.
    """
    element_ids: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.element_ids)

    def __contains__(self, element_id):
        return int(element_id) in self.position

    @cached_property
    def position(self):
        """Map element id -> row position."""
        return {int(e): i for i, e in enumerate(self.element_ids)}

    @cached_property
    def adjacency(self):
        """Boolean (n, n) scipy CSR adjacency matrix."""
        n = len(self.element_ids)
        data = np.ones(len(self.indices), dtype=bool)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    @property
    def edge_count(self):
        return len(self.indices) // 2

    def _row(self, element_id):
        try:
            return self.position[int(element_id)]
        except KeyError:
            raise UnknownElementError(f"element {element_id} is not in the graph") from None

    def neighbour_positions(self, row):
        return self.indices[self.indptr[row]:self.indptr[row + 1]]

    def neighbours(self, element_id):
        """
        Adjacent element ids.

        Args:
            element_id (int): Vertex of the graph

        Returns:
            tuple: Sorted neighbour ids.
        """
        return tuple(int(e) for e in self.element_ids[self.neighbour_positions(self._row(element_id))])


def build_graph(mesh):
    """
    Build the neighbourhood graph of a mesh.

    The element-by-node incidence matrix B is assembled once; B @ B.T joins
    elements through the node-to-elements index (the columns of B), so the
    cost follows the number of adjacent pairs rather than all pairs.

    Args:
        mesh (Mesh): Valid mesh

    Returns:
        NeighbourhoodGraph: Symmetric, irreflexive adjacency.
    """
    connectivity = mesh.connectivity
    rows, cols = np.nonzero(connectivity >= 0)
    nodes = connectivity[rows, cols]
    incidence = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.int32), (rows, nodes)),
        shape=(len(mesh.elements), len(mesh.nodes)))
    shared = (incidence @ incidence.T).tocsr()
    shared.setdiag(0)
    shared.eliminate_zeros()
    shared.sort_indices()
    return NeighbourhoodGraph(
        element_ids=mesh.element_ids.copy(),
        indptr=shared.indptr.astype(np.int64),
        indices=shared.indices.astype(np.int64),
    )


def _layers(graph, element_id, k):
    """Breadth-first layers 0..k of the ring around ``element_id`` (as positions)."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    start = graph._row(element_id)
    distance = {start: 0}
    layers = [[start]]
    queue = deque([start])
    while queue:
        row = queue.popleft()
        depth = distance[row]
        if depth == k:
            continue
        for neighbour in graph.neighbour_positions(row):
            neighbour = int(neighbour)
            if neighbour not in distance:
                distance[neighbour] = depth + 1
                if len(layers) <= depth + 1:
                    layers.append([])
                layers[depth + 1].append(neighbour)
                queue.append(neighbour)
    return layers


def k_ring(graph, element_id, k):
    """
    The k-ring neighbourhood: every element within k adjacency steps.

    Args:
        graph (NeighbourhoodGraph): Element graph
        element_id (int): Centre element
        k (int): Non-negative ring radius

    Returns:
        set: Element ids, always including ``element_id``.

    Raises:
        UnknownElementError: If the element is not in the graph.
    """
    rows = [row for layer in _layers(graph, element_id, k) for row in layer]
    return {int(e) for e in graph.element_ids[rows]}


def frontier(graph, element_id, k):
    """
    The k-ring frontier: elements at exactly k adjacency steps.

    Args:
        graph (NeighbourhoodGraph): Element graph
        element_id (int): Centre element
        k (int): Non-negative distance

    Returns:
        set: Element ids; ``{element_id}`` for k = 0, possibly empty for k > 0.

    Raises:
        UnknownElementError: If the element is not in the graph.
    """
    layers = _layers(graph, element_id, k)
    if k >= len(layers):
        return set()
    return {int(e) for e in graph.element_ids[layers[k]]}


def frontier_matrices(graph, K):
    """
    Frontiers of every element for k = 0..K as sparse indicator matrices.

    Row r of the k-th matrix marks the elements at distance exactly k from
    element r. Memory grows with the ring sizes, never with element pairs.

    Args:
        graph (NeighbourhoodGraph): Element graph
        K (int): Largest distance

    Returns:
        list: K + 1 scipy CSR matrices of dtype int8 with sorted indices.
    """
    if K < 0:
        raise ValueError(f"K must be non-negative, got {K}")
    n = len(graph)
    adjacency = graph.adjacency.astype(np.int32)
    reached = sparse.identity(n, dtype=np.int32, format='csr')
    frontiers = [reached.astype(np.int8)]
    current = reached
    for _ in range(K):
        grown = current @ adjacency
        grown.data[:] = 1
        grown = (grown - grown.multiply(reached)).tocsr()
        grown.eliminate_zeros()
        grown.sort_indices()
        frontiers.append(grown.astype(np.int8))
        reached = (reached + grown).tocsr()
        reached.data[:] = 1
        current = grown
    return frontiers


def graph_to_text(graph):
    """
    Adjacency dump, one ``element_id: neighbour ids`` line per vertex.

    Args:
        graph (NeighbourhoodGraph): Element graph

    Returns:
        str: Text with a trailing newline.
    """
    lines = []
    for row, element_id in enumerate(graph.element_ids):
        neighbours = graph.element_ids[graph.neighbour_positions(row)]
        lines.append(f"{int(element_id)}: " + " ".join(str(int(e)) for e in neighbours))
    return "\n".join(lines) + "\n"


def reduce_rows(ufunc, values, indptr, fill=0.0):
    """
    Reduce CSR-ordered values row by row, e.g. ``np.maximum`` per element.

    Args:
        ufunc (np.ufunc): Binary ufunc with a ``reduceat`` method
        values (np.ndarray): One value per stored entry
        indptr (np.ndarray): CSR row pointer
        fill (float): Result for rows without entries

    Returns:
        np.ndarray: One value per row.
    """
    counts = np.diff(indptr)
    result = np.full(len(counts), fill, dtype=float)
    filled = counts > 0
    if np.any(filled):
        result[filled] = ufunc.reduceat(np.asarray(values, dtype=float), indptr[:-1][filled])
    return result
