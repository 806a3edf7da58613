"""
Tests for the element neighbourhood graph, k-rings and frontiers.
"""
import itertools

import numpy as np
import pytest

from src.meshgrade.errors import UnknownElementError
from src.meshgrade.graph import (
    build_graph, frontier, frontier_matrices, graph_to_text, k_ring, reduce_rows
)
from src.meshgrade.mesh import Element, Mesh, Node
from tests.helpers import make_mesh


def _shares_node(a, b):
    return bool(set(a.node_ids) & set(b.node_ids))


def _ring_by_recursion(graph, element_id, k):
    if k == 0:
        return {element_id}
    inner = _ring_by_recursion(graph, element_id, k - 1)
    return inner | {n for e in inner for n in graph.neighbours(e)}


def _random_mesh(rng, max_elements=200):
    """Random triangles and quads over a random node pool, with scattered ids."""
    n_elements = int(rng.integers(1, max_elements + 1))
    n_nodes = int(rng.integers(4, 2 * n_elements + 5))
    nodes = tuple(Node(i + 1, tuple(float(c) for c in rng.random(3))) for i in range(n_nodes))
    element_ids = rng.choice(np.arange(1, 5 * max_elements), size=n_elements, replace=False)
    elements = tuple(
        Element(int(e), tuple(int(n) + 1 for n in rng.choice(n_nodes, size=int(rng.integers(3, 5)), replace=False)))
        for e in element_ids)
    return Mesh(nodes, elements)


def _adjacency_by_definition(mesh):
    return {a.id: {b.id for b in mesh.elements if b.id != a.id and _shares_node(a, b)}
            for a in mesh.elements}


def _rings_by_definition(adjacent, element_id, K):
    """Rings 0..K, each grown from the previous one by one adjacency step."""
    rings = [{element_id}]
    for _ in range(K):
        rings.append(rings[-1] | {n for e in rings[-1] for n in adjacent[e]})
    return rings


class TestBuildGraph:
    def test_matches_brute_force(self, grid):
        mesh = grid(4, 5)
        graph = build_graph(mesh)
        for a, b in itertools.permutations(mesh.elements, 2):
            assert (b.id in graph.neighbours(a.id)) == _shares_node(a, b)

    def test_grid_degrees(self, grid):
        graph = build_graph(grid(3, 3))
        assert len(graph.neighbours(5)) == 8
        assert graph.neighbours(1) == (2, 4, 5)
        assert len(graph.neighbours(2)) == 5

    def test_symmetric_and_irreflexive(self, grid):
        adjacency = build_graph(grid(3, 4)).adjacency.toarray()
        assert np.array_equal(adjacency, adjacency.T)
        assert not adjacency.diagonal().any()

    def test_node_sharing_is_enough(self):
        # Two triangles touching at a single node are neighbours.
        mesh = make_mesh([(0, 0, 0), (1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0)],
                         [(1, 2, 3), (1, 4, 5)])
        graph = build_graph(mesh)
        assert graph.neighbours(1) == (2,)
        assert graph.edge_count == 1

    def test_unknown_element(self, grid):
        graph = build_graph(grid(2, 2))
        with pytest.raises(UnknownElementError):
            graph.neighbours(99)
        assert 99 not in graph

    def test_text_dump(self, grid):
        lines = graph_to_text(build_graph(grid(2, 2))).splitlines()
        assert lines[0] == "1: 2 3 4"
        assert len(lines) == 4


class TestRings:
    @pytest.mark.parametrize('k', [0, 1, 2, 3])
    def test_ring_matches_recursion(self, grid, k):
        graph = build_graph(grid(5, 6))
        for element_id in (1, 9, 17, 30):
            assert k_ring(graph, element_id, k) == _ring_by_recursion(graph, element_id, k)

    @pytest.mark.slow
    def test_random_meshes_match_definition(self):
        rng = np.random.default_rng(20)
        for _ in range(100):
            mesh = _random_mesh(rng)
            graph = build_graph(mesh)
            adjacent = _adjacency_by_definition(mesh)
            for element_id in adjacent:
                rings = _rings_by_definition(adjacent, element_id, 6)
                for k in range(7):
                    assert k_ring(graph, element_id, k) == rings[k]
                    expected = rings[k] - rings[k - 1] if k else {element_id}
                    assert frontier(graph, element_id, k) == expected

    def test_ring_sizes_on_grid(self, grid):
        graph = build_graph(grid(7, 7))
        centre = 25
        assert len(k_ring(graph, centre, 1)) == 9
        assert len(k_ring(graph, centre, 2)) == 25
        assert len(frontier(graph, centre, 2)) == 16

    def test_frontier_is_ring_difference(self, grid):
        graph = build_graph(grid(5, 5))
        for k in range(1, 4):
            assert frontier(graph, 7, k) == k_ring(graph, 7, k) - k_ring(graph, 7, k - 1)

    def test_frontier_beyond_mesh_is_empty(self, grid):
        graph = build_graph(grid(2, 2))
        assert frontier(graph, 1, 3) == set()
        assert frontier(graph, 1, 0) == {1}

    def test_negative_radius(self, grid):
        with pytest.raises(ValueError):
            k_ring(build_graph(grid(2, 2)), 1, -1)


class TestFrontierMatrices:
    def test_rows_match_frontiers(self, grid):
        graph = build_graph(grid(4, 6))
        matrices = frontier_matrices(graph, 3)
        assert len(matrices) == 4
        for k, matrix in enumerate(matrices):
            for row, element_id in enumerate(graph.element_ids):
                members = {int(graph.element_ids[i]) for i in matrix[row].indices}
                assert members == frontier(graph, int(element_id), k)

    def test_reduce_rows_fills_empty_rows(self):
        indptr = np.array([0, 2, 2, 5])
        values = np.array([3.0, 1.0, 4.0, 9.0, 2.0])
        np.testing.assert_array_equal(reduce_rows(np.maximum, values, indptr, fill=-1.0),
                                      [3.0, -1.0, 9.0])
        np.testing.assert_array_equal(reduce_rows(np.add, values, indptr), [4.0, 0.0, 15.0])
