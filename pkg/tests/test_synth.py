"""
Tests for synthetic grids, defects, label dilation and the benchmark corpus.
"""
import numpy as np
import pytest

from src.meshgrade.config import DefectKind, Label, Surface
from src.meshgrade.errors import ConfigError, DefectPlacementError
from src.meshgrade.metrics import aspect_ratio, element_area, skewness, warpage
from src.meshgrade.synth import (
    DefectSpec, SynthSpec, benchmark_specs, bridge_labels, dilate_labels, generate_grid,
    generate_labeled_mesh, inject_defects, read_benchmark, write_benchmark
)
from tests.helpers import make_mesh


def _strip(n):
    """A single row of n unit quads, element j between x=j-1 and x=j."""
    points = [(i, 0, 0) for i in range(n + 1)] + [(i, 1, 0) for i in range(n + 1)]
    faces = [(j + 1, j + 2, n + j + 3, n + j + 2) for j in range(n)]
    return make_mesh(points, faces)


class TestGrid:
    def test_counts_and_numbering(self):
        mesh, labels = generate_grid(SynthSpec(rows=3, cols=3))
        assert len(mesh) == 9
        assert len(mesh.nodes) == 16
        assert mesh.element(1).node_ids == (1, 2, 6, 5)
        assert mesh.element(9).node_ids == (11, 12, 16, 15)
        assert labels.rework_ids == frozenset()
        assert labels.covers(mesh)

    def test_flat_grid_lies_in_the_plane(self):
        mesh, _ = generate_grid(SynthSpec(rows=2, cols=4, spacing=2.5))
        assert np.all(mesh.coordinates[:, 2] == 0.0)
        assert mesh.coordinates[:, 0].max() == pytest.approx(10.0)

    def test_cylinder_nodes_keep_their_radius(self):
        spec = SynthSpec(rows=2, cols=6, surface='cylinder', radius=5.0)
        mesh, _ = generate_grid(spec)
        x, z = mesh.coordinates[:, 0], mesh.coordinates[:, 2]
        np.testing.assert_allclose(np.hypot(x, z - 5.0), 5.0)

    def test_ridge_folds_beyond_the_middle(self):
        mesh, _ = generate_grid(SynthSpec(rows=2, cols=4, surface=Surface.RIDGE, ridge_angle=30.0))
        x, z = mesh.coordinates[:, 0], mesh.coordinates[:, 2]
        assert np.all(z[x <= 2.0 + 1e-12] == 0.0)
        assert z.max() == pytest.approx(2 * np.sin(np.radians(30.0)))

    @pytest.mark.parametrize('options', [
        {'rows': 1, 'cols': 3},
        {'rows': 3, 'cols': 3, 'spacing': 0.0},
        {'rows': 3, 'cols': 3, 'surface': 'cylinder', 'radius': 0.4},
        {'rows': 3, 'cols': 3, 'surface': 'ridge', 'ridge_angle': 180.0},
        {'rows': 3, 'cols': 3, 'dilation_radius': -1},
        {'rows': 3, 'cols': 3, 'defects': (DefectSpec('shrunk', 1, 1.0),)},
        {'rows': 3, 'cols': 3, 'defects': (DefectSpec('skewed', 1, 90.0),)},
        {'rows': 3, 'cols': 3, 'defects': (DefectSpec('sliver', 1, -2.0),)},
    ])
    def test_invalid_recipes(self, options):
        with pytest.raises(ConfigError):
            SynthSpec(**options).validate()

    def test_too_many_defects(self):
        with pytest.raises(DefectPlacementError):
            SynthSpec(rows=2, cols=2, defects=(DefectSpec('sliver', 5),)).validate()

    def test_default_severity(self):
        assert DefectSpec('warped').severity == 25.0
        assert DefectSpec(DefectKind.SHRUNK, 2).severity == 0.6

    def test_defects_from_dicts(self):
        spec = SynthSpec(rows=3, cols=3, defects=({'kind': 'skewed', 'count': 2},))
        assert spec.defects == (DefectSpec(DefectKind.SKEWED, 2),)


class TestDefects:
    @pytest.mark.parametrize('kind, measure', [
        ('sliver', aspect_ratio),
        ('skewed', skewness),
        ('warped', warpage),
    ])
    def test_metric_moves_by_the_severity(self, kind, measure):
        spec = SynthSpec(rows=4, cols=4, defects=(DefectSpec(kind, 1),), seed=2)
        grid, _ = generate_grid(spec)
        damaged, ids = inject_defects(grid, spec)
        (target,) = ids
        before = measure(grid.element(target), grid)
        after = measure(damaged.element(target), damaged)
        assert after - before >= DefectSpec(kind).severity

    def test_shrunk_element_loses_area(self):
        spec = SynthSpec(rows=4, cols=4, defects=(DefectSpec('shrunk', 1),), seed=5)
        grid, _ = generate_grid(spec)
        damaged, (target,) = inject_defects(grid, spec)
        assert element_area(damaged.element(target), damaged) <= 0.4 + 1e-9

    def test_triangulated_quad_is_split(self):
        spec = SynthSpec(rows=3, cols=3, defects=(DefectSpec('triangulated', 1),), seed=1)
        grid, _ = generate_grid(spec)
        damaged, ids = inject_defects(grid, spec)
        assert len(damaged) == 10
        assert len(ids) == 2 and ids[1] == 10
        original, added = damaged.element(ids[0]), damaged.element(10)
        assert original.is_triangle and added.is_triangle
        assert set(original.node_ids) | set(added.node_ids) == set(grid.element(ids[0]).node_ids)

    def test_no_defects_returns_the_same_mesh(self):
        spec = SynthSpec(rows=2, cols=2)
        grid, _ = generate_grid(spec)
        damaged, ids = inject_defects(grid, spec)
        assert damaged is grid
        assert ids == []

    def test_seed_decides_the_targets(self):
        spec = SynthSpec(rows=6, cols=6, defects=(DefectSpec('warped', 3),), seed=8)
        grid, _ = generate_grid(spec)
        assert inject_defects(grid, spec)[1] == inject_defects(grid, spec)[1]
        assert len(inject_defects(grid, spec)[1]) == 3

    def test_untouched_elements_keep_their_nodes(self):
        spec = SynthSpec(rows=5, cols=5, defects=(DefectSpec('skewed', 1),), seed=3)
        grid, _ = generate_grid(spec)
        damaged, (target,) = inject_defects(grid, spec)
        moved = np.any(damaged.coordinates != grid.coordinates, axis=1)
        touched = {grid.node_index[n] for n in grid.element(target).node_ids}
        assert set(np.nonzero(moved)[0].tolist()) <= touched


class TestLabels:
    def test_dilation_covers_the_ring(self):
        mesh, _ = generate_grid(SynthSpec(rows=3, cols=3))
        assert dilate_labels(mesh, [5], radius=1).rework_ids == frozenset(range(1, 10))
        assert dilate_labels(mesh, [5], radius=0).rework_ids == frozenset({5})

    def test_dilation_labels_everything(self):
        mesh, _ = generate_grid(SynthSpec(rows=4, cols=4))
        labels = dilate_labels(mesh, [1], radius=1)
        assert labels.rework_ids == frozenset({1, 2, 5, 6})
        assert labels[16] is Label.PASSED
        assert len(labels) == 16

    def test_bridge_joins_nearby_groups(self):
        mesh = _strip(7)
        assert bridge_labels(mesh, [1, 4], max_gap=3) == frozenset({2, 3})

    def test_bridge_ignores_distant_groups(self):
        mesh = _strip(7)
        assert bridge_labels(mesh, [1, 4], max_gap=1) == frozenset()
        assert bridge_labels(mesh, [1, 2], max_gap=3) == frozenset()
        assert bridge_labels(mesh, [], max_gap=3) == frozenset()

    def test_labeled_mesh(self):
        spec = SynthSpec(rows=5, cols=5, defects=(DefectSpec('sliver', 1),), seed=9)
        labeled = generate_labeled_mesh(spec)
        assert labeled.mesh_id == "synth-9"
        assert labeled.labels.covers(labeled.mesh)
        assert 4 <= len(labeled.labels.rework_ids) <= 9


class TestBenchmark:
    def test_specs_are_reproducible(self):
        first = benchmark_specs(n_meshes=8, seed=1)
        assert first == benchmark_specs(n_meshes=8, seed=1)
        assert first != benchmark_specs(n_meshes=8, seed=2)
        assert [mesh_id for mesh_id, _ in first][:2] == ["bench-000", "bench-001"]

    def test_specs_respect_the_grid_range(self):
        for _, spec in benchmark_specs(n_meshes=20, seed=4, grid_range=(5, 9)):
            assert 5 <= spec.rows <= 9 and 5 <= spec.cols <= 9
            spec.validate()

    def test_write_and_read(self, tmp_path):
        specs = [(f"m{i}", SynthSpec(rows=3, cols=3, defects=(DefectSpec('warped', 1),), seed=i))
                 for i in range(2)]
        calls = []
        manifest = write_benchmark(tmp_path / "bench", specs,
                                   progress=lambda stage, done, total: calls.append((done, total)))
        assert manifest['meshes'] == 2
        assert manifest['elements'] == 18
        assert calls == [(1, 2), (2, 2)]
        assert (tmp_path / "bench" / "m0.mesh.json").exists()

        meshes = read_benchmark(tmp_path / "bench")
        assert [m.mesh_id for m in meshes] == ["m0", "m1"]
        for entry, labeled in zip(manifest['entries'], meshes):
            assert len(labeled.labels.rework_ids) == entry['rework']
            assert entry['spec']['defects'][0]['kind'] == 'warped'

    def test_foreign_manifest(self, tmp_path):
        (tmp_path / "manifest.yaml").write_text("format: something-else\n", encoding='utf-8')
        with pytest.raises(ConfigError):
            read_benchmark(tmp_path)
