"""
Tests for VTK export and PNG overlays.
"""
import numpy as np
import pytest

from src.meshgrade.config import OUTCOME_COLORS, Outcome
from src.meshgrade.errors import DimensionMismatchError
from src.meshgrade.viz import (
    element_fields, outcome_colors, outcomes, probability_colors, render_overlay, save_overlay,
    vtk_text, write_vtk
)
from tests.helpers import make_mesh


@pytest.fixture
def mixed():
    """A quad and a triangle sharing an edge."""
    return make_mesh([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (2, 0, 0)],
                     [(1, 2, 3, 4), (2, 5, 3)])


class TestFields:
    def test_outcome_codes(self):
        codes = outcomes([True, False, True, False], [1, 0, 0, 1])
        assert codes.tolist() == [Outcome.TP.value, Outcome.TN.value, Outcome.FP.value, Outcome.FN.value]

    def test_fields_with_ground_truth(self):
        fields = element_fields([0.2, 0.5, 0.9], 0.5, ground_truth=[0, 0, 1])
        assert sorted(fields) == ['ground_truth', 'outcome', 'predicted', 'probability']
        assert fields['predicted'].tolist() == [0, 1, 1]
        assert fields['outcome'].tolist() == [1, 2, 0]

    def test_fields_without_ground_truth(self):
        assert sorted(element_fields([0.1], 0.5)) == ['predicted', 'probability']


class TestVtk:
    def test_document_structure(self, mixed):
        text = vtk_text(mixed, element_fields([0.25, 0.75], 0.5, [0, 1]), title="part 7")
        lines = text.splitlines()
        assert lines[:5] == ["# vtk DataFile Version 3.0", "part 7", "ASCII",
                             "DATASET UNSTRUCTURED_GRID", "POINTS 5 double"]
        assert "CELLS 2 9" in lines
        assert lines[lines.index("CELLS 2 9") + 1] == "4 0 1 2 3"
        assert lines[lines.index("CELLS 2 9") + 2] == "3 1 4 2"
        start = lines.index("CELL_TYPES 2")
        assert lines[start + 1:start + 3] == ["9", "5"]
        assert "CELL_DATA 2" in lines
        assert "SCALARS probability double 1" in lines
        assert "SCALARS outcome int 1" in lines
        assert lines[lines.index("SCALARS probability double 1") + 2] == "0.25"

    def test_geometry_only(self, unit_square):
        assert "CELL_DATA" not in vtk_text(unit_square, {})

    def test_field_length_mismatch(self, mixed):
        with pytest.raises(DimensionMismatchError):
            vtk_text(mixed, {'probability': np.array([0.1, 0.2, 0.3])})

    def test_write(self, tmp_path, mixed):
        path = tmp_path / "out" / "result.vtk"
        write_vtk(path, mixed, {'probability': np.array([0.1, 0.2])})
        assert path.read_text(encoding='utf-8').startswith("# vtk DataFile")


class TestOverlay:
    def test_probability_colors_blend(self):
        colors = probability_colors([0.0, 1.0, 2.0])
        assert colors[0] == (255, 255, 255)
        assert colors[1] == (40, 90, 200)
        assert colors[2] == colors[1]

    def test_outcome_colors(self):
        assert outcome_colors([3, 0]) == [OUTCOME_COLORS[Outcome.FN], OUTCOME_COLORS[Outcome.TP]]

    def test_render_fills_elements(self, unit_square):
        grey = OUTCOME_COLORS[Outcome.TN]
        surface = render_overlay(unit_square, [grey], size=(100, 100), margin=10)
        assert surface.get_size() == (100, 100)
        assert tuple(surface.get_at((50, 50)))[:3] == grey

    def test_colour_count_mismatch(self, mixed):
        with pytest.raises(DimensionMismatchError):
            render_overlay(mixed, [(0, 0, 0)])

    def test_save_png(self, tmp_path, grid):
        mesh = grid(3, 4, surface='cylinder')
        path = tmp_path / "overlay.png"
        save_overlay(path, mesh, probability_colors(np.linspace(0, 1, len(mesh))), size=(120, 90))
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
