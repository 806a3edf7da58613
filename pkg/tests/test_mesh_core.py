"""
Tests for the mesh model, the canonical document and OBJ conversion.
"""
import json

import numpy as np
import pytest

from src.meshgrade.config import Label, MESH_FORMAT_VERSION
from src.meshgrade.errors import (
    DanglingReferenceError, DuplicateIdError, ElementArityError, MeshFormatError,
    MeshValidationError
)
from src.meshgrade.mesh import (
    Element, LabelSet, Mesh, Node, export_obj, import_obj, load_raw_mesh, mesh_id_from_path,
    parse_mesh, read_mesh, serialize_mesh, validate_mesh, write_mesh
)
from src.meshgrade.mesh import validation
from tests.helpers import make_mesh

SQUARE_OBJ = """# unit square
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 1 2 3 4
"""


def _document(nodes, elements, labels=None, version=MESH_FORMAT_VERSION):
    document = {
        'format': version,
        'nodes': [{'id': i, 'xyz': list(xyz)} for i, xyz in nodes],
        'elements': [{'id': i, 'nodes': list(ids)} for i, ids in elements],
    }
    if labels is not None:
        document['labels'] = labels
    return json.dumps(document)


SQUARE_NODES = [(1, (0, 0, 0)), (2, (1, 0, 0)), (3, (1, 1, 0)), (4, (0, 1, 0))]


class TestMeshModel:
    def test_entries_are_sorted_by_id(self):
        mesh = Mesh((Node(3, (0, 1, 0)), Node(1, (0, 0, 0)), Node(2, (1, 0, 0))),
                    (Element(9, (1, 2, 3)), Element(4, (3, 2, 1))))
        assert [n.id for n in mesh.nodes] == [1, 2, 3]
        assert mesh.element_ids.tolist() == [4, 9]

    def test_connectivity_pads_triangles(self):
        mesh = make_mesh([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (2, 0, 0)],
                         [(1, 2, 3, 4), (2, 5, 3)])
        assert mesh.connectivity.tolist() == [[0, 1, 2, 3], [1, 4, 2, -1]]
        assert mesh.triangle_mask.tolist() == [False, True]
        assert mesh.element(2).is_triangle

    def test_element_edges_are_unordered_pairs(self):
        assert Element(1, (4, 2, 7)).edges() == [(2, 4), (2, 7), (4, 7)]

    def test_with_positions_keeps_topology(self, unit_square):
        moved = unit_square.with_positions(unit_square.coordinates * 2.0)
        assert moved.elements == unit_square.elements
        assert moved.coordinates[2].tolist() == [2.0, 2.0, 0.0]


class TestLabelSet:
    def test_from_rework_labels_every_element(self):
        labels = LabelSet.from_rework([1, 2, 3, 4], [2])
        assert labels[2] is Label.REWORK
        assert labels[4] is Label.PASSED
        assert labels.share() == pytest.approx(0.25)
        assert labels.rework_ids == frozenset({2})

    def test_as_array_follows_requested_order(self):
        labels = LabelSet.from_rework([1, 2, 3], [3])
        assert labels.as_array([3, 1, 2]).tolist() == [1, 0, 0]

    def test_covers(self, unit_square):
        assert LabelSet.uniform([1]).covers(unit_square)
        assert not LabelSet({}).covers(unit_square)

    def test_empty_share_is_zero(self):
        assert LabelSet({}).share() == 0.0


class TestCanonicalDocument:
    def test_roundtrip_keeps_mesh_and_labels(self, labelled_grid):
        mesh, labels = labelled_grid
        parsed, parsed_labels = parse_mesh(serialize_mesh(mesh, labels))
        assert parsed == mesh
        assert dict(parsed_labels.items()) == dict(labels.items())

    def test_labels_absent_yields_none(self, unit_square):
        _, labels = parse_mesh(serialize_mesh(unit_square))
        assert labels is None

    def test_serialization_is_deterministic(self, unit_square):
        shuffled = Mesh(tuple(reversed(unit_square.nodes)), unit_square.elements)
        assert serialize_mesh(shuffled) == serialize_mesh(unit_square)

    def test_one_entry_per_line(self, unit_square):
        lines = serialize_mesh(unit_square).splitlines()
        assert sum('"xyz"' in line for line in lines) == 4
        assert sum('"nodes": [1, 2, 3, 4]' in line for line in lines) == 1

    def test_dangling_reference(self):
        text = _document(SQUARE_NODES, [(1, (1, 2, 3, 9))])
        with pytest.raises(DanglingReferenceError):
            parse_mesh(text)

    def test_duplicate_node_id(self):
        text = _document(SQUARE_NODES + [(4, (5, 5, 0))], [(1, (1, 2, 3, 4))])
        with pytest.raises(DuplicateIdError):
            parse_mesh(text)

    def test_bad_arity(self):
        nodes = SQUARE_NODES + [(5, (0.5, 1.5, 0))]
        with pytest.raises(ElementArityError):
            parse_mesh(_document(nodes, [(1, (1, 2, 3, 5, 4))]))

    def test_duplicate_element_is_invalid(self):
        text = _document(SQUARE_NODES, [(1, (1, 2, 3, 4)), (2, (2, 3, 4, 1))])
        with pytest.raises(MeshValidationError) as info:
            parse_mesh(text)
        assert info.value.findings[0].code == validation.DUPLICATE_ELEMENT

    @pytest.mark.parametrize('text', [
        "not json at all",
        "[]",
        _document(SQUARE_NODES, [(1, (1, 2, 3, 4))], version="meshgrade/v0"),
        json.dumps({'format': MESH_FORMAT_VERSION, 'nodes': []}),
        _document(SQUARE_NODES, [(1, (1, 2, 3, 4))], labels={'1': 'maybe'}),
    ])
    def test_malformed_documents(self, text):
        with pytest.raises(MeshFormatError):
            parse_mesh(text)

    def test_raw_load_skips_validation(self):
        mesh, _ = load_raw_mesh(_document(SQUARE_NODES, [(1, (1, 2, 3, 9))]))
        codes = [f.code for f in validate_mesh(mesh)]
        assert codes == [validation.DANGLING_NODE_REFERENCE]

    def test_file_helpers(self, tmp_path, labelled_grid):
        mesh, labels = labelled_grid
        path = tmp_path / "nested" / "part_07.mesh.json"
        write_mesh(path, mesh, labels)
        parsed, parsed_labels = read_mesh(path)
        assert parsed == mesh
        assert parsed_labels.rework_ids == frozenset({5})
        assert mesh_id_from_path(path) == "part_07"
        assert mesh_id_from_path("shell.obj") == "shell"

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / "latin1.mesh.json"
        path.write_bytes('{"format": "café"}'.encode('latin-1'))
        with pytest.raises(MeshFormatError, match="not UTF-8"):
            read_mesh(path)


class TestValidation:
    def test_valid_mesh_has_no_findings(self, unit_square):
        assert validate_mesh(unit_square, LabelSet.uniform([1]), require_labels=True) == []

    def test_empty_mesh(self):
        assert [f.code for f in validate_mesh(Mesh((), ()))] == [validation.EMPTY_MESH]

    def test_label_findings(self, unit_square):
        findings = validate_mesh(unit_square, LabelSet({7: Label.REWORK}), require_labels=True)
        assert {f.code for f in findings} == {validation.UNKNOWN_LABEL_ELEMENT,
                                             validation.UNLABELLED_ELEMENT}

    def test_repeated_node_in_element(self):
        mesh = make_mesh([(0, 0, 0), (1, 0, 0), (1, 1, 0)], [(1, 2, 2)])
        assert validation.DUPLICATE_NODE_IN_ELEMENT in {f.code for f in validate_mesh(mesh)}

    def test_non_finite_position(self):
        mesh = make_mesh([(0, 0, 0), (1, 0, 0), (1, float('nan'), 0)], [(1, 2, 3)])
        assert validation.NON_FINITE_POSITION in {f.code for f in validate_mesh(mesh)}


class TestObj:
    def test_import_square(self):
        mesh = import_obj(SQUARE_OBJ)
        assert len(mesh) == 1
        assert mesh.elements[0].node_ids == (1, 2, 3, 4)
        assert mesh.node(3).position == (1.0, 1.0, 0.0)

    def test_import_reads_slash_records(self):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n"
        mesh = import_obj(text)
        assert mesh.elements[0].node_ids == (1, 2, 3)

    def test_pentagon_is_rejected(self):
        text = SQUARE_OBJ + "v 0.5 1.5 0\nf 1 2 3 5 4\n"
        with pytest.raises(ElementArityError):
            import_obj(text)

    def test_out_of_range_index(self):
        with pytest.raises(MeshFormatError):
            import_obj(SQUARE_OBJ + "f 1 2 7\n")

    def test_export_then_import_keeps_geometry(self, grid):
        mesh = grid(2, 3, surface='cylinder')
        again = import_obj(export_obj(mesh))
        np.testing.assert_allclose(again.coordinates, mesh.coordinates)
        assert again.connectivity.tolist() == mesh.connectivity.tolist()
