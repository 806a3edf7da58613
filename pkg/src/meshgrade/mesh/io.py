"""
Reading and writing meshes.

This module parses and serializes the canonical ``meshgrade/v1`` document
(structured JSON text with explicit ids) and converts Wavefront OBJ
documents holding triangle and quadrilateral faces.
"""
import json
import math
from pathlib import Path

from loguru import logger

from ..config import Label, MESH_FORMAT_VERSION
from ..errors import (
    DanglingReferenceError, DuplicateIdError, ElementArityError, MeshFormatError,
    MeshValidationError
)
from . import validation
from .model import Element, LabelSet, Mesh, Node

_FINDING_ERRORS = (
    (validation.ELEMENT_ARITY, ElementArityError),
    (validation.DUPLICATE_NODE_ID, DuplicateIdError),
    (validation.DUPLICATE_ELEMENT_ID, DuplicateIdError),
    (validation.DANGLING_NODE_REFERENCE, DanglingReferenceError),
)


def raise_for_findings(findings):
    """
    Raise the exception matching the most specific finding, if any.

    Args:
        findings (list): Output of ``validate_mesh``

    Raises:
        MeshFormatError: A subclass chosen from the finding codes.
    """
    if not findings:
        return
    for code, error_class in _FINDING_ERRORS:
        for finding in findings:
            if finding.code == code:
                raise error_class(str(finding))
    raise MeshValidationError(str(findings[0]), findings)


def _require_int(value, what):
    if isinstance(value, bool) or not isinstance(value, int):
        raise MeshFormatError(f"{what} must be an integer, got {value!r}")
    return value


def _require_list(value, what):
    if not isinstance(value, list):
        raise MeshFormatError(f"{what} must be a list")
    return value


def _parse_node(entry):
    if not isinstance(entry, dict) or 'id' not in entry or 'xyz' not in entry:
        raise MeshFormatError(f"node entry {entry!r} needs 'id' and 'xyz'")
    node_id = _require_int(entry['id'], "node id")
    xyz = _require_list(entry['xyz'], f"xyz of node {node_id}")
    if len(xyz) != 3 or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in xyz):
        raise MeshFormatError(f"xyz of node {node_id} must hold three numbers")
    return Node(node_id, tuple(float(c) for c in xyz))


def _parse_element(entry):
    if not isinstance(entry, dict) or 'id' not in entry or 'nodes' not in entry:
        raise MeshFormatError(f"element entry {entry!r} needs 'id' and 'nodes'")
    element_id = _require_int(entry['id'], "element id")
    node_ids = _require_list(entry['nodes'], f"nodes of element {element_id}")
    return Element(element_id, tuple(_require_int(n, f"node id in element {element_id}")
                                     for n in node_ids))


def _parse_labels(raw):
    if not isinstance(raw, dict):
        raise MeshFormatError("labels must be a mapping of element id to label")
    labels = {}
    for key, value in raw.items():
        try:
            element_id = int(key)
        except (TypeError, ValueError):
            raise MeshFormatError(f"label key {key!r} is not an element id") from None
        try:
            labels[element_id] = Label(value)
        except ValueError:
            raise MeshFormatError(f"label {value!r} of element {element_id} is not "
                                  f"'rework' or 'passed'") from None
    return LabelSet(labels)


def load_raw_mesh(text):
    """
    Parse a canonical document without checking mesh invariants.

    Args:
        text (str): Canonical mesh document

    Returns:
        tuple: (Mesh, LabelSet or None)

    Raises:
        MeshFormatError: If the document is not well-formed.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise MeshFormatError(f"not a structured mesh document: {error}") from None
    if not isinstance(document, dict):
        raise MeshFormatError("mesh document must be a mapping")
    version = document.get('format')
    if version != MESH_FORMAT_VERSION:
        raise MeshFormatError(f"unsupported mesh format {version!r}, expected {MESH_FORMAT_VERSION!r}")
    for key in ('nodes', 'elements'):
        if key not in document:
            raise MeshFormatError(f"mesh document lacks '{key}'")

    nodes = [_parse_node(entry) for entry in _require_list(document['nodes'], "nodes")]
    elements = [_parse_element(entry) for entry in _require_list(document['elements'], "elements")]
    labels = _parse_labels(document['labels']) if 'labels' in document else None
    return Mesh(tuple(nodes), tuple(elements)), labels


def parse_mesh(text):
    """
    Parse and validate a canonical mesh document.

    Args:
        text (str): Canonical mesh document

    Returns:
        tuple: (Mesh, LabelSet or None); labels are returned iff present.

    Raises:
        MeshFormatError: Or one of its subclasses for malformed documents,
                         dangling references, duplicate ids and bad arity.
    """
    mesh, labels = load_raw_mesh(text)
    raise_for_findings(validation.validate_mesh(mesh, labels))
    return mesh, labels


def serialize_mesh(mesh, labels=None):
    """
    Serialize a mesh (and labels) to the canonical document.

    Output is deterministic: entries are sorted by id, one per line.

    Args:
        mesh (Mesh): Valid mesh
        labels (LabelSet): Optional labels

    Returns:
        str: Canonical mesh document.
    """
    def block(entries):
        if not entries:
            return "[]"
        return "[\n" + ",\n".join(f"    {entry}" for entry in entries) + "\n  ]"

    nodes = [json.dumps({"id": n.id, "xyz": [float(c) for c in n.position]}) for n in mesh.nodes]
    elements = [json.dumps({"id": e.id, "nodes": list(e.node_ids)}) for e in mesh.elements]
    parts = [
        f'  "format": {json.dumps(MESH_FORMAT_VERSION)}',
        f'  "nodes": {block(nodes)}',
        f'  "elements": {block(elements)}',
    ]
    if labels is not None:
        entries = [f"{json.dumps(str(e))}: {json.dumps(label.value)}" for e, label in labels.items()]
        body = "{}" if not entries else "{\n" + ",\n".join(f"    {e}" for e in entries) + "\n  }"
        parts.append(f'  "labels": {body}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def import_obj(text):
    """
    Convert a Wavefront OBJ document into a mesh.

    Only ``v`` and ``f`` records are read; node and element ids are the
    1-based vertex and face positions, and vertex order becomes winding.

    Args:
        text (str): OBJ document

    Returns:
        Mesh: The imported mesh.

    Raises:
        ElementArityError: For faces with fewer than 3 or more than 4 vertices.
        MeshFormatError: For malformed records or negative/out-of-range indices.
    """
    positions = []
    faces = []
    skipped = 0
    for line_number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split('#', 1)[0].split()
        if not tokens:
            continue
        record, values = tokens[0], tokens[1:]
        if record == 'v':
            try:
                xyz = tuple(float(v) for v in values[:3])
            except ValueError:
                raise MeshFormatError(f"line {line_number}: bad vertex record") from None
            if len(xyz) != 3 or not all(math.isfinite(c) for c in xyz):
                raise MeshFormatError(f"line {line_number}: vertex needs three finite coordinates")
            positions.append(xyz)
        elif record == 'f':
            try:
                indices = [int(v.split('/')[0]) for v in values]
            except ValueError:
                raise MeshFormatError(f"line {line_number}: bad face record") from None
            if len(indices) not in (3, 4):
                raise ElementArityError(f"line {line_number}: face has {len(indices)} vertices, "
                                        f"only triangles and quadrilaterals are supported")
            faces.append((line_number, indices))
        else:
            skipped += 1

    for line_number, indices in faces:
        for index in indices:
            if index < 1 or index > len(positions):
                raise MeshFormatError(f"line {line_number}: vertex index {index} out of range "
                                      f"1..{len(positions)}")
    if skipped:
        logger.debug(f"OBJ import ignored {skipped} non-geometry records")

    nodes = tuple(Node(i + 1, xyz) for i, xyz in enumerate(positions))
    elements = tuple(Element(i + 1, tuple(indices)) for i, (_, indices) in enumerate(faces))
    mesh = Mesh(nodes, elements)
    raise_for_findings(validation.validate_mesh(mesh))
    return mesh


def export_obj(mesh):
    """
    Write a mesh as a Wavefront OBJ document.

    Nodes are renumbered 1..n in id order; element order is kept.

    Args:
        mesh (Mesh): Valid mesh

    Returns:
        str: OBJ document.
    """
    lines = [f"# {len(mesh.nodes)} vertices, {len(mesh.elements)} faces"]
    for node in mesh.nodes:
        lines.append("v " + " ".join(repr(float(c)) for c in node.position))
    for element in mesh.elements:
        lines.append("f " + " ".join(str(mesh.node_index[n] + 1) for n in element.node_ids))
    return "\n".join(lines) + "\n"


def read_mesh_text(path):
    """Contents of a mesh or table file; undecodable bytes raise MeshFormatError."""
    try:
        return Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError as error:
        raise MeshFormatError(f"{path} is not UTF-8 text: {error.reason} at byte {error.start}") from None


def read_mesh(path):
    """
    Read a canonical mesh file.

    Args:
        path (str or Path): File location

    Returns:
        tuple: (Mesh, LabelSet or None)
    """
    return parse_mesh(read_mesh_text(path))


def write_mesh(path, mesh, labels=None):
    """Write a canonical mesh file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_mesh(mesh, labels), encoding='utf-8')


def mesh_id_from_path(path):
    """Mesh identifier derived from a file name, e.g. ``part_07.mesh.json`` -> ``part_07``."""
    name = Path(path).name
    for suffix in ('.mesh.json', '.json', '.obj'):
        if name.endswith(suffix):
            return name[:-len(suffix)]
    return Path(path).stem
