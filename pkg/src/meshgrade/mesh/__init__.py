"""
Mesh data model and file formats.

This package provides the node/element/mesh types, the canonical document
reader and writer, OBJ conversion, and structural validation.
"""

from .model import Node, Element, Mesh, LabelSet, LabeledMesh
from .io import (
    parse_mesh, serialize_mesh, load_raw_mesh, import_obj, export_obj,
    read_mesh, read_mesh_text, write_mesh, mesh_id_from_path
)
from .validation import Finding, validate_mesh

__all__ = [
    'Node', 'Element', 'Mesh', 'LabelSet', 'LabeledMesh',
    'parse_mesh', 'serialize_mesh', 'load_raw_mesh', 'import_obj', 'export_obj',
    'read_mesh', 'read_mesh_text', 'write_mesh', 'mesh_id_from_path',
    'Finding', 'validate_mesh',
]
