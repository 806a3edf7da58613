"""
Structural validation of meshes and label sets.

Findings are returned as data. Each one names the violated invariant by a
stable code and the offending node or element id.
"""
from collections import Counter
from dataclasses import dataclass
import math
from typing import Optional

# Finding codes
EMPTY_MESH = "empty-mesh"
INVALID_ID = "invalid-id"
DUPLICATE_NODE_ID = "duplicate-node-id"
DUPLICATE_ELEMENT_ID = "duplicate-element-id"
NON_FINITE_POSITION = "non-finite-position"
ELEMENT_ARITY = "element-arity"
DUPLICATE_NODE_IN_ELEMENT = "duplicate-node-in-element"
DANGLING_NODE_REFERENCE = "dangling-node-reference"
DUPLICATE_ELEMENT = "duplicate-element"
UNKNOWN_LABEL_ELEMENT = "unknown-label-element"
UNLABELLED_ELEMENT = "unlabelled-element"


@dataclass(frozen=True)
class Finding:
    """One violated invariant."""
    code: str
    message: str
    subject_id: Optional[int] = None

    def __str__(self):
        subject = f" [{self.subject_id}]" if self.subject_id is not None else ""
        return f"{self.code}{subject}: {self.message}"


def _is_positive_int(value):
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def validate_mesh(mesh, labels=None, require_labels=False):
    """
    Check every structural invariant of a mesh and, optionally, its labels.

    Args:
        mesh (Mesh): Raw mesh, possibly violating invariants
        labels (LabelSet): Optional labels to check against the mesh
        require_labels (bool): Whether every element must carry a label

    Returns:
        list: Finding records, empty iff all invariants hold.
    """
    findings = []

    if not mesh.elements:
        findings.append(Finding(EMPTY_MESH, "mesh has no elements"))

    node_counts = Counter(node.id for node in mesh.nodes)
    for node in mesh.nodes:
        if not _is_positive_int(node.id):
            findings.append(Finding(INVALID_ID, "node id must be a positive integer", node.id))
        if len(node.position) != 3 or not all(math.isfinite(c) for c in node.position):
            findings.append(Finding(NON_FINITE_POSITION,
                                    f"position {node.position} is not a finite 3-vector", node.id))
    for node_id, count in sorted(node_counts.items(), key=lambda item: str(item[0])):
        if count > 1:
            findings.append(Finding(DUPLICATE_NODE_ID, f"node id used {count} times", node_id))

    known_nodes = set(node_counts)
    element_counts = Counter(element.id for element in mesh.elements)
    seen_sets = {}
    for element in mesh.elements:
        if not _is_positive_int(element.id):
            findings.append(Finding(INVALID_ID, "element id must be a positive integer", element.id))
        arity = len(element.node_ids)
        if arity not in (3, 4):
            findings.append(Finding(ELEMENT_ARITY, f"element has {arity} nodes", element.id))
        if len(set(element.node_ids)) != arity:
            findings.append(Finding(DUPLICATE_NODE_IN_ELEMENT,
                                    f"node ids {list(element.node_ids)} repeat", element.id))
        for node_id in element.node_ids:
            if node_id not in known_nodes:
                findings.append(Finding(DANGLING_NODE_REFERENCE,
                                        f"references missing node {node_id}", element.id))
        node_set = frozenset(element.node_ids)
        if node_set in seen_sets:
            findings.append(Finding(DUPLICATE_ELEMENT,
                                    f"same nodes as element {seen_sets[node_set]}", element.id))
        else:
            seen_sets[node_set] = element.id
    for element_id, count in sorted(element_counts.items(), key=lambda item: str(item[0])):
        if count > 1:
            findings.append(Finding(DUPLICATE_ELEMENT_ID, f"element id used {count} times", element_id))

    if labels is not None:
        known_elements = set(element_counts)
        for element_id in labels.labels:
            if element_id not in known_elements:
                findings.append(Finding(UNKNOWN_LABEL_ELEMENT,
                                        "label refers to a missing element", element_id))
        if require_labels:
            for element in mesh.elements:
                if element.id not in labels:
                    findings.append(Finding(UNLABELLED_ELEMENT, "element has no label", element.id))

    return findings
