"""
Exceptions raised by the meshgrade toolkit.

Every exception carries a short stable ``code`` so the command-line
application can report failures as one machine-parsable line.
"""


class MeshgradeError(Exception):
    """Base class for all toolkit errors."""
    code = "error"


class ConfigError(MeshgradeError):
    """A configuration value is missing or out of range."""
    code = "config"


class MeshFormatError(MeshgradeError):
    """A mesh or OBJ document is malformed."""
    code = "mesh-format"


class DanglingReferenceError(MeshFormatError):
    """An element references a node id that does not exist."""
    code = "dangling-node-reference"


class DuplicateIdError(MeshFormatError):
    """Two nodes or two elements share an id."""
    code = "duplicate-id"


class ElementArityError(MeshFormatError):
    """An element or face has a node count other than 3 or 4."""
    code = "element-arity"


class MeshValidationError(MeshFormatError):
    """A parsed mesh violates a structural invariant."""
    code = "mesh-invalid"

    def __init__(self, message, findings=()):
        super().__init__(message)
        self.findings = tuple(findings)


class DegenerateGeometryError(MeshgradeError):
    """An element is too degenerate for a geometric measure."""
    code = "degenerate-geometry"

    def __init__(self, message, element_id=None):
        if element_id is not None:
            message = f"element {element_id}: {message}"
        super().__init__(message)
        self.element_id = element_id


class UnknownElementError(MeshgradeError, KeyError):
    """An element id is not a vertex of the neighbourhood graph."""
    code = "unknown-element"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UnlabelledElementError(MeshgradeError):
    """Ground truth is required but an element carries no label."""
    code = "unlabelled-element"


class DatasetError(MeshgradeError):
    """A dataset is empty or its rows are inconsistent."""
    code = "dataset"


class DimensionMismatchError(MeshgradeError, ValueError):
    """An input vector does not match the model's feature dimension."""
    code = "dimension-mismatch"


class TrainingDivergenceError(MeshgradeError):
    """The training loss became non-finite."""
    code = "training-divergence"

    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class ModelFormatError(MeshgradeError):
    """A model file is corrupted or inconsistent."""
    code = "model-format"


class ModelVersionError(ModelFormatError):
    """A model file carries an unsupported version tag."""
    code = "model-version"


class FoldAssignmentError(MeshgradeError):
    """Meshes cannot be split into the requested number of folds."""
    code = "fold-assignment"


class DefectPlacementError(MeshgradeError):
    """A synthetic defect could not be placed or did not take effect."""
    code = "defect-placement"
