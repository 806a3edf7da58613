"""
Configuration for the meshgrade toolkit.

This module contains all the enums, constants, and default settings
for the pipeline, including file format tags, feature hyperparameters,
model defaults, and the colours used for per-element overlays.
"""
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
import math
from typing import Optional

import yaml

from .errors import ConfigError


class Label(Enum):
    """Defines the two element classes assigned by expert review."""
    REWORK = "rework"
    PASSED = "passed"


class ElementKind(Enum):
    """Defines the supported shell element shapes."""
    TRIANGLE = "triangle"
    QUADRILATERAL = "quadrilateral"


class Property(Enum):
    """Defines the low-level per-element properties, in table column order."""
    SKEWNESS = "skewness"
    ASPECT_RATIO = "aspect_ratio"
    WARPAGE = "warpage"
    AREA = "area"
    CURVATURE = "curvature"
    IS_TRIANGLE = "is_triangle"
    IS_BORDER = "is_border"


class Aggregator(Enum):
    """Defines the statistics used to summarise a frontier."""
    MIN = "min"
    MAX = "max"
    MEAN = "mean"


class K0Mode(Enum):
    """Defines how the singleton k = 0 slice enters the feature vector."""
    FULL = "full"                # (K+1)*m*n, every aggregator kept
    DEDUPLICATE = "deduplicate"  # k = 0 kept once per property
    DROP = "drop"                # k = 1..K only


class ModelKind(Enum):
    """Defines the available classifiers."""
    EXTRATREES = "extratrees"
    FNN = "fnn"


class Surface(Enum):
    """Defines the surfaces a synthetic grid can be mapped onto."""
    FLAT = "flat"
    CYLINDER = "cylinder"
    RIDGE = "ridge"


class DefectKind(Enum):
    """Defines the geometric defects injected into synthetic meshes."""
    SLIVER = "sliver"
    SKEWED = "skewed"
    WARPED = "warped"
    SHRUNK = "shrunk"
    TRIANGULATED = "triangulated"


class Outcome(Enum):
    """Defines the agreement categories between prediction and ground truth."""
    TP = 0
    TN = 1
    FP = 2
    FN = 3


# File formats
MESH_FORMAT_VERSION = "meshgrade/v1"
MODEL_FORMAT_VERSION = "meshgrade-model/v1"
MANIFEST_FORMAT_VERSION = "meshgrade-bench/v1"
REPORT_FORMAT_VERSION = "meshgrade-report/v1"

PROPERTY_NAMES = tuple(p.value for p in Property)
PROPERTY_TABLE_HEADER = ("element_id",) + PROPERTY_NAMES
PREDICTION_HEADER = ("mesh_id", "element_id", "probability", "ground_truth")
PR_CURVE_HEADER = ("threshold", "precision", "recall")

# Geometry
DEGENERACY_TOLERANCE = 1e-12   # relative to (max edge length)^2
TIE_TOLERANCE = 1e-9           # relative area tolerance between rectangle candidates

# Feature tensor
DEFAULT_K = 4
DEFAULT_PROPERTIES = tuple(Property)
DEFAULT_AGGREGATORS = (Aggregator.MIN, Aggregator.MAX, Aggregator.MEAN)
EMPTY_FRONTIER_FILL = 0.0

# ExtraTrees defaults
DEFAULT_N_TREES = 100
DEFAULT_MIN_SAMPLES_SPLIT = 2

# FNN defaults
FNN_HIDDEN_LAYERS = (64, 128, 16)
FNN_BATCHNORM_LAYERS = (0, 1)  # after the first and second hidden layer
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BATCH_SIZE = 256
DEFAULT_MAX_EPOCHS = 50
DEFAULT_PATIENCE = 5
DEFAULT_VALIDATION_FRACTION = 0.1
BATCHNORM_EPSILON = 1e-5
BATCHNORM_MOMENTUM = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
GRADIENT_CHECK_EPSILON = 1e-5
GRADIENT_CHECK_FLOOR = 1e-6

# Evaluation
DEFAULT_THRESHOLD = 0.5
DEFAULT_FOLDS = 10
DEFAULT_SEED = 0
REPORT_THRESHOLDS = (0.25, 0.50, 0.75)
PR_GRID_SIZE = 101

# Synthetic meshes
DEFAULT_SPACING = 1.0
DEFAULT_DILATION_RADIUS = 1
DEFECT_RETRY_CAP = 100
DEFECT_ESCALATION_STEPS = 8
BENCH_MESH_COUNT = 60
BENCH_GRID_RANGE = (5, 30)     # rows and cols drawn from this range, 25..900 elements
BENCH_REWORK_SHARE = 0.03
DEFAULT_SEVERITY = {
    DefectKind.SLIVER: 2.0,        # aspect-ratio increment
    DefectKind.SKEWED: 35.0,       # degrees
    DefectKind.WARPED: 25.0,       # degrees
    DefectKind.SHRUNK: 0.6,        # fraction of area removed
    DefectKind.TRIANGULATED: 1.0,  # unused
}

# Overlay rendering
OVERLAY_SIZE = (800, 600)
OVERLAY_MARGIN = 20
BACKGROUND = (255, 255, 255)
EDGE_COLOR = (60, 60, 60)

OUTCOME_COLORS = {
    Outcome.TP: (40, 90, 200),     # Blue, correctly flagged for rework
    Outcome.TN: (190, 190, 190),   # Grey, correctly passed
    Outcome.FP: (245, 150, 40),    # Orange, flagged but passed review
    Outcome.FN: (210, 30, 30),     # Red, missed rework
}
PROBABILITY_COLORS = {
    'low': (255, 255, 255),
    'high': (40, 90, 200),
}


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters shared by both trainers.

    Attributes that only concern one model kind are ignored by the other.
    ``max_features`` of ``None`` means round(sqrt(D)) at training time.
    """
    model: ModelKind = ModelKind.EXTRATREES
    seed: int = DEFAULT_SEED
    n_trees: int = DEFAULT_N_TREES
    max_features: Optional[int] = None
    min_samples_split: int = DEFAULT_MIN_SAMPLES_SPLIT
    n_jobs: int = 1
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    max_epochs: int = DEFAULT_MAX_EPOCHS
    patience: int = DEFAULT_PATIENCE
    validation_fraction: float = DEFAULT_VALIDATION_FRACTION
    hidden_layers: tuple = field(default=FNN_HIDDEN_LAYERS)

    def validate(self):
        """
        Check every hyperparameter against its documented range.

        Returns:
            TrainConfig: The same instance, for chaining.

        Raises:
            ConfigError: If any value is out of range.
        """
        counts = {
            'n_trees': self.n_trees,
            'min_samples_split': self.min_samples_split,
            'n_jobs': self.n_jobs,
            'batch_size': self.batch_size,
            'max_epochs': self.max_epochs,
            'patience': self.patience,
        }
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError(f"max_features must be positive, got {self.max_features!r}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ConfigError(
                f"validation_fraction must lie in [0, 0.5], got {self.validation_fraction!r}")
        if not self.hidden_layers or any(int(h) < 1 for h in self.hidden_layers):
            raise ConfigError(f"hidden_layers must be positive sizes, got {self.hidden_layers!r}")
        return self

    def features_per_split(self, n_features):
        """Number of attributes drawn at each tree node for ``n_features`` inputs."""
        if self.max_features is not None:
            return min(self.max_features, n_features)
        return max(1, min(n_features, int(round(math.sqrt(n_features)))))

    def to_dict(self):
        """Plain-data view used for report echoes and model files."""
        data = asdict(self)
        data['model'] = self.model.value
        data['hidden_layers'] = list(self.hidden_layers)
        return data

    @classmethod
    def from_mapping(cls, mapping):
        """
        Build a config from a plain mapping, ignoring unknown keys.

        Args:
            mapping (dict): Keys named like the dataclass fields.

        Returns:
            TrainConfig: The validated config.
        """
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in mapping.items() if k in known and v is not None}
        if 'model' in values and not isinstance(values['model'], ModelKind):
            try:
                values['model'] = ModelKind(values['model'])
            except ValueError:
                raise ConfigError(f"unknown model kind {values['model']!r}") from None
        if 'hidden_layers' in values:
            values['hidden_layers'] = tuple(int(h) for h in values['hidden_layers'])
        return cls(**values).validate()


def load_config_file(path):
    """
    Load a YAML config file whose keys match the CLI flag names.

    Args:
        path (str or Path): Location of the YAML document.

    Returns:
        dict: Flag name to value, with dashes normalised to underscores.

    Raises:
        ConfigError: If the document is not a mapping.
    """
    try:
        with open(path, encoding='utf-8') as handle:
            data = yaml.safe_load(handle) or {}
    except UnicodeDecodeError:
        raise ConfigError(f"config file {path} is not UTF-8 text") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return {str(key).replace('-', '_'): value for key, value in data.items()}
