"""
Mesh quality assessment package.

This package scores every element of a quad-dominant shell mesh for
rework: geometric quality properties per element, neighbourhood feature
vectors over the element adjacency graph, two classifiers trained on
expert labels, mesh-grouped crossvalidation, and a synthetic mesh
generator for benchmarks.
"""
from loguru import logger

from .config import Label, Property, Aggregator, K0Mode, ModelKind, TrainConfig
from .mesh import Mesh, LabelSet, LabeledMesh, parse_mesh, serialize_mesh
from .features import FeatureLayout, Dataset, build_dataset, featurize_mesh
from .models import train_model, save_model, load_model

logger.disable(__name__)

__all__ = [
    'Label', 'Property', 'Aggregator', 'K0Mode', 'ModelKind', 'TrainConfig',
    'Mesh', 'LabelSet', 'LabeledMesh', 'parse_mesh', 'serialize_mesh',
    'FeatureLayout', 'Dataset', 'build_dataset', 'featurize_mesh',
    'train_model', 'save_model', 'load_model',
]
