"""
Rework classifiers.

Two from-scratch models share one interface: ``train_model`` builds the
kind named in a TrainConfig and every model answers ``predict_proba``.
"""

from ..config import ModelKind
from .common import apply_threshold, predict_rework
from .extratrees import DecisionTree, ExtraTreesModel, train_extratrees, predict_proba_trees
from .fnn import FnnModel, TrainingHistory, train_fnn, fnn_predict_proba, gradient_check
from .persistence import save_model, load_model, model_to_text, model_from_text


def train_model(data, config, layout=None):
    """
    Train the classifier selected by ``config.model``.

    Args:
        data (Dataset): Labelled training rows
        config (TrainConfig): Hyperparameters
        layout (FeatureLayout): Recorded in the model; defaults to the dataset's

    Returns:
        ExtraTreesModel or FnnModel: The trained model.
    """
    if config.model is ModelKind.FNN:
        return train_fnn(data, config, layout)
    return train_extratrees(data, config, layout)


__all__ = [
    'DecisionTree', 'ExtraTreesModel', 'FnnModel', 'TrainingHistory',
    'train_model', 'train_extratrees', 'train_fnn',
    'predict_proba_trees', 'fnn_predict_proba', 'gradient_check',
    'apply_threshold', 'predict_rework',
    'save_model', 'load_model', 'model_to_text', 'model_from_text',
]
