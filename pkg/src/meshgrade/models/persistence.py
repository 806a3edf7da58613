"""
Model files.

A model file is a JSON document with sorted keys:

    {
      "format": "meshgrade-model/v1",
      "kind": "extratrees" | "fnn",
      "n_features": D,
      "hyperparameters": {...},
      "layout": {...} or null,
      "payload": {...},
      "checksum": sha256 of the canonical payload text
    }

Arrays are stored as ``{"dtype": "<f8" | "<i8", "shape": [...], "data": base64}``
in little-endian byte order, so floats round-trip exactly and two saves of
the same model are byte-identical.
"""
import base64
import binascii
import hashlib
import json
from pathlib import Path

import numpy as np
from loguru import logger

from ..config import MODEL_FORMAT_VERSION, ModelKind
from ..errors import MeshgradeError, ModelFormatError, ModelVersionError
from ..features import FeatureLayout
from .extratrees import DecisionTree, ExtraTreesModel
from .fnn import FnnModel, TrainingHistory

_DTYPES = {'f': '<f8', 'i': '<i8', 'u': '<i8', 'b': '<i8'}


def _encode_array(array):
    array = np.asarray(array)
    dtype = _DTYPES[array.dtype.kind]
    data = np.ascontiguousarray(array, dtype=dtype).tobytes()
    return {'dtype': dtype, 'shape': list(array.shape), 'data': base64.b64encode(data).decode('ascii')}


def _decode_array(entry):
    try:
        dtype = entry['dtype']
        if dtype not in ('<f8', '<i8'):
            raise ModelFormatError(f"unsupported array dtype {dtype!r}")
        raw = base64.b64decode(entry['data'], validate=True)
        native = np.float64 if dtype == '<f8' else np.int64
        return np.frombuffer(raw, dtype=dtype).reshape(entry['shape']).astype(native)
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise ModelFormatError(f"malformed array entry: {exc}") from None


def _tree_payload(model):
    return {
        'n_trees': model.n_trees,
        'max_features': model.max_features,
        'min_samples_split': model.min_samples_split,
        'seed': model.seed,
        'trees': [
            {
                'feature': _encode_array(tree.feature),
                'threshold': _encode_array(tree.threshold),
                'left': _encode_array(tree.left),
                'right': _encode_array(tree.right),
                'counts': _encode_array(tree.counts),
            }
            for tree in model.trees
        ],
    }


def _fnn_payload(model):
    return {
        'hidden_layers': list(model.hidden_layers),
        'bn_layers': list(model.bn_layers),
        'bn_epsilon': model.bn_epsilon,
        'input_mean': _encode_array(model.input_mean),
        'input_scale': _encode_array(model.input_scale),
        'params': {name: _encode_array(value) for name, value in model.params.items()},
        'state': {name: _encode_array(value) for name, value in model.state.items()},
        'history': {
            'train_loss': list(model.history.train_loss),
            'validation_loss': list(model.history.validation_loss),
            'best_epoch': model.history.best_epoch,
        },
    }


def _checksum(payload):
    text = json.dumps(payload, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def model_to_text(model):
    """
    Serialise a trained model to its JSON document.

    Args:
        model (ExtraTreesModel or FnnModel): Model to store

    Returns:
        str: The document, newline-terminated.
    """
    if isinstance(model, ExtraTreesModel):
        kind, payload = ModelKind.EXTRATREES, _tree_payload(model)
        hyperparameters = {'n_trees': model.n_trees, 'max_features': model.max_features,
                           'min_samples_split': model.min_samples_split, 'seed': model.seed}
    elif isinstance(model, FnnModel):
        kind, payload = ModelKind.FNN, _fnn_payload(model)
        hyperparameters = {'hidden_layers': list(model.hidden_layers),
                           'bn_layers': list(model.bn_layers), 'bn_epsilon': model.bn_epsilon}
    else:
        raise ModelFormatError(f"cannot serialise {type(model).__name__}")

    layout = model.layout.to_dict() if model.layout is not None else None
    document = {
        'format': MODEL_FORMAT_VERSION,
        'kind': kind.value,
        'n_features': int(model.n_features),
        'hyperparameters': hyperparameters,
        'layout': layout,
        'payload': payload,
        'checksum': _checksum(payload),
    }
    return json.dumps(document, sort_keys=True, indent=1) + "\n"


def _tree_model(document, payload, layout):
    trees = tuple(
        DecisionTree(
            feature=_decode_array(entry['feature']),
            threshold=_decode_array(entry['threshold']),
            left=_decode_array(entry['left']),
            right=_decode_array(entry['right']),
            counts=_decode_array(entry['counts']),
        )
        for entry in payload['trees']
    )
    return ExtraTreesModel(
        trees=trees,
        n_features=int(document['n_features']),
        n_trees=int(payload['n_trees']),
        max_features=int(payload['max_features']),
        min_samples_split=int(payload['min_samples_split']),
        seed=int(payload['seed']),
        layout=layout,
    )


def _fnn_model(document, payload, layout):
    history = payload.get('history') or {}
    model = FnnModel(
        params={name: _decode_array(entry) for name, entry in payload['params'].items()},
        state={name: _decode_array(entry) for name, entry in payload['state'].items()},
        hidden_layers=tuple(int(h) for h in payload['hidden_layers']),
        bn_layers=tuple(int(l) for l in payload['bn_layers']),
        input_mean=_decode_array(payload['input_mean']),
        input_scale=_decode_array(payload['input_scale']),
        bn_epsilon=float(payload['bn_epsilon']),
        history=TrainingHistory(list(history.get('train_loss', [])),
                                list(history.get('validation_loss', [])),
                                int(history.get('best_epoch', 0))),
        layout=layout,
    )
    if model.n_features != int(document['n_features']):
        raise ModelFormatError(
            f"document declares D = {document['n_features']} but the network expects {model.n_features}")
    return model


def model_from_text(text):
    """
    Rebuild a model from its JSON document.

    Args:
        text (str): Output of ``model_to_text``

    Returns:
        ExtraTreesModel or FnnModel: The stored model.

    Raises:
        ModelVersionError: For a missing or unknown format tag.
        ModelFormatError: For corrupted or inconsistent content.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = document.get('format')
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format {version!r}, expected {MODEL_FORMAT_VERSION!r}")

    try:
        payload = document['payload']
        if _checksum(payload) != document['checksum']:
            raise ModelFormatError("checksum mismatch, the model payload is corrupted")
        kind = ModelKind(document['kind'])
        layout = FeatureLayout.from_dict(document['layout']) if document.get('layout') else None
        if layout is not None and layout.dimension != int(document['n_features']):
            raise ModelFormatError(
                f"layout yields {layout.dimension} features but the model expects {document['n_features']}")
        if kind is ModelKind.EXTRATREES:
            return _tree_model(document, payload, layout)
        return _fnn_model(document, payload, layout)
    except MeshgradeError as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(str(exc)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc!r}") from None


def save_model(model, location):
    """
    Write a model file.

    Args:
        model (ExtraTreesModel or FnnModel): Model to store
        location (str or Path): Target file; parent directories are created
    """
    path = Path(location)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model_to_text(model), encoding='utf-8')
    logger.info(f"saved {type(model).__name__} to {path}")


def load_model(location):
    """
    Read a model file written by ``save_model``.

    Args:
        location (str or Path): Model file

    Returns:
        ExtraTreesModel or FnnModel: The stored model.
    """
    try:
        text = Path(location).read_text(encoding='utf-8')
    except UnicodeDecodeError:
        raise ModelFormatError(f"{location} is not a UTF-8 model file") from None
    return model_from_text(text)
