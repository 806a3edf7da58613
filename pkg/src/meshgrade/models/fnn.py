"""
Feedforward neural network classifier.

A fully connected network with ReLU hidden layers (64/128/16 by default),
batch normalisation on the outputs of the first and second hidden layer,
and one sigmoid output unit giving the probability of rework. Training
minimises binary cross-entropy with mini-batch Adam; the parameters of the
epoch with the best validation loss are kept.

Everything is plain numpy in double precision, including the backward
pass, which ``gradient_check`` verifies against central differences.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from loguru import logger
from scipy.special import expit

from ..config import (
    ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, BATCHNORM_EPSILON, BATCHNORM_MOMENTUM,
    FNN_BATCHNORM_LAYERS, GRADIENT_CHECK_EPSILON, GRADIENT_CHECK_FLOOR
)
from ..errors import ModelFormatError, TrainingDivergenceError
from .common import as_matrix, training_arrays

_PROBABILITY_FLOOR = np.finfo(float).eps / 2


@dataclass
class TrainingHistory:
    """Loss per epoch on the training and validation rows."""
    train_loss: list = field(default_factory=list)
    validation_loss: list = field(default_factory=list)
    best_epoch: int = 0


@dataclass(frozen=True, eq=False)
class FnnModel:
    """
    Network parameters and inference state.

    ``params`` holds the trainable arrays ``W{l}``, ``b{l}`` for every layer
    and ``gamma{l}``, ``beta{l}`` for batch-normalised hidden layers;
    ``state`` holds their running ``mean{l}`` and ``var{l}``. Inputs are
    standardised with ``input_mean`` and ``input_scale`` before layer 0.
    """
    params: dict
    state: dict
    hidden_layers: tuple
    bn_layers: tuple
    input_mean: np.ndarray
    input_scale: np.ndarray
    bn_epsilon: float = BATCHNORM_EPSILON
    history: TrainingHistory = field(default_factory=TrainingHistory)
    layout: Optional[object] = None

    def __post_init__(self):
        sizes = self.architecture
        for layer in range(len(sizes) - 1):
            weight = self.params.get(f"W{layer}")
            bias = self.params.get(f"b{layer}")
            if weight is None or bias is None or weight.shape != (sizes[layer], sizes[layer + 1]) \
                    or bias.shape != (sizes[layer + 1],):
                raise ModelFormatError(f"layer {layer} does not map {sizes[layer]} -> {sizes[layer + 1]}")
        for layer in self.bn_layers:
            width = sizes[layer + 1]
            for name, store in (('gamma', self.params), ('beta', self.params),
                                ('mean', self.state), ('var', self.state)):
                array = store.get(f"{name}{layer}")
                if array is None or array.shape != (width,):
                    raise ModelFormatError(f"batch normalisation {name}{layer} must have {width} entries")
            if np.any(self.state[f"var{layer}"] <= 0):
                raise ModelFormatError(f"running variance of layer {layer} must be positive")
        if self.input_mean.shape != (sizes[0],) or self.input_scale.shape != (sizes[0],):
            raise ModelFormatError("input standardisation does not match the input dimension")

    @property
    def n_features(self):
        return self.input_mean.shape[0]

    @property
    def architecture(self):
        """Layer widths from input to output, e.g. (D, 64, 128, 16, 1)."""
        return (int(self.input_mean.shape[0]),) + tuple(self.hidden_layers) + (1,)

    @classmethod
    def create(cls, n_features, hidden_layers, rng, bn_layers=None,
               input_mean=None, input_scale=None):
        """
        Freshly initialised network (He initialisation for ReLU layers).

        Args:
            n_features (int): Input dimension D
            hidden_layers (tuple): Hidden layer widths
            rng (np.random.Generator): Random stream
            bn_layers (tuple): Hidden layers followed by batch normalisation;
                               defaults to the first and second
            input_mean (np.ndarray): Standardisation offset, default 0
            input_scale (np.ndarray): Standardisation scale, default 1

        Returns:
            FnnModel: Untrained model.
        """
        hidden_layers = tuple(int(h) for h in hidden_layers)
        if bn_layers is None:
            bn_layers = tuple(l for l in FNN_BATCHNORM_LAYERS if l < len(hidden_layers))
        sizes = (n_features,) + hidden_layers + (1,)
        params, state = {}, {}
        for layer in range(len(sizes) - 1):
            fan_in, fan_out = sizes[layer], sizes[layer + 1]
            gain = 2.0 if layer < len(hidden_layers) else 1.0
            params[f"W{layer}"] = rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out))
            params[f"b{layer}"] = np.zeros(fan_out)
        for layer in bn_layers:
            width = sizes[layer + 1]
            params[f"gamma{layer}"] = np.ones(width)
            params[f"beta{layer}"] = np.zeros(width)
            state[f"mean{layer}"] = np.zeros(width)
            state[f"var{layer}"] = np.ones(width)
        return cls(
            params=params,
            state=state,
            hidden_layers=hidden_layers,
            bn_layers=tuple(bn_layers),
            input_mean=np.zeros(n_features) if input_mean is None else np.asarray(input_mean, float),
            input_scale=np.ones(n_features) if input_scale is None else np.asarray(input_scale, float),
        )

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return FnnModel(**values)

    def predict_proba(self, X):
        """Probability of rework in (0, 1); a float for a single vector."""
        matrix, single = as_matrix(X, self.n_features)
        logits, _ = forward(self.params, self.state, self, matrix, training=False)
        probabilities = np.clip(expit(logits), _PROBABILITY_FLOOR, 1.0 - _PROBABILITY_FLOOR)
        return float(probabilities[0]) if single else probabilities


def forward(params, state, model, X, training=False, momentum=None):
    """
    Forward pass.

    Args:
        params (dict): Trainable arrays
        state (dict): Running batch-normalisation statistics; updated in place
                      when ``training`` and ``momentum`` is given
        model (FnnModel): Supplies architecture and input standardisation
        X (np.ndarray): (N, D) raw features
        training (bool): Use batch statistics in batch normalisation
        momentum (float): Running-statistics momentum, or None to leave them

    Returns:
        tuple: (logits of shape (N,), cache for ``backward``)
    """
    h = (X - model.input_mean) / model.input_scale
    cache = []
    for layer in range(len(model.hidden_layers)):
        z = h @ params[f"W{layer}"] + params[f"b{layer}"]
        a = np.maximum(z, 0.0)
        entry = {'input': h, 'z': z}
        if layer in model.bn_layers:
            if training:
                mean, var = a.mean(axis=0), a.var(axis=0)
                if momentum is not None:
                    state[f"mean{layer}"] = momentum * state[f"mean{layer}"] + (1 - momentum) * mean
                    state[f"var{layer}"] = momentum * state[f"var{layer}"] + (1 - momentum) * var
            else:
                mean, var = state[f"mean{layer}"], state[f"var{layer}"]
            std = np.sqrt(var + model.bn_epsilon)
            xhat = (a - mean) / std
            entry.update(xhat=xhat, std=std)
            h = params[f"gamma{layer}"] * xhat + params[f"beta{layer}"]
        else:
            h = a
        cache.append(entry)
    out = len(model.hidden_layers)
    logits = (h @ params[f"W{out}"] + params[f"b{out}"]).ravel()
    cache.append({'input': h})
    return logits, cache


def bce_loss(logits, y):
    """Mean binary cross-entropy computed from logits."""
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def backward(params, model, cache, logits, y, training=False):
    """
    Gradients of the mean binary cross-entropy with respect to ``params``.

    Args:
        params (dict): Trainable arrays used in the forward pass
        model (FnnModel): Architecture
        cache (list): Output of ``forward``
        logits (np.ndarray): Output of ``forward``
        y (np.ndarray): 0/1 targets
        training (bool): Whether batch statistics were used

    Returns:
        dict: Gradient array per parameter name.
    """
    n = len(y)
    grads = {}
    out = len(model.hidden_layers)
    delta = ((expit(logits) - y) / n)[:, None]
    grads[f"W{out}"] = cache[out]['input'].T @ delta
    grads[f"b{out}"] = delta.sum(axis=0)
    upstream = delta @ params[f"W{out}"].T
    for layer in reversed(range(out)):
        entry = cache[layer]
        if layer in model.bn_layers:
            xhat, std = entry['xhat'], entry['std']
            grads[f"gamma{layer}"] = (upstream * xhat).sum(axis=0)
            grads[f"beta{layer}"] = upstream.sum(axis=0)
            dxhat = upstream * params[f"gamma{layer}"]
            if training:
                upstream = (n * dxhat - dxhat.sum(axis=0)
                            - xhat * (dxhat * xhat).sum(axis=0)) / (n * std)
            else:
                upstream = dxhat / std
        dz = upstream * (entry['z'] > 0)
        grads[f"W{layer}"] = entry['input'].T @ dz
        grads[f"b{layer}"] = dz.sum(axis=0)
        upstream = dz @ params[f"W{layer}"].T
    return grads


def loss_and_gradients(model, X, y, training=False):
    """Loss and gradients at the model's current parameters (no state updates)."""
    logits, cache = forward(model.params, model.state, model, X, training=training)
    return bce_loss(logits, y), backward(model.params, model, cache, logits, y, training)


def gradient_check(model, sample, epsilon=GRADIENT_CHECK_EPSILON, training=False,
                   floor=GRADIENT_CHECK_FLOOR):
    """
    Compare analytic gradients with central finite differences.

    Args:
        model (FnnModel): Network to check
        sample (tuple): (x, label) for one row, or (X, y) for a batch
        epsilon (float): Finite-difference step
        training (bool): Check the training-mode pass (needs a batch of >= 2)
        floor (float): Lower bound of the relative-error denominator

    Returns:
        float: Max over parameters of |a - n| / max(|a| + |n|, floor).
    """
    x, label = sample
    X, _ = as_matrix(x, model.n_features)
    y = np.atleast_1d(np.asarray(label, dtype=float))
    _, analytic = loss_and_gradients(model, X, y, training)

    worst = 0.0
    for name, values in model.params.items():
        numeric = np.zeros_like(values)
        flat, flat_numeric = values.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            plus = bce_loss(forward(model.params, model.state, model, X, training)[0], y)
            flat[i] = original - epsilon
            minus = bce_loss(forward(model.params, model.state, model, X, training)[0], y)
            flat[i] = original
            flat_numeric[i] = (plus - minus) / (2 * epsilon)
        error = np.abs(analytic[name] - numeric) / np.maximum(np.abs(analytic[name]) + np.abs(numeric), floor)
        worst = max(worst, float(error.max(initial=0.0)))
    return worst


class _Adam:
    """Adam optimiser state over a parameter dict."""

    def __init__(self, params, learning_rate):
        self.learning_rate = learning_rate
        self.step = 0
        self.m = {name: np.zeros_like(v) for name, v in params.items()}
        self.v = {name: np.zeros_like(v) for name, v in params.items()}

    def update(self, params, grads):
        self.step += 1
        correction1 = 1 - ADAM_BETA1 ** self.step
        correction2 = 1 - ADAM_BETA2 ** self.step
        for name, grad in grads.items():
            self.m[name] = ADAM_BETA1 * self.m[name] + (1 - ADAM_BETA1) * grad
            self.v[name] = ADAM_BETA2 * self.v[name] + (1 - ADAM_BETA2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)


def _copy(arrays):
    return {name: value.copy() for name, value in arrays.items()}


def train_fnn(data, config, layout=None):
    """
    Train the network with mini-batch Adam and early stopping.

    A seeded ``validation_fraction`` of the rows is held out; training stops
    after ``patience`` epochs without a lower validation loss and returns the
    best epoch's parameters. Without validation rows the training loss is
    used instead.

    Args:
        data (Dataset): Labelled training rows
        config (TrainConfig): Hyperparameters
        layout (FeatureLayout): Recorded in the model; defaults to the dataset's

    Returns:
        FnnModel: The trained network, with its TrainingHistory.

    Raises:
        DatasetError: For empty or unlabelled data.
        TrainingDivergenceError: If a loss becomes non-finite.
    """
    X, y = training_arrays(data)
    y = y.astype(float)
    rng = np.random.default_rng(config.seed)

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale <= 0] = 1.0

    order = rng.permutation(len(y))
    n_validation = int(round(config.validation_fraction * len(y)))
    if n_validation < 1 or len(y) - n_validation < 1:
        n_validation = 0
    validation_rows, train_rows = order[:n_validation], order[n_validation:]

    model = FnnModel.create(X.shape[1], config.hidden_layers, rng, input_mean=mean, input_scale=scale)
    params, state = _copy(model.params), _copy(model.state)
    optimiser = _Adam(params, config.learning_rate)
    history = TrainingHistory()
    best = (np.inf, _copy(params), _copy(state))
    waited = 0

    for epoch in range(1, config.max_epochs + 1):
        shuffled = rng.permutation(train_rows)
        for start in range(0, len(shuffled), config.batch_size):
            batch = shuffled[start:start + config.batch_size]
            logits, cache = forward(params, state, model, X[batch], training=True,
                                    momentum=BATCHNORM_MOMENTUM)
            if not np.all(np.isfinite(logits)):
                raise TrainingDivergenceError("non-finite network output", epoch)
            optimiser.update(params, backward(params, model, cache, logits, y[batch], training=True))

        train_loss = bce_loss(forward(params, state, model, X[train_rows])[0], y[train_rows])
        history.train_loss.append(train_loss)
        if n_validation:
            monitored = bce_loss(forward(params, state, model, X[validation_rows])[0], y[validation_rows])
            history.validation_loss.append(monitored)
        else:
            monitored = train_loss
        if not np.isfinite(monitored) or not np.isfinite(train_loss):
            raise TrainingDivergenceError("non-finite loss", epoch)
        logger.debug(f"epoch {epoch}: train loss {train_loss:.5f}, monitored {monitored:.5f}")

        if monitored < best[0]:
            best = (monitored, _copy(params), _copy(state))
            history.best_epoch = epoch
            waited = 0
        else:
            waited += 1
            if waited >= config.patience:
                break

    return model.replace(params=best[1], state=best[2], history=history,
                         layout=layout if layout is not None else getattr(data, 'layout', None))


def fnn_predict_proba(model, x):
    """
    Inference-mode probability of rework.

    Args:
        model (FnnModel): Trained network
        x (array-like): One feature vector or a batch

    Returns:
        float or np.ndarray: Probabilities strictly inside (0, 1).

    Raises:
        DimensionMismatchError: If x does not have length D.
    """
    return model.predict_proba(x)
