"""Online hinge-loss learners over a learnable Fourier feature map.

Three update modes share one state type:

``W_ONLY``  update the weight rows only (the fixed-map baseline learner);
``WU``      additionally descend the frequency matrix on positive loss;
``WUB``     additionally descend the phase vector as well.

The online protocol is strictly per-instance: predict, observe the label,
and update only when the hinge loss is positive.  All gradients are taken
at the pre-update parameter snapshot, then every parameter steps at once.
Weight updates are plain subgradient steps; there is no regularization,
averaging, or step-size schedule.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .data import Dataset, Instance, to_csr
from .features import (
    FeatureMap,
    MapVariant,
    VARIANT_CODES,
    output_width,
    project,
    transform,
)

__all__ = [
    "UpdateMode",
    "OnlineModel",
    "GradientSet",
    "TrainTrace",
    "TrainingDiverged",
    "init_model",
    "score",
    "hinge_loss_binary",
    "multiclass_margin",
    "gradients",
    "step",
    "train_online",
    "predict",
    "predict_many",
]


class UpdateMode(enum.Enum):
    W_ONLY = "w"
    WU = "wu"
    WUB = "wub"


MODE_CODES = {UpdateMode.W_ONLY: 0, UpdateMode.WU: 1, UpdateMode.WUB: 2}


class TrainingDiverged(RuntimeError):
    """Weights or map parameters went non-finite during training."""

    def __init__(self, message: str, step_index: int | None = None):
        self.step_index = step_index
        if step_index is not None:
            message = f"{message} (step {step_index})"
        super().__init__(message)


@dataclass
class OnlineModel:
    """Full learner state: feature map, weight rows, step sizes, mode.

    ``class_count`` is 1 for binary (labels -1/+1, one weight row) and the
    number of classes otherwise (one row each).  The map is mutated in
    place by training in WU/WUB modes.
    """

    map: FeatureMap
    weights: np.ndarray
    eta_w: float
    eta_u: float
    eta_b: float
    mode: UpdateMode
    class_count: int

    def copy(self) -> "OnlineModel":
        return OnlineModel(
            map=self.map.copy(),
            weights=self.weights.copy(),
            eta_w=self.eta_w,
            eta_u=self.eta_u,
            eta_b=self.eta_b,
            mode=self.mode,
            class_count=self.class_count,
        )


@dataclass
class GradientSet:
    """Hinge-loss gradients for one instance; all zero when loss is zero."""

    g_w: np.ndarray
    g_u: np.ndarray
    g_b: np.ndarray
    loss: float


@dataclass
class TrainTrace:
    """Counters from one online pass.

    ``cumulative_mistake_rate`` holds (step, mistakes_so_far / step)
    checkpoints, always ending at the final step.  A correct prediction can
    still incur margin loss, so ``loss_events >= mistakes``.
    """

    steps: int
    mistakes: int
    loss_events: int
    cumulative_mistake_rate: list[tuple[int, float]] = field(default_factory=list)

    @property
    def mistake_rate(self) -> float:
        return self.mistakes / self.steps if self.steps else 0.0


def init_model(
    fmap: FeatureMap,
    class_count: int,
    eta_w: float,
    eta_u: float = 0.0,
    eta_b: float = 0.0,
    mode: UpdateMode = UpdateMode.W_ONLY,
) -> OnlineModel:
    """Zero-weight model over ``fmap``.

    Step sizes outside the mode's reach are stored as literal zeros
    (W_ONLY zeroes eta_u and eta_b, WU zeroes eta_b), so a saved model
    states exactly what training did.
    """
    if int(class_count) != class_count or class_count < 1:
        raise ValueError("class_count must be an integer >= 1")
    for name, eta in (("eta_w", eta_w), ("eta_u", eta_u), ("eta_b", eta_b)):
        if not math.isfinite(eta):
            raise ValueError(f"{name} must be finite")
        if eta < 0:
            raise ValueError(f"{name} must be non-negative")
    if eta_w <= 0:
        raise ValueError("eta_w must be positive")
    if fmap.variant is MapVariant.COS_SIN and mode is not UpdateMode.W_ONLY:
        raise ValueError("cos/sin maps have no phase to learn; use W_ONLY mode")
    if mode is UpdateMode.W_ONLY:
        eta_u = eta_b = 0.0
    elif mode is UpdateMode.WU:
        eta_b = 0.0
    weights = np.zeros((int(class_count), fmap.width))
    return OnlineModel(
        map=fmap,
        weights=weights,
        eta_w=float(eta_w),
        eta_u=float(eta_u),
        eta_b=float(eta_b),
        mode=mode,
        class_count=int(class_count),
    )


def _scores(model: OnlineModel, x) -> np.ndarray:
    return model.weights @ transform(model.map, x)


def score(model: OnlineModel, x):
    """Class scores for one instance: a scalar for binary, else length m."""
    s = _scores(model, x)
    return float(s[0]) if model.class_count == 1 else s


def hinge_loss_binary(label: int, value: float) -> float:
    """max(0, 1 - label*value) for label in {-1, +1}."""
    if label not in (-1, 1):
        raise ValueError(f"binary label must be -1 or +1, got {label!r}")
    return max(0.0, 1.0 - label * value)


def multiclass_margin(scores: np.ndarray, label: int) -> tuple[float, int, float]:
    """(margin, runner-up index, hinge loss) for a score vector.

    The runner-up is the best-scoring class other than ``label``, ties
    broken toward the lowest index; margin is scores[label] - runner-up
    score and the loss is max(0, 1 - margin).
    """
    scores = np.asarray(scores, dtype=np.float64)
    m = scores.shape[0]
    if m < 2:
        raise ValueError("multiclass margin needs at least 2 classes")
    if not 0 <= label < m:
        raise ValueError(f"label {label} out of range for {m} classes")
    masked = scores.copy()
    masked[label] = -np.inf
    runner = int(np.argmax(masked))
    gamma = float(scores[label] - scores[runner])
    return gamma, runner, max(0.0, 1.0 - gamma)


def gradients(model: OnlineModel, x, label: int) -> GradientSet:
    """Hinge-loss gradients at the current parameters for one instance.

    For positive loss: the weight gradient is -label*phi(x) (binary) or
    -phi / +phi on the true / runner-up rows; frequency and phase
    gradients follow the chain rule through the active cosine components.
    For cos/sin maps only the weight gradient exists, and only W_ONLY mode
    may ask (there is no phase parameter to differentiate).
    """
    fmap = model.map
    d, num = fmap.frequencies.shape
    if fmap.variant is MapVariant.COS_SIN and model.mode is not UpdateMode.W_ONLY:
        raise ValueError("frequency/phase gradients are undefined for cos/sin maps")

    z = project(fmap, x)
    scale = fmap.scale
    if fmap.variant is MapVariant.COS_SIN:
        phi = np.concatenate([scale * np.cos(z), scale * np.sin(z)])
    else:
        phi = scale * np.cos(z + fmap.phases)

    g_w = np.zeros_like(model.weights)
    g_u = np.zeros((d, num))
    g_b = np.zeros(num)

    if model.class_count == 1:
        if label not in (-1, 1):
            raise ValueError(f"binary label must be -1 or +1, got {label!r}")
        loss = hinge_loss_binary(label, float(model.weights[0] @ phi))
        if loss == 0.0:
            return GradientSet(g_w, g_u, g_b, 0.0)
        g_w[0] = (-label) * phi
        if fmap.variant is not MapVariant.COS_SIN:
            coef = label * (model.weights[0] * (scale * np.sin(z + fmap.phases)))
            g_u[:] = np.outer(_dense(x, d), coef)
            g_b[:] = coef
        return GradientSet(g_w, g_u, g_b, loss)

    scores = model.weights @ phi
    _, runner, loss = multiclass_margin(scores, label)
    if loss == 0.0:
        return GradientSet(g_w, g_u, g_b, 0.0)
    g_w[label] = -phi
    g_w[runner] = phi
    if fmap.variant is not MapVariant.COS_SIN:
        coef = (model.weights[label] - model.weights[runner]) * (
            scale * np.sin(z + fmap.phases)
        )
        g_u[:] = np.outer(_dense(x, d), coef)
        g_b[:] = coef
    return GradientSet(g_w, g_u, g_b, loss)


def _dense(x, d: int) -> np.ndarray:
    if isinstance(x, Instance):
        return x.to_dense(d)
    return np.asarray(x, dtype=np.float64)


def step(model: OnlineModel, grads: GradientSet) -> OnlineModel:
    """Apply one simultaneous descent step in place; no-op at zero loss."""
    if grads.loss == 0.0:
        return model
    if model.mode in (UpdateMode.WU, UpdateMode.WUB) and model.eta_u != 0.0:
        model.map.frequencies -= model.eta_u * grads.g_u
        if not np.isfinite(model.map.frequencies).all():
            raise TrainingDiverged("frequency matrix went non-finite")
    if model.mode is UpdateMode.WUB and model.eta_b != 0.0:
        model.map.phases -= model.eta_b * grads.g_b
        if not np.isfinite(model.map.phases).all():
            raise TrainingDiverged("phase vector went non-finite")
    model.weights -= model.eta_w * grads.g_w
    if not np.isfinite(model.weights).all():
        raise TrainingDiverged("weights went non-finite")
    return model


def _validate_stream(model: OnlineModel, dataset: Dataset) -> None:
    if dataset.dim > model.map.input_dim:
        raise ValueError(
            f"stream dimension {dataset.dim} exceeds map dimension {model.map.input_dim}"
        )
    labels = dataset.labels()
    if model.class_count == 1:
        if labels.size and not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary stream labels must be -1/+1")
    else:
        if labels.size and (labels.min() < 0 or labels.max() >= model.class_count):
            raise ValueError(
                f"stream labels must lie in [0, {model.class_count}) for this model"
            )


def train_online(
    model: OnlineModel,
    stream: Dataset,
    checkpoint_interval: int | None = None,
    backend: str | None = None,
) -> tuple[OnlineModel, TrainTrace]:
    """Single ordered pass over ``stream``, updating ``model`` in place.

    Mistakes are counted on the pre-update prediction of each instance.
    Raises :class:`TrainingDiverged` with the offending step index if any
    parameter goes non-finite.

    ``checkpoint_interval`` controls the spacing of cumulative-mistake-rate
    checkpoints (default: ~100 evenly spaced); ``backend`` forces the
    "python" or "compiled" loop.
    """
    _validate_stream(model, stream)
    indptr, indices, values, labels = to_csr(stream)
    run = _core.get_backend(backend)
    mistakes, loss_events, diverged = run(
        model.map.frequencies,
        model.map.phases,
        model.weights,
        indptr,
        indices,
        values,
        labels,
        VARIANT_CODES[model.map.variant],
        model.map.scale,
        model.eta_w,
        model.eta_u,
        model.eta_b,
        model.mode in (UpdateMode.WU, UpdateMode.WUB),
        model.mode is UpdateMode.WUB,
    )
    if diverged >= 0:
        raise TrainingDiverged(
            "training diverged to non-finite parameters; lower the step sizes",
            step_index=int(diverged),
        )
    n = stream.n
    if checkpoint_interval is None:
        checkpoint_interval = max(1, n // 100)
    cum = np.cumsum(mistakes, dtype=np.int64)
    marks = list(range(checkpoint_interval, n + 1, checkpoint_interval))
    if n and (not marks or marks[-1] != n):
        marks.append(n)
    trace = TrainTrace(
        steps=n,
        mistakes=int(mistakes.sum()),
        loss_events=int(loss_events.sum()),
        cumulative_mistake_rate=[(s, float(cum[s - 1] / s)) for s in marks],
    )
    return model, trace


def predict(model: OnlineModel, x) -> int:
    """Predicted label: sign of the score for binary (sign(0) = +1),
    argmax with lowest-index tie-break otherwise."""
    s = _scores(model, x)
    if model.class_count == 1:
        return 1 if s[0] >= 0.0 else -1
    return int(np.argmax(s))


def predict_many(model: OnlineModel, dataset: Dataset, chunk: int = 4096) -> np.ndarray:
    """Vectorized predictions for a whole dataset (chunked to bound memory)."""
    from scipy.sparse import csr_matrix

    _validate_dims(model, dataset)
    indptr, indices, values, _ = to_csr(dataset)
    X = csr_matrix((values, indices, indptr), shape=(dataset.n, model.map.input_dim))
    fmap = model.map
    scale = fmap.scale
    out = np.empty(dataset.n, dtype=np.int64)
    for lo in range(0, dataset.n, chunk):
        hi = min(lo + chunk, dataset.n)
        Z = X[lo:hi] @ fmap.frequencies
        if fmap.variant is MapVariant.COS_SIN:
            phi = np.hstack([scale * np.cos(Z), scale * np.sin(Z)])
        else:
            phi = scale * np.cos(Z + fmap.phases)
        scores = phi @ model.weights.T
        if model.class_count == 1:
            out[lo:hi] = np.where(scores[:, 0] >= 0.0, 1, -1)
        else:
            out[lo:hi] = np.argmax(scores, axis=1)
    return out


def _validate_dims(model: OnlineModel, dataset: Dataset) -> None:
    if dataset.dim > model.map.input_dim:
        raise ValueError(
            f"dataset dimension {dataset.dim} exceeds map dimension {model.map.input_dim}"
        )
