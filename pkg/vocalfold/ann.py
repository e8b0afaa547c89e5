"""A feedforward network with one hidden layer of logistic units and a single logistic output.

The network is trained by full-batch gradient descent on the mean binary cross-entropy, so training is a
deterministic function of the data, the configuration and the seed.
"""
from dataclasses import dataclass
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import Field
from scipy.special import expit

from vocalfold.features import Label
from vocalfold.util import AnnError, BaseModel, TrainingDiverged

__all__ = (
    "MlpGradient",
    "MlpModel",
    "TrainConfig",
    "forward",
    "init_mlp",
    "loss_and_gradients",
    "numerical_gradient_check",
    "predict",
    "predict_proba",
    "train",
)


class TrainConfig(BaseModel):
    """Parameters of the network and its training."""

    learning_rate: float = Field(default=0.05, ge=0, allow_inf_nan=False)
    """Step size of gradient descent."""
    epochs: int = Field(default=2000, ge=1)
    """Number of full-batch updates."""
    seed: int = 0
    """Seed of the weight initialization."""
    hidden: int = Field(default=5, ge=1)
    """Number of hidden units."""


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Weights and biases of the network.

    The output for an input `x` is `expit(w2 @ expit(w1 @ x + b1) + b2)`.
    """

    w1: NDArray[np.float64]
    """Hidden layer weights, one row per hidden unit."""
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    """Output weights, one per hidden unit."""
    b2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "w1", np.array(self.w1, dtype=np.float64))
        object.__setattr__(self, "b1", np.array(self.b1, dtype=np.float64))
        object.__setattr__(self, "w2", np.array(self.w2, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "b2", float(self.b2))
        if self.w1.ndim != 2 or self.w1.shape[0] < 1 or self.w1.shape[1] < 1:
            raise AnnError(f"The hidden weights must be a nonempty matrix, got shape {self.w1.shape}.")
        h = self.w1.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise AnnError(
                f"A network with {h} hidden units needs {h} hidden biases and output weights.",
                detail=f"b1 {self.b1.shape}, w2 {self.w2.shape}",
            )
        if not np.all(np.isfinite(self.parameters())):
            raise AnnError("Network weights must be finite.")
        for array in (self.w1, self.b1, self.w2):
            array.flags.writeable = False

    @property
    def d(self) -> int:
        """Input dimension."""
        return self.w1.shape[1]

    @property
    def h(self) -> int:
        """Number of hidden units."""
        return self.w1.shape[0]

    def parameters(self) -> NDArray[np.float64]:
        """All parameters as one flat vector, ordered `w1` (row-major), `b1`, `w2`, `b2`."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def from_parameters(cls, params: ArrayLike, d: int, h: int) -> Self:
        """Inverse of :meth:`parameters`."""
        p = np.asarray(params, dtype=np.float64)
        if p.shape != (h * d + 2 * h + 1,):
            raise AnnError(f"A {d}-{h}-1 network has {h * d + 2 * h + 1} parameters, got {p.size}.")
        return cls(p[: h * d].reshape(h, d), p[h * d : h * d + h], p[h * d + h : h * d + 2 * h], p[-1])


@dataclass(frozen=True, eq=False)
class MlpGradient:
    """Derivatives of the loss laid out like the :class:`MlpModel` they belong to.

    Unlike a model these may hold non-finite values, the training loop reports those itself.
    """

    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: float

    def parameters(self) -> NDArray[np.float64]:
        """All derivatives as one flat vector, in the order of :meth:`MlpModel.parameters`."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])


def init_mlp(d: int, cfg: TrainConfig | None = None) -> MlpModel:
    """Draws the weights of a layer uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases start at 0."""
    cfg = cfg or TrainConfig()
    if d < 1:
        raise AnnError(f"The input dimension must be positive, got {d}.")
    rng = np.random.default_rng(cfg.seed)
    bound1 = 1 / np.sqrt(d)
    bound2 = 1 / np.sqrt(cfg.hidden)
    w1 = rng.uniform(-bound1, bound1, size=(cfg.hidden, d))
    w2 = rng.uniform(-bound2, bound2, size=cfg.hidden)
    return MlpModel(w1, np.zeros(cfg.hidden), w2, 0.0)


def _check_inputs(model: MlpModel, x: ArrayLike) -> NDArray[np.float64]:
    data = np.asarray(x, dtype=np.float64)
    if data.shape[-1:] != (model.d,) or data.ndim > 2:
        raise AnnError(f"The network expects inputs of length {model.d}, got an array of shape {data.shape}.")
    return data


def _hidden(model: MlpModel, x: NDArray[np.float64]) -> NDArray[np.float64]:
    return expit(x @ model.w1.T + model.b1)


def predict_proba(model: MlpModel, x: ArrayLike) -> NDArray[np.float64]:
    """Output of the network for every row of a sample matrix."""
    data = _check_inputs(model, x)
    return expit(_hidden(model, data) @ model.w2 + model.b2)


def forward(model: MlpModel, x: ArrayLike) -> float:
    """Output of the network for a single input, the probability of the pathological class."""
    data = _check_inputs(model, x)
    if data.ndim != 1:
        raise AnnError(f"forward takes a single vector, got an array of shape {data.shape}.")
    return float(predict_proba(model, data))


def predict(model: MlpModel, x: ArrayLike) -> Label:
    """Pathological if the output exceeds 0.5, healthy otherwise."""
    return Label.pathological if forward(model, x) > 0.5 else Label.healthy


def _check_targets(x: NDArray[np.float64], targets: ArrayLike) -> NDArray[np.float64]:
    t = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise AnnError(f"Expected a nonempty sample matrix, got an array of shape {x.shape}.")
    if t.shape != (x.shape[0],):
        raise AnnError(f"Got {x.shape[0]} samples but {t.size} targets.")
    if not np.all((t == 0) | (t == 1)):
        raise AnnError("Targets must be 0 or 1.")
    return t


def loss_and_gradients(model: MlpModel, x: ArrayLike, targets: ArrayLike) -> tuple[float, MlpGradient]:
    """Mean binary cross-entropy of the batch and its gradient.

    The gradient is returned in the layout of the model itself, i.e. `gradient.w1` is the derivative with respect to
    `model.w1`.
    """
    data = _check_inputs(model, x)
    t = _check_targets(data, targets)
    n = data.shape[0]
    a1 = _hidden(model, data)
    z2 = a1 @ model.w2 + model.b2
    # -t ln(y) - (1 - t) ln(1 - y) with y = expit(z2), without forming the logarithms of y
    loss = float(np.mean(np.logaddexp(0.0, z2) - t * z2))

    dz2 = (expit(z2) - t) / n
    dz1 = np.outer(dz2, model.w2) * a1 * (1 - a1)
    gradient = MlpGradient(dz1.T @ data, dz1.sum(axis=0), a1.T @ dz2, float(dz2.sum()))
    return loss, gradient


def train(
    model: MlpModel,
    x: ArrayLike,
    targets: ArrayLike,
    cfg: TrainConfig | None = None,
    *,
    loss_trace: list[float] | None = None,
) -> MlpModel:
    """Trains a copy of the model by `cfg.epochs` steps of full-batch gradient descent.

    Args:
        model: The initial network, it is not modified.
        x: Sample matrix with one reduced feature vector per row.
        targets: Labels of the rows, 0 or 1.
        cfg: Training parameters.
        loss_trace: If given, the loss before every update is appended to it.

    Raises:
        AnnError: If the inputs are malformed or only one class is present.
        TrainingDiverged: If the loss stops being finite.
    """
    cfg = cfg or TrainConfig()
    data = _check_inputs(model, x)
    t = _check_targets(data, targets)
    if np.all(t == t[0]):
        raise AnnError(f"Training needs samples of both classes, got only {Label(int(t[0])).name} ones.")

    current = model
    for epoch in range(cfg.epochs):
        loss, gradient = loss_and_gradients(current, data, t)
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"The training loss became {loss} in epoch {epoch}.",
                epoch=epoch,
                detail=f"learning rate {cfg.learning_rate}",
            )
        if loss_trace is not None:
            loss_trace.append(loss)
        params = current.parameters() - cfg.learning_rate * gradient.parameters()
        if not np.all(np.isfinite(params)):
            raise TrainingDiverged(
                f"The network weights overflowed in epoch {epoch}.",
                epoch=epoch,
                detail=f"learning rate {cfg.learning_rate}",
            )
        current = MlpModel.from_parameters(params, current.d, current.h)
    return current


def numerical_gradient_check(
    model: MlpModel,
    x: ArrayLike,
    targets: ArrayLike,
    *,
    step: float = 1e-6,
    gradient: MlpGradient | None = None,
) -> float:
    """Compares the backpropagated gradient with central finite differences of the loss.

    Args:
        model: Point at which the gradient is checked.
        x: A nonempty batch of inputs.
        targets: Their labels.
        step: Finite difference step applied to each parameter in turn.
        gradient: The analytic gradient to check, computed by :func:`loss_and_gradients` if omitted.

    Returns:
        The largest relative error `|ga - gn| / max(|ga|, |gn|, 1e-8)` over all parameters.
    """
    data = _check_inputs(model, x)
    t = _check_targets(data, targets)
    analytic = (gradient or loss_and_gradients(model, data, t)[1]).parameters()
    params = model.parameters()
    numeric = np.empty_like(params)
    for i in range(params.size):
        shifted = params.copy()
        shifted[i] = params[i] + step
        upper = loss_and_gradients(MlpModel.from_parameters(shifted, model.d, model.h), data, t)[0]
        shifted[i] = params[i] - step
        lower = loss_and_gradients(MlpModel.from_parameters(shifted, model.d, model.h), data, t)[0]
        numeric[i] = (upper - lower) / (2 * step)
    errors = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(errors.max())
