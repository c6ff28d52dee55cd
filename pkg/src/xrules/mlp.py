"""Fully connected feed-forward classifier trained from scratch.

ReLU hidden layers, softmax output (at least two output neurons; binary
targets are one-hot encoded), cross-entropy loss minimized by Adam with
early stopping on validation loss. Training is single-threaded and
deterministic per seed; inference is pure and safe to call from multiple
threads on a shared model.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import FeatureMatrix, matrix_values
from .errors import (
    DimMismatchError,
    EmptyDatasetError,
    FormatError,
    LayerOutOfRangeError,
    NonFiniteLossError,
)

RELU = "relu"
SOFTMAX = "softmax"

_MAGIC = b"XRULESMLP\x00"
_FILE_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 100
    batch_size: int = 64
    patience: int = 5
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.patience >= self.epochs_max:
            raise ValueError("patience must be < epochs_max")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs_max < 1:
            raise ValueError("batch_size and epochs_max must be >= 1")

    def as_dict(self) -> dict:
        return {
            "epochs_max": self.epochs_max,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }


class MlpModel:
    """Weights, biases, and activation names, ordered input to output.

    ``layers`` is a list of (W, b, activation) with W shaped (out, in).
    Hidden layers are ReLU; the final layer is softmax over >= 2 classes.
    """

    def __init__(self, layers, meta: dict | None = None):
        self.layers = [
            (np.ascontiguousarray(W, dtype=np.float64),
             np.ascontiguousarray(b, dtype=np.float64), act)
            for W, b, act in layers
        ]
        self.meta = meta or {}
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for i, (W, b, act) in enumerate(self.layers):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"layer {i}: W {W.shape} and b {b.shape} disagree")
            expected_act = SOFTMAX if i == len(self.layers) - 1 else RELU
            if act != expected_act:
                raise ValueError(f"layer {i}: activation must be {expected_act!r}")
            if i > 0 and W.shape[1] != self.layers[i - 1][0].shape[0]:
                raise ValueError(
                    f"layer {i}: input width {W.shape[1]} does not chain with "
                    f"previous output {self.layers[i - 1][0].shape[0]}"
                )
        if self.class_count < 2:
            raise ValueError("output layer needs at least two neurons")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def class_count(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def hidden_count(self) -> int:
        return len(self.layers) - 1

    def snapshot(self):
        return [(W.copy(), b.copy()) for W, b, _ in self.layers]

    def restore(self, snap) -> None:
        self.layers = [
            (W.copy(), b.copy(), act)
            for (W, b), (_, _, act) in zip(snap, self.layers)
        ]


@dataclass
class TrainLog:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def as_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "val_loss": self.val_loss,
            "val_acc": self.val_acc,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
        }


# --------------------------------------------------------------------------
# Inference
# --------------------------------------------------------------------------

def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_batch(model: MlpModel, X) -> np.ndarray:
    """Class probabilities for every row; each output row sums to 1."""
    a = matrix_values(X)
    if a.shape[1] != model.input_dim:
        raise DimMismatchError(
            f"model expects {model.input_dim} inputs, got {a.shape[1]}"
        )
    for W, b, act in model.layers:
        z = a @ W.T + b
        a = np.maximum(z, 0.0) if act == RELU else _softmax(z)
    return a


def forward(model: MlpModel, x) -> np.ndarray:
    """Probability vector for a single feature row."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimMismatchError(
            f"model expects row of width {model.input_dim}, got shape {x.shape}"
        )
    return forward_batch(model, x[None, :])[0]


def predict(model: MlpModel, X) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    return np.argmax(forward_batch(model, X), axis=1).astype(np.int64)


def hidden_activations(model: MlpModel, X, layer: int) -> FeatureMatrix:
    """Post-ReLU outputs of one hidden layer for every row of X."""
    if not 0 <= layer < model.hidden_count:
        raise LayerOutOfRangeError(
            f"layer {layer} out of range for {model.hidden_count} hidden layers"
        )
    a = matrix_values(X)
    if a.shape[1] != model.input_dim:
        raise DimMismatchError(
            f"model expects {model.input_dim} inputs, got {a.shape[1]}"
        )
    for W, b, _ in model.layers[: layer + 1]:
        a = np.maximum(a @ W.T + b, 0.0)
    return FeatureMatrix(a, [f"h{layer}_{j}" for j in range(a.shape[1])])


# --------------------------------------------------------------------------
# Loss and training
# --------------------------------------------------------------------------

def loss_and_gradient(model: MlpModel, X, Y):
    """Mean cross-entropy over the batch and analytic parameter gradients.

    Y is one-hot (batch, class_count). Returns (loss, [(dW, db), ...]) with
    gradient shapes matching the model's layers.
    """
    Xv = matrix_values(X)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (Xv.shape[0], model.class_count):
        raise DimMismatchError(
            f"one-hot targets must be {(Xv.shape[0], model.class_count)}, "
            f"got {Y.shape}"
        )
    acts = [Xv]
    zs = []
    a = Xv
    for W, b, act in model.layers:
        z = a @ W.T + b
        zs.append(z)
        a = np.maximum(z, 0.0) if act == RELU else _softmax(z)
        acts.append(a)
    batch = Xv.shape[0]
    loss = float(-(Y * _log_softmax(zs[-1])).sum() / batch)

    grads = [None] * len(model.layers)
    delta = (acts[-1] - Y) / batch
    for i in range(len(model.layers) - 1, -1, -1):
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.layers[i][0]) * (zs[i - 1] > 0.0)
    return loss, grads


def cross_entropy(model: MlpModel, X, Y) -> float:
    """Mean cross-entropy without gradients (validation bookkeeping)."""
    Xv = matrix_values(X)
    Y = np.asarray(Y, dtype=np.float64)
    a = Xv
    for W, b, act in model.layers[:-1]:
        a = np.maximum(a @ W.T + b, 0.0)
    W, b, _ = model.layers[-1]
    z = a @ W.T + b
    return float(-(Y * _log_softmax(z)).sum() / Xv.shape[0])


class _Adam:
    def __init__(self, model: MlpModel, lr: float):
        self.lr = lr
        self.t = 0
        self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b, _ in model.layers]
        self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b, _ in model.layers]

    def step(self, model: MlpModel, grads) -> None:
        self.t += 1
        correct1 = 1.0 - ADAM_BETA1 ** self.t
        correct2 = 1.0 - ADAM_BETA2 ** self.t
        for i, (gW, gb) in enumerate(grads):
            W, b, act = model.layers[i]
            for param, grad, m, v in ((W, gW, self.m[i][0], self.v[i][0]),
                                      (b, gb, self.m[i][1], self.v[i][1])):
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * grad
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * grad * grad
                param -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + ADAM_EPS)


def init_model(input_dim: int, hidden: list[int], class_count: int,
               rng: np.random.Generator) -> MlpModel:
    """He-style uniform init scaled by fan-in; biases start at zero."""
    widths = [input_dim] + list(hidden) + [class_count]
    layers = []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        limit = np.sqrt(6.0 / fan_in)
        W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = SOFTMAX if i == len(widths) - 2 else RELU
        layers.append((W, np.zeros(fan_out), act))
    return MlpModel(layers)


def train(config: TrainConfig, train_data, val_data,
          arch: list[int]) -> tuple[MlpModel, TrainLog]:
    """Fit an MLP on (X, Y one-hot) pairs, early-stopping on validation loss.

    Stops once the validation loss has failed to improve for ``patience``
    consecutive epochs and returns the weights of the best-validation epoch.
    """
    Xtr, Ytr = train_data
    Xv, Yv = val_data
    Xtr = matrix_values(Xtr)
    Ytr = np.asarray(Ytr, dtype=np.float64)
    if Xtr.shape[0] == 0 or matrix_values(Xv).shape[0] == 0:
        raise EmptyDatasetError("train and validation splits must be non-empty")
    n, class_count = Ytr.shape[0], Ytr.shape[1]

    rng = np.random.default_rng(config.seed)
    model = init_model(Xtr.shape[1], arch, class_count, rng)
    adam = _Adam(model, config.learning_rate)
    log = TrainLog()
    best_val = np.inf
    best_snap = model.snapshot()
    bad_epochs = 0

    for epoch in range(config.epochs_max):
        perm = rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss, grads = loss_and_gradient(model, Xtr[idx], Ytr[idx])
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"loss diverged at epoch {epoch}")
            adam.step(model, grads)
            running += loss * len(idx)
        log.train_loss.append(running / n)
        log.train_acc.append(_accuracy(model, Xtr, Ytr))
        vloss = cross_entropy(model, Xv, Yv)
        if not np.isfinite(vloss):
            raise NonFiniteLossError(f"validation loss diverged at epoch {epoch}")
        log.val_loss.append(vloss)
        log.val_acc.append(_accuracy(model, Xv, Yv))
        log.stopped_epoch = epoch
        if vloss < best_val:
            best_val = vloss
            best_snap = model.snapshot()
            log.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    model.restore(best_snap)
    return model, log


def _accuracy(model: MlpModel, X, Y_onehot) -> float:
    return float((predict(model, X) == np.argmax(Y_onehot, axis=1)).mean())


# --------------------------------------------------------------------------
# Persistence: magic + length-prefixed JSON header + raw float64 buffers
# --------------------------------------------------------------------------

def save_model(model: MlpModel, path) -> None:
    header = {
        "version": _FILE_VERSION,
        "input_dim": model.input_dim,
        "class_count": model.class_count,
        "layers": [
            {"out": W.shape[0], "in": W.shape[1], "activation": act}
            for W, b, act in model.layers
        ],
        "meta": model.meta,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for W, b, _ in model.layers:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(_MAGIC)] != _MAGIC:
        raise FormatError("not a model file (bad magic)")
    pos = len(_MAGIC)
    if len(data) < pos + 8:
        raise FormatError("truncated model file (missing header length)")
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if len(data) < pos + hlen:
        raise FormatError("truncated model file (incomplete header)")
    try:
        header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"corrupt model header: {e}") from e
    pos += hlen
    if header.get("version") != _FILE_VERSION:
        raise FormatError(f"unsupported model file version {header.get('version')!r}")
    layers = []
    for spec in header["layers"]:
        out, inp = spec["out"], spec["in"]
        w_bytes = out * inp * 8
        if len(data) < pos + w_bytes + out * 8:
            raise FormatError("truncated model file (missing weights)")
        W = np.frombuffer(data, dtype="<f8", count=out * inp, offset=pos)
        pos += w_bytes
        b = np.frombuffer(data, dtype="<f8", count=out, offset=pos)
        pos += out * 8
        layers.append((W.reshape(out, inp), b, spec["activation"]))
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes in model file")
    return MlpModel(layers, meta=header.get("meta") or {})
