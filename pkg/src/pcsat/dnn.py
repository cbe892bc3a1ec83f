"""From-scratch dense feedforward binary classifier.

ReLU hidden layers, one sigmoid output unit, binary cross-entropy loss
minimized by mini-batch Adam.  Inputs are flattened constraint matrices,
scaled per matrix column by max-abs factors fitted on the training split.
Everything runs in float64 and is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .vectorize import PcMatrix


class DnnError(ValueError):
    pass


class BadDims(DnnError):
    pass


class ShapeMismatch(DnnError):
    pass


class SingleClassData(DnnError):
    pass


class FormatError(DnnError):
    pass


@dataclass
class Network:
    """Immutable-by-convention weights plus input-scaling metadata.

    ``group`` is the (rows, cols) matrix shape this net accepts; it is None
    until the net has been trained (or explicitly given one).
    """

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    col_scale: np.ndarray | None = None
    threshold: float = 0.5
    group: tuple[int, int] | None = None
    seed: int = 0
    train_meta: dict = field(default_factory=dict)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.2
    k: int = 0
    patience: int = 5
    class_weights: bool = False

    def validate(self) -> None:
        if self.epochs < 1:
            raise DnnError("epochs must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise DnnError("val_fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise DnnError("batch_size must be >= 1")


@dataclass
class TrainReport:
    epoch_losses: list[float]
    val_losses: list[float]
    val_accuracies: list[float]
    best_epoch: int
    stopped_early: bool
    n_train: int
    n_val: int


def init_network(
    layer_dims: Sequence[int], seed: int, group: tuple[int, int] | None = None
) -> Network:
    """He-initialized weights (variance 2/fan_in), zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims) or dims[-1] != 1:
        raise BadDims(f"invalid layer dims {dims}")
    if group is not None and group[0] * group[1] != dims[0]:
        raise BadDims(f"group {group} does not flatten to input dim {dims[0]}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(dims, weights, biases, None, 0.5, group, seed)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(net: Network, x: np.ndarray) -> np.ndarray:
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    return _sigmoid(a @ net.weights[-1] + net.biases[-1]).ravel()


def _scale_matrix(net: Network, m: PcMatrix) -> np.ndarray:
    x = np.asarray(m.cells, dtype=np.float64)
    if net.col_scale is not None:
        x = x / net.col_scale
    return x.ravel()


def predict(net: Network, m: PcMatrix) -> tuple[float, bool]:
    """Score in [0, 1] and the thresholded label (True = satisfiable)."""
    if net.group is not None and (m.rows, m.cols) != net.group:
        raise ShapeMismatch(
            f"matrix {m.rows}x{m.cols} does not fit group {net.group}"
        )
    if m.rows * m.cols != net.dims[0]:
        raise ShapeMismatch(
            f"flattened size {m.rows * m.cols} != input dim {net.dims[0]}"
        )
    score = float(_forward(net, _scale_matrix(net, m)[None, :])[0])
    return score, score >= net.threshold


def predict_batch(net: Network, ms: Sequence[PcMatrix]) -> np.ndarray:
    x = np.stack([_scale_matrix(net, m) for m in ms])
    return _forward(net, x)


def _loss_and_grads(
    net: Network, x: np.ndarray, y: np.ndarray, sample_w: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    acts = [x]
    pre = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    z_out = a @ net.weights[-1] + net.biases[-1]
    p = _sigmoid(z_out).ravel()
    eps = 1e-12
    clipped = np.clip(p, eps, 1.0 - eps)
    losses = -(y * np.log(clipped) + (1.0 - y) * np.log(1.0 - clipped))
    loss = float(np.mean(sample_w * losses))

    n = x.shape[0]
    delta = ((p - y) * sample_w / n)[:, None]
    grads_w: list[np.ndarray] = [None] * len(net.weights)
    grads_b: list[np.ndarray] = [None] * len(net.biases)
    grads_w[-1] = acts[-1].T @ delta
    grads_b[-1] = delta.sum(axis=0)
    for layer in range(len(net.weights) - 2, -1, -1):
        delta = (delta @ net.weights[layer + 1].T) * (pre[layer] > 0)
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
    return loss, grads_w, grads_b


def loss_and_gradients(net: Network, x: np.ndarray, y: np.ndarray):
    """Full-batch loss and analytic gradients (gradient-check hook)."""
    return _loss_and_grads(net, x, y, np.ones(len(y)))


def numeric_gradients(net: Network, x: np.ndarray, y: np.ndarray, step: float = 1e-5):
    """Central finite-difference gradients at the current weights."""
    ones = np.ones(len(y))

    def loss_at() -> float:
        return _loss_and_grads(net, x, y, ones)[0]

    grads_w = []
    grads_b = []
    for arr, grads in ((net.weights, grads_w), (net.biases, grads_b)):
        for param in arr:
            g = np.zeros_like(param)
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                i = it.multi_index
                orig = param[i]
                param[i] = orig + step
                hi = loss_at()
                param[i] = orig - step
                lo = loss_at()
                param[i] = orig
                g[i] = (hi - lo) / (2 * step)
                it.iternext()
            grads.append(g)
    return grads_w, grads_b


def gradient_check(net: Network, x: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Max-norm relative error between analytic and numeric gradients."""
    _, aw, ab = loss_and_gradients(net, x, y)
    nw, nb = numeric_gradients(net, x, y, step)
    analytic = np.concatenate([g.ravel() for g in aw + ab])
    numeric = np.concatenate([g.ravel() for g in nw + nb])
    denom = np.abs(analytic).max() + np.abs(numeric).max() + 1e-12
    return float(np.abs(analytic - numeric).max() / denom)


def _fit_col_scale(matrices: Sequence[PcMatrix]) -> np.ndarray:
    stacked = np.abs(np.asarray([m.cells for m in matrices], dtype=np.float64))
    return np.maximum(stacked.max(axis=(0, 1)), 1.0)


def train(
    net: Network, data: Sequence[tuple[PcMatrix, bool]], cfg: TrainConfig
) -> tuple[Network, TrainReport]:
    """Mini-batch Adam on binary cross-entropy; deterministic per seed.

    The column scale is fitted on the training split only and stored in the
    returned network; the input network is left untouched.  Early stopping
    restores the best-validation-loss weights.
    """
    cfg.validate()
    if len(data) < 2:
        raise DnnError("need at least two records")
    shape = (data[0][0].rows, data[0][0].cols)
    for m, _ in data:
        if (m.rows, m.cols) != shape:
            raise ShapeMismatch("training matrices must share one shape")
    if shape[0] * shape[1] != net.dims[0]:
        raise ShapeMismatch(
            f"matrix shape {shape} does not flatten to input dim {net.dims[0]}"
        )
    labels = {bool(lbl) for _, lbl in data}
    if len(labels) < 2:
        raise SingleClassData("training data contains a single class")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(data))
    n_val = max(1, int(round(len(data) * cfg.val_fraction)))
    n_val = min(n_val, len(data) - 1)
    val_idx = order[:n_val]
    train_idx = order[n_val:]

    train_ms = [data[i][0] for i in train_idx]
    col_scale = _fit_col_scale(train_ms)
    raw = np.asarray([m.cells for m, _ in data], dtype=np.float64)
    flat = (raw / col_scale).reshape(len(data), -1)
    y = np.asarray([1.0 if lbl else 0.0 for _, lbl in data])
    x_train, y_train = flat[train_idx], y[train_idx]
    x_val, y_val = flat[val_idx], y[val_idx]

    if cfg.class_weights:
        n_pos = max(y_train.sum(), 1.0)
        n_neg = max(len(y_train) - y_train.sum(), 1.0)
        w_pos = len(y_train) / (2.0 * n_pos)
        w_neg = len(y_train) / (2.0 * n_neg)
        weights_of = np.where(y_train > 0.5, w_pos, w_neg)
    else:
        weights_of = np.ones(len(y_train))

    work = Network(
        net.dims,
        [w.copy() for w in net.weights],
        [b.copy() for b in net.biases],
        col_scale,
        net.threshold,
        shape,
        cfg.seed,
    )
    params = work.weights + work.biases
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step_count = 0

    epoch_losses: list[float] = []
    val_losses: list[float] = []
    val_accs: list[float] = []
    best_val = np.inf
    best_epoch = 0
    best_params = [p.copy() for p in params]
    stopped_early = False

    ones_val = np.ones(len(y_val))
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(x_train))
        batch_losses = []
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, gw, gb = _loss_and_grads(
                work, x_train[idx], y_train[idx], weights_of[idx]
            )
            batch_losses.append(loss)
            step_count += 1
            for p, g, ms, vs in zip(params, gw + gb, m_state, v_state):
                ms *= beta1
                ms += (1 - beta1) * g
                vs *= beta2
                vs += (1 - beta2) * g * g
                m_hat = ms / (1 - beta1**step_count)
                v_hat = vs / (1 - beta2**step_count)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        epoch_losses.append(float(np.mean(batch_losses)))
        vloss = _loss_and_grads(work, x_val, y_val, ones_val)[0]
        vpred = _forward(work, x_val) >= work.threshold
        val_losses.append(vloss)
        val_accs.append(float(np.mean(vpred == (y_val > 0.5))))
        if vloss < best_val:
            best_val = vloss
            best_epoch = epoch
            best_params = [p.copy() for p in params]
        elif epoch - best_epoch >= cfg.patience:
            stopped_early = True
            break

    n_w = len(work.weights)
    work.weights = best_params[:n_w]
    work.biases = best_params[n_w:]
    work.train_meta = {
        "records": len(data),
        "epochs_run": len(epoch_losses),
        "best_epoch": best_epoch,
        "final_val_accuracy": val_accs[best_epoch],
        "seed": cfg.seed,
    }
    report = TrainReport(
        epoch_losses,
        val_losses,
        val_accs,
        best_epoch,
        stopped_early,
        len(train_idx),
        len(val_idx),
    )
    return work, report


def kfold_validate(
    data: Sequence[tuple[PcMatrix, bool]],
    layer_dims: Sequence[int],
    cfg: TrainConfig,
) -> tuple[list[float], float]:
    """Seeded k-fold accuracies and their mean; folds never leak."""
    if cfg.k < 2:
        raise DnnError("k-fold validation needs k >= 2")
    if cfg.k > len(data):
        raise DnnError("k may not exceed the record count")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(data))
    folds = np.array_split(order, cfg.k)
    accuracies = []
    for i, fold in enumerate(folds):
        held = set(fold.tolist())
        train_data = [data[j] for j in order if j not in held]
        net = init_network(layer_dims, cfg.seed + i + 1)
        trained, _ = train(net, train_data, cfg)
        scores = predict_batch(trained, [data[j][0] for j in fold])
        got = scores >= trained.threshold
        want = np.asarray([data[j][1] for j in fold])
        accuracies.append(float(np.mean(got == want)))
    return accuracies, float(np.mean(accuracies))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_network(net: Network, path) -> None:
    doc = {
        "version": "1",
        "group": (
            {"rows": net.group[0], "cols": net.group[1]} if net.group else None
        ),
        "dims": list(net.dims),
        "activation": "relu",
        "out": "sigmoid",
        "threshold": net.threshold,
        "col_scale": net.col_scale.tolist() if net.col_scale is not None else None,
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
        "seed": net.seed,
        "train_meta": net.train_meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a model file: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise FormatError("missing version field")
    if doc["version"] != "1":
        raise FormatError(f"unsupported model version {doc['version']!r}")
    try:
        dims = tuple(doc["dims"])
        weights = [np.asarray(layer["w"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.asarray(layer["b"], dtype=np.float64) for layer in doc["layers"]]
        group = doc["group"]
        col_scale = doc["col_scale"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model file: {exc}") from exc
    for w, (fan_in, fan_out) in zip(weights, zip(dims[:-1], dims[1:])):
        if w.shape != (fan_in, fan_out):
            raise FormatError(f"weight shape {w.shape} does not match dims {dims}")
    return Network(
        dims,
        weights,
        biases,
        np.asarray(col_scale, dtype=np.float64) if col_scale is not None else None,
        float(doc["threshold"]),
        (group["rows"], group["cols"]) if group else None,
        int(doc.get("seed", 0)),
        doc.get("train_meta", {}),
    )
