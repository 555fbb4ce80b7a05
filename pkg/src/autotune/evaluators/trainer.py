"""Desk-scale proxy trainer: an MLP on two-class spirals.

Training regimen: He-normal weights, ReLU hidden layers, dropout after every
hidden dense layer, softmax cross-entropy, Adagrad with lr 0.01, learning rate
multiplied by sqrt(0.1) when the validation loss has not improved (relative
1e-4) for 5 epochs, 50 epochs, mini-batches of 64.

Dropout is the classic form: units are zeroed during training and activations
are scaled by ``1 - rate`` at inference, so ``rate = 1.0`` leaves only the output
bias and the classifier degrades to a constant prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .base import EvalRequest, EvalResponse

SPIRAL_TURNS = 1.25
SPIRAL_NOISE = 0.08
SPIRAL_SEED = 1357
N_TRAIN, N_VALID = 800, 200

LEARNING_RATE = 0.01
DECAY = math.sqrt(0.1)
PLATEAU_PATIENCE = 5
PLATEAU_REL = 1e-4
BATCH_SIZE = 64
ADAGRAD_EPS = 1e-7


def make_spirals(n: int, turns: float = SPIRAL_TURNS, noise: float = SPIRAL_NOISE,
                 seed: int = SPIRAL_SEED) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved spiral arms, ``n // 2`` points each, shuffled."""
    rng = np.random.default_rng(seed)
    k = n // 2
    t = np.sqrt(rng.uniform(0.0, 1.0, k)) * turns * 2 * np.pi
    r = t / (turns * 2 * np.pi)
    arm = np.column_stack([r * np.cos(t), r * np.sin(t)])
    X = np.vstack([arm, -arm]) + rng.normal(0.0, noise, (2 * k, 2))
    y = np.concatenate([np.zeros(k, dtype=int), np.ones(k, dtype=int)])
    perm = rng.permutation(2 * k)
    return 2.0 * X[perm], y[perm]


@lru_cache(maxsize=4)
def load_dataset(name: str = "spirals"):
    if name != "spirals":
        raise ValueError(f"unknown builtin dataset {name!r}")
    X, y = make_spirals(N_TRAIN + N_VALID)
    return X[:N_TRAIN], y[:N_TRAIN], X[N_TRAIN:], y[N_TRAIN:]


@dataclass
class MLP:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropouts: list[float]

    @property
    def depth(self) -> int:
        return len(self.dropouts)


def init_mlp(n_in: int, hidden: Sequence[int], n_out: int, dropouts: Sequence[float],
             rng: np.random.Generator, dtype=np.float64) -> MLP:
    sizes = [n_in, *hidden, n_out]
    weights = [(rng.standard_normal((a, b)) * math.sqrt(2.0 / a)).astype(dtype)
               for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b, dtype=dtype) for b in sizes[1:]]
    return MLP(weights, biases, list(dropouts))


def predict_logits(net: MLP, X: np.ndarray) -> np.ndarray:
    h = X.astype(net.weights[0].dtype, copy=False)
    for W, b, p in zip(net.weights[:-1], net.biases[:-1], net.dropouts):
        h = np.maximum(h @ W + b, 0.0) * (1.0 - p)
    return h @ net.weights[-1] + net.biases[-1]


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    return float(-_log_softmax(logits)[np.arange(len(y)), y].mean())


def loss_and_grads(net: MLP, X: np.ndarray, y: np.ndarray,
                   masks: Sequence[np.ndarray] | None = None):
    """Mean cross-entropy and its gradients for one batch.

    ``masks`` are the 0/1 dropout masks of the hidden layers; ``None`` means
    no units are dropped.
    """
    acts = [X]
    relu_on = []
    h = X
    for i, (W, b) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
        z = h @ W + b
        on = z > 0
        h = z * on
        if masks is not None:
            h = h * masks[i]
        relu_on.append(on)
        acts.append(h)
    logits = h @ net.weights[-1] + net.biases[-1]
    logp = _log_softmax(logits)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gW = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
            if masks is not None:
                delta = delta * masks[i - 1]
            delta = delta * relu_on[i - 1]
    return loss, gW, gb


def _adagrad_update(param, grad, accum, buf, lr: float) -> None:
    # in place: accum += g^2; param -= lr * g / (sqrt(accum) + eps)
    np.multiply(grad, grad, out=buf)
    accum += buf
    np.sqrt(accum, out=buf)
    buf += ADAGRAD_EPS
    np.divide(grad, buf, out=buf)
    buf *= lr
    param -= buf


def train_mlp(hidden: Sequence[int], dropouts: Sequence[float], seed: int,
              dataset: str = "spirals", epochs: int = 50, dtype=np.float32) -> dict:
    """Train and return final metrics; raises ``FloatingPointError`` on divergence."""
    Xtr, ytr, Xva, yva = load_dataset(dataset)
    rng = np.random.default_rng(seed)
    net = init_mlp(Xtr.shape[1], hidden, int(ytr.max()) + 1, dropouts, rng, dtype)
    Xtr = Xtr.astype(dtype)
    Xva = Xva.astype(dtype)
    acc_W = [np.zeros_like(W) for W in net.weights]
    acc_b = [np.zeros_like(b) for b in net.biases]
    tmp_W = [np.empty_like(W) for W in net.weights]
    tmp_b = [np.empty_like(b) for b in net.biases]
    lr = LEARNING_RATE
    best_val, wait = math.inf, 0
    n = len(ytr)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, BATCH_SIZE):
            idx = order[start : start + BATCH_SIZE]
            masks = [(rng.random((len(idx), w.shape[1])) >= p).astype(dtype)
                     for w, p in zip(net.weights[:-1], dropouts)]
            loss, gW, gb = loss_and_grads(net, Xtr[idx], ytr[idx], masks)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            for params, grads, accs, bufs in ((net.weights, gW, acc_W, tmp_W),
                                              (net.biases, gb, acc_b, tmp_b)):
                for p, g, a, t in zip(params, grads, accs, bufs):
                    _adagrad_update(p, g, a, t, lr)
        val_loss = cross_entropy(predict_logits(net, Xva), yva)
        if not math.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        if val_loss < best_val * (1.0 - PLATEAU_REL):
            best_val, wait = val_loss, 0
        else:
            wait += 1
            if wait >= PLATEAU_PATIENCE:
                lr *= DECAY
                wait = 0

    val_acc = float((predict_logits(net, Xva).argmax(1) == yva).mean())
    train_acc = float((predict_logits(net, Xtr).argmax(1) == ytr).mean())
    return {"val_accuracy": val_acc, "train_accuracy": train_acc,
            "val_loss": float(val_loss), "epochs_run": epochs, "final_lr": lr}


def parse_fc_config(config: Mapping) -> tuple[list[int], list[float], list[str]]:
    """Hidden sizes and dropout rates from an FC-stack configuration.

    ``fc_layers`` counts the output layer. Keys that do not describe the FC
    stack are returned as ignored.
    """
    if "fc_layers" not in config:
        raise KeyError("fc_layers")
    n_hidden = int(config["fc_layers"]) - 1
    hidden = [int(config[f"neurons_{i}"]) for i in range(1, n_hidden + 1)]
    dropouts = [float(config[f"dropout_{i}"]) for i in range(1, n_hidden + 1)]
    used = {"fc_layers"} | {f"neurons_{i}" for i in range(1, n_hidden + 1)} \
        | {f"dropout_{i}" for i in range(1, n_hidden + 1)}
    return hidden, dropouts, sorted(k for k in config if k not in used)


def eval_toy_trainer(config: Mapping, dataset: str = "spirals", seed: int = 0,
                     epochs: int = 50) -> EvalResponse:
    try:
        hidden, dropouts, ignored = parse_fc_config(config)
    except (KeyError, TypeError, ValueError) as exc:
        return EvalResponse.failed("config", detail=f"missing or bad FC parameter: {exc}")
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            metrics = train_mlp(hidden, dropouts, seed, dataset, epochs)
    except FloatingPointError as exc:
        return EvalResponse.failed("diverged", detail=str(exc))
    meta = {k: v for k, v in metrics.items() if k != "val_accuracy"}
    if ignored:
        meta["ignored"] = ignored
    return EvalResponse(metrics["val_accuracy"], "ok", meta)


class ToyTrainerEvaluator:
    """Evaluator backend; the training seed is fixed per instance so the
    objective is a deterministic function of the configuration."""

    def __init__(self, seed: int = 0, dataset: str = "spirals", cache: bool = True):
        self.seed = seed
        self.dataset = dataset
        self._cache: dict | None = {} if cache else None

    def __call__(self, request: EvalRequest) -> EvalResponse:
        key = (tuple(sorted(request.config.items())), request.epochs)
        if self._cache is not None and key in self._cache:
            return self._cache[key]
        resp = eval_toy_trainer(request.config, self.dataset, self.seed, request.epochs)
        if self._cache is not None and resp.ok:
            self._cache[key] = resp
        return resp
