"""Reduced 1D AlexNet-style classifier over extracted feature vectors.

Trunk: three conv layers, each followed by max pooling, with divisive
channel normalization after the first two pooling stages. Head: two
dropout-guarded hidden dense layers and a softmax projection over the
attack classes. Kernels shrink automatically when the input vector is
shorter than the default schedule expects.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import ndgrad as ng
from .seeding import substream

log = logging.getLogger(__name__)


@dataclass
class Hyperparameters:
    """SGD settings searched by the tuner. Defaults are the reference
    optimum used when tuning is skipped."""

    momentum: float = 0.9
    weight_decay: float = 0.005
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 32

    def validate(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return {"momentum": self.momentum, "weight_decay": self.weight_decay,
                "epochs": self.epochs, "learning_rate": self.learning_rate,
                "batch_size": self.batch_size}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        hp = cls(momentum=float(d["momentum"]), weight_decay=float(d["weight_decay"]),
                 epochs=int(d["epochs"]), learning_rate=float(d["learning_rate"]),
                 batch_size=int(d["batch_size"]))
        hp.validate()
        return hp


def _shrink_odd(kernel: int, length: int) -> int:
    """Largest odd kernel <= min(kernel, length); odd keeps lengths stable
    under same-padding."""
    k = min(kernel, length)
    if k % 2 == 0:
        k -= 1
    return max(k, 1)


def step_decayed_lr(epoch: int, total_epochs: int, initial_lr: float) -> float:
    """The configured rate is the *initial* one: drop tenfold at half the
    budget and a hundredfold at three quarters, so candidates that learn
    fast early still settle late."""
    fraction = (epoch - 1) / total_epochs
    if fraction < 0.5:
        return initial_lr
    if fraction < 0.75:
        return initial_lr * 0.1
    return initial_lr * 0.01


def clip_gradients(params, max_norm: float):
    """Scale the whole gradient down when its global norm exceeds
    `max_norm`; inert in healthy regimes, keeps explored high-rate
    candidates finite."""
    total = np.sqrt(sum(float((p.grad ** 2).sum())
                        for p in params if p.grad is not None))
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale


class AlexNetClassifier:
    def __init__(self, feature_dim: int, n_classes: int, seed: int = 0,
                 conv_channels=(32, 64, 64), kernel_sizes=(7, 5, 3),
                 dense_widths=(128, 64), dropout_rate: float = 0.5):
        if n_classes < 2:
            raise ValueError("need at least 2 classes")
        if feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        rng = substream(seed, "alexclf-init")
        self.feature_dim = feature_dim
        self.n_classes = n_classes
        self.dropout_rate = dropout_rate
        self.trained = False

        self.convs = []
        self.pools = []      # (window, stride) per stage
        length = feature_dim
        c_in = 1
        for stage, (c_out, kernel) in enumerate(zip(conv_channels, kernel_sizes)):
            k = _shrink_odd(kernel, length)
            if k != kernel:
                log.warning("conv stage %d: kernel %d shrunk to %d for length %d",
                            stage + 1, kernel, k, length)
            self.convs.append(ng.Conv1d(c_in, c_out, k, stride=1, padding=k // 2,
                                        bias=True, rng=rng))
            if length >= 2:
                self.pools.append((2, 2))
                length = (length - 2) // 2 + 1
            else:
                self.pools.append((1, 1))
            c_in = c_out
        self.lrn = ng.LocalResponseNorm()
        self.flat_dim = c_in * length

        self.dense1 = ng.Dense(self.flat_dim, dense_widths[0], rng=rng)
        self.dense2 = ng.Dense(dense_widths[0], dense_widths[1], rng=rng)
        self.softmax_head = ng.Dense(dense_widths[1], n_classes, rng=rng)

    def layer_census(self) -> dict:
        return {"conv": len(self.convs), "pool": len(self.pools), "lrn": 2,
                "dense": 2, "softmax": 1}

    def parameters(self):
        params = []
        for conv in self.convs:
            params += conv.parameters()
        params += self.dense1.parameters() + self.dense2.parameters()
        params += self.softmax_head.parameters()
        return params

    def logits(self, x: ng.Tensor, train: bool,
               rng: np.random.Generator | None = None) -> ng.Tensor:
        """x is [batch, 1, feature_dim]. Dropout guards the two hidden
        dense layers and applies only when training supplies an rng."""
        h = x
        for stage, (conv, (window, stride)) in enumerate(zip(self.convs, self.pools)):
            h = ng.relu(conv(h))
            h = ng.max_pool1d(h, window, stride)
            if stage < 2:
                h = self.lrn(h)
        h = h.reshape(h.shape[0], self.flat_dim)
        use_dropout = train and rng is not None
        if use_dropout:
            h = ng.dropout(h, self.dropout_rate, train, rng)
        h = ng.relu(self.dense1(h))
        if use_dropout:
            h = ng.dropout(h, self.dropout_rate, train, rng)
        h = ng.relu(self.dense2(h))
        return self.softmax_head(h)

    def state_arrays(self) -> dict:
        arrays = {}
        for i, conv in enumerate(self.convs):
            arrays[f"conv{i}.weight"] = conv.weight.data
            arrays[f"conv{i}.bias"] = conv.bias.data
        for name, layer in (("dense1", self.dense1), ("dense2", self.dense2),
                            ("head", self.softmax_head)):
            arrays[f"{name}.weight"] = layer.weight.data
            arrays[f"{name}.bias"] = layer.bias.data
        return arrays

    def load_state(self, arrays: dict):
        for i, conv in enumerate(self.convs):
            conv.weight.data = np.asarray(arrays[f"conv{i}.weight"], dtype=np.float64)
            conv.bias.data = np.asarray(arrays[f"conv{i}.bias"], dtype=np.float64)
        for name, layer in (("dense1", self.dense1), ("dense2", self.dense2),
                            ("head", self.softmax_head)):
            layer.weight.data = np.asarray(arrays[f"{name}.weight"], dtype=np.float64)
            layer.bias.data = np.asarray(arrays[f"{name}.bias"], dtype=np.float64)


def build_classifier(feature_dim: int, n_classes: int, seed: int = 0,
                     **kwargs) -> AlexNetClassifier:
    return AlexNetClassifier(feature_dim, n_classes, seed, **kwargs)


def train_classifier(clf: AlexNetClassifier, features: np.ndarray, labels: np.ndarray,
                     hp: Hyperparameters, seed: int = 0, clip_norm: float = 5.0
                     ) -> tuple[AlexNetClassifier, list[tuple[int, float, float]]]:
    """Mini-batch SGD on cross-entropy; returns the classifier plus a
    per-epoch (epoch, mean loss, train accuracy) trace.

    hp.learning_rate is the initial rate of a step-decay schedule; the
    global gradient norm is clipped at `clip_norm` (None disables)."""
    hp.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("features and labels disagree on row count")
    if features.shape[1] != clf.feature_dim:
        raise ValueError(f"classifier expects {clf.feature_dim} features, "
                         f"got {features.shape[1]}")
    n = features.shape[0]
    params = clf.parameters()
    opt = ng.SGD(params, hp.learning_rate, hp.momentum, hp.weight_decay)
    rng = substream(seed, "alexclf-train")
    trace = []
    for epoch in range(1, hp.epochs + 1):
        opt.state.learning_rate = step_decayed_lr(epoch, hp.epochs, hp.learning_rate)
        perm = rng.permutation(n)
        losses, hits, seen = [], 0, 0
        for start in range(0, n, hp.batch_size):
            idx = perm[start:start + hp.batch_size]
            xb = ng.Tensor(features[idx][:, None, :])
            yb = labels[idx]
            logits = clf.logits(xb, train=True, rng=rng)
            loss, probs = ng.softmax_cross_entropy(logits, yb)
            opt.zero_grad()
            loss.backward()
            if clip_norm is not None:
                clip_gradients(params, clip_norm)
            opt.step()
            losses.append(float(loss.data))
            hits += int((probs.argmax(axis=1) == yb).sum())
            seen += len(idx)
        trace.append((epoch, float(np.mean(losses)), hits / seen))
    clf.trained = True
    return clf, trace


def predict(clf: AlexNetClassifier, features: np.ndarray,
            batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode argmax classes and the full probability matrix.

    Ties resolve to the lowest class index.
    """
    if not clf.trained:
        raise ValueError("classifier has not been trained")
    features = np.asarray(features, dtype=np.float64)
    probs_parts = []
    for start in range(0, features.shape[0], batch_size):
        xb = ng.Tensor(features[start:start + batch_size][:, None, :])
        logits = clf.logits(xb, train=False)
        probs_parts.append(ng.softmax_probs(logits.data))
    probs = (np.concatenate(probs_parts, axis=0) if probs_parts
             else np.empty((0, clf.n_classes)))
    return probs.argmax(axis=1), probs
