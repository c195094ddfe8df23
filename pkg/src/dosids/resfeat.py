"""1D residual feature extractor.

A stem convolution feeds a stack of residual blocks; each block runs
three conv+batchnorm stages with two interior ReLUs, and adds a skip path
(identity, or a 1x1 projection when the channel count or stride changes).
Global average pooling turns the final map into a fixed-length feature
vector. Training attaches a throwaway softmax head, fits end to end, then
discards the head and freezes the trunk for feature extraction.
"""

import logging

import numpy as np

from . import ndgrad as ng
from .alexclf import _shrink_odd
from .seeding import substream

log = logging.getLogger(__name__)


class ResidualBlock:
    def __init__(self, c_in: int, c_out: int, stride: int = 1, rng=None):
        self.conv1 = ng.Conv1d(c_in, c_out, 3, stride=stride, padding=1, bias=False, rng=rng)
        self.bn1 = ng.BatchNorm1d(c_out)
        self.conv2 = ng.Conv1d(c_out, c_out, 3, stride=1, padding=1, bias=False, rng=rng)
        self.bn2 = ng.BatchNorm1d(c_out)
        self.conv3 = ng.Conv1d(c_out, c_out, 3, stride=1, padding=1, bias=False, rng=rng)
        self.bn3 = ng.BatchNorm1d(c_out)
        if stride != 1 or c_in != c_out:
            self.proj = ng.Conv1d(c_in, c_out, 1, stride=stride, padding=0, bias=False, rng=rng)
            self.bn_proj = ng.BatchNorm1d(c_out)
        else:
            self.proj = None
            self.bn_proj = None

    def __call__(self, x: ng.Tensor, train: bool) -> ng.Tensor:
        h = ng.relu(self.bn1(self.conv1(x), train))
        h = ng.relu(self.bn2(self.conv2(h), train))
        h = self.bn3(self.conv3(h), train)
        skip = x if self.proj is None else self.bn_proj(self.proj(x), train)
        return h + skip

    def parameters(self):
        params = (self.conv1.parameters() + self.bn1.parameters()
                  + self.conv2.parameters() + self.bn2.parameters()
                  + self.conv3.parameters() + self.bn3.parameters())
        if self.proj is not None:
            params += self.proj.parameters() + self.bn_proj.parameters()
        return params

    def _bn_items(self):
        items = [("bn1", self.bn1), ("bn2", self.bn2), ("bn3", self.bn3)]
        if self.bn_proj is not None:
            items.append(("bn_proj", self.bn_proj))
        return items


def residual_block_forward(block: ResidualBlock, x: ng.Tensor,
                           train: bool = False) -> ng.Tensor:
    return block(x, train)


class FeatureExtractor:
    """Frozen after training; extraction is then a pure function."""

    def __init__(self, input_features: int, blocks: int = 16, base_channels: int = 16,
                 channels: list[int] | None = None, feature_dim: int | None = None,
                 seed: int = 0, dropout_rate: float = 0.2):
        if blocks < 1:
            raise ValueError("need at least one residual block")
        if input_features < 1:
            raise ValueError("input_features must be >= 1")
        rng = substream(seed, "resfeat-init")
        self.input_features = input_features
        self.dropout_rate = dropout_rate
        self.frozen = False

        if channels is None:
            # width doubles every 4 blocks, downsampling at each doubling
            channels = [base_channels * (2 ** (i // 4)) for i in range(blocks)]
        if len(channels) != blocks:
            raise ValueError("channel schedule length must equal block count")

        stem_kernel = _shrink_odd(7, input_features)
        self.stem = ng.Conv1d(1, channels[0], stem_kernel, stride=1,
                              padding=stem_kernel // 2, bias=False, rng=rng)
        self.bn_stem = ng.BatchNorm1d(channels[0])

        self.blocks: list[ResidualBlock] = []
        c_in = channels[0]
        length = input_features
        for i, c_out in enumerate(channels):
            stride = 2 if (i > 0 and c_out != channels[i - 1] and length >= 2) else 1
            self.blocks.append(ResidualBlock(c_in, c_out, stride, rng))
            length = (length - 1) // stride + 1
            c_in = c_out

        self.trunk_dim = c_in
        if feature_dim is not None and feature_dim != self.trunk_dim:
            self.project = ng.Dense(self.trunk_dim, feature_dim, rng=rng)
            self.feature_dim = feature_dim
        else:
            self.project = None
            self.feature_dim = self.trunk_dim

    def parameters(self):
        params = self.stem.parameters() + self.bn_stem.parameters()
        for block in self.blocks:
            params += block.parameters()
        if self.project is not None:
            params += self.project.parameters()
        return params

    def forward(self, x: ng.Tensor, train: bool,
                rng: np.random.Generator | None = None) -> ng.Tensor:
        """[batch, 1, input_features] -> [batch, feature_dim].

        Dropout on the pooled vector applies only when training supplies
        an rng; gradient checks run train-mode batch norm without it."""
        h = ng.relu(self.bn_stem(self.stem(x), train))
        for block in self.blocks:
            h = block(h, train)
        pooled = ng.global_avg_pool1d(h).reshape(h.shape[0], self.trunk_dim)
        if train and rng is not None:
            pooled = ng.dropout(pooled, self.dropout_rate, train, rng)
        if self.project is not None:
            pooled = self.project(pooled)
        return pooled

    def state_arrays(self) -> dict:
        arrays = {"stem.weight": self.stem.weight.data,
                  "stem.bn.gamma": self.bn_stem.gamma.data,
                  "stem.bn.beta": self.bn_stem.beta.data}
        arrays.update(self.bn_stem.running.state_arrays("stem.bn"))
        for i, block in enumerate(self.blocks):
            p = f"block{i}"
            for j, conv in enumerate((block.conv1, block.conv2, block.conv3), start=1):
                arrays[f"{p}.conv{j}.weight"] = conv.weight.data
            if block.proj is not None:
                arrays[f"{p}.proj.weight"] = block.proj.weight.data
            for name, bn in block._bn_items():
                arrays[f"{p}.{name}.gamma"] = bn.gamma.data
                arrays[f"{p}.{name}.beta"] = bn.beta.data
                arrays.update(bn.running.state_arrays(f"{p}.{name}"))
        if self.project is not None:
            arrays["project.weight"] = self.project.weight.data
            arrays["project.bias"] = self.project.bias.data
        return arrays

    def load_state(self, arrays: dict):
        as64 = lambda key: np.asarray(arrays[key], dtype=np.float64)
        self.stem.weight.data = as64("stem.weight")
        self.bn_stem.gamma.data = as64("stem.bn.gamma")
        self.bn_stem.beta.data = as64("stem.bn.beta")
        self.bn_stem.running.load_state("stem.bn", arrays)
        for i, block in enumerate(self.blocks):
            p = f"block{i}"
            for j, conv in enumerate((block.conv1, block.conv2, block.conv3), start=1):
                conv.weight.data = as64(f"{p}.conv{j}.weight")
            if block.proj is not None:
                block.proj.weight.data = as64(f"{p}.proj.weight")
            for name, bn in block._bn_items():
                bn.gamma.data = as64(f"{p}.{name}.gamma")
                bn.beta.data = as64(f"{p}.{name}.beta")
                bn.running.load_state(f"{p}.{name}", arrays)
        if self.project is not None:
            self.project.weight.data = as64("project.weight")
            self.project.bias.data = as64("project.bias")


def build_feature_extractor(input_features: int, blocks: int = 16,
                            base_channels: int = 16,
                            channels: list[int] | None = None,
                            feature_dim: int | None = None,
                            seed: int = 0) -> FeatureExtractor:
    return FeatureExtractor(input_features, blocks, base_channels, channels,
                            feature_dim, seed)


def train_feature_extractor(f: FeatureExtractor, train_ds, epochs: int, lr: float,
                            seed: int = 0, batch_size: int = 32,
                            momentum: float = 0.9) -> FeatureExtractor:
    """Supervised pretraining with a temporary softmax head, then freeze.

    epochs=0 freezes the randomly initialized trunk (smoke mode). The
    per-epoch (loss, accuracy) trace lands on f.train_history.
    """
    if f.frozen:
        raise ValueError("extractor is already frozen")
    features = np.asarray(train_ds.features, dtype=np.float64)
    labels = np.asarray(train_ds.labels, dtype=np.int64)
    if features.shape[1] != f.input_features:
        raise ValueError(f"extractor was built for {f.input_features} features, "
                         f"dataset has {features.shape[1]}")
    classes = np.unique(labels)
    if epochs > 0 and classes.size < 2:
        raise ValueError("feature extractor training needs at least 2 classes")

    f.train_history = []
    if epochs > 0:
        from .alexclf import clip_gradients
        n_classes = int(labels.max()) + 1
        head = ng.Dense(f.feature_dim, n_classes, rng=substream(seed, "resfeat-head"))
        params = f.parameters() + head.parameters()
        opt = ng.SGD(params, lr, momentum=momentum)
        rng = substream(seed, "resfeat-train")
        n = features.shape[0]
        for epoch in range(1, epochs + 1):
            perm = rng.permutation(n)
            losses, hits, seen = [], 0, 0
            for start in range(0, n, batch_size):
                idx = perm[start:start + batch_size]
                xb = ng.Tensor(features[idx][:, None, :])
                yb = labels[idx]
                logits = head(f.forward(xb, train=True, rng=rng))
                loss, probs = ng.softmax_cross_entropy(logits, yb)
                opt.zero_grad()
                loss.backward()
                clip_gradients(params, 5.0)
                opt.step()
                losses.append(float(loss.data))
                hits += int((probs.argmax(axis=1) == yb).sum())
                seen += len(idx)
            f.train_history.append((epoch, float(np.mean(losses)), hits / seen))
    f.frozen = True
    return f


def extract_features(f: FeatureExtractor, d, batch_size: int = 256) -> np.ndarray:
    """Eval-mode forward over all rows; [rows, feature_dim], order kept."""
    if not f.frozen:
        raise ValueError("freeze the extractor (train_feature_extractor) first")
    features = np.asarray(d.features if hasattr(d, "features") else d, dtype=np.float64)
    if features.shape[1] != f.input_features:
        raise ValueError(f"extractor was built for {f.input_features} features, "
                         f"got {features.shape[1]}")
    parts = []
    for start in range(0, features.shape[0], batch_size):
        xb = ng.Tensor(features[start:start + batch_size][:, None, :])
        parts.append(f.forward(xb, train=False).data)
    return (np.concatenate(parts, axis=0) if parts
            else np.empty((0, f.feature_dim), dtype=np.float64))
