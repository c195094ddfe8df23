"""Per-class adversarial oversampling of minority flow classes.

One generator/discriminator pair trains on the normalized rows of a
single class; sampling the trained generator then tops the class up to
its target count. Rows are treated as one-channel sequences so both
networks are 1D-convolutional: the generator expands a noise vector
through a dense stem and strided transposed convolutions, the
discriminator contracts through strided convolutions into a global
pooled probability. Classes too small to train adversarially fall back
to duplicate-with-jitter sampling.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import ndgrad as ng
from .flowdata import Dataset
from .seeding import substream, substream_seed

log = logging.getLogger(__name__)

MIN_GAN_ROWS = 4
PROB_FLOOR = 1e-12
JITTER_SIGMA = 0.01


@dataclass
class GanConfig:
    noise_dim: int = 32
    generator_channels: tuple = (32, 16, 8)
    discriminator_channels: tuple = (8, 16)
    leaky_slope: float = 0.2
    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 60
    seed: int = 0

    def validate(self):
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _conv_kernel(length: int) -> int:
    # stride-2, padding-1 stages need kernel <= length + 2
    return min(4, length + 2)


def _conv_out(length: int, kernel: int) -> int:
    return (length + 2 - kernel) // 2 + 1


class Generator:
    """noise [B, noise_dim] -> rows [B, n_features] in (0, 1)."""

    def __init__(self, n_features: int, cfg: GanConfig, rng):
        c0, c1, c2 = cfg.generator_channels
        self.n_features = n_features
        self.slope = cfg.leaky_slope
        self.base_len = max(1, math.ceil(n_features / 4))
        self.base_channels = c0
        self.stem = ng.Dense(cfg.noise_dim, c0 * self.base_len, rng=rng)
        self.bn0 = ng.BatchNorm1d(c0)
        self.up1 = ng.ConvTranspose1d(c0, c1, 4, stride=2, padding=1, bias=False, rng=rng)
        self.bn1 = ng.BatchNorm1d(c1)
        self.up2 = ng.ConvTranspose1d(c1, c2, 4, stride=2, padding=1, bias=False, rng=rng)
        self.bn2 = ng.BatchNorm1d(c2)
        self.head = ng.Conv1d(c2, 1, 3, stride=1, padding=1, bias=True, rng=rng)

    def __call__(self, z: ng.Tensor, train: bool) -> ng.Tensor:
        b = z.shape[0]
        h = self.stem(z).reshape(b, self.base_channels, self.base_len)
        h = ng.leaky_relu(self.bn0(h, train), self.slope)
        h = ng.leaky_relu(self.bn1(self.up1(h), train), self.slope)
        h = ng.leaky_relu(self.bn2(self.up2(h), train), self.slope)
        y = ng.tanh(self.head(h))                      # [B, 1, 4 * base_len]
        y = y[:, 0, :self.n_features]
        return (y + 1.0) * 0.5                         # (-1, 1) -> (0, 1)

    def parameters(self):
        return (self.stem.parameters() + self.bn0.parameters()
                + self.up1.parameters() + self.bn1.parameters()
                + self.up2.parameters() + self.bn2.parameters()
                + self.head.parameters())

    def _pieces(self):
        return {"stem": self.stem, "bn0": self.bn0, "up1": self.up1, "bn1": self.bn1,
                "up2": self.up2, "bn2": self.bn2, "head": self.head}


class Discriminator:
    """rows [B, n_features] -> real-vs-fake probability [B]."""

    def __init__(self, n_features: int, cfg: GanConfig, rng):
        c1, c2 = cfg.discriminator_channels
        self.n_features = n_features
        self.slope = cfg.leaky_slope
        k1 = _conv_kernel(n_features)
        len1 = _conv_out(n_features, k1)
        k2 = _conv_kernel(len1)
        len2 = _conv_out(len1, k2)
        k3 = _conv_kernel(len2)
        # no batch norm on the entry and output convs
        self.conv1 = ng.Conv1d(1, c1, k1, stride=2, padding=1, bias=True, rng=rng)
        self.conv2 = ng.Conv1d(c1, c2, k2, stride=2, padding=1, bias=False, rng=rng)
        self.bn2 = ng.BatchNorm1d(c2)
        self.conv3 = ng.Conv1d(c2, 1, k3, stride=2, padding=1, bias=True, rng=rng)

    def __call__(self, x: ng.Tensor, train: bool) -> ng.Tensor:
        b = x.shape[0]
        h = x.reshape(b, 1, self.n_features)
        h = ng.leaky_relu(self.conv1(h), self.slope)
        h = ng.leaky_relu(self.bn2(self.conv2(h), train), self.slope)
        h = self.conv3(h)
        pooled = ng.global_avg_pool1d(h).reshape(b)    # pooling stands in for a dense head
        return ng.sigmoid(pooled)

    def parameters(self):
        return (self.conv1.parameters() + self.conv2.parameters()
                + self.bn2.parameters() + self.conv3.parameters())

    def _pieces(self):
        return {"conv1": self.conv1, "conv2": self.conv2, "bn2": self.bn2,
                "conv3": self.conv3}


@dataclass
class GanPair:
    generator: Generator
    discriminator: Discriminator
    config: GanConfig
    n_features: int
    loss_history: list[tuple[float, float]] = field(default_factory=list)  # (gen, disc)


def generator_forward(pair: GanPair, z, train: bool = False) -> ng.Tensor:
    return pair.generator(ng.as_tensor(z), train)


def discriminator_forward(pair: GanPair, x, train: bool = False) -> ng.Tensor:
    return pair.discriminator(ng.as_tensor(x), train)


def generator_loss(d_of_fake) -> ng.Tensor:
    """Non-saturating: mean of -log D(G(z))."""
    p = ng.as_tensor(d_of_fake).clip(PROB_FLOOR, 1.0)
    return (-p.log()).mean()


def discriminator_loss(d_of_real, d_of_fake) -> ng.Tensor:
    """Mean of -log D(x) - log(1 - D(G(z)))."""
    p_real = ng.as_tensor(d_of_real).clip(PROB_FLOOR, 1.0)
    p_fake_inv = (1.0 - ng.as_tensor(d_of_fake)).clip(PROB_FLOOR, 1.0)
    return ((-p_real.log()) + (-p_fake_inv.log())).mean()


def train_dcgan(rows: np.ndarray, cfg: GanConfig) -> GanPair:
    """Alternating single-step updates, one discriminator then one
    generator step per batch, plain SGD on both."""
    cfg.validate()
    rows = np.asarray(rows, dtype=np.float64)
    n, n_features = rows.shape
    if n < MIN_GAN_ROWS:
        raise ValueError(f"class has {n} rows; adversarial training needs "
                         f">= {MIN_GAN_ROWS}")
    batch = cfg.batch_size if n >= 2 * cfg.batch_size else max(2, n // 2)

    rng_init = substream(cfg.seed, "gan-init")
    gen = Generator(n_features, cfg, rng_init)
    disc = Discriminator(n_features, cfg, rng_init)
    pair = GanPair(generator=gen, discriminator=disc, config=cfg, n_features=n_features)
    opt_g = ng.SGD(gen.parameters(), cfg.learning_rate)
    opt_d = ng.SGD(disc.parameters(), cfg.learning_rate)

    rng = substream(cfg.seed, "gan-train")
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        g_losses, d_losses = [], []
        for start in range(0, n - batch + 1, batch):
            xb = ng.Tensor(rows[perm[start:start + batch]])
            z = ng.Tensor(rng.standard_normal((batch, cfg.noise_dim)))

            fake = gen(z, train=True)
            d_real = disc(xb, train=True)
            d_fake = disc(fake.detach(), train=True)
            loss_d = discriminator_loss(d_real, d_fake)
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

            loss_g = generator_loss(disc(gen(z, train=True), train=True))
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            d_losses.append(float(loss_d.data))
            g_losses.append(float(loss_g.data))
        pair.loss_history.append((float(np.mean(g_losses)), float(np.mean(d_losses))))
    return pair


def sample_rows(pair: GanPair, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` synthetic rows from the trained generator (eval mode)."""
    if count <= 0:
        return np.empty((0, pair.n_features), dtype=np.float64)
    z = ng.Tensor(rng.standard_normal((count, pair.config.noise_dim)))
    out = pair.generator(z, train=False).data
    return np.clip(out, 0.0, 1.0)


def jitter_rows(rows: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Duplicate rows cyclically and add small Gaussian noise; the
    fallback for classes too small to train a GAN on."""
    base = rows[np.arange(count) % rows.shape[0]]
    noisy = base + rng.normal(0.0, JITTER_SIGMA, base.shape)
    return np.clip(noisy, 0.0, 1.0)


def discriminator_accuracy(pair: GanPair, real_rows: np.ndarray,
                           rng: np.random.Generator) -> float:
    """Real-vs-fake accuracy on held-out rows plus fresh samples; an
    over- or under-powered discriminator drifts away from 0.5."""
    real = np.asarray(real_rows, dtype=np.float64)
    fake = sample_rows(pair, real.shape[0], rng)
    p_real = discriminator_forward(pair, real, train=False).data
    p_fake = discriminator_forward(pair, fake, train=False).data
    return float(((p_real > 0.5).sum() + (p_fake <= 0.5).sum()) / (2.0 * real.shape[0]))


def median_targets(d: Dataset) -> dict[int, int]:
    """Default oversampling policy: raise every below-median class to the
    median class count."""
    counts = d.class_counts()
    median = int(np.median(counts))
    return {c: median for c in range(len(counts)) if counts[c] < median}


def _normalize_targets(d: Dataset, targets: dict) -> dict[int, int]:
    resolved: dict[int, int] = {}
    for key, count in targets.items():
        if isinstance(key, str):
            if key not in d.class_names:
                raise ValueError(f"unknown class name {key!r}")
            key = d.class_names.index(key)
        resolved[int(key)] = int(count)
    return resolved


def oversample_minorities(d: Dataset, targets: dict, cfg: GanConfig) -> Dataset:
    """Append generated rows until each targeted class reaches its count.

    Original rows stay untouched, in order, as a prefix; synthetic rows
    append in ascending class order. Per-class seeds derive from
    cfg.seed, so reruns are identical.
    """
    targets = _normalize_targets(d, targets)
    counts = d.class_counts()
    for cls, target in targets.items():
        if target < counts[cls]:
            raise ValueError(f"target {target} for class {d.class_names[cls]!r} "
                             f"is below its current count {counts[cls]}")
    synth_feats, synth_labels = [], []
    for cls in sorted(targets):
        need = targets[cls] - counts[cls]
        if need == 0:
            continue
        rows = d.features[d.labels == cls]
        class_seed = substream_seed(cfg.seed, "class", cls)
        if rows.shape[0] < MIN_GAN_ROWS:
            log.warning("class %r has %d rows; using duplicate-with-jitter "
                        "oversampling instead of a GAN",
                        d.class_names[cls], rows.shape[0])
            synth = jitter_rows(rows, need, substream(class_seed, "jitter"))
        else:
            pair = train_dcgan(rows, replace(cfg, seed=class_seed))
            synth = sample_rows(pair, need, substream(class_seed, "sample"))
        synth_feats.append(synth)
        synth_labels.append(np.full(need, cls, dtype=np.int64))
    if not synth_feats:
        return d
    features = np.concatenate([d.features] + synth_feats, axis=0)
    labels = np.concatenate([d.labels] + synth_labels)
    return replace(d, features=features, labels=labels)
