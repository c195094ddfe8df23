"""Train a per-class GAN on a minority blob and inspect what it samples.

The generator expands noise through transposed convolutions; the
discriminator pools strided convolutions into one probability. At
equilibrium the discriminator hovers near chance and the sampled rows
land on the training distribution.
"""

import numpy as np

from dosids.augment import (GanConfig, discriminator_accuracy, median_targets,
                            oversample_minorities, sample_rows, train_dcgan)
from dosids.flowdata import ColumnSchema, Dataset
from dosids.seeding import substream

rng = np.random.default_rng(3)
center = rng.uniform(0.3, 0.7, 12)
rows = np.clip(center + rng.normal(0, 0.05, (90, 12)), 0, 1)
train, probe = rows[:70], rows[70:]

print("== adversarial training on one minority class (70 rows) ==")
cfg = GanConfig(epochs=40, batch_size=8, seed=0)
pair = train_dcgan(train, cfg)
for epoch in (0, 9, 19, 29, 39):
    g_loss, d_loss = pair.loss_history[epoch]
    print(f"epoch {epoch + 1:>2}: generator loss {g_loss:.3f}  discriminator loss {d_loss:.3f}")
print(f"(equilibrium reference: ln 2 = {np.log(2):.3f}, 2 ln 2 = {2 * np.log(2):.3f})")

acc = discriminator_accuracy(pair, probe, substream(0, "probe"))
print(f"discriminator real-vs-fake accuracy on held-out rows: {acc:.2f} (chance = 0.5)")

print("\n== sample quality ==")
synthetic = sample_rows(pair, 300, substream(0, "sample"))
print(f"real mean      {np.round(train.mean(axis=0)[:6], 3)} ...")
print(f"synthetic mean {np.round(synthetic.mean(axis=0)[:6], 3)} ...")
print(f"real std  {train.std(axis=0).mean():.3f}   synthetic std {synthetic.std(axis=0).mean():.3f}")

print("\n== rebalancing a 5-class dataset ==")
counts = [260, 240, 220, 24, 18]
feats, labels = [], []
for c, n in enumerate(counts):
    c_center = rng.uniform(0.25, 0.75, 12)
    feats.append(np.clip(c_center + rng.normal(0, 0.05, (n, 12)), 0, 1))
    labels.append(np.full(n, c))
schema = [ColumnSchema(f"f{i}", "numeric") for i in range(12)]
schema.append(ColumnSchema("label", "label"))
ds = Dataset(np.concatenate(feats), np.concatenate(labels).astype(np.int64),
             [f"class{i}" for i in range(5)], schema)

targets = median_targets(ds)
print("census before:", dict(zip(ds.class_names, map(int, ds.class_counts()))))
print("targets (raise to median):", {ds.class_names[c]: n for c, n in targets.items()})
augmented = oversample_minorities(ds, targets, GanConfig(epochs=30, batch_size=8, seed=1))
print("census after: ", dict(zip(augmented.class_names, map(int, augmented.class_counts()))))
print("original rows untouched as a prefix:",
      bool(np.array_equal(augmented.features[:ds.n_rows], ds.features)))
