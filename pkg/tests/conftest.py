"""Shared synthetic-data builders for the test suite."""

import numpy as np
import pytest

from dosids.flowdata import ColumnSchema, Dataset


def cluster_dataset(seed, counts, n_features=12, sigma=0.05, spread=(0.2, 0.8),
                    shuffle=True) -> Dataset:
    """Gaussian blobs in [0,1]^F, one per class, `counts[c]` rows each."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(spread[0], spread[1], (len(counts), n_features))
    feats, labels = [], []
    for c, n in enumerate(counts):
        feats.append(np.clip(centers[c] + rng.normal(0, sigma, (n, n_features)), 0, 1))
        labels.append(np.full(n, c, dtype=np.int64))
    features = np.concatenate(feats)
    labels = np.concatenate(labels)
    if shuffle:
        perm = rng.permutation(len(labels))
        features, labels = features[perm], labels[perm]
    schema = [ColumnSchema(f"f{i}", "numeric") for i in range(n_features)]
    schema.append(ColumnSchema("label", "label"))
    return Dataset(features=features, labels=labels,
                   class_names=[f"c{i}" for i in range(len(counts))], schema=schema)


def imbalanced_overlap_dataset(seed, n_features=12, sigma=0.07, gap=3.0,
                               majority=320, minority=53) -> Dataset:
    """Three majority blobs plus two 5%-prevalence minority blobs, each
    sitting `gap` noise-widths away from a majority center so that class
    priors, not separability, drive minority errors."""
    rng = np.random.default_rng(seed)
    maj_centers = rng.uniform(0.25, 0.75, (3, n_features))
    centers = list(maj_centers)
    for m in range(2):
        direction = rng.normal(0, 1, n_features)
        direction /= np.linalg.norm(direction)
        centers.append(maj_centers[m] + gap * sigma * direction)
    counts = [majority] * 3 + [minority] * 2
    feats, labels = [], []
    for c, n in enumerate(counts):
        feats.append(np.clip(centers[c] + rng.normal(0, sigma, (n, n_features)), 0, 1))
        labels.append(np.full(n, c, dtype=np.int64))
    features = np.concatenate(feats)
    labels = np.concatenate(labels)
    perm = rng.permutation(len(labels))
    schema = [ColumnSchema(f"f{i}", "numeric") for i in range(n_features)]
    schema.append(ColumnSchema("label", "label"))
    return Dataset(features=features[perm], labels=labels[perm],
                   class_names=[f"c{i}" for i in range(5)], schema=schema)


FLOW_CSV = """src_ip,duration,proto,bytes,flags,const_col,label
10.0.0.1,1.5,tcp,1200,A,0,normal
10.0.0.2,0.7,udp,300,B,0,attack
10.0.0.3,2.2,tcp,900,A,0,normal
10.0.0.4,0.1,icmp,80,C,0,attack
10.0.0.5,1.1,udp,450,B,0,normal
10.0.0.6,3.0,tcp,2100,A,0,attack
10.0.0.7,0.9,tcp,700,C,0,normal
10.0.0.8,1.8,udp,1500,B,0,attack
"""


@pytest.fixture
def flow_csv(tmp_path):
    path = tmp_path / "flows.csv"
    path.write_text(FLOW_CSV, encoding="utf-8")
    return path
