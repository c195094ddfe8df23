"""Walk a tiny flow CSV through the full cleaning path.

Builds a file with the usual pathologies (socket columns, a constant
column, a categorical protocol field), then shows each transformation:
drop, split, one-hot encode, min-max normalize.
"""

import os
import tempfile

import numpy as np

from dosids import flowdata as fd

rng = np.random.default_rng(42)

rows = []
for i in range(120):
    attack = rng.random() < 0.3
    duration = rng.exponential(2.0) + (1.5 if attack else 0.0)
    size = rng.normal(900 if attack else 500, 120)
    proto = rng.choice(["tcp", "udp", "icmp"], p=[0.6, 0.3, 0.1])
    label = "dos" if attack else "normal"
    rows.append(f"10.0.0.{i % 200},{duration:.4f},{size:.1f},{proto},0,{label}")

csv_path = os.path.join(tempfile.mkdtemp(), "flows.csv")
with open(csv_path, "w") as fh:
    fh.write("src_ip,duration,bytes,proto,const_flag,label\n")
    fh.write("\n".join(rows) + "\n")

print("== load ==")
ds = fd.load_flow_csv(csv_path, label_column="label")
print(f"rows={ds.n_rows} features={ds.n_features} classes={ds.class_names}")
for col in ds.schema:
    print(f"  {col.name:<12} {col.kind}" + (f" categories={col.categories}" if col.categories else ""))

print("\n== drop socket + constant columns ==")
ds = fd.drop_socket_and_constant_features(ds, ["src_ip"])
print("retained:", ds.feature_names())
print("audit kinds:", {c.name: c.kind for c in ds.schema if c.kind in ("socket", "constant")})

print("\n== stratified 70/30 split ==")
train, test = fd.stratified_split(ds, 0.7, seed=7)
print(f"train census={dict(zip(train.class_names, train.class_counts()))}")
print(f"test  census={dict(zip(test.class_names, test.class_counts()))}")

print("\n== one-hot encode (categories fitted on train only) ==")
categories = fd.fit_categories(train)
print("fitted:", categories)
train = fd.one_hot_encode(train, categories)
test = fd.one_hot_encode(test, categories)
print("encoded columns:", train.feature_names())

print("\n== min-max normalize (ranges fitted on train only) ==")
params = fd.min_max_fit(train)
train = fd.min_max_apply(train, params)
test = fd.min_max_apply(test, params)
print("train per-column min:", np.round(train.features.min(axis=0), 3))
print("train per-column max:", np.round(train.features.max(axis=0), 3))
print("test values stay clamped to [0,1]:",
      bool(test.features.min() >= 0.0 and test.features.max() <= 1.0))
