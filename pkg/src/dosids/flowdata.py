"""Flow-record CSV ingestion and preprocessing.

The cleaning order is: load -> drop socket/constant columns -> split ->
fit category lists and min-max ranges on the training split only ->
encode and normalize both splits. Until one-hot encoding runs, each
categorical column occupies one matrix slot holding a float code that
indexes into the schema's category list; numeric columns hold their
values directly.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

KIND_NUMERIC = "numeric"
KIND_CATEGORICAL = "categorical"
KIND_LABEL = "label"
KIND_SOCKET = "socket"
KIND_CONSTANT = "constant"

RETAINED_KINDS = (KIND_NUMERIC, KIND_CATEGORICAL)

# Column names the two benchmark flow layouts use for addresses, ports,
# flow ids and timestamps; always overridable by the caller.
DEFAULT_SOCKET_COLUMNS = [
    "srcip", "sport", "dstip", "dsport", "stime", "ltime",
    "Flow ID", "Source IP", "Source Port", "Destination IP",
    "Destination Port", "Timestamp",
]


@dataclass
class ColumnSchema:
    name: str
    kind: str
    categories: list[str] | None = None


@dataclass
class MinMaxParams:
    columns: list[str]
    x_mn: np.ndarray
    x_mx: np.ndarray


@dataclass
class Dataset:
    """Immutable by convention: every transformation returns a new one."""

    features: np.ndarray            # float64 [rows, retained columns]
    labels: np.ndarray              # int64 [rows]
    class_names: list[str]
    schema: list[ColumnSchema]      # all input columns, dropped ones marked
    normalization: MinMaxParams | None = None

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def retained(self) -> list[ColumnSchema]:
        return [c for c in self.schema if c.kind in RETAINED_KINDS]

    def feature_names(self) -> list[str]:
        return [c.name for c in self.retained()]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.class_names))


def _parse_finite(value: str) -> float | None:
    try:
        v = float(value)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_flow_csv(path, label_column: str) -> Dataset:
    """Read a header-ed CSV into a raw Dataset.

    A column is numeric if every value parses as a finite float,
    categorical otherwise. Rows with the wrong field count are rejected;
    more than 1% rejections fails the load.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header {header}")
        width = len(header)
        rows, rejected = [], 0
        for line in reader:
            if len(line) != width:
                rejected += 1
                continue
            rows.append(line)
    total = len(rows) + rejected
    if rejected:
        log.warning("%s: rejected %d/%d malformed rows", path, rejected, total)
    if total == 0:
        raise ValueError(f"{path}: no data rows")
    if rejected / total > 0.01:
        raise ValueError(f"{path}: {rejected}/{total} rows malformed (>1%)")

    label_idx = header.index(label_column)
    class_names: list[str] = []
    class_codes: dict[str, int] = {}
    labels = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        value = row[label_idx].strip()
        if value not in class_codes:
            class_codes[value] = len(class_names)
            class_names.append(value)
        labels[r] = class_codes[value]

    schema: list[ColumnSchema] = []
    columns: list[np.ndarray] = []
    for c, name in enumerate(header):
        if c == label_idx:
            schema.append(ColumnSchema(name, KIND_LABEL))
            continue
        raw = [row[c].strip() for row in rows]
        parsed = [_parse_finite(v) for v in raw]
        if all(p is not None for p in parsed):
            schema.append(ColumnSchema(name, KIND_NUMERIC))
            columns.append(np.array(parsed, dtype=np.float64))
        else:
            categories: list[str] = []
            codes: dict[str, int] = {}
            col = np.empty(len(raw), dtype=np.float64)
            for r, v in enumerate(raw):
                if v not in codes:
                    codes[v] = len(categories)
                    categories.append(v)
                col[r] = codes[v]
            schema.append(ColumnSchema(name, KIND_CATEGORICAL, categories))
            columns.append(col)

    features = (np.column_stack(columns) if columns
                else np.empty((len(rows), 0), dtype=np.float64))
    return Dataset(features=features, labels=labels, class_names=class_names, schema=schema)


def drop_socket_and_constant_features(d: Dataset, socket_names: list[str]) -> Dataset:
    """Remove socket-named columns and columns constant across all rows.

    Dropped columns stay in the schema with their kind flipped to
    socket/constant for audit. Idempotent: a second pass finds nothing.
    """
    known = {c.name for c in d.schema}
    for name in socket_names:
        if name not in known:
            log.warning("socket column %r not present, ignoring", name)
    socket_set = set(socket_names)

    new_schema: list[ColumnSchema] = []
    keep_slots: list[int] = []
    slot = 0
    for col in d.schema:
        if col.kind not in RETAINED_KINDS:
            new_schema.append(col)
            continue
        values = d.features[:, slot]
        if col.name in socket_set:
            new_schema.append(replace(col, kind=KIND_SOCKET))
        elif d.n_rows > 0 and np.all(values == values[0]):
            new_schema.append(replace(col, kind=KIND_CONSTANT))
        else:
            new_schema.append(col)
            keep_slots.append(slot)
        slot += 1

    features = d.features[:, keep_slots] if keep_slots else np.empty((d.n_rows, 0))
    return replace(d, features=features, schema=new_schema)


def fit_categories(train: Dataset) -> dict[str, list[str]]:
    """Category list per categorical column, ordered by first appearance
    in the training rows (not the full file)."""
    fitted: dict[str, list[str]] = {}
    slot = 0
    for col in train.schema:
        if col.kind not in RETAINED_KINDS:
            continue
        if col.kind == KIND_CATEGORICAL:
            seen: list[str] = []
            seen_set = set()
            for code in train.features[:, slot]:
                value = col.categories[int(code)]
                if value not in seen_set:
                    seen_set.add(value)
                    seen.append(value)
            fitted[col.name] = seen
        slot += 1
    return fitted


def one_hot_encode(d: Dataset, categories: dict[str, list[str]] | None = None) -> Dataset:
    """Replace each categorical column with one 0/1 column per category.

    `categories` should come from fit_categories on the training split;
    omitted, it is fitted on `d` itself. Values outside the fitted list
    encode as an all-zero block (logged).
    """
    if categories is None:
        categories = fit_categories(d)
    new_schema: list[ColumnSchema] = []
    blocks: list[np.ndarray] = []
    slot = 0
    for col in d.schema:
        if col.kind not in RETAINED_KINDS:
            new_schema.append(col)
            continue
        if col.kind == KIND_NUMERIC:
            new_schema.append(col)
            blocks.append(d.features[:, slot:slot + 1])
        else:
            cats = categories.get(col.name)
            if cats is None:
                raise ValueError(f"no fitted categories for column {col.name!r}")
            row_values = [col.categories[int(code)] for code in d.features[:, slot]]
            block = np.zeros((d.n_rows, len(cats)), dtype=np.float64)
            index = {v: j for j, v in enumerate(cats)}
            unseen = 0
            for r, v in enumerate(row_values):
                j = index.get(v)
                if j is None:
                    unseen += 1
                else:
                    block[r, j] = 1.0
            if unseen:
                log.warning("column %r: %d rows with categories unseen at fit "
                            "time encoded as all-zeros", col.name, unseen)
            blocks.append(block)
            for cat in cats:
                new_schema.append(ColumnSchema(f"{col.name}={cat}", KIND_NUMERIC))
        slot += 1
    features = (np.concatenate(blocks, axis=1) if blocks
                else np.empty((d.n_rows, 0), dtype=np.float64))
    return replace(d, features=features, schema=new_schema)


def min_max_fit(train: Dataset) -> MinMaxParams:
    if train.n_rows == 0:
        raise ValueError("cannot fit normalization on an empty dataset")
    return MinMaxParams(columns=train.feature_names(),
                        x_mn=train.features.min(axis=0),
                        x_mx=train.features.max(axis=0))


def min_max_apply(d: Dataset, p: MinMaxParams) -> Dataset:
    """Map every value through (x - min) / (max - min) into [0, 1].

    Zero-range columns map to 0.0; values outside the fitted range (test
    rows) clamp to the interval ends.
    """
    if d.feature_names() != p.columns:
        raise ValueError("normalization params were fitted on a different schema")
    span = p.x_mx - p.x_mn
    safe = np.where(span > 0, span, 1.0)
    scaled = (d.features - p.x_mn) / safe
    scaled[:, span == 0] = 0.0
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return replace(d, features=scaled, normalization=p)


def minmax_invert(p: MinMaxParams, normalized: np.ndarray) -> np.ndarray:
    """Inverse affine map of min_max_apply (exact for in-range values)."""
    return normalized * (p.x_mx - p.x_mn) + p.x_mn


def stratified_split(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per-class random split; every class lands within rounding distance
    of `train_fraction`. Row order inside each part keeps the input order."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    counts = d.class_counts()
    tiny = [d.class_names[c] for c in range(len(counts)) if counts[c] < 2]
    if tiny:
        raise ValueError(f"classes with fewer than 2 rows cannot be split: {tiny}")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for c in range(len(d.class_names)):
        members = np.flatnonzero(d.labels == c)
        n_train = int(round(len(members) * train_fraction))
        n_train = min(max(n_train, 1), len(members) - 1)
        perm = rng.permutation(len(members))
        train_idx.append(np.sort(members[perm[:n_train]]))
        test_idx.append(np.sort(members[perm[n_train:]]))
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return (replace(d, features=d.features[tr], labels=d.labels[tr]),
            replace(d, features=d.features[te], labels=d.labels[te]))


def subsample(d: Dataset, max_rows: int, seed: int) -> Dataset:
    """Stratified row-count cap used by the desk preset."""
    if d.n_rows <= max_rows:
        return d
    rng = np.random.default_rng(seed)
    counts = d.class_counts()
    frac = max_rows / d.n_rows
    keep: list[np.ndarray] = []
    for c in range(len(d.class_names)):
        members = np.flatnonzero(d.labels == c)
        n_keep = max(2, int(round(counts[c] * frac))) if counts[c] >= 2 else counts[c]
        perm = rng.permutation(len(members))
        keep.append(members[perm[:n_keep]])
    idx = np.sort(np.concatenate(keep))
    return replace(d, features=d.features[idx], labels=d.labels[idx])


def write_clean_csv(d: Dataset, path):
    """Dump the post-preprocessing matrix plus the label as class names."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(d.feature_names() + ["label"])
        for r in range(d.n_rows):
            writer.writerow([repr(float(v)) for v in d.features[r]]
                            + [d.class_names[d.labels[r]]])
