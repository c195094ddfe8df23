"""Preprocessing contracts: parsing, column dropping, encoding,
normalization, and the stratified split."""

import logging

import numpy as np
import pytest

from dosids import flowdata as fd
from conftest import cluster_dataset


def test_load_basic_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c,label\n1,2,3,x\n4,5,6,y\n7,8,9,x\n1,1,1,y\n")
    ds = fd.load_flow_csv(path, "label")
    assert ds.n_rows == 4 and ds.n_features == 3
    assert ds.class_names == ["x", "y"]
    assert np.array_equal(ds.labels, [0, 1, 0, 1])


def test_load_two_label_values(flow_csv):
    ds = fd.load_flow_csv(flow_csv, "label")
    assert len(ds.class_names) == 2


def test_load_ten_class_labels(tmp_path):
    names = ["Normal", "Exploits", "Reconnaissance", "DoS", "Generic",
             "Shellcode", "Fuzzers", "Backdoors", "Worms", "Analysis"]
    lines = ["f1,attack_cat"] + [f"{i},{names[i % 10]}" for i in range(40)]
    path = tmp_path / "unsw.csv"
    path.write_text("\n".join(lines) + "\n")
    ds = fd.load_flow_csv(path, "attack_cat")
    assert len(ds.class_names) == 10


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        fd.load_flow_csv(tmp_path / "nope.csv", "label")


def test_load_missing_label_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="label"):
        fd.load_flow_csv(path, "label")


def test_load_rejects_malformed_rows_over_threshold(tmp_path):
    path = tmp_path / "bad.csv"
    rows = ["a,label"] + ["1,x"] * 50 + ["1,2,3"]  # 1 bad of 51 -> ~2%
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(ValueError, match="malformed"):
        fd.load_flow_csv(path, "label")


def test_load_tolerates_malformed_rows_under_threshold(tmp_path):
    path = tmp_path / "ok.csv"
    rows = ["a,label"] + ["1,x"] * 60 + ["2,y"] * 60 + ["1,2,3"]
    path.write_text("\n".join(rows) + "\n")
    ds = fd.load_flow_csv(path, "label")
    assert ds.n_rows == 120


def test_kind_inference_nonfinite_is_categorical(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,label\n1,Infinity,x\n2,3,y\n")
    ds = fd.load_flow_csv(path, "label")
    kinds = {c.name: c.kind for c in ds.schema}
    assert kinds["a"] == fd.KIND_NUMERIC
    assert kinds["b"] == fd.KIND_CATEGORICAL


def test_drop_socket_and_constant(flow_csv):
    ds = fd.load_flow_csv(flow_csv, "label")
    out = fd.drop_socket_and_constant_features(ds, ["src_ip"])
    kinds = {c.name: c.kind for c in out.schema}
    assert kinds["src_ip"] == fd.KIND_SOCKET
    assert kinds["const_col"] == fd.KIND_CONSTANT
    assert "src_ip" not in out.feature_names()
    assert "const_col" not in out.feature_names()
    assert out.n_features == ds.n_features - 2


def test_drop_unknown_socket_name_warns(flow_csv, caplog):
    ds = fd.load_flow_csv(flow_csv, "label")
    with caplog.at_level(logging.WARNING):
        out = fd.drop_socket_and_constant_features(ds, ["no_such_column"])
    assert "no_such_column" in caplog.text
    assert out.n_features == ds.n_features - 1  # constant column still goes


def test_drop_is_idempotent(flow_csv):
    ds = fd.load_flow_csv(flow_csv, "label")
    once = fd.drop_socket_and_constant_features(ds, ["src_ip"])
    twice = fd.drop_socket_and_constant_features(once, ["src_ip"])
    assert np.array_equal(once.features, twice.features)
    assert [c.kind for c in once.schema] == [c.kind for c in twice.schema]


def test_drop_nothing_is_identity():
    ds = cluster_dataset(0, [10, 10], n_features=4)
    out = fd.drop_socket_and_constant_features(ds, [])
    assert np.array_equal(out.features, ds.features)


def test_one_hot_basic(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("proto,label\ntcp,x\nudp,y\ntcp,x\n")
    ds = fd.load_flow_csv(path, "label")
    out = fd.one_hot_encode(ds)
    assert out.feature_names() == ["proto=tcp", "proto=udp"]
    assert np.array_equal(out.features, [[1, 0], [0, 1], [1, 0]])


def test_one_hot_unseen_category_zeros(tmp_path, caplog):
    path = tmp_path / "t.csv"
    path.write_text("proto,label\ntcp,x\nudp,y\nicmp,x\n")
    ds = fd.load_flow_csv(path, "label")
    fitted = {"proto": ["tcp", "udp"]}  # icmp held out at fit time
    with caplog.at_level(logging.WARNING):
        out = fd.one_hot_encode(ds, fitted)
    assert "unseen" in caplog.text
    assert np.array_equal(out.features, [[1, 0], [0, 1], [0, 0]])


def test_one_hot_no_categoricals_is_identity():
    ds = cluster_dataset(1, [8, 8], n_features=5)
    out = fd.one_hot_encode(ds)
    assert np.array_equal(out.features, ds.features)
    assert out.feature_names() == ds.feature_names()


def test_one_hot_rows_sum_to_categorical_count(flow_csv):
    ds = fd.load_flow_csv(flow_csv, "label")
    ds = fd.drop_socket_and_constant_features(ds, ["src_ip"])
    out = fd.one_hot_encode(ds)
    block = [i for i, name in enumerate(out.feature_names()) if "=" in name]
    assert np.array_equal(out.features[:, block].sum(axis=1),
                          np.full(out.n_rows, 2.0))  # proto and flags blocks


def test_fit_categories_first_seen_order(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("proto,label\nudp,x\ntcp,y\nudp,x\nicmp,y\n")
    ds = fd.load_flow_csv(path, "label")
    assert fd.fit_categories(ds) == {"proto": ["udp", "tcp", "icmp"]}


def test_min_max_fit_values():
    ds = cluster_dataset(2, [6, 6], n_features=3)
    ds.features[:, 0] = [0, 5, 10, 2, 7, 1, 3, 9, 4, 6, 8, 2.5]
    params = fd.min_max_fit(ds)
    assert params.x_mn[0] == 0.0 and params.x_mx[0] == 10.0


def test_min_max_fit_empty_rejected():
    ds = cluster_dataset(3, [4], n_features=2)
    empty = fd.Dataset(ds.features[:0], ds.labels[:0], ds.class_names, ds.schema)
    with pytest.raises(ValueError):
        fd.min_max_fit(empty)


def test_min_max_apply_endpoints_and_midpoint():
    ds = cluster_dataset(4, [4], n_features=1)
    ds.features[:, 0] = [0.0, 5.0, 10.0, 10.0]
    out = fd.min_max_apply(ds, fd.min_max_fit(ds))
    assert np.allclose(out.features[:, 0], [0.0, 0.5, 1.0, 1.0])


def test_min_max_apply_clamps_out_of_range():
    train = cluster_dataset(5, [4], n_features=1)
    train.features[:, 0] = [0.0, 4.0, 8.0, 10.0]
    params = fd.min_max_fit(train)
    test = fd.Dataset(np.array([[12.0], [-3.0]]), np.array([0, 0]),
                      train.class_names, train.schema)
    out = fd.min_max_apply(test, params)
    assert np.array_equal(out.features[:, 0], [1.0, 0.0])


def test_min_max_apply_zero_range_maps_to_zero():
    train = cluster_dataset(6, [4], n_features=2)
    train.features[:, 1] = 7.0
    out = fd.min_max_apply(train, fd.min_max_fit(train))
    assert np.all(out.features[:, 1] == 0.0)


def test_min_max_apply_schema_mismatch():
    a = cluster_dataset(7, [4], n_features=3)
    b = cluster_dataset(7, [4], n_features=2)
    with pytest.raises(ValueError):
        fd.min_max_apply(b, fd.min_max_fit(a))


def test_min_max_round_trip_exact():
    ds = cluster_dataset(8, [20, 20], n_features=6)
    ds.features[:] = ds.features * 40.0 - 17.0
    params = fd.min_max_fit(ds)
    normalized = fd.min_max_apply(ds, params)
    restored = fd.minmax_invert(params, normalized.features)
    rel = np.abs(restored - ds.features) / np.maximum(np.abs(ds.features), 1.0)
    assert rel.max() < 1e-12


def test_min_max_train_hits_exact_bounds():
    ds = cluster_dataset(9, [30], n_features=5)
    out = fd.min_max_apply(ds, fd.min_max_fit(ds))
    assert np.all(out.features >= 0.0) and np.all(out.features <= 1.0)
    assert np.allclose(out.features.min(axis=0), 0.0)
    assert np.allclose(out.features.max(axis=0), 1.0)


def test_stratified_split_70_30():
    ds = cluster_dataset(10, [50, 50], n_features=4)
    train, test = fd.stratified_split(ds, 0.7, seed=3)
    assert np.array_equal(train.class_counts(), [35, 35])
    assert np.array_equal(test.class_counts(), [15, 15])


def test_stratified_split_half_of_ten():
    ds = cluster_dataset(11, [10], n_features=3)
    train, test = fd.stratified_split(ds, 0.5, seed=1)
    assert train.n_rows == 5 and test.n_rows == 5


def test_stratified_split_deterministic():
    ds = cluster_dataset(12, [30, 20, 10], n_features=4)
    a_train, a_test = fd.stratified_split(ds, 0.7, seed=9)
    b_train, b_test = fd.stratified_split(ds, 0.7, seed=9)
    assert np.array_equal(a_train.features, b_train.features)
    assert np.array_equal(a_test.labels, b_test.labels)


def test_stratified_split_partition():
    ds = cluster_dataset(13, [17, 23], n_features=3)
    train, test = fd.stratified_split(ds, 0.6, seed=5)
    key = lambda m: sorted(map(tuple, m))
    assert key(np.vstack([train.features, test.features])) == key(ds.features)
    assert train.n_rows + test.n_rows == ds.n_rows


def test_stratified_split_proportions_within_one_row():
    ds = cluster_dataset(14, [13, 37, 111], n_features=3)
    train, _ = fd.stratified_split(ds, 0.7, seed=2)
    for c, n in enumerate([13, 37, 111]):
        assert abs(train.class_counts()[c] - 0.7 * n) <= 1.0


def test_stratified_split_rejects_tiny_class():
    ds = cluster_dataset(15, [10, 1], n_features=3, shuffle=False)
    with pytest.raises(ValueError, match="fewer than 2"):
        fd.stratified_split(ds, 0.7, seed=0)


def test_stratified_split_rejects_bad_fraction():
    ds = cluster_dataset(16, [10, 10], n_features=3)
    with pytest.raises(ValueError):
        fd.stratified_split(ds, 1.0, seed=0)


def test_subsample_caps_rows():
    ds = cluster_dataset(17, [300, 200, 100], n_features=4)
    out = fd.subsample(ds, 60, seed=4)
    assert out.n_rows <= 66  # per-class rounding slack
    counts = out.class_counts()
    assert counts.min() >= 2
    assert fd.subsample(ds, 10_000, seed=4) is ds


def test_write_clean_csv_round_trip(tmp_path):
    ds = cluster_dataset(18, [5, 5], n_features=3)
    out = tmp_path / "clean.csv"
    fd.write_clean_csv(ds, out)
    again = fd.load_flow_csv(out, "label")
    assert again.n_rows == ds.n_rows
    assert np.allclose(again.features, ds.features)
    assert [ds.class_names[i] for i in ds.labels] \
        == [again.class_names[i] for i in again.labels]
