"""Synthetic data generation, splits, and binary/CSV file handling."""

import numpy as np
import pytest

from miabench import (
    FormatError,
    SyntheticSpec,
    TrainConfig,
    constant_schedule,
    gen_gaussian_mixture,
    load_cifar_binary,
    load_csv,
    make_dataset,
    save_csv,
    split_pool,
    stratified_four_way,
    test_accuracy as model_accuracy,
    train,
)


def spec(seed=1, classes=2, dim=4, per_class=50, separation=2.0, noise=1.0):
    return SyntheticSpec(num_classes=classes, dim=dim, per_class=per_class,
                         separation=separation, noise_std=noise, seed=seed)


def test_mixture_shapes_and_counts():
    data = gen_gaussian_mixture(spec(classes=3, per_class=40, dim=5))
    assert len(data) == 120
    assert data.dim == 5
    assert data.num_classes == 3
    for c in range(3):
        assert int(np.sum(data.labels == c)) == 40
    assert len(np.unique(data.ids)) == 120


def test_mixture_deterministic_per_seed():
    a = gen_gaussian_mixture(spec(seed=9))
    b = gen_gaussian_mixture(spec(seed=9))
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = gen_gaussian_mixture(spec(seed=10))
    assert not np.array_equal(a.features, c.features)


def test_mixture_class_means_scale_with_separation():
    wide = gen_gaussian_mixture(spec(separation=50.0, per_class=200))
    m0 = wide.features[wide.labels == 0].mean(axis=0)
    m1 = wide.features[wide.labels == 1].mean(axis=0)
    gap = np.linalg.norm(m0 - m1)
    # Unit-direction centres at radius 50: the gap lies in [0, 100] and is
    # far beyond the noise scale.
    assert 10.0 < gap <= 100.0 + 1.0
    assert np.linalg.norm(m0) == pytest.approx(50.0, rel=0.1)


def test_mixture_zero_separation_is_chance_level():
    pool = gen_gaussian_mixture(spec(seed=3, separation=0.0, per_class=600,
                                     dim=4))
    fit, probe = split_pool(pool, 300)
    cfg = TrainConfig("sgd", constant_schedule(0.05, 5), 32, 5, seed=4)
    model = train(fit, (4, 8, 2), cfg)[-1].model
    assert abs(model_accuracy(model, probe) - 0.5) <= 0.05


def test_mixture_wide_separation_is_learnable():
    pool = gen_gaussian_mixture(spec(seed=5, separation=10.0, per_class=200,
                                     dim=8))
    fit, probe = split_pool(pool, 100)
    cfg = TrainConfig("sgd", constant_schedule(0.05, 10), 32, 10, seed=6)
    model = train(fit, (8, 16, 2), cfg)[-1].model
    assert model_accuracy(model, probe) > 0.95


def test_mixture_validation():
    with pytest.raises(ValueError):
        spec(classes=1)
    with pytest.raises(ValueError):
        spec(noise=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(2, 4, 50, -1.0, 1.0, 0)


def test_split_pool_counts_and_disjointness():
    pool = gen_gaussian_mixture(spec(classes=3, per_class=30))
    fit, rest = split_pool(pool, 20)
    assert len(fit) == 60 and len(rest) == 30
    for part in (fit, rest):
        for c in range(3):
            assert int(np.sum(part.labels == c)) in (10, 20)
    assert not set(fit.ids) & set(rest.ids)
    assert sorted(np.concatenate([fit.ids, rest.ids])) == sorted(pool.ids)


def test_split_pool_rejects_exhausted_class():
    pool = gen_gaussian_mixture(spec(classes=2, per_class=30))
    with pytest.raises(ValueError):
        split_pool(pool, 30)


def test_four_way_even_halves():
    pool_train = gen_gaussian_mixture(spec(classes=3, per_class=10, seed=11))
    pool_test = gen_gaussian_mixture(spec(classes=3, per_class=10, seed=12))
    split = stratified_four_way(pool_train, pool_test, seed=13)
    for part in (split.target_train, split.shadow_train,
                 split.target_test, split.shadow_test):
        assert len(part) == 15
        for c in range(3):
            assert int(np.sum(part.labels == c)) == 5


def test_four_way_odd_counts_favour_target():
    pool_train = gen_gaussian_mixture(spec(classes=2, per_class=11, seed=14))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=7, seed=15))
    split = stratified_four_way(pool_train, pool_test, seed=16)
    for c in range(2):
        assert int(np.sum(split.target_train.labels == c)) == 6
        assert int(np.sum(split.shadow_train.labels == c)) == 5
        assert int(np.sum(split.target_test.labels == c)) == 4
        assert int(np.sum(split.shadow_test.labels == c)) == 3


def test_four_way_parts_partition_the_pools():
    pool_train = gen_gaussian_mixture(spec(classes=2, per_class=16, seed=17))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=8, seed=18))
    split = stratified_four_way(pool_train, pool_test, seed=19)
    train_ids = np.concatenate([split.target_train.ids, split.shadow_train.ids])
    test_ids = np.concatenate([split.target_test.ids, split.shadow_test.ids])
    assert sorted(train_ids) == sorted(pool_train.ids)
    assert len(set(train_ids) & set(test_ids)) == 0
    assert len(np.unique(np.concatenate([train_ids, test_ids]))) == 48


def test_four_way_rekeys_colliding_ids():
    # Both pools carry default ids 0..n-1; the split must keep identities
    # globally unique by shifting the test pool's ids.
    pool_train = gen_gaussian_mixture(spec(classes=2, per_class=10, seed=20))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=10, seed=21))
    assert set(pool_train.ids) == set(pool_test.ids)
    split = stratified_four_way(pool_train, pool_test, seed=22)
    member_ids = set(split.target_train.ids) | set(split.shadow_train.ids)
    test_ids = set(split.target_test.ids) | set(split.shadow_test.ids)
    assert not member_ids & test_ids
    assert min(test_ids) > max(member_ids)


def test_four_way_deterministic_per_seed():
    pool_train = gen_gaussian_mixture(spec(classes=2, per_class=12, seed=23))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=12, seed=24))
    a = stratified_four_way(pool_train, pool_test, seed=25)
    b = stratified_four_way(pool_train, pool_test, seed=25)
    np.testing.assert_array_equal(a.target_train.ids, b.target_train.ids)
    np.testing.assert_array_equal(a.shadow_test.ids, b.shadow_test.ids)
    c = stratified_four_way(pool_train, pool_test, seed=26)
    assert not np.array_equal(a.target_train.ids, c.target_train.ids)


def test_four_way_actually_shuffles():
    pool_train = gen_gaussian_mixture(spec(classes=2, per_class=40, seed=27))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=40, seed=28))
    split = stratified_four_way(pool_train, pool_test, seed=29)
    first_class = split.target_train.ids[split.target_train.labels == 0]
    assert not np.array_equal(np.sort(first_class), first_class)


def test_four_way_rejects_missing_class():
    pool_train = gen_gaussian_mixture(spec(classes=3, per_class=10, seed=30))
    pool_test = gen_gaussian_mixture(spec(classes=2, per_class=10, seed=31))
    with pytest.raises(ValueError):
        stratified_four_way(pool_train, pool_test, seed=32)


def cifar_bytes(records, variant):
    out = bytearray()
    for rec in records:
        if variant == "ten":
            label, pixels = rec
            out.append(label)
        else:
            coarse, label, pixels = rec
            out.append(coarse)
            out.append(label)
        out.extend(pixels)
    return bytes(out)


def test_cifar_ten_decodes_known_record(tmp_path):
    pixels = bytes(i % 256 for i in range(3072))
    path = tmp_path / "batch.bin"
    path.write_bytes(cifar_bytes([(7, pixels)], "ten"))
    data = load_cifar_binary(path, "ten")
    assert len(data) == 1
    assert data.num_classes == 10
    assert int(data.labels[0]) == 7
    np.testing.assert_array_equal(
        data.features[0], np.array([i % 256 for i in range(3072)]) / 255.0)
    assert data.features[0].max() == 1.0


def test_cifar_hundred_uses_fine_label(tmp_path):
    pixels = bytes(3072)
    path = tmp_path / "train.bin"
    path.write_bytes(cifar_bytes([(19, 93, pixels), (3, 0, pixels)], "hundred"))
    data = load_cifar_binary(path, "hundred")
    assert len(data) == 2
    assert data.num_classes == 100
    assert list(data.labels) == [93, 0]  # coarse bytes 19 and 3 are ignored


def test_cifar_rejects_misaligned_file(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(cifar_bytes([(1, bytes(3072))], "ten") + b"\x01\x02\x03")
    with pytest.raises(FormatError) as err:
        load_cifar_binary(path, "ten")
    assert "3073" in str(err.value)


def test_cifar_rejects_out_of_range_label(tmp_path):
    path = tmp_path / "bad_label.bin"
    path.write_bytes(cifar_bytes([(1, bytes(3072)), (12, bytes(3072))], "ten"))
    with pytest.raises(FormatError) as err:
        load_cifar_binary(path, "ten")
    assert "3073" in str(err.value)  # second record's label byte


def test_cifar_rejects_unknown_variant_and_missing_file(tmp_path):
    with pytest.raises(ValueError):
        load_cifar_binary(tmp_path / "x.bin", "twenty")
    with pytest.raises(FormatError):
        load_cifar_binary(tmp_path / "missing.bin", "ten")


def test_load_csv_basic(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("0.5,0.5,1\n-1.0,2.0,0\n")
    data = load_csv(path)
    assert len(data) == 2
    assert data.dim == 2
    assert data.num_classes == 2
    np.testing.assert_array_equal(data.features, [[0.5, 0.5], [-1.0, 2.0]])
    np.testing.assert_array_equal(data.labels, [1, 0])
    np.testing.assert_array_equal(data.ids, [0, 1])


def test_load_csv_skips_blank_lines(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("\n0.5,1\n\n1.5,0\n\n")
    assert len(load_csv(path)) == 2


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert len(load_csv(path)) == 0


def test_load_csv_errors_name_the_row(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0.5,0.5,1\n0.5,0\n")
    with pytest.raises(FormatError) as err:
        load_csv(ragged)
    assert "row 2" in str(err.value)

    alpha = tmp_path / "alpha.csv"
    alpha.write_text("0.5,0.5,1\n0.5,zebra,0\n")
    with pytest.raises(FormatError) as err:
        load_csv(alpha)
    assert "row 2" in str(err.value)

    negative = tmp_path / "negative.csv"
    negative.write_text("0.5,0.5,-1\n")
    with pytest.raises(FormatError) as err:
        load_csv(negative)
    assert "row 1" in str(err.value)

    narrow = tmp_path / "narrow.csv"
    narrow.write_text("7\n")
    with pytest.raises(FormatError):
        load_csv(narrow)

    with pytest.raises(FormatError):
        load_csv(tmp_path / "missing.csv")


def test_csv_round_trip_is_exact(tmp_path):
    data = gen_gaussian_mixture(spec(seed=40, per_class=25, dim=3))
    path = tmp_path / "round.csv"
    save_csv(path, data)
    back = load_csv(path)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)
    assert back.num_classes == data.num_classes


def test_save_csv_layout(tmp_path):
    data = make_dataset([[0.25, -1.5], [3.0, 0.125]], [1, 0], 2)
    path = tmp_path / "layout.csv"
    save_csv(path, data)
    assert path.read_text() == "0.25,-1.5,1\n3.0,0.125,0\n"
