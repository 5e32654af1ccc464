import io
import math

import numpy as np
import pytest

from rffol.data import (
    DataFormatError,
    Dataset,
    DriftStreamConfig,
    Instance,
    apply_normalizer,
    fit_normalizer,
    generate_drift_stream,
    libsvm_text,
    parse_libsvm,
    split,
    to_csr,
    write_libsvm,
)


def parse(text, dim=None):
    return parse_libsvm(io.StringIO(text), dim=dim)


def test_parse_basic_line():
    ds = parse("1 1:0.5 3:-0.2\n")
    assert ds.dim == 3
    inst = ds.instances[0]
    assert inst.label == 1
    assert list(inst.indices) == [1, 3]
    assert list(inst.values) == [0.5, -0.2]


def test_binary_label_remap_smaller_to_minus_one():
    ds = parse("2 4:1\n1 2:1\n")
    assert ds.label_map == {1: -1, 2: 1}
    assert [i.label for i in ds.instances] == [1, -1]
    assert ds.class_count == 2


def test_multiclass_label_remap_sorted():
    ds = parse("7 1:1\n3 1:1\n5 1:1\n")
    assert ds.label_map == {3: 0, 5: 1, 7: 2}
    assert [i.label for i in ds.instances] == [2, 0, 1]
    assert ds.class_count == 3


def test_single_label_file_maps_to_plus_one():
    ds = parse("4 1:1\n4 2:1\n")
    assert ds.label_map == {4: 1}
    assert all(i.label == 1 for i in ds.instances)


def test_blank_lines_skipped():
    ds = parse("1 1:1\n\n   \n-1 1:2\n")
    assert ds.n == 2


def test_dim_override():
    ds = parse("1 2:1\n", dim=10)
    assert ds.dim == 10
    with pytest.raises(DataFormatError):
        parse("1 12:1\n", dim=10)


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("1 1:0.5 banana\n", "token"),
        ("1 1:xyz\n", "value"),
        ("1 2:1 2:3\n", "duplicate"),
        ("1 3:1 2:3\n", "increasing"),
        ("1 0:1\n", "index"),
        ("x 1:1\n", "label"),
        ("1.5 1:1\n", "label"),
        ("1 1:inf\n", "finite"),
    ],
)
def test_parse_errors_carry_line_numbers(line, fragment):
    with pytest.raises(DataFormatError) as err:
        parse("1 1:1\n" + line)
    assert err.value.line_no == 2
    assert fragment in str(err.value).lower()


def test_label_only_line_is_an_empty_instance():
    # a label with no features is a legal all-zeros sparse vector
    ds = parse("1 1:1\n-1\n")
    assert ds.n == 2
    assert ds.instances[1].indices.size == 0


def test_round_trip_identity():
    text = "1 1:0.5 3:-0.25\n-1 2:1e-3\n1 1:2 2:3 3:4\n"
    ds = parse(text)
    again = parse(libsvm_text(ds))
    assert ds == again


def test_write_and_reparse_file(tmp_path):
    ds = parse("1 1:0.1 2:0.2\n-1 2:7\n")
    path = tmp_path / "out.libsvm"
    write_libsvm(ds, path)
    assert parse_libsvm(path) == ds


def test_normalizer_maps_to_unit_interval():
    ds = parse("1 1:0\n1 1:5\n1 1:10\n")
    norm = fit_normalizer(ds)
    out = apply_normalizer(norm, ds)
    got = [inst.values[0] for inst in out.instances]
    assert got == [-1.0, 0.0, 1.0]


def test_normalizer_constant_feature_goes_to_zero():
    ds = parse("1 1:4 2:1\n1 1:4 2:2\n")
    out = apply_normalizer(fit_normalizer(ds), ds)
    assert [inst.values[0] for inst in out.instances] == [0.0, 0.0]


def test_normalizer_clamps_held_out_values():
    train = parse("1 1:0\n1 1:10\n")
    test = parse("1 1:-5\n1 1:20\n1 1:5\n")
    out = apply_normalizer(fit_normalizer(train), test)
    got = [inst.values[0] for inst in out.instances]
    assert got == [-1.0, 1.0, 0.0]


def test_normalizer_unseen_feature_passes_through_clamped():
    train = parse("1 1:1\n1 1:2\n")
    test = parse("1 2:0.4\n1 2:9\n")
    out = apply_normalizer(fit_normalizer(train), test)
    assert [inst.values[0] for inst in out.instances] == [0.4, 1.0]


def test_normalizer_idempotent_on_fit_set():
    rng = np.random.default_rng(0)
    lines = []
    for _ in range(50):
        lines.append(f"1 1:{rng.uniform(-3, 3)} 2:{rng.uniform(0, 9)}")
    ds = parse("\n".join(lines) + "\n")
    once = apply_normalizer(fit_normalizer(ds), ds)
    for inst in once.instances:
        assert np.all(inst.values >= -1) and np.all(inst.values <= 1)
    # refitting on normalized data gives the identity for non-constant features
    twice = apply_normalizer(fit_normalizer(once), once)
    assert once == twice


def test_split_sizes_and_determinism():
    ds = parse("".join(f"1 1:{i}\n" for i in range(10)))
    a = split(ds, seed=3)
    b = split(ds, seed=3)
    assert tuple(part.n for part in a) == (6, 2, 2)
    for pa, pb in zip(a, b):
        assert pa == pb


def test_split_partitions_the_dataset():
    ds = parse("".join(f"{(-1) ** i} 1:{i}\n" for i in range(23)))
    for seed in range(10):
        train, valid, test = split(ds, seed=seed)
        values = sorted(
            float(inst.values[0])
            for part in (train, valid, test)
            for inst in part.instances
        )
        assert values == sorted(float(i.values[0]) for i in ds.instances)
        assert train.n + valid.n + test.n == ds.n


def test_split_rejects_bad_ratios_and_empty():
    ds = parse("1 1:1\n")
    with pytest.raises(ValueError):
        split(ds, ratios=(0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ValueError):
        split(Dataset(instances=[], dim=1, class_count=1, label_map={}), seed=0)


def test_drift_stream_deterministic():
    cfg = DriftStreamConfig(
        dim=4, segment_lengths=(100, 100), rotation_angles=(math.pi / 2,),
        noise_std=0.0, seed=5,
    )
    assert generate_drift_stream(cfg) == generate_drift_stream(cfg)


def test_drift_stream_orthogonal_rotation_breaks_first_boundary():
    cfg = DriftStreamConfig(
        dim=5, segment_lengths=(2000, 2000), rotation_angles=(math.pi / 2,),
        noise_std=0.0, seed=1,
    )
    stream = generate_drift_stream(cfg)
    # recover segment-1's direction from its labelled points, then check it
    # carries no information about segment 2 (orthogonal boundary)
    first = stream.instances[:2000]
    second = stream.instances[2000:]
    X1 = np.stack([i.values for i in first])
    y1 = np.array([i.label for i in first])
    w_hat = (X1 * y1[:, None]).mean(axis=0)
    X2 = np.stack([i.values for i in second])
    y2 = np.array([i.label for i in second])
    acc = float((np.where(X2 @ w_hat >= 0, 1, -1) == y2).mean())
    assert 0.45 < acc < 0.55
    # sanity: the same rule scores well before the boundary
    acc1 = float((np.where(X1 @ w_hat >= 0, 1, -1) == y1).mean())
    assert acc1 > 0.9


def test_drift_stream_segments_are_balanced():
    cfg = DriftStreamConfig(
        dim=6, segment_lengths=(2000, 2000, 2000),
        rotation_angles=(0.5, 1.0), noise_std=0.0, seed=2,
    )
    stream = generate_drift_stream(cfg)
    for k in range(3):
        seg = stream.instances[2000 * k : 2000 * (k + 1)]
        frac = np.mean([i.label == 1 for i in seg])
        assert 0.45 <= frac <= 0.55


def test_drift_config_validation():
    with pytest.raises(ValueError):
        DriftStreamConfig(dim=1, segment_lengths=(10, 10), rotation_angles=(0.1,),
                          noise_std=0.0, seed=0)
    with pytest.raises(ValueError):
        DriftStreamConfig(dim=3, segment_lengths=(10,), rotation_angles=(),
                          noise_std=0.0, seed=0)
    with pytest.raises(ValueError):
        DriftStreamConfig(dim=3, segment_lengths=(10, 10), rotation_angles=(0.1, 0.2),
                          noise_std=0.0, seed=0)
    with pytest.raises(ValueError):
        DriftStreamConfig(dim=3, segment_lengths=(10, 10), rotation_angles=(0.1,),
                          noise_std=-1.0, seed=0)


def test_to_csr_layout():
    ds = parse("1 1:0.5 3:-0.2\n-1 2:4\n")
    indptr, indices, values, labels = to_csr(ds)
    assert list(indptr) == [0, 2, 3]
    assert list(indices) == [0, 2, 1]
    assert list(values) == [0.5, -0.2, 4.0]
    assert list(labels) == [1, -1]


def test_instance_validation():
    with pytest.raises(ValueError):
        Instance(indices=np.array([2, 1]), values=np.array([1.0, 2.0]), label=1)
    with pytest.raises(ValueError):
        Instance(indices=np.array([1, 1]), values=np.array([1.0, 2.0]), label=1)
    with pytest.raises(ValueError):
        Instance(indices=np.array([0]), values=np.array([1.0]), label=1)
    with pytest.raises(ValueError):
        Instance(indices=np.array([1]), values=np.array([np.nan]), label=1)
