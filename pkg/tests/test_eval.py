import math

import numpy as np
import pytest

from rffol.data import Dataset, Instance
from rffol.evaluation import (
    ALGORITHMS,
    GridSpec,
    bench_run,
    compare_from_tables,
    default_grid,
    drift_experiment,
    evaluate,
    grid_search,
    paper_tables,
    resolve_algorithm,
    wilcoxon,
)
from rffol.features import MapVariant, sample_frequencies
from rffol.learner import UpdateMode, init_model


def dense_dataset(X, labels, class_count=2):
    d = X.shape[1]
    idx = np.arange(1, d + 1, dtype=np.int64)
    insts = [
        Instance(indices=idx, values=row, label=int(lab)) for row, lab in zip(X, labels)
    ]
    lmap = {-1: -1, 1: 1} if class_count == 2 else {c: c for c in range(class_count)}
    return Dataset(instances=insts, dim=d, class_count=class_count, label_map=lmap)


def clustered(rng, n, d=4, gap=2.0):
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    X = rng.normal(scale=0.5, size=(n, d))
    X[:, 0] += labels * gap / 2
    return dense_dataset(X, labels)


# ------------------------------------------------------------- wilcoxon


def test_wilcoxon_three_element_hand_case():
    res = wilcoxon([0.90, 0.80, 0.70], [0.95, 0.85, 0.75])
    assert res.r_plus == 0.0
    assert res.r_minus == 6.0
    assert res.t_stat == 0.0
    assert res.z == pytest.approx((0 - 3) / math.sqrt(3.5))
    assert res.z == pytest.approx(-1.6036, abs=1e-4)


def test_wilcoxon_all_zero_differences():
    res = wilcoxon([1.0] * 12, [1.0] * 12)
    assert res.r_plus == res.r_minus == 39.0
    assert res.t_stat == 39.0
    assert res.z == 0.0


def test_wilcoxon_rank_sum_identity_and_antisymmetry():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 12, 30):
        a, b = rng.normal(size=n), rng.normal(size=n)
        ab, ba = wilcoxon(a, b), wilcoxon(b, a)
        assert ab.r_plus + ab.r_minus == pytest.approx(n * (n + 1) / 2)
        assert (ab.r_plus, ab.r_minus) == (ba.r_minus, ba.r_plus)
        assert ab.t_stat == ba.t_stat and ab.z == ba.z


def test_wilcoxon_scale_invariance():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=9), rng.normal(size=9)
    base, scaled = wilcoxon(a, b), wilcoxon(3.7 * a, 3.7 * b)
    assert base.t_stat == pytest.approx(scaled.t_stat)
    assert base.z == pytest.approx(scaled.z)


def test_wilcoxon_input_validation():
    with pytest.raises(ValueError):
        wilcoxon([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        wilcoxon([], [])


# ------------------------------------------------------------- tables


def test_tables_spot_values():
    t = paper_tables()
    assert t.accuracy("fogd", "skin") == 99.942
    assert t.accuracy("mpu-fogdub", "poker") == 94.270
    assert t.accuracy("nogd", "aloi") == 52.180
    assert t.accuracy("pamo", "mnist600k") is None
    assert len(t.algorithms) == 10 and len(t.datasets) == 12
    for row in t.values.values():
        assert len(row) == 12


def test_table_comparison_reproduces_reported_z():
    for baseline in ("nogd", "avm"):
        comp = compare_from_tables(baseline, "mpu-fogdub")
        assert len(comp.datasets) == 12
        assert round(comp.result.z, 2) == -3.06
        assert comp.matches_published


def test_table_comparison_reports_discrepancy():
    # the stated formula over the stated tables gives -2.31 for these
    # pairings, not the published -2.16; both values are surfaced
    for baseline in ("fogd", "rrf"):
        comp = compare_from_tables(baseline, "mpu-fogdub")
        assert round(comp.result.z, 2) == -2.31
        assert comp.published_z == -2.16
        assert comp.matches_published is False


def test_table_comparison_drops_missing_datasets():
    comp = compare_from_tables("pamo", "mpu-fogdub")
    assert len(comp.datasets) == 6
    assert "mnist600k" not in comp.datasets


def test_table_comparison_rejects_unknown_names():
    with pytest.raises(ValueError):
        compare_from_tables("svm", "mpu-fogdub")


# ------------------------------------------------------------- grids


def test_default_grid_sizes():
    assert len(default_grid("fogd").cells()) == 9 * 11
    assert len(default_grid("mpu-fogdu").cells()) == 9 * 11
    wub = default_grid("mpu-fogdub")
    assert len(wub.cells()) == 9 * 11 * 4 == 396
    assert list(wub.params) == ["D", "sigma2", "eta_b"]


def test_grid_cell_order_is_lexicographic():
    spec = GridSpec(params={"D": (1, 2), "sigma2": (0.5, 1.0)})
    assert spec.cells() == [
        {"D": 1, "sigma2": 0.5},
        {"D": 1, "sigma2": 1.0},
        {"D": 2, "sigma2": 0.5},
        {"D": 2, "sigma2": 1.0},
    ]


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(params={})
    with pytest.raises(ValueError):
        GridSpec(params={"D": ()})
    with pytest.raises(ValueError):
        GridSpec(params={"D": (1,)}, folds=0)


def test_single_cell_grid_returns_that_cell():
    rng = np.random.default_rng(2)
    train, valid = clustered(rng, 300), clustered(rng, 100)
    spec = GridSpec(params={"D": (16,), "sigma2": (1.0,)})
    res = grid_search(spec, train, valid, "fogd", seed=1)
    assert res.best_params == {"D": 16, "sigma2": 1.0}
    assert len(res.cells) == 1 and not res.cells[0].failed


def test_grid_search_picks_better_cell_and_is_deterministic():
    rng = np.random.default_rng(3)
    train, valid = clustered(rng, 500), clustered(rng, 200)
    spec = GridSpec(params={"D": (4, 64), "sigma2": (1.0,)})
    a = grid_search(spec, train, valid, "mpu-fogdu", seed=2)
    b = grid_search(spec, train, valid, "mpu-fogdu", seed=2)
    assert a.best_params == b.best_params
    assert a.best_accuracy == b.best_accuracy
    accs = {c.params["D"]: c.accuracy for c in a.cells}
    assert a.best_accuracy == max(accs.values())


def test_grid_search_tie_goes_to_first_cell():
    rng = np.random.default_rng(4)
    train, valid = clustered(rng, 200), clustered(rng, 80)
    # same cell twice under different names is impossible; instead use one
    # parameter that the model ignores to force identical accuracies
    spec = GridSpec(params={"D": (32,), "sigma2": (1.0, 1.0)})
    res = grid_search(spec, train, valid, "fogd", seed=5)
    assert res.cells[0].accuracy == res.cells[1].accuracy
    assert res.best_params == res.cells[0].params


def test_grid_search_records_diverged_cells():
    rng = np.random.default_rng(5)
    train, valid = clustered(rng, 200), clustered(rng, 80)
    bad = resolve_algorithm("mpu-fogdub")
    bad = type(bad)(
        name="hot", mode=UpdateMode.WUB, variant=MapVariant.MPU_SCALED,
        eta_w=1e170, eta_u=1e170, tune_eta_b=True,
    )
    spec = GridSpec(params={"D": (8,), "sigma2": (1.0,), "eta_b": (1e170, 1e-2)})
    with np.errstate(all="ignore"):
        res = grid_search(spec, train, valid, bad, seed=1)
    assert any(c.failed for c in res.cells)
    for cell in res.cells:
        if cell.failed:
            assert cell.accuracy is None and cell.error


def test_grid_search_kfold_runs():
    rng = np.random.default_rng(6)
    train, valid = clustered(rng, 240), clustered(rng, 60)
    spec = GridSpec(params={"D": (16,), "sigma2": (1.0,)}, folds=3)
    res = grid_search(spec, train, valid, "fogd", seed=3)
    assert not res.cells[0].failed
    assert 0.0 <= res.best_accuracy <= 1.0


def test_worker_cap_env(monkeypatch):
    from rffol.evaluation import _worker_cap

    monkeypatch.setenv("RFFOL_THREADS", "2")
    assert _worker_cap() == 2
    monkeypatch.setenv("RFFOL_THREADS", "notanumber")
    with pytest.raises(ValueError):
        _worker_cap()


def test_parallel_grid_matches_serial(monkeypatch):
    rng = np.random.default_rng(7)
    train, valid = clustered(rng, 300), clustered(rng, 100)
    spec = GridSpec(params={"D": (8, 16, 32), "sigma2": (0.5, 1.0)})
    monkeypatch.setenv("RFFOL_THREADS", "1")
    serial = grid_search(spec, train, valid, "mpu-fogdu", seed=4)
    monkeypatch.setenv("RFFOL_THREADS", "3")
    parallel = grid_search(spec, train, valid, "mpu-fogdu", seed=4)
    assert serial.best_params == parallel.best_params
    assert [c.accuracy for c in serial.cells] == [c.accuracy for c in parallel.cells]


# ------------------------------------------------------------- evaluate


def test_evaluate_counting():
    labels = [1] * 6 + [-1] * 4
    ds = dense_dataset(np.zeros((10, 3)), labels)
    model = init_model(sample_frequencies(3, 4, 1.0, 0), 1, 0.5)
    report = evaluate(model, ds)  # zero weights predict +1 everywhere
    assert report.test_accuracy == 0.6
    assert report.instance_count == 10


def test_evaluate_rejects_empty():
    model = init_model(sample_frequencies(3, 4, 1.0, 0), 1, 0.5)
    with pytest.raises(ValueError):
        evaluate(model, Dataset(instances=[], dim=3, class_count=2,
                                label_map={-1: -1, 1: 1}))


def test_evaluate_perfect_model():
    rng = np.random.default_rng(8)
    ds = clustered(rng, 400, gap=4.0)
    from rffol.learner import train_online

    model = init_model(sample_frequencies(4, 64, 1.0, 1), 1, 100.0, 0.1,
                       mode=UpdateMode.WU)
    train_online(model, ds)
    report = evaluate(model, ds)
    assert report.test_accuracy == 1.0


# ------------------------------------------------------------- bench


def test_bench_run_end_to_end():
    rng = np.random.default_rng(9)
    ds = clustered(rng, 800)
    grid = GridSpec(params={"D": (16, 32), "sigma2": (1.0,)})
    res = bench_run(ds, "mpu-fogdub", seed=1, grid=grid)
    assert res.sizes == (480, 160, 160)
    assert res.best_params["D"] in (16, 32)
    assert res.report.test_accuracy > 0.9
    assert res.report.instance_count == 160
    # reruns reproduce the pick and the accuracy exactly
    again = bench_run(ds, "mpu-fogdub", seed=1, grid=grid)
    assert again.best_params == res.best_params
    assert again.report.test_accuracy == res.report.test_accuracy
    assert np.array_equal(again.model.weights, res.model.weights)


def test_bench_run_subset():
    rng = np.random.default_rng(10)
    ds = clustered(rng, 1000)
    grid = GridSpec(params={"D": (16,), "sigma2": (1.0,)})
    res = bench_run(ds, "fogd", seed=2, grid=grid, subset=500)
    assert sum(res.sizes) == 500


def test_algorithm_registry():
    assert set(ALGORITHMS) == {"fogd", "mpu-fogdu", "mpu-fogdub"}
    assert ALGORITHMS["fogd"].variant is MapVariant.COS_SIN
    assert ALGORITHMS["fogd"].eta_w == 0.001
    assert ALGORITHMS["mpu-fogdu"].eta_w == 100.0
    assert ALGORITHMS["mpu-fogdu"].eta_u == 0.1
    assert ALGORITHMS["mpu-fogdub"].tune_eta_b
    with pytest.raises(ValueError):
        resolve_algorithm("nogd")


# ------------------------------------------------------------- drift


def test_drift_experiment_shapes_and_pairing():
    res = drift_experiment(
        seeds=range(3), dim=4, segment_lengths=(400, 400),
        num_features=64, eta_b=0.01,
    )
    assert len(res.fixed_rates) == len(res.adaptive_rates) == 3
    assert res.test.n == 3
    assert 0 <= res.wins <= 3
    for rate in res.fixed_rates + res.adaptive_rates:
        assert 0.0 <= rate <= 1.0


def test_stationary_stream_shows_no_significant_difference():
    # the map must be wide enough that the fixed-map learner is not
    # capacity-limited; at small widths the adaptive variant wins even
    # without drift (that is its selling point, not a fluke)
    res = drift_experiment(
        seeds=range(10), dim=4, segment_lengths=(600, 600),
        rotation_angle=0.0, num_features=512,
    )
    assert abs(res.test.z) < 1.96
