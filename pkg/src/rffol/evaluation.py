"""Evaluation harness: accuracy reports, grid search, paired statistics.

Covers four jobs:

* scoring a trained model on a held-out set (:func:`evaluate`);
* hyperparameter grid search against a validation set or k folds
  (:func:`grid_search`, with the shipped default grids);
* the full benchmark protocol for one algorithm on one dataset
  (:func:`bench_run`): shuffle, 60/20/20 split, normalize on the training
  portion, grid-search, final train, test;
* paired significance testing with the Wilcoxon signed-ranks z statistic
  (:func:`wilcoxon`), including recomputation over the published accuracy
  tables embedded in :func:`paper_tables`.

The drift experiment (:func:`drift_experiment`) runs the fixed-map and
adaptive-map learners over the same synthetic drifting stream and compares
their post-drift mistake rates across seeds.
"""

from __future__ import annotations

import itertools
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import (
    Dataset,
    DriftStreamConfig,
    apply_normalizer,
    fit_normalizer,
    generate_drift_stream,
    split,
)
from .features import MapVariant, sample_frequencies
from .learner import (
    OnlineModel,
    TrainTrace,
    TrainingDiverged,
    UpdateMode,
    init_model,
    predict_many,
    train_online,
)

__all__ = [
    "EvalReport",
    "WilcoxonResult",
    "GridSpec",
    "GridCellResult",
    "GridSearchResult",
    "AlgoSpec",
    "ALGORITHMS",
    "BenchResult",
    "DriftResult",
    "TableComparison",
    "PUBLISHED_Z",
    "evaluate",
    "default_grid",
    "grid_search",
    "wilcoxon",
    "paper_tables",
    "compare_from_tables",
    "bench_run",
    "drift_experiment",
]


@dataclass
class EvalReport:
    """Accuracy and wall-clock timings for one train/test run.

    Timing fields are environment-dependent and never enter correctness
    checks; ``test_accuracy`` is exactly correct/instance_count.
    """

    test_accuracy: float
    train_seconds: float
    test_seconds: float
    mistakes_online: int
    instance_count: int


@dataclass
class WilcoxonResult:
    """Signed-ranks statistics for one paired comparison.

    ``r_plus + r_minus == n(n+1)/2`` always holds: zero differences are
    ranked like everything else and their rank mass is split evenly
    between the two sums.
    """

    r_plus: float
    r_minus: float
    t_stat: float
    z: float
    n: int


@dataclass
class GridSpec:
    """Ordered hyperparameter grid.

    ``params`` maps parameter name to its candidate list; cells are
    enumerated in lexicographic order over the declared parameter order,
    which also defines the tie-break (first best cell wins).  ``folds``
    = 1 means plain train/validation selection; k > 1 re-pools train and
    validation into k folds.
    """

    params: dict[str, tuple]
    folds: int = 1

    def __post_init__(self) -> None:
        if not self.params:
            raise ValueError("grid needs at least one parameter")
        for name, values in self.params.items():
            vals = tuple(values)
            if not vals:
                raise ValueError(f"empty candidate list for {name!r}")
            self.params[name] = vals
        if self.folds < 1:
            raise ValueError("folds must be >= 1")

    def cells(self) -> list[dict]:
        names = list(self.params)
        return [
            dict(zip(names, combo))
            for combo in itertools.product(*(self.params[n] for n in names))
        ]


@dataclass
class GridCellResult:
    params: dict
    accuracy: float | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.accuracy is None


@dataclass
class GridSearchResult:
    best_params: dict | None
    best_accuracy: float | None
    cells: list[GridCellResult]


@dataclass(frozen=True)
class AlgoSpec:
    """Named training recipe: update mode, map variant, fixed step sizes.

    ``tune_eta_b`` marks the phase step size as a grid dimension rather
    than a constant.
    """

    name: str
    mode: UpdateMode
    variant: MapVariant
    eta_w: float
    eta_u: float = 0.0
    eta_b: float = 0.0
    tune_eta_b: bool = False


ALGORITHMS = {
    "fogd": AlgoSpec(
        "fogd", UpdateMode.W_ONLY, MapVariant.COS_SIN, eta_w=0.001
    ),
    "mpu-fogdu": AlgoSpec(
        "mpu-fogdu", UpdateMode.WU, MapVariant.MPU_SCALED, eta_w=100.0, eta_u=0.1
    ),
    "mpu-fogdub": AlgoSpec(
        "mpu-fogdub",
        UpdateMode.WUB,
        MapVariant.MPU_SCALED,
        eta_w=100.0,
        eta_u=0.1,
        tune_eta_b=True,
    ),
}

DEFAULT_NUM_FEATURES = (200, 300, 400, 500, 1000, 2000, 4000, 6000, 8000)
DEFAULT_SIGMA2 = tuple(2.0**e for e in range(-16, 5, 2))
DEFAULT_ETA_B = (1e-6, 1e-4, 1e-2, 1e-1)


def resolve_algorithm(algo) -> AlgoSpec:
    if isinstance(algo, AlgoSpec):
        return algo
    try:
        return ALGORITHMS[str(algo)]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}"
        ) from None


def default_grid(algo, folds: int = 1) -> GridSpec:
    """Shipped grid for ``algo``: 9 widths x 11 bandwidths, plus 4 phase
    step sizes for the phase-updating mode (396 cells)."""
    spec = resolve_algorithm(algo)
    params: dict[str, tuple] = {
        "D": DEFAULT_NUM_FEATURES,
        "sigma2": DEFAULT_SIGMA2,
    }
    if spec.tune_eta_b:
        params["eta_b"] = DEFAULT_ETA_B
    return GridSpec(params=params, folds=folds)


def build_model(algo, params: dict, dim: int, class_count: int, seed: int) -> OnlineModel:
    """Fresh zero-weight model for one grid cell / final run."""
    spec = resolve_algorithm(algo)
    sigma2 = float(params["sigma2"])
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    fmap = sample_frequencies(
        dim, int(params["D"]), math.sqrt(sigma2), seed, variant=spec.variant
    )
    eta_b = float(params.get("eta_b", spec.eta_b))
    m = 1 if class_count <= 2 else class_count
    return init_model(fmap, m, spec.eta_w, spec.eta_u, eta_b, spec.mode)


def evaluate(
    model: OnlineModel,
    dataset: Dataset,
    train_seconds: float = 0.0,
    mistakes_online: int = 0,
) -> EvalReport:
    """Score ``model`` on ``dataset``; timing covers the predict phase only."""
    if dataset.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    t0 = time.perf_counter()
    predictions = predict_many(model, dataset)
    test_seconds = time.perf_counter() - t0
    correct = int((predictions == dataset.labels()).sum())
    return EvalReport(
        test_accuracy=correct / dataset.n,
        train_seconds=float(train_seconds),
        test_seconds=test_seconds,
        mistakes_online=int(mistakes_online),
        instance_count=dataset.n,
    )


def _accuracy(model: OnlineModel, dataset: Dataset) -> float:
    return float((predict_many(model, dataset) == dataset.labels()).mean())


def _fit_and_score(algo, params, pairs, seed, backend) -> float:
    accs = []
    for train, validation in pairs:
        model = build_model(algo, params, train.dim, train.class_count, seed)
        train_online(model, train, backend=backend)
        accs.append(_accuracy(model, validation))
    return float(np.mean(accs))


_WORKER_CTX: dict | None = None


def _cell_worker(item):
    idx, params = item
    ctx = _WORKER_CTX
    try:
        acc = _fit_and_score(
            ctx["algo"], params, ctx["pairs"], ctx["seed"], ctx["backend"]
        )
        return idx, acc, None
    except TrainingDiverged as exc:
        return idx, None, str(exc)


def _worker_cap() -> int:
    raw = os.environ.get("RFFOL_THREADS", "").strip()
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"RFFOL_THREADS must be an integer, got {raw!r}") from None
        return max(1, cap)
    return os.cpu_count() or 1


def _kfold_pairs(pool: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    if pool.n < k:
        raise ValueError(f"cannot make {k} folds from {pool.n} instances")
    order = np.random.default_rng([int(seed), 7]).permutation(pool.n)
    folds = np.array_split(order, k)
    pairs = []
    for i in range(k):
        rest = np.concatenate([folds[j] for j in range(k) if j != i])
        pairs.append((pool.subset(rest), pool.subset(folds[i])))
    return pairs


def grid_search(
    spec: GridSpec,
    train: Dataset,
    validation: Dataset,
    algo,
    seed: int,
    backend: str | None = None,
) -> GridSearchResult:
    """Train one model per grid cell, score on validation, pick the argmax.

    Ties go to the earliest cell in the grid's declared iteration order.
    Cells that diverge are recorded as failed, never fatal.  Independent
    cells may run on worker processes (capped by RFFOL_THREADS); results
    are merged by cell index, so parallel and serial outputs agree.
    """
    algo = resolve_algorithm(algo)
    if spec.folds > 1:
        merged = Dataset(
            instances=list(train.instances) + list(validation.instances),
            dim=max(train.dim, validation.dim),
            class_count=train.class_count,
            label_map=dict(train.label_map),
        )
        pairs = _kfold_pairs(merged, spec.folds, seed)
    else:
        pairs = [(train, validation)]

    cells = spec.cells()
    workers = min(_worker_cap(), len(cells))
    global _WORKER_CTX
    _WORKER_CTX = {"algo": algo, "pairs": pairs, "seed": int(seed), "backend": backend}
    try:
        items = list(enumerate(cells))
        if workers > 1 and hasattr(os, "fork"):
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
                raw = list(ex.map(_cell_worker, items))
        else:
            raw = [_cell_worker(item) for item in items]
    finally:
        _WORKER_CTX = None

    raw.sort(key=lambda r: r[0])
    results = [
        GridCellResult(params=cells[idx], accuracy=acc, error=err)
        for idx, acc, err in raw
    ]
    best: GridCellResult | None = None
    for cell in results:
        if cell.failed:
            continue
        if best is None or cell.accuracy > best.accuracy:
            best = cell
    return GridSearchResult(
        best_params=None if best is None else dict(best.params),
        best_accuracy=None if best is None else best.accuracy,
        cells=results,
    )


def wilcoxon(acc_a, acc_b) -> WilcoxonResult:
    """Wilcoxon signed-ranks statistics for paired accuracy lists.

    d_i = acc_a[i] - acc_b[i]; |d_i| are ranked ascending from 1 with
    average ranks on ties; zero differences stay in the ranking and their
    ranks are split half to each side.  T = min(R+, R-) and

        z = (T - n(n+1)/4) / sqrt(n(n+1)(2n+1)/24).

    Negative z with R+ < R- means acc_a ran behind acc_b.
    """
    a = np.asarray(acc_a, dtype=np.float64)
    b = np.asarray(acc_b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"paired lists must match, got {a.shape} vs {b.shape}")
    n = int(a.size)
    if n == 0:
        raise ValueError("need at least one pair")
    d = a - b
    ranks = rankdata(np.abs(d), method="average")
    half_zeros = 0.5 * float(ranks[d == 0].sum())
    r_plus = float(ranks[d > 0].sum()) + half_zeros
    r_minus = float(ranks[d < 0].sum()) + half_zeros
    t_stat = min(r_plus, r_minus)
    z = (t_stat - n * (n + 1) / 4.0) / math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
    return WilcoxonResult(r_plus=r_plus, r_minus=r_minus, t_stat=t_stat, z=z, n=n)


@dataclass(frozen=True)
class AccuracyTable:
    """Published test accuracies (percent) used as significance fixtures.

    12 dataset columns, 10 algorithm rows; ``None`` marks combinations
    the original comparison did not run (pamo covers only the 6 binary
    datasets).
    """

    algorithms: tuple[str, ...]
    datasets: tuple[str, ...]
    values: dict[str, tuple]

    def accuracy(self, algorithm: str, dataset: str) -> float | None:
        row = self.values[algorithm]
        return row[self.datasets.index(dataset)]

    def paired_columns(self, algo_a: str, algo_b: str):
        """Accuracy columns restricted to datasets both algorithms cover."""
        for name in (algo_a, algo_b):
            if name not in self.values:
                raise ValueError(
                    f"unknown algorithm {name!r}; choose from {sorted(self.values)}"
                )
        col_a, col_b, used = [], [], []
        for j, ds in enumerate(self.datasets):
            va = self.values[algo_a][j]
            vb = self.values[algo_b][j]
            if va is None or vb is None:
                continue
            col_a.append(va)
            col_b.append(vb)
            used.append(ds)
        return col_a, col_b, tuple(used)


_TABLE_DATASETS = (
    "skin",
    "kddcup08",
    "ijcnn1",
    "w7a",
    "codrna",
    "covtype",
    "combined",
    "mnist600k",
    "poker",
    "acoustic",
    "forest",
    "aloi",
)

_TABLE_VALUES = {
    "lr": (90.233, 100.000, 67.672, 95.556, 91.790, 75.317,
           73.563, 53.961, 27.160, 67.039, 51.347, 58.419),
    "ogd": (90.068, 100.000, 71.670, 96.457, 91.843, 76.072,
            77.792, 83.743, 31.614, 67.335, 71.210, 75.879),
    "pa": (81.630, 100.000, 70.022, 95.681, 91.791, 75.195,
           75.936, 82.630, 28.331, 65.489, 69.334, 75.674),
    "fogd": (99.942, 100.000, 98.014, 98.477, 96.172, 85.316,
             79.249, 95.680, 48.089, 67.658, 75.685, 86.694),
    "nogd": (99.047, 99.452, 90.572, 97.062, 92.468, 71.721,
             71.526, 78.585, 52.290, 67.500, 67.913, 52.180),
    "rrf": (99.949, 100.000, 97.780, 98.494, 96.030, 85.045,
            79.995, 95.712, 48.702, 67.438, 75.298, 86.778),
    "pamo": (99.829, 100.000, 98.687, 98.664, 96.258, 81.204,
             None, None, None, None, None, None),
    "avm": (99.616, 99.717, 94.062, 98.360, 95.107, 71.149,
            60.601, 84.399, 44.396, 58.972, 63.478, 27.301),
    "mpu-fogdu": (99.951, 100.000, 98.885, 98.388, 96.588, 90.880,
                  83.223, 99.096, 93.658, 74.032, 84.884, 83.576),
    "mpu-fogdub": (99.954, 100.000, 98.885, 98.396, 96.701, 90.927,
                   83.214, 99.097, 94.270, 74.304, 84.951, 83.597),
}

# z-scores reported alongside the published tables for these pairings.
PUBLISHED_Z = {
    ("fogd", "mpu-fogdub"): -2.16,
    ("rrf", "mpu-fogdub"): -2.16,
    ("nogd", "mpu-fogdub"): -3.06,
    ("avm", "mpu-fogdub"): -3.06,
}


def paper_tables() -> AccuracyTable:
    """The embedded published accuracy tables (values in percent)."""
    return AccuracyTable(
        algorithms=tuple(_TABLE_VALUES),
        datasets=_TABLE_DATASETS,
        values=dict(_TABLE_VALUES),
    )


@dataclass
class TableComparison:
    """Wilcoxon result over the embedded tables for one algorithm pair."""

    algo_a: str
    algo_b: str
    datasets: tuple[str, ...]
    result: WilcoxonResult
    published_z: float | None

    @property
    def matches_published(self) -> bool | None:
        if self.published_z is None:
            return None
        return round(self.result.z, 2) == self.published_z


def compare_from_tables(algo_a: str, algo_b: str) -> TableComparison:
    """Recompute the signed-ranks z for two table columns.

    Datasets missing either column are dropped from the pairing.  When a
    z-score was published for this pair it is attached so callers can
    report any discrepancy with the recomputation.
    """
    table = paper_tables()
    col_a, col_b, used = table.paired_columns(algo_a, algo_b)
    if not used:
        raise ValueError(f"no datasets shared by {algo_a!r} and {algo_b!r}")
    return TableComparison(
        algo_a=algo_a,
        algo_b=algo_b,
        datasets=used,
        result=wilcoxon(col_a, col_b),
        published_z=PUBLISHED_Z.get((algo_a, algo_b)),
    )


@dataclass
class BenchResult:
    """Everything produced by one benchmark run of one algorithm."""

    algo: str
    seed: int
    best_params: dict
    search: GridSearchResult
    trace: TrainTrace
    report: EvalReport
    model: OnlineModel
    sizes: tuple[int, int, int]


def bench_run(
    dataset: Dataset,
    algo,
    seed: int,
    grid: GridSpec | None = None,
    subset: int | None = None,
    folds: int = 1,
    backend: str | None = None,
) -> BenchResult:
    """Full benchmark protocol on one dataset.

    Optionally subsample to ``subset`` instances (seeded), then 60/20/20
    split, fit the [-1,1] normalizer on the training portion only, apply
    it everywhere, grid-search on train/validation, retrain on the
    training portion with the winning cell, and score on test.
    """
    spec = resolve_algorithm(algo)
    if subset is not None and subset < dataset.n:
        if subset < 5:
            raise ValueError("subset too small to split")
        order = np.random.default_rng([int(seed), 11]).permutation(dataset.n)[:subset]
        dataset = dataset.subset(order)
    train, validation, test = split(dataset, seed=seed)
    norm = fit_normalizer(train)
    train = apply_normalizer(norm, train)
    validation = apply_normalizer(norm, validation)
    test = apply_normalizer(norm, test)

    if grid is None:
        grid = default_grid(spec, folds=folds)
    elif folds > 1 and grid.folds == 1:
        grid = GridSpec(params=dict(grid.params), folds=folds)
    search = grid_search(grid, train, validation, spec, seed, backend=backend)
    if search.best_params is None:
        raise TrainingDiverged("every grid cell diverged; widen the grid")

    t0 = time.perf_counter()
    model = build_model(spec, search.best_params, train.dim, train.class_count, seed)
    model, trace = train_online(model, train, backend=backend)
    train_seconds = time.perf_counter() - t0
    report = evaluate(
        model, test, train_seconds=train_seconds, mistakes_online=trace.mistakes
    )
    return BenchResult(
        algo=spec.name,
        seed=int(seed),
        best_params=dict(search.best_params),
        search=search,
        trace=trace,
        report=report,
        model=model,
        sizes=(train.n, validation.n, test.n),
    )


@dataclass
class DriftResult:
    """Paired fixed-map vs adaptive-map outcome on a drifting stream.

    Rates are post-drift cumulative mistake rates (segments after the
    first).  ``wins`` counts seeds where the adaptive learner was
    strictly lower; the Wilcoxon pairing is adaptive minus fixed, so an
    adaptive advantage shows up as r_minus > r_plus and negative z.
    """

    seeds: tuple[int, ...]
    fixed_rates: list[float]
    adaptive_rates: list[float]
    wins: int
    test: WilcoxonResult


def _segment_datasets(stream: Dataset, lengths) -> list[Dataset]:
    out = []
    start = 0
    for length in lengths:
        out.append(stream.subset(np.arange(start, start + length)))
        start += length
    return out


def drift_experiment(
    seeds=tuple(range(10)),
    dim: int = 5,
    segment_lengths=(5000, 5000),
    rotation_angle: float = math.pi / 2,
    noise_std: float = 0.0,
    num_features: int = 200,
    sigma2: float = 1.0,
    eta_w: float = 100.0,
    eta_u: float = 0.1,
    eta_b: float = 0.01,
    backend: str | None = None,
) -> DriftResult:
    """Run the paired drift comparison across ``seeds``.

    Both learners share the identical initial map per seed and stream the
    same instances in the same order; only the update mode differs.
    """
    seeds = tuple(int(s) for s in seeds)
    lengths = tuple(int(x) for x in segment_lengths)
    fixed_rates: list[float] = []
    adaptive_rates: list[float] = []
    for seed in seeds:
        config = DriftStreamConfig(
            dim=dim,
            segment_lengths=lengths,
            rotation_angles=tuple([rotation_angle] * (len(lengths) - 1)),
            noise_std=noise_std,
            seed=seed,
        )
        stream = generate_drift_stream(config)
        fmap = sample_frequencies(
            dim, num_features, math.sqrt(sigma2), seed, variant=MapVariant.MPU_SCALED
        )
        fixed = init_model(fmap.copy(), 1, eta_w, mode=UpdateMode.W_ONLY)
        adaptive = init_model(
            fmap.copy(), 1, eta_w, eta_u, eta_b, mode=UpdateMode.WUB
        )
        segments = _segment_datasets(stream, lengths)
        post_mistakes = {"fixed": 0, "adaptive": 0}
        post_steps = 0
        for k, segment in enumerate(segments):
            _, tr_fixed = train_online(fixed, segment, backend=backend)
            _, tr_adaptive = train_online(adaptive, segment, backend=backend)
            if k > 0:
                post_mistakes["fixed"] += tr_fixed.mistakes
                post_mistakes["adaptive"] += tr_adaptive.mistakes
                post_steps += segment.n
        fixed_rates.append(post_mistakes["fixed"] / post_steps)
        adaptive_rates.append(post_mistakes["adaptive"] / post_steps)
    wins = sum(1 for a, f in zip(adaptive_rates, fixed_rates) if a < f)
    return DriftResult(
        seeds=seeds,
        fixed_rates=fixed_rates,
        adaptive_rates=adaptive_rates,
        wins=wins,
        test=wilcoxon(adaptive_rates, fixed_rates),
    )
