"""Streaming kernel classification with learnable random Fourier features.

The toolkit approximates a Gaussian kernel with a finite random Fourier
basis and trains hinge-loss classifiers over it in a single online pass.
The basis itself (frequencies, and optionally phases) can keep learning
alongside the weights, which lets the model track drifting streams.

Typical use::

    from rffol import parse_libsvm, sample_frequencies, init_model, train_online

    data = parse_libsvm("train.libsvm")
    fmap = sample_frequencies(data.dim, 400, sigma=2.0, seed=1)
    model = init_model(fmap, 1, eta_w=100.0, eta_u=0.1, eta_b=0.01,
                       mode=UpdateMode.WUB)
    model, trace = train_online(model, data)
"""

from ._core import available_backends, default_backend
from .data import (
    DataFormatError,
    Dataset,
    DriftStreamConfig,
    Instance,
    Normalizer,
    apply_normalizer,
    fit_normalizer,
    generate_drift_stream,
    parse_libsvm,
    split,
    write_libsvm,
)
from .evaluation import (
    ALGORITHMS,
    BenchResult,
    DriftResult,
    EvalReport,
    GridSpec,
    WilcoxonResult,
    bench_run,
    compare_from_tables,
    default_grid,
    drift_experiment,
    evaluate,
    grid_search,
    paper_tables,
    wilcoxon,
)
from .features import (
    FeatureMap,
    KernelApproxReport,
    MapVariant,
    approx_kernel,
    approximation_report,
    component_scale,
    output_width,
    project,
    rbf_kernel,
    sample_frequencies,
    transform,
)
from .learner import (
    GradientSet,
    OnlineModel,
    TrainTrace,
    TrainingDiverged,
    UpdateMode,
    gradients,
    hinge_loss_binary,
    init_model,
    multiclass_margin,
    predict,
    predict_many,
    score,
    step,
    train_online,
)
from .model_io import ModelFormatError, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "available_backends",
    "default_backend",
    "DataFormatError",
    "Dataset",
    "DriftStreamConfig",
    "Instance",
    "Normalizer",
    "apply_normalizer",
    "fit_normalizer",
    "generate_drift_stream",
    "parse_libsvm",
    "split",
    "write_libsvm",
    "ALGORITHMS",
    "BenchResult",
    "DriftResult",
    "EvalReport",
    "GridSpec",
    "WilcoxonResult",
    "bench_run",
    "compare_from_tables",
    "default_grid",
    "drift_experiment",
    "evaluate",
    "grid_search",
    "paper_tables",
    "wilcoxon",
    "FeatureMap",
    "KernelApproxReport",
    "MapVariant",
    "approx_kernel",
    "approximation_report",
    "component_scale",
    "output_width",
    "project",
    "rbf_kernel",
    "sample_frequencies",
    "transform",
    "GradientSet",
    "OnlineModel",
    "TrainTrace",
    "TrainingDiverged",
    "UpdateMode",
    "gradients",
    "hinge_loss_binary",
    "init_model",
    "multiclass_margin",
    "predict",
    "predict_many",
    "score",
    "step",
    "train_online",
    "ModelFormatError",
    "load_model",
    "save_model",
]
