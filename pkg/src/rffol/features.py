"""Random Fourier feature maps for the Gaussian kernel.

Three map variants are provided:

``COS_SIN``
    the classic paired map ``(1/sqrt(D)) * (cos(u_j.x), sin(u_j.x))``,
    output width ``2*D``, no phases involved.
``PHASE_COS``
    the phase-shifted cosine map ``sqrt(2/D) * cos(u_j.x + b_j)``, an
    unbiased kernel estimator of width ``D``.
``MPU_SCALED``
    the rescaled phase-cosine map ``(sqrt(2)/D) * cos(u_j.x + b_j)`` used
    by the multi-parameter-updating online learners.  Componentwise it is
    exactly the PHASE_COS map divided by ``sqrt(D)``, so its dot products
    carry an extra ``1/D`` factor (the learners compensate through the
    weight step size).

Frequencies are drawn from ``N(0, sigma^-2)`` per coordinate, the spectral
density of ``k(x, y) = exp(-||x - y||^2 / (2 sigma^2))``; phases are uniform
on ``[0, 2*pi]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MapVariant",
    "FeatureMap",
    "KernelApproxReport",
    "component_scale",
    "output_width",
    "sample_frequencies",
    "project",
    "transform",
    "rbf_kernel",
    "approx_kernel",
    "approximation_report",
]


class MapVariant(enum.Enum):
    """Which random Fourier map a :class:`FeatureMap` realizes."""

    COS_SIN = "cos-sin"
    PHASE_COS = "phase-cos"
    MPU_SCALED = "mpu-scaled"


# stable numeric codes shared with the compiled training loop
VARIANT_CODES = {
    MapVariant.COS_SIN: 0,
    MapVariant.PHASE_COS: 1,
    MapVariant.MPU_SCALED: 2,
}


def component_scale(variant: MapVariant, num_features: int) -> float:
    """Per-component scale factor of the map."""
    if variant is MapVariant.MPU_SCALED:
        return math.sqrt(2.0) / num_features
    if variant is MapVariant.PHASE_COS:
        return math.sqrt(2.0 / num_features)
    return 1.0 / math.sqrt(num_features)


def output_width(variant: MapVariant, num_features: int) -> int:
    """Length of the transformed vector (2D for COS_SIN, D otherwise)."""
    return 2 * num_features if variant is MapVariant.COS_SIN else num_features


@dataclass
class FeatureMap:
    """A drawn random Fourier basis.

    Attributes
    ----------
    frequencies : ndarray, shape (d, D)
        One frequency column per feature index, row per input coordinate.
    phases : ndarray, shape (D,)
        Phase offsets; in [0, 2*pi] as drawn.  Online learning may move
        them outside that interval (cosine is periodic, no wrap applied).
    bandwidth : float
        Gaussian kernel width sigma (> 0).
    variant : MapVariant
    seed : int
        RNG seed the map was drawn with.
    """

    frequencies: np.ndarray
    phases: np.ndarray
    bandwidth: float
    variant: MapVariant
    seed: int

    def __post_init__(self) -> None:
        self.frequencies = np.ascontiguousarray(self.frequencies, dtype=np.float64)
        self.phases = np.ascontiguousarray(self.phases, dtype=np.float64)
        if self.frequencies.ndim != 2:
            raise ValueError("frequencies must be a d x D matrix")
        d, num = self.frequencies.shape
        if d < 1 or num < 1:
            raise ValueError("frequency matrix must be at least 1 x 1")
        if self.phases.shape != (num,):
            raise ValueError("phase vector length must match frequency columns")
        if not np.isfinite(self.frequencies).all():
            raise ValueError("frequencies contain non-finite entries")
        if not np.isfinite(self.phases).all():
            raise ValueError("phases contain non-finite entries")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError("bandwidth must be a positive finite real")

    @property
    def input_dim(self) -> int:
        return self.frequencies.shape[0]

    @property
    def num_features(self) -> int:
        """Number of random frequencies D."""
        return self.frequencies.shape[1]

    @property
    def width(self) -> int:
        """Length of the transformed vector."""
        return output_width(self.variant, self.num_features)

    @property
    def scale(self) -> float:
        return component_scale(self.variant, self.num_features)

    def copy(self) -> "FeatureMap":
        return FeatureMap(
            frequencies=self.frequencies.copy(),
            phases=self.phases.copy(),
            bandwidth=self.bandwidth,
            variant=self.variant,
            seed=self.seed,
        )


@dataclass
class KernelApproxReport:
    """Empirical kernel-approximation error over a set of vector pairs."""

    mean_abs_error: float
    max_abs_error: float
    pair_count: int
    variant: MapVariant

    def __post_init__(self) -> None:
        if self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")
        if not 0.0 <= self.mean_abs_error <= self.max_abs_error:
            raise ValueError("need 0 <= mean_abs_error <= max_abs_error")


def sample_frequencies(
    d: int,
    num_features: int,
    sigma: float,
    seed: int,
    variant: MapVariant = MapVariant.MPU_SCALED,
) -> FeatureMap:
    """Draw a feature map for the Gaussian kernel of width ``sigma``.

    Frequencies are i.i.d. ``N(0, sigma^-2)`` per coordinate; phases are
    uniform on ``[0, 2*pi]``.  Identical ``(d, num_features, sigma, seed)``
    yield a bit-identical map.

    Parameters
    ----------
    d : int
        Input dimension (>= 1).
    num_features : int
        Number of random frequencies D (>= 1).
    sigma : float
        Kernel bandwidth (> 0, finite).
    seed : int
        Non-negative RNG seed.
    variant : MapVariant
        How the map is applied; does not affect the drawn numbers.
    """
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if int(num_features) != num_features or num_features < 1:
        raise ValueError("num_features must be a positive integer")
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError("sigma must be a positive finite real")
    if int(seed) != seed or seed < 0:
        raise ValueError("seed must be a non-negative integer")
    rng = np.random.default_rng(int(seed))
    freqs = rng.normal(0.0, 1.0 / sigma, size=(int(d), int(num_features)))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=int(num_features))
    return FeatureMap(
        frequencies=freqs,
        phases=phases,
        bandwidth=float(sigma),
        variant=variant,
        seed=int(seed),
    )


def _sparse_parts(x) -> tuple[np.ndarray, np.ndarray] | None:
    """(1-based indices, values) when x is a sparse instance, else None."""
    indices = getattr(x, "indices", None)
    values = getattr(x, "values", None)
    if indices is None or values is None:
        return None
    return np.asarray(indices), np.asarray(values)


def project(fmap: FeatureMap, x) -> np.ndarray:
    """The frequency projections ``u_j . x`` as a length-D vector.

    ``x`` may be a dense vector of length ``d`` or a sparse instance with
    1-based ``indices`` / ``values`` attributes; the sparse path touches
    only the stored nonzeros.
    """
    sparse = _sparse_parts(x)
    if sparse is not None:
        idx, vals = sparse
        if idx.size == 0:
            return np.zeros(fmap.num_features)
        if idx.max() > fmap.input_dim:
            raise ValueError(
                f"instance index {int(idx.max())} exceeds map dimension {fmap.input_dim}"
            )
        return vals.astype(np.float64, copy=False) @ fmap.frequencies[idx - 1, :]
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (fmap.input_dim,):
        raise ValueError(f"expected a vector of length {fmap.input_dim}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("input vector contains non-finite entries")
    return x @ fmap.frequencies


def transform(fmap: FeatureMap, x) -> np.ndarray:
    """Apply the feature map; returns a vector of length ``fmap.width``."""
    z = project(fmap, x)
    scale = fmap.scale
    if fmap.variant is MapVariant.COS_SIN:
        return np.concatenate([scale * np.cos(z), scale * np.sin(z)])
    return scale * np.cos(z + fmap.phases)


def rbf_kernel(x, y, sigma: float) -> float:
    """Gaussian kernel ``exp(-||x - y||^2 / (2 sigma^2))``."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError("sigma must be a positive finite real")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of equal length")
    diff = x - y
    return float(np.exp(-(diff @ diff) / (2.0 * sigma * sigma)))


def approx_kernel(fmap: FeatureMap, x, y) -> float:
    """Kernel estimate ``transform(x) . transform(y)``."""
    return float(transform(fmap, x) @ transform(fmap, y))


def approximation_report(
    d: int,
    num_features: int,
    sigma: float,
    variant: MapVariant,
    pairs,
    seed: int,
) -> KernelApproxReport:
    """Draw a fresh map and measure ``|approx_kernel - rbf_kernel|`` over pairs.

    ``pairs`` is a non-empty sequence of ``(x, y)`` dense vector pairs of
    dimension ``d``.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be non-empty")
    fmap = sample_frequencies(d, num_features, sigma, seed, variant=variant)
    errors = [
        abs(approx_kernel(fmap, x, y) - rbf_kernel(x, y, sigma)) for x, y in pairs
    ]
    return KernelApproxReport(
        mean_abs_error=float(np.mean(errors)),
        max_abs_error=float(np.max(errors)),
        pair_count=len(errors),
        variant=variant,
    )
