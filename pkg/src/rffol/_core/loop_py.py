"""Pure numpy fallback for the per-instance online training loop.

Mirrors the compiled loop in rffol._core._loop_cy operation for operation;
the two stay numerically aligned to floating-point rounding.  This module
is also the reference against which the composed learner primitives
(score / gradients / step) are checked bitwise.
"""

from __future__ import annotations

import numpy as np

VARIANT_COS_SIN = 0
VARIANT_PHASE_COS = 1
VARIANT_MPU_SCALED = 2


def run_online(
    U: np.ndarray,
    B: np.ndarray,
    W: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    values: np.ndarray,
    labels: np.ndarray,
    variant: int,
    scale: float,
    eta_w: float,
    eta_u: float,
    eta_b: float,
    update_u: bool,
    update_b: bool,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Single online pass; mutates U, B, W in place.

    Returns (mistake flags, positive-loss flags, diverged step or -1).
    Predictions are made before each update; updates run only on positive
    hinge loss, from the pre-update parameter snapshot.
    """
    d, num = U.shape
    m = W.shape[0]
    n = labels.shape[0]
    mistakes = np.zeros(n, dtype=np.uint8)
    loss_events = np.zeros(n, dtype=np.uint8)
    phase = variant != VARIANT_COS_SIN
    zeros = np.zeros(num)

    for t in range(n):
        lo, hi = indptr[t], indptr[t + 1]
        if hi > lo:
            idx = indices[lo:hi]
            vals = values[lo:hi]
            z = vals @ U[idx, :]
        else:
            idx = vals = None
            z = zeros
        if phase:
            phi = scale * np.cos(z + B)
        else:
            phi = np.concatenate([scale * np.cos(z), scale * np.sin(z)])

        if m == 1:
            lb = int(labels[t])
            sc = float(W[0] @ phi)
            pred = 1 if sc >= 0.0 else -1
            if pred != lb:
                mistakes[t] = 1
            loss = 1.0 - lb * sc
            if loss <= 0.0:
                continue
            loss_events[t] = 1
            if phase and (update_u or update_b):
                coef = lb * (W[0] * (scale * np.sin(z + B)))
                if not np.isfinite(coef).all():
                    return mistakes, loss_events, t
                if update_u and eta_u != 0.0 and idx is not None:
                    U[idx, :] -= eta_u * np.outer(vals, coef)
                if update_b and eta_b != 0.0:
                    B -= eta_b * coef
            W[0] += eta_w * (lb * phi)
            if not np.isfinite(W[0]).all():
                return mistakes, loss_events, t
        else:
            y = int(labels[t])
            scores = W @ phi
            pred = int(np.argmax(scores))
            if pred != y:
                mistakes[t] = 1
            masked = scores.copy()
            masked[y] = -np.inf
            runner = int(np.argmax(masked))
            loss = 1.0 - (scores[y] - scores[runner])
            if loss <= 0.0:
                continue
            loss_events[t] = 1
            if phase and (update_u or update_b):
                coef = (W[y] - W[runner]) * (scale * np.sin(z + B))
                if not np.isfinite(coef).all():
                    return mistakes, loss_events, t
                if update_u and eta_u != 0.0 and idx is not None:
                    U[idx, :] -= eta_u * np.outer(vals, coef)
                if update_b and eta_b != 0.0:
                    B -= eta_b * coef
            W[y] += eta_w * phi
            W[runner] -= eta_w * phi
            if not (np.isfinite(W[y]).all() and np.isfinite(W[runner]).all()):
                return mistakes, loss_events, t

    return mistakes, loss_events, -1
