# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled per-instance online training loop.

Semantics match rffol._core.loop_py.run_online; see that module for the
contract.  Kept free of numpy C-API usage: arrays come in as typed
memoryviews, workspace buffers are plain numpy allocations.
"""

import numpy as np

from libc.math cimport cos, sin, isfinite

VARIANT_COS_SIN = 0
VARIANT_PHASE_COS = 1
VARIANT_MPU_SCALED = 2


def run_online(
    double[:, ::1] U,
    double[::1] B,
    double[:, ::1] W,
    long long[::1] indptr,
    long long[::1] indices,
    double[::1] values,
    long long[::1] labels,
    int variant,
    double scale,
    double eta_w,
    double eta_u,
    double eta_b,
    bint update_u,
    bint update_b,
):
    cdef Py_ssize_t d = U.shape[0]
    cdef Py_ssize_t num = U.shape[1]
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t width = W.shape[1]
    cdef Py_ssize_t n = labels.shape[0]
    cdef bint phase = variant != VARIANT_COS_SIN
    cdef bint learn_map = phase and (update_u or update_b)

    mistakes_arr = np.zeros(n, dtype=np.uint8)
    loss_arr = np.zeros(n, dtype=np.uint8)
    z_arr = np.zeros(num)
    phi_arr = np.zeros(width)
    coef_arr = np.zeros(num)
    scores_arr = np.zeros(m)
    cdef unsigned char[::1] mistakes = mistakes_arr
    cdef unsigned char[::1] loss_events = loss_arr
    cdef double[::1] z = z_arr
    cdef double[::1] phi = phi_arr
    cdef double[::1] coef = coef_arr
    cdef double[::1] scores = scores_arr

    cdef Py_ssize_t t, k, j, r, row, lo, hi
    cdef Py_ssize_t y, pred, runner
    cdef long long lb
    cdef double v, acc, sc, loss, flb, best, rbest
    cdef bint bad

    for t in range(n):
        lo = indptr[t]
        hi = indptr[t + 1]

        for j in range(num):
            z[j] = 0.0
        for k in range(lo, hi):
            row = indices[k]
            v = values[k]
            for j in range(num):
                z[j] += v * U[row, j]

        if phase:
            for j in range(num):
                phi[j] = scale * cos(z[j] + B[j])
        else:
            for j in range(num):
                phi[j] = scale * cos(z[j])
                phi[num + j] = scale * sin(z[j])

        if m == 1:
            lb = labels[t]
            sc = 0.0
            for j in range(width):
                sc += W[0, j] * phi[j]
            pred = 1 if sc >= 0.0 else -1
            if pred != lb:
                mistakes[t] = 1
            loss = 1.0 - lb * sc
            if loss <= 0.0:
                continue
            loss_events[t] = 1
            flb = <double> lb
            if learn_map:
                bad = False
                for j in range(num):
                    coef[j] = flb * (W[0, j] * (scale * sin(z[j] + B[j])))
                    if not isfinite(coef[j]):
                        bad = True
                if bad:
                    return mistakes_arr, loss_arr, t
                if update_u and eta_u != 0.0:
                    for k in range(lo, hi):
                        row = indices[k]
                        v = values[k]
                        for j in range(num):
                            U[row, j] -= eta_u * (v * coef[j])
                if update_b and eta_b != 0.0:
                    for j in range(num):
                        B[j] -= eta_b * coef[j]
            bad = False
            for j in range(width):
                W[0, j] += eta_w * (flb * phi[j])
                if not isfinite(W[0, j]):
                    bad = True
            if bad:
                return mistakes_arr, loss_arr, t
        else:
            y = labels[t]
            for r in range(m):
                acc = 0.0
                for j in range(width):
                    acc += W[r, j] * phi[j]
                scores[r] = acc
            best = scores[0]
            pred = 0
            for r in range(1, m):
                if scores[r] > best:
                    best = scores[r]
                    pred = r
            if pred != y:
                mistakes[t] = 1
            runner = 1 if y == 0 else 0
            rbest = scores[runner]
            for r in range(m):
                if r != y and scores[r] > rbest:
                    rbest = scores[r]
                    runner = r
            loss = 1.0 - (scores[y] - scores[runner])
            if loss <= 0.0:
                continue
            loss_events[t] = 1
            if learn_map:
                bad = False
                for j in range(num):
                    coef[j] = (W[y, j] - W[runner, j]) * (scale * sin(z[j] + B[j]))
                    if not isfinite(coef[j]):
                        bad = True
                if bad:
                    return mistakes_arr, loss_arr, t
                if update_u and eta_u != 0.0:
                    for k in range(lo, hi):
                        row = indices[k]
                        v = values[k]
                        for j in range(num):
                            U[row, j] -= eta_u * (v * coef[j])
                if update_b and eta_b != 0.0:
                    for j in range(num):
                        B[j] -= eta_b * coef[j]
            bad = False
            for j in range(width):
                W[y, j] += eta_w * phi[j]
                if not isfinite(W[y, j]):
                    bad = True
                W[runner, j] -= eta_w * phi[j]
                if not isfinite(W[runner, j]):
                    bad = True
            if bad:
                return mistakes_arr, loss_arr, t

    return mistakes_arr, loss_arr, -1
