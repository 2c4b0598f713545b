# cython: language_level=3
"""Compiled inner loops for interval scores and discrete CRPS sums.

Signatures mirror ``wiscore._kernels_py``; inputs are validated and made
C-contiguous float64 by ``wiscore.kernels`` before they reach this module.
"""

import numpy as np


def wis_components(const double[:, ::1] lower, const double[:, ::1] upper,
                   median, const double[::1] y,
                   const double[::1] alphas, const double[::1] weights,
                   double w0):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t K = alphas.shape[0]
    cdef Py_ssize_t i, k
    cdef bint has_median = median is not None
    cdef const double[::1] med
    if has_median:
        med = median

    disp_arr = np.zeros(n)
    over_arr = np.zeros(n)
    under_arr = np.zeros(n)
    cdef double[::1] disp = disp_arr
    cdef double[::1] over = over_arr
    cdef double[::1] under = under_arr

    cdef double yi, lo, hi, w, scale, sd, so, su, m
    for i in range(n):
        yi = y[i]
        sd = 0.0
        so = 0.0
        su = 0.0
        for k in range(K):
            lo = lower[i, k]
            hi = upper[i, k]
            w = weights[k]
            scale = 2.0 / alphas[k]
            sd += w * (hi - lo)
            if yi < lo:
                so += w * (scale * (lo - yi))
            elif yi > hi:
                su += w * (scale * (yi - hi))
        if has_median:
            m = med[i]
            if m > yi:
                so += w0 * (2.0 * (m - yi))
            elif m < yi:
                su += w0 * (2.0 * (yi - m))
        disp[i] = sd
        over[i] = so
        under[i] = su
    return disp_arr, over_arr, under_arr


cdef double _crps_one(const double[::1] probs, long offset, long y) nogil:
    cdef Py_ssize_t n = probs.shape[0]
    cdef long last = offset + <long>n - 1
    cdef long lo = offset if offset < y else y
    cdef long hi = last if last > y else y
    cdef long x, j
    cdef double F = 0.0
    cdef double total = 0.0
    cdef double diff
    for x in range(lo, hi + 1):
        j = x - offset
        if 0 <= j < n:
            F += probs[j]
        if x >= y:
            diff = F - 1.0
        else:
            diff = F
        total += diff * diff
    return total


def crps_step_sum(const double[::1] probs, long offset, long y):
    return _crps_one(probs, offset, y)


def crps_step_sum_many(const double[::1] probs, long offset, const long[::1] ys):
    cdef Py_ssize_t m = ys.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(m):
            out[i] = _crps_one(probs, offset, ys[i])
    return out_arr
