# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution kernels for small dense grids.

Direct loops beat im2col + BLAS on the block-grid sizes this package works
with (grids of a few hundred cells, a few dozen channels), mostly by
avoiding per-call overhead during cell-by-cell infilling.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def conv2d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, b_arr):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], c_in = x.shape[1], rows = x.shape[2], cols = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    out_arr = np.zeros((batch, c_out, rows, cols), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out_arr
    cdef double[::1] bias
    cdef bint has_bias = b_arr is not None
    if has_bias:
        bias = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t b, o, c, r, q, i, j, rr, qq
    cdef double acc, tap
    with nogil:
        for b in range(batch):
            for o in range(c_out):
                for r in range(rows):
                    for q in range(cols):
                        acc = bias[o] if has_bias else 0.0
                        for c in range(c_in):
                            for i in range(kh):
                                rr = r + i - ph
                                if rr < 0 or rr >= rows:
                                    continue
                                for j in range(kw):
                                    qq = q + j - pw
                                    if qq < 0 or qq >= cols:
                                        continue
                                    tap = w[o, c, i, j]
                                    if tap != 0.0:
                                        acc += tap * x[b, c, rr, qq]
                        y[b, o, r, q] = acc
    return out_arr


def conv2d_backward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray gy_arr):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], c_in = x.shape[1], rows = x.shape[2], cols = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    gx_arr = np.zeros((batch, c_in, rows, cols), dtype=np.float64)
    gw_arr = np.zeros((c_out, c_in, kh, kw), dtype=np.float64)
    gb_arr = np.zeros(c_out, dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t b, o, c, r, q, i, j, rr, qq
    cdef double g, tap
    with nogil:
        for b in range(batch):
            for o in range(c_out):
                for r in range(rows):
                    for q in range(cols):
                        g = gy[b, o, r, q]
                        gb[o] += g
                        if g == 0.0:
                            continue
                        for c in range(c_in):
                            for i in range(kh):
                                rr = r + i - ph
                                if rr < 0 or rr >= rows:
                                    continue
                                for j in range(kw):
                                    qq = q + j - pw
                                    if qq < 0 or qq >= cols:
                                        continue
                                    gw[o, c, i, j] += g * x[b, c, rr, qq]
                                    tap = w[o, c, i, j]
                                    if tap != 0.0:
                                        gx[b, c, rr, qq] += tap * g
    return gx_arr, gw_arr, gb_arr
