# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col/col2im. Same layout and accumulation order as reference.py."""

import numpy as np


def im2col(double[:, :, ::1] x, int k, int stride, int pad):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t oh = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - k) // stride + 1
    out_arr = np.zeros((c * k * k, oh * ow), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t cc, ky, kx, oy, ox, r, iy, ix, base
    for cc in range(c):
        for ky in range(k):
            for kx in range(k):
                r = (cc * k + ky) * k + kx
                for oy in range(oh):
                    iy = oy * stride + ky - pad
                    if iy < 0 or iy >= h:
                        continue
                    base = oy * ow
                    for ox in range(ow):
                        ix = ox * stride + kx - pad
                        if 0 <= ix < w:
                            out[r, base + ox] = x[cc, iy, ix]
    return out_arr


def col2im(double[:, ::1] cols, shape, int k, int stride, int pad):
    cdef Py_ssize_t c = shape[0], h = shape[1], w = shape[2]
    cdef Py_ssize_t oh = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - k) // stride + 1
    out_arr = np.zeros((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t cc, ky, kx, oy, ox, r, iy, ix, base
    for cc in range(c):
        for ky in range(k):
            for kx in range(k):
                r = (cc * k + ky) * k + kx
                for oy in range(oh):
                    iy = oy * stride + ky - pad
                    if iy < 0 or iy >= h:
                        continue
                    base = oy * ow
                    for ox in range(ow):
                        ix = ox * stride + kx - pad
                        if 0 <= ix < w:
                            out[cc, iy, ix] += cols[r, base + ox]
    return out_arr
