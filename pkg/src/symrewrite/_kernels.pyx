# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LSTM-cell and softmax-cross-entropy kernels.

Same signatures as ``_kernels_py``. The transcendental calls go through
numpy's vectorized ``tanh``/``exp`` (much faster than scalar libm); the
arithmetic around them is fused into single row-major passes, so the
reduction order is fixed.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


def lstm_forward(const double[:, ::1] pre, const double[:, ::1] c_prev):
    cdef Py_ssize_t B = c_prev.shape[0], H = c_prev.shape[1]
    cdef Py_ssize_t b, j
    scale = np.full(4 * H, 0.5)
    scale[2 * H:3 * H] = 1.0
    # sigmoid(x) = 0.5 * (1 + tanh(x / 2))
    acts_arr = np.tanh(np.multiply(pre, scale))
    c_arr = np.empty((B, H))
    cdef double[:, ::1] acts = acts_arr, c = c_arr
    cdef double i, f, g
    with nogil:
        for b in range(B):
            for j in range(H):
                i = 0.5 * (1.0 + acts[b, j])
                f = 0.5 * (1.0 + acts[b, H + j])
                g = acts[b, 2 * H + j]
                acts[b, j] = i
                acts[b, H + j] = f
                acts[b, 3 * H + j] = 0.5 * (1.0 + acts[b, 3 * H + j])
                c[b, j] = f * c_prev[b, j] + i * g
    tc_arr = np.tanh(c_arr)
    h_arr = np.empty((B, H))
    cdef double[:, ::1] h = h_arr, tc = tc_arr
    with nogil:
        for b in range(B):
            for j in range(H):
                h[b, j] = acts[b, 3 * H + j] * tc[b, j]
    return h_arr, c_arr, acts_arr, tc_arr


def lstm_backward(const double[:, ::1] dh, const double[:, ::1] dc,
                  const double[:, ::1] acts, const double[:, ::1] c_prev,
                  const double[:, ::1] tanh_c):
    cdef Py_ssize_t B = c_prev.shape[0], H = c_prev.shape[1]
    cdef Py_ssize_t b, j
    dpre_arr = np.empty((B, 4 * H))
    dcp_arr = np.empty((B, H))
    cdef double[:, ::1] dpre = dpre_arr, dcp = dcp_arr
    cdef double i, f, g, o, t, dct
    with nogil:
        for b in range(B):
            for j in range(H):
                i = acts[b, j]
                f = acts[b, H + j]
                g = acts[b, 2 * H + j]
                o = acts[b, 3 * H + j]
                t = tanh_c[b, j]
                dct = dc[b, j] + dh[b, j] * o * (1.0 - t * t)
                dpre[b, j] = dct * g * i * (1.0 - i)
                dpre[b, H + j] = dct * c_prev[b, j] * f * (1.0 - f)
                dpre[b, 2 * H + j] = dct * i * (1.0 - g * g)
                dpre[b, 3 * H + j] = dh[b, j] * t * o * (1.0 - o)
                dcp[b, j] = dct * f
    return dpre_arr, dcp_arr


def xent_forward(const double[:, ::1] logits, const cnp.int64_t[::1] targets,
                 cnp.int64_t ignore):
    cdef Py_ssize_t N = logits.shape[0], V = logits.shape[1]
    cdef Py_ssize_t n, v
    probs_arr = np.empty((N, V))
    picked_arr = np.zeros(N)
    cdef double[:, ::1] probs = probs_arr
    cdef double[::1] picked = picked_arr
    cdef double m, z, total = 0.0
    with nogil:
        for n in range(N):
            m = logits[n, 0]
            for v in range(1, V):
                if logits[n, v] > m:
                    m = logits[n, v]
            for v in range(V):
                probs[n, v] = logits[n, v] - m
            if targets[n] != ignore:
                picked[n] = probs[n, targets[n]]
    np.exp(probs_arr, out=probs_arr)
    with nogil:
        for n in range(N):
            z = 0.0
            for v in range(V):
                z = z + probs[n, v]
            for v in range(V):
                probs[n, v] = probs[n, v] / z
            if targets[n] != ignore:
                total = total + (log(z) - picked[n])
    return total, probs_arr


def xent_backward(const double[:, ::1] probs, const cnp.int64_t[::1] targets,
                  cnp.int64_t ignore, double scale):
    cdef Py_ssize_t N = probs.shape[0], V = probs.shape[1]
    cdef Py_ssize_t n, v
    d_arr = np.empty((N, V))
    cdef double[:, ::1] d = d_arr
    with nogil:
        for n in range(N):
            if targets[n] == ignore:
                for v in range(V):
                    d[n, v] = 0.0
            else:
                for v in range(V):
                    d[n, v] = probs[n, v] * scale
                d[n, targets[n]] -= scale
    return d_arr
