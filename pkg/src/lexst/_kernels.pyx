# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the attention-pooling classifier.

Mirrors ``_kernels_py`` exactly; see that module for the packed-document
calling convention.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _max_len(const i64[::1] offsets) noexcept nogil:
    cdef Py_ssize_t i, best = 0
    for i in range(offsets.shape[0] - 1):
        if offsets[i + 1] - offsets[i] > best:
            best = offsets[i + 1] - offsets[i]
    return best


cdef void _attend(const f64[:, ::1] E, const f64[:, ::1] AT, const f64[::1] ba,
                  const f64[::1] u, const i64[::1] ids, Py_ssize_t lo, Py_ssize_t L,
                  f64[:, ::1] hid, f64[::1] alpha, f64[::1] v) noexcept nogil:
    """Fill hid (tanh layer), alpha (attention) and v (context) for one doc.

    ``AT`` is the attention projection transposed to (d, d_a) so the inner
    loops run over contiguous memory without reductions.
    """
    cdef Py_ssize_t t, j, k, w
    cdef Py_ssize_t d = E.shape[1], da = AT.shape[1]
    cdef f64 acc, e, smax, ssum
    for t in range(L):
        w = ids[lo + t]
        for k in range(da):
            hid[t, k] = ba[k]
        for j in range(d):
            e = E[w, j]
            for k in range(da):
                hid[t, k] += AT[j, k] * e
        acc = 0.0
        for k in range(da):
            hid[t, k] = tanh(hid[t, k])
            acc += u[k] * hid[t, k]
        alpha[t] = acc
    smax = alpha[0]
    for t in range(1, L):
        if alpha[t] > smax:
            smax = alpha[t]
    ssum = 0.0
    for t in range(L):
        alpha[t] = exp(alpha[t] - smax)
        ssum += alpha[t]
    for t in range(L):
        alpha[t] /= ssum
    for j in range(d):
        v[j] = 0.0
    for t in range(L):
        w = ids[lo + t]
        e = alpha[t]
        for j in range(d):
            v[j] += e * E[w, j]


cdef f64 _head(const f64[:, ::1] W, const f64[::1] b, f64[::1] h,
               f64[::1] logits) noexcept nogil:
    """Fill logits = W h + b; return log-sum-exp."""
    cdef Py_ssize_t c, j
    cdef Py_ssize_t C = W.shape[0], d = W.shape[1]
    cdef f64 acc, m, s
    for c in range(C):
        acc = 0.0
        for j in range(d):
            acc += W[c, j] * h[j]
        logits[c] = acc + b[c]
    m = logits[0]
    for c in range(1, C):
        if logits[c] > m:
            m = logits[c]
    s = 0.0
    for c in range(C):
        s += exp(logits[c] - m)
    return m + log(s)


def forward_batch(const f64[:, ::1] E, const f64[:, ::1] A, const f64[::1] ba,
                  const f64[::1] u, const f64[:, ::1] W, const f64[::1] b,
                  const i64[::1] tokens, const i64[::1] offsets, double slope,
                  masks=None):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t d = E.shape[1], da = A.shape[0], C = W.shape[0]
    cdef Py_ssize_t L = _max_len(offsets)
    cdef Py_ssize_t i, j, c, t, lo, Li
    cdef bint use_mask = masks is not None
    cdef const f64[:, ::1] mk
    if use_mask:
        mk = np.ascontiguousarray(masks, dtype=np.float64)
    probs_arr = np.empty((n, C))
    attn_arr = np.empty(tokens.shape[0])
    ctx_arr = np.empty((n, d))
    cdef f64[:, ::1] probs = probs_arr
    cdef f64[::1] attn = attn_arr
    cdef f64[:, ::1] ctx = ctx_arr
    cdef const f64[:, ::1] AT = np.ascontiguousarray(np.asarray(A).T)
    cdef f64[:, ::1] hid = np.empty((max(L, 1), da))
    cdef f64[::1] alpha = np.empty(max(L, 1))
    cdef f64[::1] v = np.empty(d)
    cdef f64[::1] h = np.empty(d)
    cdef f64[::1] logits = np.empty(C)
    cdef f64 lse
    with nogil:
        for i in range(n):
            lo = offsets[i]
            Li = offsets[i + 1] - lo
            _attend(E, AT, ba, u, tokens, lo, Li, hid, alpha, v)
            for j in range(d):
                h[j] = v[j] if v[j] > 0 else slope * v[j]
                if use_mask:
                    h[j] *= mk[i, j]
                ctx[i, j] = v[j]
            lse = _head(W, b, h, logits)
            for c in range(C):
                probs[i, c] = exp(logits[c] - lse)
            for t in range(Li):
                attn[lo + t] = alpha[t]
    return probs_arr, attn_arr, ctx_arr


def loss_grad_batch(const f64[:, ::1] E, const f64[:, ::1] A, const f64[::1] ba,
                    const f64[::1] u, const f64[:, ::1] W, const f64[::1] b,
                    const i64[::1] tokens, const i64[::1] offsets,
                    const i64[::1] labels, double slope, masks,
                    f64[:, ::1] gE, f64[:, ::1] gA, f64[::1] gba, f64[::1] gu,
                    f64[:, ::1] gW, f64[::1] gb):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t d = E.shape[1], da = A.shape[0], C = W.shape[0]
    cdef Py_ssize_t L = _max_len(offsets)
    cdef Py_ssize_t i, j, k, c, t, w, lo, Li, y
    cdef bint use_mask = masks is not None
    cdef const f64[:, ::1] mk
    if use_mask:
        mk = np.ascontiguousarray(masks, dtype=np.float64)
    cdef const f64[:, ::1] AT = np.ascontiguousarray(np.asarray(A).T)
    cdef f64[:, ::1] hid = np.empty((max(L, 1), da))
    cdef f64[::1] alpha = np.empty(max(L, 1))
    cdef f64[::1] dalpha = np.empty(max(L, 1))
    cdef f64[::1] v = np.empty(d)
    cdef f64[::1] h = np.empty(d)
    cdef f64[::1] slope_v = np.empty(d)
    cdef f64[::1] dv = np.empty(d)
    cdef f64[::1] dz = np.empty(da)
    cdef f64[::1] dx = np.empty(d)
    cdef f64[::1] logits = np.empty(C)
    cdef f64 lse, total = 0.0, acc, mean_da, ds, mval
    with nogil:
        for i in range(n):
            lo = offsets[i]
            Li = offsets[i + 1] - lo
            y = labels[i]
            _attend(E, AT, ba, u, tokens, lo, Li, hid, alpha, v)
            for j in range(d):
                slope_v[j] = 1.0 if v[j] > 0 else slope
                h[j] = v[j] * slope_v[j]
                if use_mask:
                    h[j] *= mk[i, j]
            lse = _head(W, b, h, logits)
            total += lse - logits[y]

            # logits now hold dL/dlogits
            for c in range(C):
                logits[c] = exp(logits[c] - lse)
            logits[y] -= 1.0
            for c in range(C):
                gb[c] += logits[c]
                for j in range(d):
                    gW[c, j] += logits[c] * h[j]
            for j in range(d):
                acc = 0.0
                for c in range(C):
                    acc += W[c, j] * logits[c]
                mval = mk[i, j] if use_mask else 1.0
                dv[j] = acc * mval * slope_v[j]

            mean_da = 0.0
            for t in range(Li):
                w = tokens[lo + t]
                acc = 0.0
                for j in range(d):
                    acc += E[w, j] * dv[j]
                dalpha[t] = acc
                mean_da += alpha[t] * acc
            for t in range(Li):
                w = tokens[lo + t]
                ds = alpha[t] * (dalpha[t] - mean_da)
                for k in range(da):
                    gu[k] += ds * hid[t, k]
                    dz[k] = ds * u[k] * (1.0 - hid[t, k] * hid[t, k])
                    gba[k] += dz[k]
                for j in range(d):
                    dx[j] = alpha[t] * dv[j]
                for k in range(da):
                    acc = dz[k]
                    for j in range(d):
                        gA[k, j] += acc * E[w, j]
                    for j in range(d):
                        dx[j] += acc * A[k, j]
                for j in range(d):
                    gE[w, j] += dx[j]
    return total
