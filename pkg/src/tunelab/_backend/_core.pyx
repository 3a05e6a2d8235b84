# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled parameter-sweep kernels.

Same contract as ``pure.py``: for each parameter value, assemble the family's
dense linear system, solve it by LU with partial pivoting, polish with
iterative refinement when the backward residual exceeds the limit, and emit
either score matrices or argmax predictions (ties resolved to the lowest
class index).  The parameter loop runs without the GIL so callers can overlap
sweeps across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs
from libc.stdlib cimport free, malloc

from tunelab._backend.pure import SingularSystemError

NAME = "compiled"
RESIDUAL_LIMIT = 1e-8

cdef double _RLIMIT = 1e-8
cdef int _REFINE_STEPS = 3

cdef enum:
    FAM_ALPHA = 0
    FAM_LAMBDA = 1
    FAM_DELTA = 2


cdef int _factor(double* lu, int* piv, int n) noexcept nogil:
    """In-place LU with partial pivoting; returns -1 on a zero pivot."""
    cdef int i, j, k, p
    cdef double big, tmp, pivval
    for k in range(n):
        p = k
        big = fabs(lu[k * n + k])
        for i in range(k + 1, n):
            if fabs(lu[i * n + k]) > big:
                big = fabs(lu[i * n + k])
                p = i
        if big == 0.0:
            return -1
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = lu[k * n + j]
                lu[k * n + j] = lu[p * n + j]
                lu[p * n + j] = tmp
        pivval = lu[k * n + k]
        for i in range(k + 1, n):
            lu[i * n + k] /= pivval
            tmp = lu[i * n + k]
            if tmp != 0.0:
                for j in range(k + 1, n):
                    lu[i * n + j] -= tmp * lu[k * n + j]
    return 0


cdef void _solve_factored(double* lu, int* piv, double* x, int n, int c) noexcept nogil:
    cdef int i, j, k, p
    cdef double tmp
    for k in range(n):
        p = piv[k]
        if p != k:
            for j in range(c):
                tmp = x[k * c + j]
                x[k * c + j] = x[p * c + j]
                x[p * c + j] = tmp
    for i in range(n):
        for k in range(i):
            tmp = lu[i * n + k]
            if tmp != 0.0:
                for j in range(c):
                    x[i * c + j] -= tmp * x[k * c + j]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            tmp = lu[i * n + k]
            if tmp != 0.0:
                for j in range(c):
                    x[i * c + j] -= tmp * x[k * c + j]
        tmp = lu[i * n + i]
        for j in range(c):
            x[i * c + j] /= tmp


cdef double _residual(double* a, double* f, double* b, int n, int c) noexcept nogil:
    """Max-abs entry of B - A @ F."""
    cdef int i, j, k
    cdef double acc, worst = 0.0
    for i in range(n):
        for j in range(c):
            acc = b[i * c + j]
            for k in range(n):
                acc -= a[i * n + k] * f[k * c + j]
            if fabs(acc) > worst:
                worst = fabs(acc)
    return worst


cdef void _refine_residual(double* a, double* f, double* b, double* r, int n, int c) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(n):
        for j in range(c):
            acc = b[i * c + j]
            for k in range(n):
                acc -= a[i * n + k] * f[k * c + j]
            r[i * c + j] = acc


cdef void _build_system(
    int family,
    double param,
    double c_const,
    const double[:, ::1] mat,
    const double[::1] vec,
    const double[::1] logd,
    const double[:, ::1] Y,
    double* a,
    double* b,
    int n,
    int c,
) noexcept nogil:
    # mat/vec carry family-specific statics:
    #   alpha:  mat = symmetric normalized adjacency, vec unused
    #   lambda: mat = unnormalized Laplacian, vec = labeled indicator
    #   delta:  mat = c_const * W_ij / d_j, vec = degrees, logd = log-degrees
    cdef int i, j
    cdef double scale
    if family == FAM_ALPHA:
        for i in range(n):
            for j in range(n):
                a[i * n + j] = -param * mat[i, j]
            a[i * n + i] += 1.0
        scale = 1.0 - param
        for i in range(n):
            for j in range(c):
                b[i * c + j] = scale * Y[i, j]
    elif family == FAM_LAMBDA:
        for i in range(n):
            for j in range(n):
                a[i * n + j] = mat[i, j]
            a[i * n + i] += param * vec[i]
        for i in range(n):
            for j in range(c):
                b[i * c + j] = param * Y[i, j]
    else:
        for i in range(n):
            for j in range(n):
                if i == j:
                    a[i * n + j] = 1.0 - mat[i, i]
                else:
                    a[i * n + j] = -mat[i, j] * exp(param * (logd[j] - logd[i]))
        for i in range(n):
            for j in range(c):
                b[i * c + j] = Y[i, j]


def _sweep(
    int family,
    double c_const,
    cnp.ndarray mat_arr,
    cnp.ndarray vec_arr,
    cnp.ndarray Y_arr,
    cnp.ndarray params_arr,
    bint want_scores,
):
    cdef const double[:, ::1] mat = np.ascontiguousarray(mat_arr, dtype=np.float64)
    cdef const double[::1] vec = np.ascontiguousarray(vec_arr, dtype=np.float64)
    cdef const double[:, ::1] Y = np.ascontiguousarray(Y_arr, dtype=np.float64)
    cdef const double[::1] params = np.ascontiguousarray(
        np.asarray(params_arr, dtype=np.float64).ravel()
    )
    cdef int n = Y.shape[0]
    cdef int c = Y.shape[1]
    cdef Py_ssize_t num = params.shape[0]

    cdef const double[::1] logd
    if family == FAM_DELTA:
        logd = np.log(np.asarray(vec_arr, dtype=np.float64))
    else:
        logd = np.zeros(n, dtype=np.float64)

    scores_np = np.empty((num, n, c), dtype=np.float64) if want_scores else None
    preds_np = None if want_scores else np.empty((num, n), dtype=np.int32)
    cdef double[:, :, ::1] scores = scores_np if want_scores else np.empty((1, 1, 1))
    cdef int[:, ::1] preds = preds_np if not want_scores else np.empty((1, 1), dtype=np.int32)

    cdef double* a0 = <double*> malloc(n * n * sizeof(double))
    cdef double* lu = <double*> malloc(n * n * sizeof(double))
    cdef double* b0 = <double*> malloc(n * c * sizeof(double))
    cdef double* f = <double*> malloc(n * c * sizeof(double))
    cdef double* r = <double*> malloc(n * c * sizeof(double))
    cdef int* piv = <int*> malloc(n * sizeof(int))
    if a0 == NULL or lu == NULL or b0 == NULL or f == NULL or r == NULL or piv == NULL:
        free(a0); free(lu); free(b0); free(f); free(r); free(piv)
        raise MemoryError()

    cdef Py_ssize_t p
    cdef int i, j, step, singular = 0, best
    cdef double resid, worst = 0.0, bestval
    with nogil:
        for p in range(num):
            _build_system(family, params[p], c_const, mat, vec, logd, Y, a0, b0, n, c)
            for i in range(n * n):
                lu[i] = a0[i]
            if _factor(lu, piv, n) != 0:
                singular = 1
                break
            for i in range(n * c):
                f[i] = b0[i]
            _solve_factored(lu, piv, f, n, c)
            resid = _residual(a0, f, b0, n, c)
            step = 0
            while resid > _RLIMIT and step < _REFINE_STEPS:
                _refine_residual(a0, f, b0, r, n, c)
                _solve_factored(lu, piv, r, n, c)
                for i in range(n * c):
                    f[i] += r[i]
                resid = _residual(a0, f, b0, n, c)
                step += 1
            if resid > _RLIMIT:
                singular = 1
                break
            if resid > worst:
                worst = resid
            if want_scores:
                for i in range(n):
                    for j in range(c):
                        scores[p, i, j] = f[i * c + j]
            else:
                for i in range(n):
                    best = 0
                    bestval = f[i * c]
                    for j in range(1, c):
                        if f[i * c + j] > bestval:
                            bestval = f[i * c + j]
                            best = j
                    preds[p, i] = best

    free(a0); free(lu); free(b0); free(f); free(r); free(piv)
    if singular:
        raise SingularSystemError(
            "singular or effectively singular system in parameter sweep")
    return (scores_np if want_scores else preds_np), worst


def alpha_scores(S, Y, params):
    return _sweep(FAM_ALPHA, 0.0, S, np.zeros(len(S)), Y, params, True)


def alpha_predictions(S, Y, params):
    return _sweep(FAM_ALPHA, 0.0, S, np.zeros(len(S)), Y, params, False)


def lambda_scores(lap, labeled, Y, params):
    return _sweep(FAM_LAMBDA, 0.0, lap, np.asarray(labeled, dtype=np.float64), Y, params, True)


def lambda_predictions(lap, labeled, Y, params):
    return _sweep(FAM_LAMBDA, 0.0, lap, np.asarray(labeled, dtype=np.float64), Y, params, False)


def delta_scores(W, deg, Y, c_const, params):
    mat = float(c_const) * (np.asarray(W, dtype=np.float64) / np.asarray(deg, dtype=np.float64)[None, :])
    return _sweep(FAM_DELTA, c_const, mat, deg, Y, params, True)


def delta_predictions(W, deg, Y, c_const, params):
    mat = float(c_const) * (np.asarray(W, dtype=np.float64) / np.asarray(deg, dtype=np.float64)[None, :])
    return _sweep(FAM_DELTA, c_const, mat, deg, Y, params, False)
