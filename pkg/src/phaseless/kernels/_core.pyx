# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Gray-code sign scan and branch-and-bound row splitting.

Contracts match :mod:`phaseless.kernels._fallback` exactly.
"""

import numpy as np

from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dsyev

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil

cdef enum:
    RESYNC = 1024


def sign_scan(P, z):
    cdef const double[:, ::1] Pm = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0]
    if n == 0:
        return 0.0, np.ones(0, dtype=np.int8)
    if n > 62:
        raise ValueError("sign_scan supports at most 62 rows")
    cdef double[::1] s = np.ones(n)
    cdef double[::1] v = np.zeros(n)
    cdef unsigned long long total = (<unsigned long long>1) << (n - 1)
    cdef unsigned long long i, best_i = 0
    cdef Py_ssize_t a, b, j
    cdef double res, best, coef, acc
    with nogil:
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc = acc + Pm[a, b] * s[b] * zv[b]
            v[a] = acc
        best = 0.0
        for a in range(n):
            best = best + v[a] * v[a]
        i = 1
        while i < total:
            j = __builtin_ctzll(i) + 1
            coef = -2.0 * s[j] * zv[j]
            s[j] = -s[j]
            if i % RESYNC == 0:
                for a in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc = acc + Pm[a, b] * s[b] * zv[b]
                    v[a] = acc
            else:
                for a in range(n):
                    v[a] = v[a] + coef * Pm[a, j]
            res = 0.0
            for a in range(n):
                res = res + v[a] * v[a]
            if res < best:
                best = res
                best_i = i
            i += 1
    signs = np.ones(n, dtype=np.int8)
    cdef unsigned long long gray = best_i ^ (best_i >> 1)
    for j in range(n - 1):
        if (gray >> j) & 1:
            signs[j + 1] = -1
    return float(best), signs


cdef struct Search:
    int r
    int c
    double* rows          # r x c
    double* gram_a        # (r + 1) x c x c, one slot per depth
    double* gram_b
    double* work          # c x c scratch
    double* eig_work
    double* eig_w
    char* side
    char* best_side
    double best
    long long nodes
    long long max_nodes
    int stop
    int found
    int first_only


cdef int _pd_shift(double* G, int c, double shift, double* L) noexcept nogil:
    """Cholesky of G - shift*I; 1 when positive definite."""
    cdef int i, j, k
    cdef double acc
    for i in range(c):
        for j in range(i + 1):
            acc = G[i * c + j]
            if i == j:
                acc = acc - shift
            for k in range(j):
                acc = acc - L[i * c + k] * L[j * c + k]
            if i == j:
                if acc <= 0.0:
                    return 0
                L[i * c + i] = acc ** 0.5
            else:
                L[i * c + j] = acc / L[j * c + j]
    return 1


cdef double _lam_min(Search* S, double* G, int count) noexcept nogil:
    cdef int c = S.c
    cdef int info = 0
    cdef int lwork = 4 * c
    cdef char jobz = b'N'
    cdef char uplo = b'L'
    if count < c:
        return 0.0
    memcpy(S.work, G, c * c * sizeof(double))
    dsyev(&jobz, &uplo, &c, S.work, &c, S.eig_w, S.eig_work, &lwork, &info)
    if info != 0:
        return 0.0
    if S.eig_w[0] < 0.0:
        return 0.0
    return S.eig_w[0]


cdef void _add_outer(double* dst, double* src, double* row, int c) noexcept nogil:
    cdef int a, b
    for a in range(c):
        for b in range(c):
            dst[a * c + b] = src[a * c + b] + row[a] * row[b]


cdef void _visit(Search* S, int i, int na, int nb) noexcept nogil:
    cdef int c = S.c
    cdef int cc = c * c
    cdef double* GA = S.gram_a + i * cc
    cdef double* GB = S.gram_b + i * cc
    cdef double* GA2 = S.gram_a + (i + 1) * cc
    cdef double* GB2 = S.gram_b + (i + 1) * cc
    cdef double* row
    cdef double va, vb, val
    cdef int k
    S.nodes += 1
    if S.nodes > S.max_nodes:
        S.stop = 1
        return
    if i == S.r:
        va = _lam_min(S, GA, na)
        vb = _lam_min(S, GB, nb)
        val = va if va > vb else vb
        if val < S.best:
            S.best = val
            S.found = 1
            for k in range(S.r):
                S.best_side[k] = S.side[k]
            if S.first_only:
                S.stop = 1
        return
    row = S.rows + i * c
    _add_outer(GA2, GA, row, c)
    memcpy(GB2, GB, cc * sizeof(double))
    if not (na + 1 >= c and _pd_shift(GA2, c, S.best, S.work)):
        S.side[i] = 1
        _visit(S, i + 1, na + 1, nb)
        S.side[i] = 0
        if S.stop:
            return
    if i == 0:
        return
    memcpy(GA2, GA, cc * sizeof(double))
    _add_outer(GB2, GB, row, c)
    if not (nb + 1 >= c and _pd_shift(GB2, c, S.best, S.work)):
        _visit(S, i + 1, na, nb + 1)


def split_search(M, double bound_sq, long long max_nodes, bint first_only=False):
    cdef const double[:, ::1] Mm = np.ascontiguousarray(M, dtype=np.float64)
    cdef int r = Mm.shape[0]
    cdef int c = Mm.shape[1]
    cdef Search S
    cdef int k
    if r == 0:
        return float(bound_sq), None, 0, True
    S.r = r
    S.c = c
    S.best = bound_sq
    S.nodes = 0
    S.max_nodes = max_nodes
    S.stop = 0
    S.found = 0
    S.first_only = first_only
    S.rows = <double*> &Mm[0, 0]
    S.gram_a = <double*> malloc((r + 1) * c * c * sizeof(double))
    S.gram_b = <double*> malloc((r + 1) * c * c * sizeof(double))
    S.work = <double*> malloc(c * c * sizeof(double))
    S.eig_work = <double*> malloc(4 * c * sizeof(double))
    S.eig_w = <double*> malloc(c * sizeof(double))
    S.side = <char*> malloc(r)
    S.best_side = <char*> malloc(r)
    try:
        for k in range(c * c):
            S.gram_a[k] = 0.0
            S.gram_b[k] = 0.0
        for k in range(r):
            S.side[k] = 0
            S.best_side[k] = 0
        with nogil:
            _visit(&S, 0, 0, 0)
        mask = None
        if S.found:
            mask = np.array([S.best_side[k] != 0 for k in range(r)], dtype=bool)
        complete = S.nodes <= S.max_nodes
        return float(S.best), mask, int(S.nodes), bool(complete)
    finally:
        free(S.gram_a)
        free(S.gram_b)
        free(S.work)
        free(S.eig_work)
        free(S.eig_w)
        free(S.side)
        free(S.best_side)


cdef struct Branch:
    int r
    int c
    double* rows      # r x c, already reordered
    double* z
    double* state     # (r + 1) x (c*c + c), R then Q^T b, per depth
    double* res       # r + 1
    char* sign
    char* best_sign
    double* scratch   # (r + 1) x (c*c + 2c), per depth
    double best
    long long nodes
    long long max_nodes
    int stop
    int found


cdef double _givens_add(double* R, double* qb, double* row, double beta, int c) noexcept nogil:
    """Fold the row (row, beta) into the triangular factor; returns the residual increment."""
    cdef int j, k
    cdef double r, cs, sn, t
    for j in range(c):
        if row[j] == 0.0:
            continue
        r = (R[j * c + j] * R[j * c + j] + row[j] * row[j]) ** 0.5
        cs = R[j * c + j] / r
        sn = row[j] / r
        R[j * c + j] = r
        for k in range(j + 1, c):
            t = R[j * c + k]
            R[j * c + k] = cs * t + sn * row[k]
            row[k] = -sn * t + cs * row[k]
        t = qb[j]
        qb[j] = cs * t + sn * beta
        beta = -sn * t + cs * beta
    return beta * beta


cdef void _branch(Branch* B, int i) noexcept nogil:
    cdef int c = B.c
    cdef int w = c * c + c
    cdef double* cur = B.state + i * w
    cdef double* nxt = B.state + (i + 1) * w
    cdef double* row
    cdef double inc[2]
    cdef double* tmp
    cdef int o, k, s, first
    B.nodes += 1
    if B.nodes > B.max_nodes:
        B.stop = 1
        return
    if i == B.r:
        if B.res[i] < B.best:
            B.best = B.res[i]
            B.found = 1
            for k in range(B.r):
                B.best_sign[k] = B.sign[k]
        return
    # residual increments for both signs
    tmp = B.scratch + i * (w + c)
    for s in range(2):
        memcpy(tmp, cur, w * sizeof(double))
        memcpy(tmp + w, B.rows + i * c, c * sizeof(double))
        inc[s] = _givens_add(tmp, tmp + c * c, tmp + w, (1.0 if s == 0 else -1.0) * B.z[i], c)
    first = 0 if inc[0] <= inc[1] else 1
    if i == 0:
        first = 0
    for o in range(2):
        s = first if o == 0 else 1 - first
        if i == 0 and s == 1:
            break
        if B.res[i] + inc[s] >= B.best:
            continue
        memcpy(nxt, cur, w * sizeof(double))
        memcpy(tmp + w, B.rows + i * c, c * sizeof(double))
        B.res[i + 1] = B.res[i] + _givens_add(nxt, nxt + c * c, tmp + w, (1.0 if s == 0 else -1.0) * B.z[i], c)
        B.sign[i] = 1 if s == 0 else -1
        _branch(B, i + 1)
        if B.stop:
            break


def sign_branch(Phi, z, double bound_sq, long long max_nodes):
    cdef const double[:, ::1] Pm = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef int r = Pm.shape[0]
    cdef int c = Pm.shape[1]
    cdef int w = c * c + c
    cdef Branch B
    cdef int k
    if r == 0:
        return 0.0, np.ones(0, dtype=np.int8), 0, True
    B.r = r
    B.c = c
    B.rows = <double*> &Pm[0, 0]
    B.z = <double*> &zv[0]
    B.best = bound_sq
    B.nodes = 0
    B.max_nodes = max_nodes
    B.stop = 0
    B.found = 0
    B.state = <double*> malloc((r + 1) * w * sizeof(double))
    B.res = <double*> malloc((r + 1) * sizeof(double))
    B.sign = <char*> malloc(r)
    B.best_sign = <char*> malloc(r)
    B.scratch = <double*> malloc((r + 1) * (w + c) * sizeof(double))
    try:
        for k in range(w):
            B.state[k] = 0.0
        B.res[0] = 0.0
        for k in range(r):
            B.sign[k] = 1
            B.best_sign[k] = 1
        with nogil:
            _branch(&B, 0)
        signs = None
        if B.found:
            signs = np.array([B.best_sign[k] for k in range(r)], dtype=np.int8)
        return float(B.best), signs, int(B.nodes), bool(B.nodes <= B.max_nodes and not B.stop)
    finally:
        free(B.state)
        free(B.res)
        free(B.sign)
        free(B.best_sign)
        free(B.scratch)
