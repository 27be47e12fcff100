"""Slow, obviously-correct reference implementations used to check the library."""

import itertools
import math

import numpy as np


def bspline_truncated_power(N, t):
    """``B_N`` on ``[0, N]`` from the truncated-power formula."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for j in range(N + 1):
        out += (-1) ** j * math.comb(N, j) * np.where(t >= j, t - j, 0.0) ** (N - 1) * (t >= j)
    return out / math.factorial(N - 1)


def min_sign_residual(Phi, z):
    """``min over s`` of ``min_c ||Phi c - s * z||^2`` by listing every sign vector."""
    Phi = np.asarray(Phi, float)
    z = np.asarray(z, float)
    best = math.inf
    for tail in itertools.product((1.0, -1.0), repeat=len(z) - 1):
        s = np.array((1.0,) + tail)
        c, *_ = np.linalg.lstsq(Phi, s * z, rcond=None)
        best = min(best, float(np.sum((Phi @ c - s * z) ** 2)))
    return best


def is_frame_by_subsets(vectors, tol=1e-6):
    """Every subset or its complement spans (rank test on all ``2^(n-1)`` splits)."""
    M = np.asarray(vectors, float)
    n, d = M.shape
    for mask in range(1 << (n - 1)):
        a = [i for i in range(n) if (mask >> i) & 1]
        b = [i for i in range(n) if not (mask >> i) & 1]
        ra = np.linalg.matrix_rank(M[a], tol) if a else 0
        rb = np.linalg.matrix_rank(M[b], tol) if b else 0
        if ra < d and rb < d:
            return False
    return True


def inverse_norm_by_subsets(M):
    """``[min over splits of max(sigma_min(A), sigma_min(B))]^{-1}`` by listing every split."""
    M = np.asarray(M, float)
    n, d = M.shape

    def smin(rows):
        if len(rows) < d:
            return 0.0
        return float(np.linalg.svd(M[rows], compute_uv=False)[-1])

    best = math.inf
    for mask in range(1 << (n - 1)):
        a = [i for i in range(n) if not (mask >> i) & 1]
        b = [i for i in range(n) if (mask >> i) & 1]
        best = min(best, max(smin(a), smin(b)))
    return math.inf if best == 0.0 else 1.0 / best


def separable_by_gaps(coeffs, N):
    """1-D ``B_N`` signal: separable iff two consecutive nonzero coefficients are at
    least ``N`` apart (``N - 1`` zeros between them)."""
    nz = [i for i, v in enumerate(coeffs) if v != 0.0]
    return any(b - a >= N for a, b in zip(nz, nz[1:]))
