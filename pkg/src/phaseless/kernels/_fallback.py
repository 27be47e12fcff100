"""Pure numpy implementations of the hot kernels.

Same contracts as the compiled ``_core`` module; used when the extension is not
built or when ``PHASELESS_PURE_PYTHON=1``.
"""

import math

import numpy as np

_CHUNK = 1 << 14


def gray_signs(indices: np.ndarray, n: int) -> np.ndarray:
    """Sign patterns visited at Gray-code steps ``indices``; first sign pinned to +1."""
    gray = indices ^ (indices >> 1)
    bits = (gray[:, None] >> np.arange(n - 1)[None, :]) & 1
    signs = np.ones((len(indices), n))
    signs[:, 1:] = 1.0 - 2.0 * bits
    return signs


def sign_scan(P, z):
    """Minimise ``||P (s * z)||^2`` over sign vectors ``s`` with ``s[0] = +1``.

    Patterns are visited in reflected Gray-code order; the first minimiser in
    that order wins ties. Returns ``(residual, signs)`` with ``signs`` int8.
    """
    P = np.ascontiguousarray(P, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    n = len(z)
    if n == 0:
        return 0.0, np.ones(0, dtype=np.int8)
    total = 1 << (n - 1)
    best = np.inf
    best_idx = 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        v = (gray_signs(idx, n) * z) @ P
        res = np.einsum("ij,ij->i", v, v)
        j = int(np.argmin(res))
        if res[j] < best:
            best = float(res[j])
            best_idx = int(idx[j])
    signs = gray_signs(np.array([best_idx], dtype=np.int64), n)[0].astype(np.int8)
    return best, signs


def _lam_min(G, rows, ncols):
    if rows < ncols:
        return 0.0
    return max(float(np.linalg.eigvalsh(G)[0]), 0.0)


def _pd_shift(G, b):
    if not math.isfinite(b):
        return False
    try:
        np.linalg.cholesky(G - b * np.eye(len(G)))
    except np.linalg.LinAlgError:
        return False
    return True


def split_search(M, bound_sq, max_nodes, first_only=False):
    """Minimise ``max(lam_min(A^T A), lam_min(B^T B))`` over row splits ``A | B``.

    ``lam_min`` is the smallest Gram eigenvalue (squared smallest singular value),
    taken as 0 when a side has fewer rows than columns. Row 0 is pinned to side A.
    Only values strictly below ``bound_sq`` are reported: returns
    ``(best_sq, mask_or_None, nodes, complete)`` where ``mask`` flags side A and
    ``complete`` is False when the node budget ran out. With ``first_only`` the
    search stops at the first improving split.
    """
    M = np.ascontiguousarray(M, dtype=float)
    r, c = M.shape
    outer = np.einsum("ij,ik->ijk", M, M)
    state = {"best": float(bound_sq), "mask": None, "nodes": 0, "stop": False}
    side = np.zeros(r, dtype=bool)

    def visit(i, GA, GB, na, nb):
        state["nodes"] += 1
        if state["nodes"] > max_nodes:
            state["stop"] = True
            return
        if i == r:
            val = max(_lam_min(GA, na, c), _lam_min(GB, nb, c))
            if val < state["best"]:
                state["best"] = val
                state["mask"] = side.copy()
                if first_only:
                    state["stop"] = True
            return
        b = state["best"]
        GA2 = GA + outer[i]
        if not (na + 1 >= c and _pd_shift(GA2, b)):
            side[i] = True
            visit(i + 1, GA2, GB, na + 1, nb)
            side[i] = False
            if state["stop"]:
                return
        if i == 0:
            return
        b = state["best"]
        GB2 = GB + outer[i]
        if not (nb + 1 >= c and _pd_shift(GB2, b)):
            visit(i + 1, GA, GB2, na, nb + 1)

    z = np.zeros((c, c))
    if r:
        visit(0, z, z, 0, 0)
    complete = state["nodes"] <= max_nodes
    return state["best"], state["mask"], state["nodes"], complete


def _givens_add(R, qb, row, beta):
    c = len(qb)
    row = row.copy()
    for j in range(c):
        if row[j] == 0.0:
            continue
        r = math.hypot(R[j, j], row[j])
        cs, sn = R[j, j] / r, row[j] / r
        R[j, j] = r
        t = R[j, j + 1 :].copy()
        R[j, j + 1 :] = cs * t + sn * row[j + 1 :]
        row[j + 1 :] = -sn * t + cs * row[j + 1 :]
        t = qb[j]
        qb[j] = cs * t + sn * beta
        beta = -sn * t + cs * beta
    return beta * beta


def sign_branch(Phi, z, bound_sq, max_nodes):
    """Depth-first search over sign vectors for ``min ||P (s * z)||^2``.

    Rows are assigned in the given order; the partial least-squares residual
    of the assigned rows is a lower bound and prunes against the incumbent.
    The first sign is pinned to +1. Returns ``(best_sq, signs_or_None, nodes,
    complete)``; only values strictly below ``bound_sq`` are reported.
    """
    Phi = np.ascontiguousarray(Phi, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    r, c = Phi.shape
    state = {"best": float(bound_sq), "signs": None, "nodes": 0, "stop": False}
    sign = np.ones(r, dtype=np.int8)

    def visit(i, R, qb, res):
        state["nodes"] += 1
        if state["nodes"] > max_nodes:
            state["stop"] = True
            return
        if i == r:
            if res < state["best"]:
                state["best"] = res
                state["signs"] = sign.copy()
            return
        options = []
        for s in ((1,) if i == 0 else (1, -1)):
            R2, qb2 = R.copy(), qb.copy()
            inc = _givens_add(R2, qb2, Phi[i], s * z[i])
            options.append((inc, s, R2, qb2))
        options.sort(key=lambda t: t[0])
        for inc, s, R2, qb2 in options:
            if res + inc >= state["best"]:
                continue
            sign[i] = s
            visit(i + 1, R2, qb2, res + inc)
            if state["stop"]:
                return

    if r:
        visit(0, np.zeros((c, c)), np.zeros(c), 0.0)
    return state["best"], state["signs"], state["nodes"], not state["stop"]
