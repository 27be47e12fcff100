"""Compactly supported generators and their translate structure.

Three families are supported as user input: cardinal B-splines ``B_N``, tensor
products ``B_{N_1} x ... x B_{N_d}``, and box splines ``M_Xi`` for an integer
direction matrix of full row rank. A handful of hand-built 1-D generators used
for negative results are available through :func:`fixture`.

All evaluation routines are vectorised: points are arrays of shape ``(n, d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateDirectionMatrix,
    EmptyRestriction,
    InvalidOrder,
    UnsupportedGenerator,
    WrongDimension,
)
from .regions import Region

ZERO_TOL = 1e-12
GRID_STEP = 1.0 / 32
RANK_TOL = 1e-9


def eval_bspline(N: int, t):
    """Cardinal B-spline of order ``N`` (degree ``N-1``) supported on ``[0, N]``.

    Uses the uniform-knot Cox-de Boor recursion starting from the half-open
    indicator of ``[0, 1)``. Accepts scalars or arrays.
    """
    if N < 1:
        raise InvalidOrder(f"B-spline order must be >= 1, got {N}")
    t = np.asarray(t, dtype=float)
    # level-1 values B_1(t - i), i = 0..N-1
    b = [((t >= i) & (t < i + 1)).astype(float) for i in range(N)]
    for j in range(2, N + 1):
        b = [((t - i) * b[i] + (i + j - t) * b[i + 1]) / (j - 1) for i in range(N - j + 1)]
    out = b[0]
    return float(out) if out.ndim == 0 else out


def _hat(t):
    return np.maximum(1.0 - np.abs(t), 0.0)


def _phi0(t):
    return _hat(4 * t - 1) + _hat(4 * t - 3) + _hat(4 * t - 5) - _hat(4 * t - 7)


def _cubic_phi1(t):
    out = np.zeros_like(t)
    p = (t >= 0) & (t < 1)
    out[p] = t[p] ** 3 / 2
    p = (t >= 1) & (t < 2)
    out[p] = (-2 * t[p] ** 3 + 6 * t[p] ** 2 - 4 * t[p] + 1) / 2
    p = (t >= 2) & (t < 3)
    out[p] = (t[p] ** 3 - 6 * t[p] ** 2 + 10 * t[p] - 3) / 2
    return out


# name -> (callable on 1-D arrays, support [0, L])
_FIXTURES = {
    "phi0": (_phi0, 2.0),
    "phi0_dilated": (lambda t: _phi0(2 * t), 1.0),
    "cubic_phi1": (_cubic_phi1, 3.0),
}


def _cofactor_normal(cols: np.ndarray) -> np.ndarray:
    """Integer normal of the hyperplane spanned by the ``d-1`` columns of ``cols``."""
    d = cols.shape[0]
    n = np.empty(d)
    for i in range(d):
        minor = np.delete(cols, i, axis=0)
        n[i] = (-1) ** i * (np.linalg.det(minor) if minor.size else 1.0)
    n = np.rint(n).astype(int)
    g = math.gcd(*[abs(int(v)) for v in n]) or 1
    n //= g
    nz = np.flatnonzero(n)
    if len(nz) and n[nz[0]] < 0:
        n = -n
    return n


class _BoxSplineEvaluator:
    """Exact evaluation of ``M_Xi`` by repeated directional averaging.

    ``M_{Xi u {xi}}(x) = int_0^1 M_Xi(x - t xi) dt``. The integrand is a piecewise
    polynomial whose breaks along the segment are crossings of the mesh
    hyperplanes ``n . y in Z``; Gauss-Legendre on each piece is exact. The
    recursion bottoms out at a nonsingular ``d x d`` block, whose box spline is
    the normalised indicator of the half-open parallelepiped.
    """

    def __init__(self, xi: np.ndarray):
        d, s = xi.shape
        if np.linalg.matrix_rank(xi) < d:
            raise DegenerateDirectionMatrix(f"direction matrix has rank < {d}")
        basis = []
        for j in range(s):
            trial = basis + [j]
            if np.linalg.matrix_rank(xi[:, trial]) == len(trial):
                basis = trial
            if len(basis) == d:
                break
        order = basis + [j for j in range(s) if j not in basis]
        self.d = d
        self.cols = [xi[:, j].astype(float) for j in order]
        base = np.column_stack(self.cols[:d])
        self.base_inv = np.linalg.inv(base)
        self.base_scale = 1.0 / abs(np.linalg.det(base))
        # per recursion level: normals of mesh hyperplanes transversal to the added direction
        self.levels = []
        for m in range(d + 1, s + 1):
            rest = np.column_stack(self.cols[: m - 1])
            direction = self.cols[m - 1]
            normals = {}
            for sub in itertools.combinations(range(m - 1), d - 1):
                n = _cofactor_normal(rest[:, list(sub)])
                a = int(round(n @ direction))
                if a != 0 and np.any(n):
                    normals[tuple(n)] = a
            deg = m - 1 - d
            nodes, weights = np.polynomial.legendre.leggauss(deg // 2 + 1)
            self.levels.append(
                (
                    direction,
                    np.array(list(normals), dtype=float).reshape(-1, d),
                    np.array(list(normals.values()), dtype=int),
                    (nodes + 1) / 2,
                    weights / 2,
                )
            )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._eval(len(self.cols), x)

    def _eval(self, m: int, x: np.ndarray) -> np.ndarray:
        if m == self.d:
            u = x @ self.base_inv.T
            inside = np.all((u >= 0.0) & (u < 1.0), axis=1)
            return inside * self.base_scale
        direction, normals, slopes, gl_t, gl_w = self.levels[m - self.d - 1]
        n = len(x)
        cuts = [np.zeros((n, 1)), np.ones((n, 1))]
        for nv, a in zip(normals, slopes):
            u0 = x @ nv
            lo = np.minimum(u0, u0 - a)
            hi = np.maximum(u0, u0 - a)
            first = np.floor(lo) + 1
            for j in range(abs(a) + 1):
                mm = first + j
                t = np.where(mm < hi, (u0 - mm) / a, 1.0)
                cuts.append(t[:, None])
        t_all = np.sort(np.clip(np.concatenate(cuts, axis=1), 0.0, 1.0), axis=1)
        left = t_all[:, :-1]
        width = np.diff(t_all, axis=1)
        nodes = left[:, :, None] + width[:, :, None] * gl_t[None, None, :]
        w = width[:, :, None] * gl_w[None, None, :]
        pts = x[:, None, None, :] - nodes[..., None] * direction
        vals = self._eval(m - 1, pts.reshape(-1, self.d)).reshape(nodes.shape)
        return np.sum(vals * w, axis=(1, 2))


@dataclass(frozen=True)
class Generator:
    """A compactly supported generator ``phi``.

    ``kind`` is one of ``"bspline"``, ``"tensor"``, ``"box"`` or ``"fixture"``.
    """

    kind: str
    orders: tuple[int, ...] = ()
    xi: tuple[tuple[int, ...], ...] = ()
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind in ("bspline", "tensor"):
            if not self.orders or any(int(n) < 1 for n in self.orders):
                raise InvalidOrder(f"B-spline orders must be >= 1, got {self.orders}")
            if self.kind == "bspline" and len(self.orders) != 1:
                raise ValueError("bspline takes a single order")
        elif self.kind == "box":
            xi = np.array(self.xi, dtype=int)
            if xi.ndim != 2 or xi.shape[1] < xi.shape[0]:
                raise DegenerateDirectionMatrix("direction matrix must be d x s with s >= d")
            if np.linalg.matrix_rank(xi) < xi.shape[0]:
                raise DegenerateDirectionMatrix(f"direction matrix {self.xi} has rank < {xi.shape[0]}")
        elif self.kind == "fixture":
            if self.name not in _FIXTURES:
                raise UnsupportedGenerator(f"unknown fixture {self.name!r}")
        else:
            raise UnsupportedGenerator(f"unknown generator kind {self.kind!r}")

    @property
    def dim(self) -> int:
        if self.kind == "tensor":
            return len(self.orders)
        if self.kind == "box":
            return len(self.xi)
        return 1

    @property
    def id(self) -> str:
        if self.kind == "bspline":
            return f"bspline({self.orders[0]})"
        if self.kind == "tensor":
            return "tensor(" + ",".join(map(str, self.orders)) + ")"
        if self.kind == "box":
            return "box(" + ";".join(",".join(map(str, r)) for r in self.xi) + ")"
        return f"fixture({self.name})"

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Smallest closed axis-aligned box containing the support."""
        if self.kind in ("bspline", "tensor"):
            return np.zeros(self.dim), np.array(self.orders, dtype=float)
        if self.kind == "box":
            xi = np.array(self.xi, dtype=float)
            return np.minimum(xi, 0).sum(axis=1), np.maximum(xi, 0).sum(axis=1)
        return np.zeros(1), np.array([_FIXTURES[self.name][1]])

    @cached_property
    def locally_independent(self) -> bool:
        """Local linear independence on every open set, known from theory.

        True for B-splines, their tensor products and box splines with a
        unimodular direction matrix; False for the hand-built fixtures.
        """
        if self.kind in ("bspline", "tensor"):
            return True
        if self.kind == "box":
            xi = np.array(self.xi, dtype=float)
            d = xi.shape[0]
            for cols in itertools.combinations(range(xi.shape[1]), d):
                det = abs(np.linalg.det(xi[:, cols]))
                if det > 0.5 and abs(det - 1.0) > 1e-9:
                    return False
            return True
        return False

    def __call__(self, x) -> np.ndarray:
        return eval_generator(self, x)

    def to_spec(self) -> dict:
        if self.kind == "bspline":
            return {"kind": "bspline", "N": self.orders[0]}
        if self.kind == "tensor":
            return {"kind": "tensor", "N": list(self.orders)}
        if self.kind == "box":
            return {"kind": "box", "Xi": [list(r) for r in self.xi]}
        return {"kind": "fixture", "name": self.name}

    @classmethod
    def from_spec(cls, spec: dict) -> "Generator":
        kind = spec.get("kind")
        if kind == "bspline":
            return bspline(int(spec["N"]))
        if kind == "tensor":
            return tensor(*[int(n) for n in spec["N"]])
        if kind == "box":
            return box(spec["Xi"])
        if kind == "fixture":
            return fixture(spec["name"])
        raise UnsupportedGenerator(f"unknown generator kind {kind!r}")


def bspline(N: int) -> Generator:
    return Generator("bspline", (int(N),))


def tensor(*orders: int) -> Generator:
    return Generator("tensor", tuple(int(n) for n in orders))


def box(xi) -> Generator:
    return Generator("box", xi=tuple(tuple(int(v) for v in row) for row in xi))


def fixture(name: str) -> Generator:
    return Generator("fixture", name=name)


XI_ZP = ((1, 1, 0, 1), (0, 0, 1, 1))


def zwart_powell() -> Generator:
    """The box spline with direction matrix ``[[1,1,0,1],[0,0,1,1]]``."""
    return box(XI_ZP)


def eval_generator(g: Generator, x) -> np.ndarray:
    """``phi(x)`` for points ``x`` of shape ``(n, d)``; a scalar point gives a float."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0 or (arr.ndim == 1 and g.dim > 1)
    if (g.dim > 1 or arr.ndim > 1) and arr.ndim and arr.shape[-1] != g.dim:
        raise WrongDimension(f"points of dimension {arr.shape[-1]} for a {g.dim}-D generator")
    pts = arr.reshape(-1, g.dim)
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    if g.kind == "bspline":
        out = np.atleast_1d(eval_bspline(g.orders[0], pts[:, 0]))
    elif g.kind == "tensor":
        out = np.ones(len(pts))
        for axis, n in enumerate(g.orders):
            out = out * np.atleast_1d(eval_bspline(n, pts[:, axis]))
    elif g.kind == "box":
        ev = g._cache.get("box")
        if ev is None:
            ev = g._cache["box"] = _BoxSplineEvaluator(np.array(g.xi, dtype=int))
        lo, hi = g.support_box()
        out = np.zeros(len(pts))
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        if inside.any():
            out[inside] = ev(pts[inside])
    else:
        out = _FIXTURES[g.name][0](pts[:, 0].copy())
    if scalar:
        return float(out[0])
    return out


def support_box(g: Generator) -> tuple[np.ndarray, np.ndarray]:
    return g.support_box()


def phi_matrix(g: Generator, points, shifts) -> np.ndarray:
    """Matrix ``(phi(x - k))`` with rows indexed by ``points`` and columns by ``shifts``."""
    pts = np.asarray(points, dtype=float)
    if (g.dim > 1 or pts.ndim > 1) and pts.ndim and pts.shape[-1] != g.dim:
        raise WrongDimension(f"points of dimension {pts.shape[-1]} for a {g.dim}-D generator")
    pts = pts.reshape(-1, g.dim)
    ks = np.asarray(shifts, dtype=float).reshape(-1, g.dim)
    if len(ks) == 0:
        return np.zeros((len(pts), 0))
    diff = pts[:, None, :] - ks[None, :, :]
    return eval_generator(g, diff.reshape(-1, g.dim)).reshape(len(pts), len(ks))


@dataclass(frozen=True)
class OverlapSet:
    """The shifts ``k`` with ``phi * phi(. - k)`` not identically zero, with witnesses."""

    generator_id: str
    shifts: tuple[tuple[int, ...], ...]
    witnesses: dict

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self.witnesses


def _support_grid(g: Generator, step: float):
    lo, hi = g.support_box()
    axes = [np.arange(int(np.floor(l / step)), int(np.ceil(h / step)) + 1) for l, h in zip(lo, hi)]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return axes, idx * step


def overlap_set(g: Generator, grid_step: float = GRID_STEP, zero_tol: float = ZERO_TOL) -> OverlapSet:
    """Compute ``Lambda_phi`` by testing ``|phi(x) phi(x - k)| > zero_tol`` on a grid.

    Only shifts whose support boxes overlap with nonempty interior are tested.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    lo, hi = g.support_box()
    width = hi - lo
    axes, pts = _support_grid(g, grid_step)
    shape = pts.shape[:-1]
    vals = eval_generator(g, pts.reshape(-1, g.dim)).reshape(shape)
    per_unit = 1.0 / grid_step
    aligned = abs(per_unit - round(per_unit)) < 1e-9
    ranges = [range(-int(np.ceil(w)) + 1, int(np.ceil(w))) for w in width]
    witnesses = {}
    for k in itertools.product(*ranges):
        k = tuple(k)
        if any(abs(kk) >= w for kk, w in zip(k, width)):
            continue
        if aligned:
            off = [int(round(kk * per_unit)) for kk in k]
            shifted = np.zeros(shape)
            src, dst = [], []
            for o, n in zip(off, shape):
                if o >= 0:
                    dst.append(slice(o, n))
                    src.append(slice(0, n - o))
                else:
                    dst.append(slice(0, n + o))
                    src.append(slice(-o, n))
            shifted[tuple(dst)] = vals[tuple(src)]
        else:
            shifted = eval_generator(g, (pts - np.array(k, dtype=float)).reshape(-1, g.dim)).reshape(shape)
        prod = np.abs(vals * shifted)
        hit = np.argmax(prod > zero_tol) if prod.size else 0
        if prod.size and prod.flat[hit] > zero_tol:
            witnesses[k] = tuple(pts.reshape(-1, g.dim)[hit])
    shifts = tuple(sorted(witnesses))
    return OverlapSet(g.id, shifts, witnesses)


def _region_points(A: Region, grid_step: float) -> np.ndarray:
    pts = A.grid(grid_step)
    if len(pts) < 16:
        pts = np.concatenate([pts, A.quasi_random(64)])
    return pts


def candidate_shifts(g: Generator, A: Region) -> list[tuple[int, ...]]:
    """Shifts whose translated support box meets the bounding box of ``A``."""
    lo, hi = g.support_box()
    ranges = [
        range(int(np.floor(a_lo - s_hi)), int(np.ceil(a_hi - s_lo)) + 1)
        for a_lo, a_hi, s_lo, s_hi in zip(A.lo, A.hi, lo, hi)
    ]
    return [tuple(k) for k in itertools.product(*ranges)]


def k_set(g: Generator, A: Region, grid_step: float = GRID_STEP, zero_tol: float = ZERO_TOL):
    """``K_A``: shifts ``k`` with ``phi(. - k)`` not identically zero on ``A``.

    Decided by evaluation on the lattice ``grid_step * Z^d`` inside ``A``.
    Returned in lexicographic order.
    """
    pts = _region_points(A, grid_step)
    cands = candidate_shifts(g, A)
    mat = phi_matrix(g, pts, cands)
    keep = np.any(np.abs(mat) > zero_tol, axis=0)
    return sorted(k for k, flag in zip(cands, keep) if flag)


def local_linear_independence(
    g: Generator,
    A: Region,
    sample_count: int | None = None,
    rank_tol: float = RANK_TOL,
) -> bool:
    """Whether ``phi`` is locally linearly independent on ``A``.

    True iff the stacked rows ``Phi_A(x)`` over sample points have numerical
    rank ``#K_A`` (singular values below ``rank_tol * sigma_max`` count as zero).
    """
    ks = k_set(g, A)
    if not ks:
        raise EmptyRestriction("no translate of the generator is nonzero on the region")
    count = max(sample_count or 0, 4 * len(ks))
    if sample_count is not None and sample_count < 4 * len(ks):
        raise ValueError(f"sample_count must be >= {4 * len(ks)}")
    pts = A.quasi_random(count)
    return numerical_rank(phi_matrix(g, pts, ks), rank_tol) == len(ks)


def numerical_rank(mat: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))
