"""Signals in a shift-invariant space, their graphs and separability tests."""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
from scipy import linalg, ndimage, optimize

from .errors import TooManyVertices, WrongDimension
from .generators import Generator, OverlapSet, eval_generator, overlap_set

SUP_GRID_STEP = 1.0 / 64


@dataclass(frozen=True, eq=False)
class Signal:
    """``f = sum_k c(k) phi(. - k)`` with finitely many nonzero ``c(k)``."""

    generator: Generator
    coeffs: MappingProxyType

    def __init__(self, generator: Generator, coeffs):
        items = {}
        for k, v in dict(coeffs).items():
            key = (int(k),) if np.isscalar(k) else tuple(int(x) for x in k)
            if len(key) != generator.dim:
                raise WrongDimension(f"shift {k} does not match generator dimension {generator.dim}")
            items[key] = float(v)
        object.__setattr__(self, "generator", generator)
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(items.items()))))

    def __eq__(self, other):
        return (
            isinstance(other, Signal)
            and self.generator == other.generator
            and dict(self.coeffs) == dict(other.coeffs)
        )

    def __call__(self, x):
        return evaluate_signal(self, x)

    def __neg__(self):
        return Signal(self.generator, {k: -v for k, v in self.coeffs.items()})

    def scaled(self, a: float) -> "Signal":
        return Signal(self.generator, {k: a * v for k, v in self.coeffs.items()})

    def shifted(self, l) -> "Signal":
        l = np.atleast_1d(l).astype(int)
        return Signal(self.generator, {tuple(np.add(k, l)): v for k, v in self.coeffs.items()})

    @property
    def support_indices(self):
        return [k for k, v in self.coeffs.items() if v != 0.0]

    def hull(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of the union of the translated generator supports."""
        lo, hi = self.generator.support_box()
        ks = np.array(list(self.coeffs) or [(0,) * self.generator.dim], dtype=float)
        return ks.min(axis=0) + lo, ks.max(axis=0) + hi


def evaluate_signal(f: Signal, x):
    """Exact finite sum ``sum_k c(k) phi(x - k)``; only translates whose support contains x contribute."""
    g = f.generator
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0 or (arr.ndim == 1 and g.dim > 1)
    pts = arr.reshape(-1, g.dim)
    out = np.zeros(len(pts))
    lo, hi = g.support_box()
    if len(pts) <= 8:
        # few points: look up only the shifts whose support can contain each point
        for i, p in enumerate(pts):
            ranges = [range(int(np.ceil(x - h)), int(np.floor(x - l)) + 1) for x, l, h in zip(p, lo, hi)]
            ks = [k for k in itertools.product(*ranges) if f.coeffs.get(k, 0.0) != 0.0]
            if ks:
                vals = eval_generator(g, p[None, :] - np.array(ks, dtype=float))
                out[i] = float(np.dot(vals, [f.coeffs[k] for k in ks]))
        return float(out[0]) if scalar else out
    for k, c in f.coeffs.items():
        if c == 0.0:
            continue
        y = pts - np.asarray(k, dtype=float)
        near = np.all((y >= lo) & (y <= hi), axis=1)
        if near.any():
            out[near] += c * eval_generator(g, y[near])
    return float(out[0]) if scalar else out


def _lattice_axes(lo, hi, step):
    return [np.arange(int(np.floor(l / step + 1e-9)), int(np.ceil(h / step - 1e-9)) + 1) * step for l, h in zip(lo, hi)]


def evaluate_on_grid(f: Signal, step: float = SUP_GRID_STEP, lo=None, hi=None):
    """Values of ``f`` on the lattice ``step * Z^d`` over a box (default: the support hull).

    Returns ``(axes, values)``. When ``1/step`` is an integer the generator is
    sampled once and translated copies are accumulated.
    """
    g = f.generator
    h_lo, h_hi = f.hull()
    lo = h_lo if lo is None else np.asarray(lo, dtype=float)
    hi = h_hi if hi is None else np.asarray(hi, dtype=float)
    axes = _lattice_axes(lo, hi, step)
    shape = tuple(len(a) for a in axes)
    q = 1.0 / step
    if abs(q - round(q)) > 1e-9 or not f.coeffs:
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.dim)
        return axes, evaluate_signal(f, pts).reshape(shape)
    q = int(round(q))
    s_lo, s_hi = g.support_box()
    s_axes = _lattice_axes(s_lo, s_hi, step)
    s_pts = np.stack(np.meshgrid(*s_axes, indexing="ij"), axis=-1).reshape(-1, g.dim)
    base = eval_generator(g, s_pts).reshape(tuple(len(a) for a in s_axes))
    start = [int(round(a[0] / step)) for a in axes]
    s_start = [int(round(a[0] / step)) for a in s_axes]
    out = np.zeros(shape)
    for k, c in f.coeffs.items():
        if c == 0.0:
            continue
        dst, src = [], []
        for ax in range(g.dim):
            o = s_start[ax] + k[ax] * q - start[ax]
            a0, a1 = max(o, 0), min(o + base.shape[ax], shape[ax])
            if a1 <= a0:
                break
            dst.append(slice(a0, a1))
            src.append(slice(a0 - o, a1 - o))
        else:
            out[tuple(dst)] += c * base[tuple(src)]
    return axes, out


def _refined_sup(func, axes, values, top: int = 6) -> float:
    """Max of ``func`` starting from grid values, refined locally around the best grid points."""
    flat = values.ravel()
    if flat.size == 0:
        return 0.0
    best = float(flat.max())
    step = axes[0][1] - axes[0][0] if len(axes[0]) > 1 else 1.0
    order = np.argsort(flat)[::-1][:top]
    for idx in order:
        pos = np.unravel_index(idx, values.shape)
        x0 = np.array([axes[a][pos[a]] for a in range(len(axes))])
        # refine in coordinates centred on the current point so the optimiser's
        # relative tolerance does not limit absolute accuracy
        radius = step
        for _ in range(3):
            if len(x0) == 1:
                res = optimize.minimize_scalar(
                    lambda u, c=x0: -func(np.array([[c[0] + u]]))[0],
                    bounds=(-radius, radius),
                    method="bounded",
                    options={"xatol": 1e-15},
                )
                u = np.array([res.x])
            else:
                res = optimize.minimize(
                    lambda u, c=x0: -func((c + u)[None, :])[0],
                    np.zeros(len(x0)),
                    method="Nelder-Mead",
                    bounds=[(-radius, radius)] * len(x0),
                    options={"xatol": 1e-15, "fatol": 1e-16, "initial_simplex": _simplex(np.zeros(len(x0)), radius / 2)},
                )
                u = res.x
            best = max(best, float(-res.fun))
            x0 = x0 + u
            radius *= 1e-2
    return best


def _simplex(x0, scale):
    d = len(x0)
    return np.vstack([x0] + [x0 + scale * np.eye(d)[i] for i in range(d)])


def _common_box(f: Signal, g: Signal):
    a_lo, a_hi = f.hull()
    b_lo, b_hi = g.hull()
    return np.minimum(a_lo, b_lo), np.maximum(a_hi, b_hi)


def sup_distance(f: Signal, g: Signal, step: float = SUP_GRID_STEP) -> float:
    """``min over delta in {-1, 1}`` of ``||f - delta g||_inf``."""
    lo, hi = _common_box(f, g)
    axes, fv = evaluate_on_grid(f, step, lo, hi)
    _, gv = evaluate_on_grid(g, step, lo, hi)
    out = []
    for delta in (1.0, -1.0):
        out.append(_refined_sup(lambda p, d=delta: np.abs(evaluate_signal(f, p) - d * evaluate_signal(g, p)), axes, np.abs(fv - delta * gv)))
    return min(out)


def magnitude_gap(f: Signal, g: Signal, step: float = SUP_GRID_STEP) -> float:
    """``|| |f| - |g| ||_inf``."""
    lo, hi = _common_box(f, g)
    axes, fv = evaluate_on_grid(f, step, lo, hi)
    _, gv = evaluate_on_grid(g, step, lo, hi)
    func = lambda p: np.abs(np.abs(evaluate_signal(f, p)) - np.abs(evaluate_signal(g, p)))  # noqa: E731
    return _refined_sup(func, axes, np.abs(np.abs(fv) - np.abs(gv)))


def magnitude_equal(f: Signal, g: Signal, grid_step: float = SUP_GRID_STEP, tol: float = 1e-10) -> bool:
    """Grid check that ``|f|`` and ``|g|`` agree everywhere."""
    lo, hi = _common_box(f, g)
    _, fv = evaluate_on_grid(f, grid_step, lo, hi)
    _, gv = evaluate_on_grid(g, grid_step, lo, hi)
    scale = max(1.0, float(np.abs(fv).max(initial=0.0)))
    return bool(np.all(np.abs(np.abs(fv) - np.abs(gv)) <= tol * scale))


@dataclass(frozen=True)
class SignalGraph:
    vertices: tuple
    edges: frozenset

    def neighbors(self):
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def build_graph(f: Signal, overlap: OverlapSet | None = None, coeff_tol: float = 0.0) -> SignalGraph:
    """Vertices: shifts with ``|c(k)| > coeff_tol``; edges: pairs whose difference lies in ``Lambda_phi``."""
    if overlap is None:
        overlap = overlap_set(f.generator)
    verts = tuple(k for k, v in f.coeffs.items() if abs(v) > coeff_tol)
    vset = set(verts)
    edges = set()
    for k in verts:
        for lam in overlap.shifts:
            if not any(lam):
                continue
            other = tuple(a + b for a, b in zip(k, lam))
            if other in vset:
                edges.add((min(k, other), max(k, other)))
    return SignalGraph(verts, frozenset(edges))


def components(G: SignalGraph) -> list[list]:
    """Connected components by breadth-first search, each sorted, in order of first vertex."""
    adj = G.neighbors()
    seen = set()
    out = []
    for v in G.vertices:
        if v in seen:
            continue
        comp = []
        queue = deque([v])
        seen.add(v)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        out.append(sorted(comp))
    return out


def is_connected(G: SignalGraph) -> bool:
    return len(components(G)) <= 1


class Verdict(str, enum.Enum):
    NONSEPARABLE = "nonseparable"
    SEPARABLE = "separable"
    INCONCLUSIVE = "inconclusive"

    def __str__(self):
        return self.value


def is_nonseparable(f: Signal, overlap: OverlapSet | None = None, coeff_tol: float = 0.0) -> Verdict:
    """Graph-based verdict.

    A disconnected graph always means separable. A connected graph means
    nonseparable only when the generator is locally linearly independent on
    every open set; otherwise the answer is inconclusive.
    """
    G = build_graph(f, overlap, coeff_tol)
    if not is_connected(G):
        return Verdict.SEPARABLE
    if f.generator.locally_independent:
        return Verdict.NONSEPARABLE
    return Verdict.INCONCLUSIVE


def consecutive_zero_check_1d(f: Signal) -> bool:
    """1-D criterion: nonseparable iff no run of ``L-1`` consecutive coefficients vanishes
    strictly inside the coefficient range (generator supported on ``[0, L]``)."""
    g = f.generator
    if g.dim != 1:
        raise WrongDimension("consecutive_zero_check_1d needs a 1-D generator")
    lo, hi = g.support_box()
    if lo[0] != 0.0 or hi[0] != round(hi[0]) or hi[0] < 2:
        raise ValueError("generator must be supported on [0, L] with integer L >= 2")
    L = int(hi[0])
    nz = [k[0] for k, v in f.coeffs.items() if v != 0.0]
    if not nz:
        return True
    kmin, kmax = min(nz), max(nz)
    c = {k[0]: v for k, v in f.coeffs.items()}
    for k in range(kmin - L + 2, kmax + 1):
        if sum(c.get(k + l, 0.0) ** 2 for l in range(L - 1)) == 0.0:
            return False
    return True


def brute_force_separable(
    f: Signal,
    grid_step: float = SUP_GRID_STEP,
    window=None,
    max_vertices: int = 20,
    tol: float = 1e-9,
) -> bool:
    """Exhaustive search for ``f = f1 + f2`` with ``f1 f2 = 0`` and ``f1, f2`` nonzero in ``V(phi)``.

    Any such split has ``f1 = f * chi_S`` with ``S`` a union of connected pieces
    of ``{f > 0}`` and ``{f < 0}``. Pieces are found on the grid; a candidate
    union is accepted when ``f * chi_S`` lies in the span of the generator
    translates (least-squares residual below ``tol`` relative to ``||f||``).
    All 0/1 combinations of pieces are covered by enumerating the 0/1 points of
    the residual null space.

    ``window`` restricts everything to a box ``(lo, hi)``, which is how signals
    that are only separable in the interior of their support (truncations of
    infinite examples) are examined.
    """
    g = f.generator
    verts = [k for k, v in f.coeffs.items() if v != 0.0]
    if len(verts) > max_vertices:
        raise TooManyVertices(f"{len(verts)} vertices exceed the limit {max_vertices}")
    if len(verts) <= 1:
        return False
    s_lo, s_hi = g.support_box()
    width = s_hi - s_lo
    if window is None:
        ks = np.array(verts)
        basis_lo = ks.min(axis=0) - np.ceil(width).astype(int) + 1
        basis_hi = ks.max(axis=0) + np.ceil(width).astype(int) - 1
        lo = basis_lo + s_lo
        hi = basis_hi + s_hi
    else:
        lo = np.atleast_1d(np.asarray(window[0], dtype=float))
        hi = np.atleast_1d(np.asarray(window[1], dtype=float))
        basis_lo = np.floor(lo - s_hi).astype(int)
        basis_hi = np.ceil(hi - s_lo).astype(int)
    axes, fv = evaluate_on_grid(f, grid_step, lo, hi)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.dim)
    basis_ks = list(itertools.product(*[range(a, b + 1) for a, b in zip(basis_lo, basis_hi)]))
    B = np.column_stack([eval_generator(g, pts - np.array(k, dtype=float)) for k in basis_ks])
    B = B[:, np.any(np.abs(B) > 1e-14, axis=0)]
    fnorm = float(np.linalg.norm(fv))
    if fnorm == 0.0:
        return False
    thresh = 1e-12 * float(np.abs(fv).max())
    pieces = []
    for mask in (fv > thresh, fv < -thresh):
        labels, n = ndimage.label(mask)
        pieces.extend(labels.ravel() == i for i in range(1, n + 1))
    r = len(pieces)
    if r < 2:
        return False
    F = np.column_stack([np.where(p, fv.ravel(), 0.0) for p in pieces])
    Q, _ = np.linalg.qr(B)
    R = F - Q @ (Q.T @ F)
    _, sv, vt = np.linalg.svd(R, full_matrices=True)
    sv = np.concatenate([sv, np.zeros(r - len(sv))])
    null = vt[sv <= tol * fnorm].T
    q = null.shape[1]
    if q < 2:
        return False
    if q > max_vertices:
        raise TooManyVertices(f"{q}-dimensional piece null space is too large to enumerate")
    # pick q well-conditioned coordinates; a 0/1 vector in span(null) is fixed by them
    _, _, piv = _pivoted_rows(null)
    sub = null[piv[:q]]
    for pattern in itertools.product((0.0, 1.0), repeat=q):
        if all(pattern) or not any(pattern):
            continue
        s = null @ np.linalg.solve(sub, np.array(pattern))
        rounded = np.round(s)
        if np.max(np.abs(s - rounded)) > 1e-6 or not set(np.unique(rounded)) <= {0.0, 1.0}:
            continue
        if rounded.all() or not rounded.any():
            continue
        if np.linalg.norm(R @ rounded) <= tol * fnorm:
            return True
    return False


def _pivoted_rows(mat):
    return linalg.qr(mat.T, pivoting=True)
