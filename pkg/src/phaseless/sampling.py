"""Sampling sets ``Gamma + Z^d``: spanning and frame patches, the local
complement property, the stability constant and sampling density."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from .errors import (
    CandidatesInsufficient,
    CoverageViolation,
    FrameSearchExhausted,
    LocalDependence,
    RankDeficientPatch,
    SearchLimitExceeded,
    TooManyVectors,
    UnsupportedGenerator,
)
from .generators import (
    GRID_STEP,
    RANK_TOL,
    ZERO_TOL,
    Generator,
    _cofactor_normal,
    k_set,
    local_linear_independence,
    numerical_rank,
    overlap_set,
    phi_matrix,
)
from .regions import Region, unit_cube

MARGIN = 1e-3
FRAME_TOL = 1e-6
MAX_FRAME_VECTORS = 24
MAX_NODES = 1 << 24
FRAME_RETRIES = 50


def outer_vectors(rows) -> np.ndarray:
    """Upper-triangle coordinates of ``v v^T`` for each row ``v``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    iu = np.triu_indices(rows.shape[1])
    return (rows[:, :, None] * rows[:, None, :])[:, iu[0], iu[1]]


def _dense_points(A: Region, count: int) -> np.ndarray:
    return np.concatenate([A.grid(GRID_STEP), A.quasi_random(count)])


def outer_space_dim(g: Generator, A: Region, samples=None, rank_tol: float = RANK_TOL) -> int:
    """``dim W_A``: rank of the outer products ``Phi_A(x) Phi_A(x)^T`` over dense samples."""
    ks = k_set(g, A)
    if not ks:
        return 0
    if samples is None:
        samples = A.quasi_random(4 * len(ks) ** 2)
    return numerical_rank(outer_vectors(phi_matrix(g, samples, ks)), rank_tol)


def grid_candidates(A: Region, n: int, margin: float = MARGIN) -> np.ndarray:
    """Points of ``Z^d / n`` strictly inside ``A``, in lexicographic order."""
    return A.grid(1.0 / n, margin)


def select_spanning_offsets(g: Generator, A: Region, candidates, rank_tol: float = RANK_TOL, target: int | None = None):
    """Greedy subset of ``candidates`` whose outer products span ``W_A``.

    Each step takes the candidate with the largest residual against the span
    of those already chosen (pivoted QR). The chosen points keep the order in
    which they appear among the candidates.
    """
    candidates = np.asarray(candidates, dtype=float).reshape(-1, g.dim)
    ks = k_set(g, A)
    if target is None:
        target = outer_space_dim(g, A, rank_tol=rank_tol)
    if len(candidates) == 0:
        raise CandidatesInsufficient("no candidate points")
    G = outer_vectors(phi_matrix(g, candidates, ks))
    _, r, piv = linalg.qr(G.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rank_tol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < target:
        raise CandidatesInsufficient(f"candidate outer products have rank {rank} < {target}")
    return candidates[np.sort(piv[:target])]


def spanning_offsets(g: Generator, A: Region, margin: float = MARGIN, max_n: int = 64):
    """Spanning offsets drawn from the coarsest grid ``Z^d / n`` that suffices."""
    target = outer_space_dim(g, A)
    for n in range(2, max_n + 1):
        cands = grid_candidates(A, n, margin)
        if len(cands) < target:
            continue
        try:
            return select_spanning_offsets(g, A, cands, target=target)
        except CandidatesInsufficient:
            continue
    raise CandidatesInsufficient(f"no grid up to 1/{max_n} spans W_A")


def outer_products_span(vectors, target_dim: int, rank_tol: float = RANK_TOL) -> bool:
    """Whether the outer products ``v v^T`` have rank ``target_dim``."""
    return numerical_rank(outer_vectors(vectors), rank_tol) == target_dim


def _min_split(M, max_nodes):
    """Best split for one matrix: ``(sigma, mask)`` with ``sigma`` the better side's
    smallest singular value, minimised over all row splits."""
    M = np.asarray(M, dtype=float)
    r, c = M.shape
    full = _sigma_min(M)
    best_sq, mask, _, complete = kernels.split_search(M, full * full, max_nodes)
    if not complete:
        raise SearchLimitExceeded(f"split search exceeded {max_nodes} nodes")
    if mask is None:
        return full, np.ones(r, dtype=bool)
    sigma = max(_sigma_min(M[mask]), _sigma_min(M[~mask]))
    return min(sigma, full), mask


def _sigma_min(M) -> float:
    r, c = M.shape
    if r < c or c == 0:
        return 0.0 if c else math.inf
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def is_phase_retrievable_frame(
    vectors,
    max_vectors: int = MAX_FRAME_VECTORS,
    tol: float = FRAME_TOL,
    max_nodes: int = MAX_NODES,
) -> bool:
    """Complement property: every split of the vectors leaves one side spanning ``R^n``.

    A side counts as spanning when its smallest singular value exceeds
    ``tol * sigma_max`` of the whole family.
    """
    M = np.atleast_2d(np.asarray(vectors, dtype=float))
    r, n = M.shape
    if r > max_vectors:
        raise TooManyVectors(f"{r} vectors exceed the enumeration limit {max_vectors}")
    if r == 0:
        return n == 0
    smax = float(np.linalg.svd(M, compute_uv=False)[0])
    if smax == 0.0:
        return False
    bound = (tol * smax) ** 2
    _, mask, _, complete = kernels.split_search(M, bound, max_nodes, first_only=True)
    if mask is not None:
        return False
    if not complete:
        raise SearchLimitExceeded(f"complement-property search exceeded {max_nodes} nodes")
    return True


@dataclass(frozen=True, eq=False)
class Patch:
    """Region ``A``, offsets ``gamma`` inside it, shifts ``omega = K_A`` and ``Phi = (phi(gamma - k))``."""

    region: Region
    gamma: np.ndarray
    omega: tuple
    matrix: np.ndarray

    @property
    def rows(self) -> int:
        return len(self.gamma)


def make_patch(g: Generator, region: Region, gamma, omega=None) -> Patch:
    gamma = np.asarray(gamma, dtype=float).reshape(-1, g.dim)
    if omega is None:
        omega = k_set(g, region)
    omega = tuple(tuple(int(v) for v in k) for k in omega)
    mat = phi_matrix(g, gamma, omega)
    mat.setflags(write=False)
    gamma.setflags(write=False)
    return Patch(region, gamma, omega, mat)


@dataclass(frozen=True, eq=False)
class PatchSystem:
    generator: Generator
    mode: str
    patches: tuple
    phi_inv_norm: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def density(self) -> int:
        return sampling_density(self)

    def with_norm(self, value: float) -> "PatchSystem":
        return PatchSystem(self.generator, self.mode, self.patches, value, self.meta)


def sampling_density(P: PatchSystem) -> int:
    """``#Gamma`` for ``Gamma = union of Gamma_m``, duplicates counted once."""
    pts = {tuple(p) for patch in P.patches for p in np.asarray(patch.gamma).tolist()}
    return len(pts)


def phi_inverse_norm_details(P, max_nodes: int = MAX_NODES):
    """Per-patch ``(1 / sigma, mask)`` where ``sigma = min over splits of the better side's sigma_min``."""
    mats = [p.matrix for p in P.patches] if isinstance(P, PatchSystem) else [np.asarray(m, float) for m in P]
    out = []
    for m, M in enumerate(mats):
        if numerical_rank(M) < M.shape[1]:
            raise RankDeficientPatch(f"patch {m} matrix is not of full column rank")
        sigma, mask = _min_split(M, max_nodes)
        out.append((math.inf if sigma == 0.0 else 1.0 / sigma, mask))
    return out


def phi_inverse_norm(P, max_nodes: int = MAX_NODES) -> float:
    """``max over m`` of ``[min over splits Theta of max(sigma_min(Phi_Theta), sigma_min(Phi_rest))]^-1``.

    ``P`` is a :class:`PatchSystem` or a list of local matrices.
    """
    if isinstance(P, PatchSystem) and P.phi_inv_norm is not None:
        return P.phi_inv_norm
    details = phi_inverse_norm_details(P, max_nodes)
    return max((v for v, _ in details), default=0.0)


def _mesh_normals(g: Generator) -> list[np.ndarray]:
    """Normals of the hyperplanes across which the generator changes polynomial piece."""
    d = g.dim
    if g.kind in ("bspline", "tensor"):
        return [np.eye(d)[i] for i in range(d)]
    xi = np.array(g.xi, dtype=float)
    normals = []
    for cols in itertools.combinations(range(xi.shape[1]), d - 1):
        sub = xi[:, cols]
        if d > 1 and np.linalg.matrix_rank(sub) < d - 1:
            continue
        n = _cofactor_normal(sub).astype(float) if d > 1 else np.ones(1)
        if not any(np.array_equal(n, m) for m in normals):
            normals.append(n)
    return normals


def default_regions(g: Generator) -> list[Region]:
    """Cells of the piecewise-polynomial mesh inside ``(0, 1)^d``.

    On each cell the same set of translates is active, so the cells are the
    maximal overlap sets; together with their integer shifts they cover every
    overlap. Tensor B-splines give the single cube, the Zwart-Powell element
    gives the two triangles.
    """
    if g.kind == "fixture":
        raise UnsupportedGenerator(f"no cell decomposition for {g.id}")
    if not g.locally_independent:
        raise LocalDependence(f"{g.id} is not locally linearly independent")
    d = g.dim
    cube = unit_cube(d)
    splits = []
    for n in _mesh_normals(g):
        lo = float(np.minimum(n, 0).sum())
        hi = float(np.maximum(n, 0).sum())
        cuts = [c for c in range(int(math.ceil(lo)), int(math.floor(hi)) + 1) if lo < c < hi]
        if cuts:
            splits.append((n, lo, hi))
    if not splits:
        return [cube]
    step = 1.0 / 64
    axis = (np.arange(64) + 0.5) * step
    pts = np.stack(np.meshgrid(*[axis] * d, indexing="ij"), axis=-1).reshape(-1, d)
    sig = np.stack([np.floor(pts @ n + 1e-12) for n, _, _ in splits], axis=1).astype(int)
    regions = []
    for s in sorted({tuple(row) for row in sig}):
        hs = []
        for (n, lo, hi), c in zip(splits, s):
            if c + 1 < hi:
                hs.append((tuple(float(v) for v in n), float(c + 1)))
            if c > lo:
                hs.append((tuple(float(-v) for v in n), float(-c)))
        regions.append(Region(cube.lo, cube.hi, tuple(hs)))
    return regions


def covered_shifts(g: Generator, regions, samples_per_region: int = 512) -> set:
    """Shifts ``k`` for which ``S_k`` meets ``union (A_m + Z^d)``."""
    out = set()
    for A in regions:
        ks = k_set(g, A)
        if not ks:
            continue
        vals = np.abs(phi_matrix(g, _dense_points(A, samples_per_region), ks)) > ZERO_TOL
        for i, a in enumerate(ks):
            for j, b in enumerate(ks):
                if np.any(vals[:, i] & vals[:, j]):
                    out.add(tuple(int(y - x) for x, y in zip(a, b)))
    return out


def check_coverage(g: Generator, regions) -> None:
    """Raise :class:`CoverageViolation` unless every overlap shift is seen by some region."""
    lam = overlap_set(g)
    missing = sorted(set(lam.shifts) - covered_shifts(g, regions))
    if missing:
        raise CoverageViolation(f"overlap shifts not covered by the regions: {missing}")


def edge_witness(P: PatchSystem, k, kp):
    """A sample ``y in Gamma + Z^d`` with ``phi(y - k) phi(y - k') != 0``, or None."""
    g = P.generator
    k = np.asarray(k, dtype=float)
    kp = np.asarray(kp, dtype=float)
    for patch in P.patches:
        gam = np.asarray(patch.gamma)
        for a in patch.omega:
            # shifts l with k in l + Omega
            y = gam + (k - np.asarray(a, dtype=float))
            v = np.abs(phi_matrix(g, y, [k]))[:, 0] * np.abs(phi_matrix(g, y, [kp]))[:, 0]
            hit = np.flatnonzero(v > ZERO_TOL)
            if hit.size:
                return y[hit[0]]
    return None


def reproduction_weights(P: PatchSystem, x, patch: int = 0, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Weights ``d_gamma(x)`` with ``Phi(x) Phi(x)^T = sum d_gamma Phi(gamma) Phi(gamma)^T``."""
    p = P.patches[patch]
    basis = outer_vectors(p.matrix)
    target = outer_vectors(phi_matrix(P.generator, x, p.omega))[0]
    w, *_ = np.linalg.lstsq(basis.T, target, rcond=rank_tol)
    return w


def _frame_patch(g, A, ks, rng, retries, max_rows, draws):
    n = len(ks)
    size = max(2 * n - 1, 1)
    while size <= max_rows:
        passing = []
        for _ in range(retries):
            pts = A.random(rng, size, MARGIN)
            mat = phi_matrix(g, pts, ks)
            if numerical_rank(mat) == n and is_phase_retrievable_frame(mat, max_vectors=max_rows):
                passing.append(pts)
                if len(passing) >= draws:
                    break
        if passing:
            if len(passing) == 1:
                return passing[0]
            scores = [phi_inverse_norm([phi_matrix(g, p, ks)]) for p in passing]
            return passing[int(np.argmin(scores))]
        size += 1
    raise FrameSearchExhausted(f"no phase-retrievable frame with at most {max_rows} points")


def build_patch_system(
    g: Generator,
    regions=None,
    mode: str = "spanning",
    candidates=None,
    seed: int = 0,
    retries: int = FRAME_RETRIES,
    max_rows: int = MAX_FRAME_VECTORS,
    draws: int = 1,
    compute_norm: bool = True,
) -> PatchSystem:
    """Build the patches ``(A_m, Gamma_m, K_{A_m})`` for ``g``.

    ``mode="spanning"`` picks offsets whose outer products span ``W_{A_m}``
    (from ``candidates`` when given, else from the coarsest adequate grid).
    ``mode="frame"`` draws seeded random offsets, starting at ``2 #K - 1``
    points and growing until a phase-retrievable frame appears; with
    ``draws > 1`` the best conditioned of that many passing draws is kept.
    """
    if mode not in ("spanning", "frame"):
        raise ValueError(f"unknown mode {mode!r}")
    regions = default_regions(g) if regions is None else list(regions)
    seeds = np.random.SeedSequence(seed).spawn(len(regions))
    patches = []
    for m, A in enumerate(regions):
        ks = k_set(g, A)
        if not ks or not local_linear_independence(g, A):
            raise LocalDependence(f"generator is not locally linearly independent on region {m}")
        if mode == "spanning":
            if candidates is None:
                gamma = spanning_offsets(g, A)
            else:
                cand = candidates[m] if isinstance(candidates, (list, tuple)) else candidates
                cand = np.asarray(cand, dtype=float).reshape(-1, g.dim)
                gamma = select_spanning_offsets(g, A, cand[A.contains(cand)])
        else:
            gamma = _frame_patch(g, A, ks, np.random.default_rng(seeds[m]), retries, max_rows, draws)
        patches.append(make_patch(g, A, gamma, ks))
    check_coverage(g, regions)
    P = PatchSystem(g, mode, tuple(patches), None, {"seed": seed})
    if compute_norm:
        P = P.with_norm(phi_inverse_norm(P))
    return P


def restricted_basis(g: Generator, A: Region, rank_tol: float = RANK_TOL):
    """Linear map ``T`` such that ``T Phi_A(x)`` are coordinates of a basis of ``V|_A``.

    Equals the identity when ``phi`` is locally linearly independent on ``A``.
    """
    ks = k_set(g, A)
    mat = phi_matrix(g, _dense_points(A, 16 * len(ks) + 64), ks)
    _, s, vt = np.linalg.svd(mat, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    if rank == len(ks):
        return ks, np.eye(len(ks))
    return ks, vt[:rank]


def local_complement_property(
    g: Generator,
    A: Region,
    max_vectors: int = 40,
    max_nodes: int = MAX_NODES,
) -> bool:
    """Local complement property of ``V(phi)`` on ``A``.

    Picks a finite ``Gamma`` whose outer products span the outer-product space
    of a basis of ``V|_A`` and applies the complement-property test to the
    basis values at ``Gamma``.
    """
    ks, T = restricted_basis(g, A)
    n = T.shape[0]
    if n <= 1:
        return True
    dense = _dense_points(A, 4 * n * n)
    target = numerical_rank(outer_vectors(phi_matrix(g, dense, ks) @ T.T))
    for step in range(2, 65):
        cands = grid_candidates(A, step)
        if len(cands) < target:
            continue
        vals = phi_matrix(g, cands, ks) @ T.T
        _, r, piv = linalg.qr(outer_vectors(vals).T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if np.sum(diag > RANK_TOL * diag[0]) >= target:
            rows = vals[np.sort(piv[:target])]
            return is_phase_retrievable_frame(rows, max_vectors=max_vectors, max_nodes=max_nodes)
    raise CandidatesInsufficient("no grid spans the outer-product space")
