"""MAPSET reconstruction: local minimisation, phase adjustment, sewing and thresholding."""

from __future__ import annotations

import math
import os
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonFiniteInput, PhaseConflict, RankDeficientPatch
from .sampling import PatchSystem, phi_inverse_norm, sampling_density
from .signals import Signal


ROUNDOFF = 1e-10


@dataclass(frozen=True)
class ReconstructionConfig:
    """``m0`` is the phase adjustment threshold; the amplitude threshold is ``sqrt(m0)``."""

    m0: float = 0.0
    exact_max_rows: int = 20
    altmin_restarts: int = 16
    altmin_iterations: int = 200
    altmin_tol: float = 1e-12
    force_exact: bool = False
    large_solver: str = "branch"
    branch_max_nodes: int = 1 << 26
    seed: int = 0

    def __post_init__(self):
        if self.m0 < 0:
            raise ValueError("m0 must be nonnegative")
        if self.large_solver not in ("branch", "altmin"):
            raise ValueError("large_solver must be 'branch' or 'altmin'")

    @property
    def eta(self) -> float:
        return math.sqrt(self.m0)


@dataclass
class PatchSolution:
    key: tuple
    shifts: tuple
    coeffs: np.ndarray
    residual: float
    sign: int = 1

    @property
    def signed(self) -> np.ndarray:
        return self.sign * self.coeffs


class LocalSolver:
    """Phaseless least squares ``min_c sum_gamma (|Phi c|_gamma - z_gamma)^2`` for a fixed ``Phi``.

    The factorisation is computed once and reused for every right-hand side.
    Negative data are clipped to zero before solving (a magnitude cannot be
    negative); the reported residual is the objective on the raw data.

    Up to ``exact_max_rows`` rows every sign pattern is scanned in Gray-code
    order. Larger patches use a depth-first branch-and-bound over sign
    patterns (also a certified global minimiser) or, with
    ``large_solver="altmin"``, alternating minimisation from several starts
    with a single-flip descent whenever it stalls.
    """

    def __init__(self, Phi, cfg: ReconstructionConfig | None = None):
        Phi = np.asarray(Phi, dtype=float)
        if not np.all(np.isfinite(Phi)):
            raise NonFiniteInput("local matrix has non-finite entries")
        self.cfg = cfg or ReconstructionConfig()
        self.Phi = Phi
        rows, cols = Phi.shape
        if rows < cols:
            raise RankDeficientPatch("local matrix has fewer rows than columns")
        self.Q, self.R = np.linalg.qr(Phi)
        d = np.abs(np.diag(self.R))
        if cols and (d.min() <= 1e-12 * d.max()):
            raise RankDeficientPatch("local matrix is not of full column rank")
        self.P = np.eye(rows) - self.Q @ self.Q.T
        self.exact = self.cfg.force_exact or rows <= self.cfg.exact_max_rows

    def lstsq(self, rhs):
        return np.linalg.solve(self.R, self.Q.T @ rhs)

    def objective(self, c, z) -> float:
        return float(np.sum((np.abs(self.Phi @ c) - z) ** 2))

    def solve_exact(self, z):
        _, signs = kernels.sign_scan(self.P, z)
        return self.lstsq(signs * z)

    def solve_branch(self, z, rng: np.random.Generator):
        # large magnitudes first: their signs are the most constrained
        order = np.argsort(-z, kind="stable")
        best, signs, _, complete = kernels.sign_branch(
            self.Phi[order], z[order], math.inf, self.cfg.branch_max_nodes
        )
        if signs is None or not complete:
            c = self.solve_altmin(z, rng)
            if signs is None or self.objective(c, z) <= best:
                return c
        s = np.empty(len(z))
        s[order] = signs
        return self.lstsq(s * z)

    def solve_altmin(self, z, rng: np.random.Generator):
        """Alternate ``c = lstsq(s * z)`` and ``s = sign(Phi c)``; at a fixed point, flip the
        single sign that lowers ``||P (s * z)||^2`` the most, if any does."""
        rows = len(z)
        cfg = self.cfg
        diag = np.diag(self.P)
        starts = [np.ones(rows)] + [np.where(rng.random(rows) < 0.5, -1.0, 1.0) for _ in range(cfg.altmin_restarts)]
        best_c, best_res = None, math.inf
        for s in starts:
            for _ in range(cfg.altmin_iterations):
                c = self.lstsq(s * z)
                s_new = np.where(self.Phi @ c >= 0, 1.0, -1.0)
                if np.array_equal(s_new, s):
                    r = self.P @ (s * z)
                    gain = 4.0 * z * (s * r - z * diag)
                    j = int(np.argmax(gain))
                    if gain[j] <= cfg.altmin_tol * max(float(r @ r), 1e-300):
                        break
                    s_new = s.copy()
                    s_new[j] = -s_new[j]
                s = s_new
            c = self.lstsq(s * z)
            res = self.objective(c, z)
            if res < best_res:
                best_c, best_res = c, res
        return best_c

    def solve(self, z, rng: np.random.Generator | None = None):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.Phi.shape[0],):
            raise ValueError("data length does not match the number of rows")
        if not np.all(np.isfinite(z)):
            raise NonFiniteInput("samples contain non-finite values")
        zc = np.maximum(z, 0.0)
        rng = rng if rng is not None else np.random.default_rng(self.cfg.seed)
        if self.exact:
            c = self.solve_exact(zc)
        elif self.cfg.large_solver == "branch":
            c = self.solve_branch(zc, rng)
        else:
            c = self.solve_altmin(zc, rng)
        # fix the global sign: first nonzero entry of Phi c is positive
        v = self.Phi @ c
        nz = np.flatnonzero(np.abs(v) > 0)
        if nz.size and v[nz[0]] < 0:
            c = -c
        return c, self.objective(c, z)


def local_minimize(Phi, z, cfg: ReconstructionConfig | None = None, rng=None):
    """Solve one local problem; returns ``(coeffs, residual)``."""
    return LocalSolver(Phi, cfg).solve(z, rng)


def _inner(a: PatchSolution, b: PatchSolution, index) -> float:
    common = set(a.shifts) & set(b.shifts)
    ia, ib = index[id(a)], index[id(b)]
    return float(sum(a.coeffs[ia[k]] * b.coeffs[ib[k]] for k in common))


def adjust_phases(solutions: list[PatchSolution], m0: float) -> dict:
    """Assign signs so that every pair of overlapping solutions has inner product ``>= -m0``.

    Edges join solutions with ``|<c_i, c_j>| > m0``; signs are propagated along
    a breadth-first spanning forest, then every overlapping pair is checked.
    Identically zero solutions get sign +1 and take no part. Inner products
    within ``ROUNDOFF * |c_i| |c_j|`` of the thresholds are treated as
    roundoff. Returns a summary
    and sets ``sign`` on each solution; raises :class:`PhaseConflict` when the
    check fails.
    """
    index = {id(s): {k: i for i, k in enumerate(s.shifts)} for s in solutions}
    by_shift = defaultdict(list)
    for i, s in enumerate(solutions):
        s.sign = 1
        if np.any(s.coeffs != 0):
            for k in s.shifts:
                by_shift[k].append(i)
    pairs = set()
    for members in by_shift.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pairs.add((members[a], members[b]))
    inner = {p: _inner(solutions[p[0]], solutions[p[1]], index) for p in sorted(pairs)}
    norms = [float(np.linalg.norm(s.coeffs)) for s in solutions]
    # products at roundoff level carry no phase information
    slack = {p: ROUNDOFF * norms[p[0]] * norms[p[1]] for p in inner}
    adj = defaultdict(list)
    for (i, j), v in inner.items():
        if abs(v) > m0 + slack[(i, j)]:
            adj[i].append((j, v))
            adj[j].append((i, v))
    seen = set()
    components = 0
    for root in range(len(solutions)):
        if root in seen or not np.any(solutions[root].coeffs != 0):
            continue
        components += 1
        seen.add(root)
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w, v in adj[u]:
                if w not in seen:
                    seen.add(w)
                    solutions[w].sign = solutions[u].sign * (1 if v > 0 else -1)
                    queue.append(w)
    for (i, j), v in inner.items():
        signed = solutions[i].sign * solutions[j].sign * v
        if signed < -m0 - slack[(i, j)]:
            raise PhaseConflict(
                f"patches {solutions[i].key} and {solutions[j].key} disagree in phase (inner product {signed:.3e})",
                pair=(solutions[i].key, solutions[j].key),
                inner=signed,
            )
    return {"pairs": len(inner), "edges": sum(len(v) for v in adj.values()) // 2, "components": components}


def sew(solutions: list[PatchSolution], index_set=None) -> tuple[dict, list]:
    """Average the signed local solutions: ``d(k) = sum delta c(k) / #{windows containing k}``.

    Returns ``(d, uncovered)``; shifts of ``index_set`` lying in no window are
    set to 0 and listed in ``uncovered``.
    """
    num = defaultdict(float)
    den = defaultdict(int)
    for s in solutions:
        vals = s.signed
        for k, v in zip(s.shifts, vals):
            num[k] += v
            den[k] += 1
    keys = set(num) if index_set is None else {tuple(k) for k in index_set}
    out, uncovered = {}, []
    for k in sorted(keys):
        if den.get(k, 0):
            out[k] = num[k] / den[k]
        else:
            out[k] = 0.0
            uncovered.append(k)
    return out, uncovered


def hard_threshold(d, eta: float):
    """Keep entries with ``|t| >= eta``, zero the rest. Accepts a dict or an array."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if isinstance(d, dict):
        return {k: (v if abs(v) >= eta else 0.0) for k, v in d.items()}
    d = np.asarray(d, dtype=float)
    return np.where(np.abs(d) >= eta, d, 0.0)


@dataclass
class NoisySamples:
    """``values[m][i, j]`` is ``z(gamma_j, l_i)`` for patch ``m`` and shift ``l_i = shifts[i]``."""

    shifts: tuple
    values: list
    eps: float | None = None

    def __post_init__(self):
        self.shifts = tuple(tuple(int(v) for v in l) for l in self.shifts)
        self.values = [np.asarray(v, dtype=float) for v in self.values]
        for v in self.values:
            if v.shape[0] != len(self.shifts):
                raise ValueError("one row of samples is needed per shift")
            if not np.all(np.isfinite(v)):
                raise NonFiniteInput("samples contain non-finite values")


def stability_bound(P: PatchSystem, eps_inf: float) -> float:
    """``2 sqrt(#Gamma) ||Phi^-1||_2 eps``."""
    if eps_inf < 0:
        raise ValueError("eps_inf must be nonnegative")
    return 2.0 * math.sqrt(sampling_density(P)) * phi_inverse_norm(P) * eps_inf


def check_preconditions(P: PatchSystem, F0: float, m0: float, eps_inf: float) -> tuple[bool, bool]:
    """``(m0 <= 2 F0 / 9, 8 #Gamma ||Phi^-1||^2 eps^2 <= m0)``."""
    if F0 <= 0:
        raise ValueError("F0 must be positive")
    norm = phi_inverse_norm(P) if eps_inf > 0 else 0.0
    first = m0 <= 2.0 * F0 / 9.0
    second = 8.0 * sampling_density(P) * norm**2 * eps_inf**2 <= m0
    return first, second


@dataclass
class ReconstructionReport:
    signal: Signal
    coefficients: dict
    residuals: dict
    phase: dict
    uncovered: list
    bound: float | None
    flags: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "generator": self.signal.generator.to_spec(),
            "coefficients": [list(k) + [v] for k, v in sorted(self.coefficients.items())],
            "residuals": [[m, list(l), r] for (l, m), r in sorted(self.residuals.items(), key=lambda t: (t[0][1], t[0][0]))],
            "phase": self.phase,
            "uncovered": [list(k) for k in self.uncovered],
            "bound": self.bound,
            "flags": self.flags,
            "seed": self.seed,
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SIV_THREADS", "1")))
    except ValueError:
        return 1


def _solve_patch(P: PatchSystem, m: int, samples: NoisySamples, cfg: ReconstructionConfig):
    patch = P.patches[m]
    solver = LocalSolver(patch.matrix, cfg)
    out = []
    for i, l in enumerate(samples.shifts):
        entropy = [cfg.seed, m] + [int(v) + (1 << 31) for v in l]
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        c, res = solver.solve(samples.values[m][i], rng)
        shifts = tuple(tuple(a + b for a, b in zip(l, k)) for k in patch.omega)
        out.append(PatchSolution((l, m), shifts, c, res))
    return out


def mapset_reconstruct(
    samples: NoisySamples,
    P: PatchSystem,
    cfg: ReconstructionConfig | None = None,
    F0: float | None = None,
) -> ReconstructionReport:
    """Run the four MAPSET stages over every ``(l, m)``.

    The reconstruction index set is the union of the windows ``l + Omega_m``.
    Raises :class:`PhaseConflict` when phases cannot be adjusted consistently.
    """
    cfg = cfg or ReconstructionConfig()
    if len(samples.values) != len(P.patches):
        raise ValueError("samples do not match the number of patches")
    for m, patch in enumerate(P.patches):
        if samples.values[m].shape[1] != patch.rows:
            raise ValueError(f"patch {m} expects {patch.rows} samples per shift")
    workers = min(_threads(), len(P.patches))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda m: _solve_patch(P, m, samples, cfg), range(len(P.patches))))
    else:
        parts = [_solve_patch(P, m, samples, cfg) for m in range(len(P.patches))]
    # fixed order: by shift, then patch
    solutions = sorted((s for part in parts for s in part), key=lambda s: (s.key[0], s.key[1]))
    phase = adjust_phases(solutions, cfg.m0)
    d, uncovered = sew(solutions)
    coeffs = hard_threshold(d, cfg.eta)
    signal = Signal(P.generator, coeffs)
    bound = None
    flags = {}
    if samples.eps is not None:
        bound = stability_bound(P, samples.eps)
        if F0 is not None:
            f1, f2 = check_preconditions(P, F0, cfg.m0, samples.eps)
            flags = {"m0_le_2F0_over_9": f1, "noise_le_m0": f2}
    residuals = {s.key: s.residual for s in solutions}
    return ReconstructionReport(signal, coeffs, residuals, phase, uncovered, bound, flags, cfg.seed)
