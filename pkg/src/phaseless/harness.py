"""Seeded experiments: random signals, noisy samples, error metrics and campaigns."""

from __future__ import annotations

import csv
import itertools
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PhaseConflict, PhaselessError
from .generators import Generator
from .mapset import NoisySamples, ReconstructionConfig, mapset_reconstruct, stability_bound
from .sampling import PatchSystem, build_patch_system
from .signals import Signal, build_graph, sup_distance

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
AMPLITUDE_LOW = 0.1
# reconstructed coefficients below this are roundoff when no thresholding is applied
SUPPORT_TOL = 1e-10


def box_shifts(lo, hi) -> list[tuple[int, ...]]:
    """Lattice points of ``[lo_1, hi_1] x ... x [lo_d, hi_d]`` in lexicographic order."""
    return [tuple(k) for k in itertools.product(*[range(int(a), int(b) + 1) for a, b in zip(lo, hi)])]


def default_box(g: Generator):
    """``[0, 9]^2`` for tensor splines, ``[0, 9] x [0, 8]`` for box splines, ``[0, 9]`` in 1-D."""
    if g.dim == 1:
        return (0,), (9,)
    if g.kind == "box":
        return (0,) * g.dim, (9,) + (8,) * (g.dim - 1)
    return (0,) * g.dim, (9,) * g.dim


def support_of(f: Signal, tol: float = None) -> set:
    """Shifts with ``|c(k)| > tol`` (roundoff level by default)."""
    tol = SUPPORT_TOL if tol is None else tol
    return {k for k, v in f.coeffs.items() if abs(v) > tol}


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def random_signal(g: Generator, K, seed=0) -> Signal:
    """Coefficients on the box ``K = (lo, hi)`` uniform on ``[-1, -0.1] u [0.1, 1]``."""
    rng = _rng(seed)
    ks = box_shifts(*K)
    mag = rng.uniform(AMPLITUDE_LOW, 1.0, len(ks))
    sign = np.where(rng.random(len(ks)) < 0.5, -1.0, 1.0)
    return Signal(g, dict(zip(ks, mag * sign)))


def sample_shifts(P: PatchSystem, f: Signal) -> list[tuple[int, ...]]:
    """Shifts ``l`` whose windows ``l + Omega_m`` meet the coefficients of ``f``, clipped to its box."""
    ks = np.array(list(f.coeffs))
    return box_shifts(ks.min(axis=0), ks.max(axis=0))


def sample_with_noise(f: Signal, P: PatchSystem, shifts, eps: float, seed=0) -> NoisySamples:
    """``z(gamma, l) = |f(gamma + l)| + u`` with ``u`` uniform on ``[-eps, eps]``.

    ``f(gamma + l)`` is the local sum ``sum_k c(l + k) phi(gamma - k)`` over ``k in Omega_m``,
    which is exact because ``phi(gamma - k) = 0`` for every other ``k``.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    rng = _rng(seed)
    shifts = [tuple(int(v) for v in l) for l in shifts]
    values = []
    for patch in P.patches:
        coeff = np.array(
            [[f.coeffs.get(tuple(a + b for a, b in zip(l, k)), 0.0) for k in patch.omega] for l in shifts]
        )
        exact = np.abs(coeff @ np.asarray(patch.matrix).T)
        noise = rng.uniform(-eps, eps, exact.shape) if eps > 0 else np.zeros(exact.shape)
        values.append(exact + noise)
    return NoisySamples(tuple(shifts), values, eps)


def amplitude_error(f: Signal, fe: Signal) -> tuple[float, int]:
    """``min over delta`` of ``max_k |c_eps(k) - delta c(k)|`` and the minimising ``delta``."""
    keys = set(f.coeffs) | set(fe.coeffs)
    best = (math.inf, 1)
    for delta in (1, -1):
        err = max((abs(fe.coeffs.get(k, 0.0) - delta * f.coeffs.get(k, 0.0)) for k in keys), default=0.0)
        if err < best[0]:
            best = (err, delta)
    return best


def metrics(f: Signal, fe: Signal, sup_norm: bool = True) -> dict:
    """Maximal amplitude error with its sign, and optionally ``min_delta ||f_eps - delta f||_inf``."""
    err, delta = amplitude_error(f, fe)
    out = {"e": err, "delta": delta}
    out["sup_error"] = sup_distance(fe, f) if sup_norm else None
    return out


@dataclass
class TrialResult:
    index: int
    e: float | None
    sup_error: float | None
    phase_saved: bool
    support_recovered: bool
    graph_preserved: bool
    bound: float
    within_bound: bool | None
    flags: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class ExperimentConfig:
    generator: dict
    mode: str = "spanning"
    system: str | None = None
    K: tuple | None = None
    eps: float = 0.0
    trials: int = 20
    m0: float = 0.0
    seed: int = 0
    F0: float = 0.01
    sup_norm: bool = False
    exact_local_solver: bool = False
    system_seed: int = 0
    frame_draws: int = 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["K"] = None if self.K is None else [list(self.K[0]), list(self.K[1])]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if data.get("K") is not None:
            data["K"] = (tuple(data["K"][0]), tuple(data["K"][1]))
        return cls(**data)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SIV_THREADS", "1")))
    except ValueError:
        return 1


def trial_inputs(seq: np.random.SeedSequence, P: PatchSystem, K, cfg: ExperimentConfig):
    """Signal, samples and solver settings of one trial, all derived from ``seq``."""
    s_sig, s_noise, s_solver = seq.spawn(3)
    f = random_signal(P.generator, K, s_sig)
    samples = sample_with_noise(f, P, box_shifts(*K), cfg.eps, s_noise)
    rcfg = ReconstructionConfig(
        m0=cfg.m0,
        force_exact=cfg.exact_local_solver,
        seed=int(s_solver.generate_state(1)[0]),
    )
    return f, samples, rcfg


def trial_seeds(cfg: ExperimentConfig) -> list:
    return np.random.SeedSequence(cfg.seed).spawn(cfg.trials)


def run_trial(index: int, seq: np.random.SeedSequence, P: PatchSystem, K, cfg: ExperimentConfig) -> TrialResult:
    f, samples, rcfg = trial_inputs(seq, P, K, cfg)
    bound = stability_bound(P, cfg.eps)
    try:
        report = mapset_reconstruct(samples, P, rcfg, F0=cfg.F0)
    except PhaseConflict as exc:
        return TrialResult(index, None, None, False, False, False, bound, None, {}, f"phase-conflict: {exc}")
    except PhaselessError as exc:
        return TrialResult(index, None, None, False, False, False, bound, None, {}, f"{type(exc).__name__}: {exc}")
    fe = report.signal
    m = metrics(f, fe, cfg.sup_norm)
    support = support_of(fe) == support_of(f)
    graph = build_graph(fe, coeff_tol=SUPPORT_TOL).edges == build_graph(f).edges and support
    sign_ok = all(
        np.sign(fe.coeffs.get(k, 0.0)) == m["delta"] * np.sign(v) for k, v in f.coeffs.items() if v != 0.0
    )
    return TrialResult(
        index,
        m["e"],
        m["sup_error"],
        support and sign_ok,
        support,
        graph,
        bound,
        m["e"] <= bound * (1 + 1e-12) + 1e-12,
        report.flags,
        None,
    )


def build_system(cfg: ExperimentConfig) -> PatchSystem:
    from .io import read_patch_system

    if cfg.system:
        return read_patch_system(cfg.system)
    g = Generator.from_spec(cfg.generator)
    return build_patch_system(g, None, cfg.mode, seed=cfg.system_seed, draws=cfg.frame_draws)


def run_campaign(cfg: ExperimentConfig, system: PatchSystem | None = None):
    """Run ``cfg.trials`` seeded trials; returns ``(results, summary)``.

    Every trial gets its own child of ``SeedSequence(cfg.seed)``, so results do
    not depend on scheduling. Failures are recorded, never raised.
    """
    P = system if system is not None else build_system(cfg)
    K = cfg.K if cfg.K is not None else default_box(P.generator)
    seqs = trial_seeds(cfg)
    work = lambda i: run_trial(i, seqs[i], P, K, cfg)  # noqa: E731
    workers = min(_threads(), max(cfg.trials, 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, range(cfg.trials)))
    else:
        results = [work(i) for i in range(cfg.trials)]
    results.sort(key=lambda r: r.index)
    return results, summarize(results, cfg, P)


def summarize(results, cfg: ExperimentConfig, P: PatchSystem) -> dict:
    errs = [r.e for r in results if r.e is not None]
    saved = sum(r.phase_saved for r in results)
    return {
        "generator": P.generator.id,
        "mode": P.mode,
        "density": P.density,
        "phi_inv_norm": P.phi_inv_norm,
        "eps": cfg.eps,
        "m0": cfg.m0,
        "trials": len(results),
        "phase_saved": saved,
        "phase_save_rate": saved / len(results) if results else 0.0,
        "conflicts": sum(1 for r in results if r.error and r.error.startswith("phase-conflict")),
        "max_e": max(errs) if errs else None,
        "median_e": statistics.median(errs) if errs else None,
        "bound": stability_bound(P, cfg.eps),
        "bound_violations": sum(1 for r in results if r.within_bound is False),
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
    }


def difference_surface(f: Signal, fe: Signal) -> list[tuple]:
    """Rows ``(k..., c_eps(k) - delta c(k))`` with ``delta`` minimising the amplitude error."""
    _, delta = amplitude_error(f, fe)
    keys = sorted(set(f.coeffs) | set(fe.coeffs))
    return [tuple(k) + (fe.coeffs.get(k, 0.0) - delta * f.coeffs.get(k, 0.0),) for k in keys]


def epsilon_sweep(cfg: ExperimentConfig, eps_values, system: PatchSystem | None = None) -> list[tuple]:
    """Rows ``(eps, max e(eps), bound, phase-save rate)``."""
    P = system if system is not None else build_system(cfg)
    rows = []
    for eps in eps_values:
        sub = ExperimentConfig(**{**asdict(cfg), "eps": float(eps)})
        _, summary = run_campaign(sub, P)
        rows.append((float(eps), summary["max_e"], summary["bound"], summary["phase_save_rate"]))
    return rows


def emit_plot_data(rows, path, header) -> None:
    """Write plot data rows as CSV with a header line."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
