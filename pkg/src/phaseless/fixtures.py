"""Worked examples used by tests, the CLI and benchmarks."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .generators import _cubic_phi1, bspline, fixture, tensor
from .regions import unit_cube
from .sampling import Patch, PatchSystem, build_patch_system
from .signals import Signal


def hat_example(n: int = 8):
    """Hat-combination signals ``f1 + 2 f2`` and ``f1 - 2 f2``.

    ``f1 = sum phi0(. - k)`` and ``f2 = sum (-1)^k phi0(. - k)`` are truncated to
    ``-2 <= k <= n``; on the window ``[0, n - 1]`` they agree with the infinite
    sums. Returns ``(plus, minus, window)``.
    """
    phi0 = fixture("phi0")
    ks = range(-2, n + 1)
    plus = Signal(phi0, {k: 1.0 + 2.0 * (-1) ** k for k in ks})
    minus = Signal(phi0, {k: 1.0 - 2.0 * (-1) ** k for k in ks})
    return plus, minus, (0.0, float(n - 1))


def hat_parts(n: int = 8):
    """``f1`` and ``f2`` of :func:`hat_example` separately."""
    phi0 = fixture("phi0")
    ks = range(-2, n + 1)
    return Signal(phi0, {k: 1.0 for k in ks}), Signal(phi0, {k: float((-1) ** k) for k in ks})


def resonance_pair(alpha: float):
    """``B2 + alpha B2(. - 1) + B2(. - 2)`` and the same with the last sign flipped."""
    B2 = bspline(2)
    return Signal(B2, {0: 1.0, 1: alpha, 2: 1.0}), Signal(B2, {0: 1.0, 1: alpha, 2: -1.0})


def phi1_frame() -> np.ndarray:
    """Columns ``(phi1(x), phi1(x + 1), phi1(x + 2))`` at ``x = m / 5``, ``m = 0..4``; shape 3 x 5.

    Evaluated in rational arithmetic, so every entry is the correctly rounded value.
    """
    x = np.array([Fraction(m, 5) for m in range(5)], dtype=object)
    rows = [_cubic_phi1(x + s) for s in range(3)]
    return np.array([[float(v) for v in r] for r in rows])


PHI1_FRAME_SCALED = np.array(
    [[0, 1, 8, 27, 64], [125, 173, 209, 221, 197], [125, 76, 33, 2, -11]], dtype=float
)


def gamma0() -> np.ndarray:
    """The 25 points ``(i, j) / 6``, ``1 <= i, j <= 5``."""
    i = np.arange(1, 6) / 6.0
    return np.stack(np.meshgrid(i, i, indexing="ij"), axis=-1).reshape(-1, 2)


def gamma0_system(compute_norm: bool = True) -> PatchSystem:
    """Spanning system for ``B_(3,3)`` on ``(0, 1)^2`` with offsets :func:`gamma0`."""
    return build_patch_system(tensor(3, 3), [unit_cube(2)], "spanning", candidates=gamma0(), compute_norm=compute_norm)


def synthetic_system(matrix) -> PatchSystem:
    """A one-patch system around an arbitrary local matrix (for testing the constants)."""
    mat = np.asarray(matrix, dtype=float)
    gamma = np.linspace(0.1, 0.9, mat.shape[0])[:, None]
    patch = Patch(unit_cube(1), gamma, tuple((j,) for j in range(mat.shape[1])), mat)
    return PatchSystem(bspline(1), "spanning", (patch,))
