"""Compare the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is checked to give identical results on both backends before it is timed.
"""

import argparse
import time

import numpy as np

from phaseless.fixtures import gamma0
from phaseless.generators import phi_matrix, tensor
from phaseless.kernels import compiled, fallback


def _projector(Phi):
    Q, _ = np.linalg.qr(Phi)
    return np.eye(len(Phi)) - Q @ Q.T


def _cases(rng):
    g = tensor(3, 3)
    omega = [(i, j) for i in range(-2, 1) for j in range(-2, 1)]
    Phi25 = phi_matrix(g, gamma0(), omega)
    c = rng.uniform(0.1, 1.0, 9) * rng.choice([-1.0, 1.0], 9)
    z25 = np.abs(Phi25 @ c) + rng.uniform(-1e-4, 1e-4, 25)

    Phi14 = rng.standard_normal((14, 5))
    z14 = np.abs(Phi14 @ rng.standard_normal(5))
    frame = rng.standard_normal((12, 3))
    return [
        ("sign_scan 14x5", "sign_scan", (_projector(Phi14), z14)),
        ("split_search Gamma0 25x9", "split_search", (Phi25, np.inf, 1 << 24)),
        ("split_search frame 12x3", "split_search", (frame, np.inf, 1 << 24)),
        ("sign_branch Gamma0 25x9", "sign_branch", (Phi25, np.inf, 1 << 24)),
    ], z25


def _time(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return a is b
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    cases, z25 = _cases(rng)
    # sign_branch works on rows sorted by decreasing magnitude, as the solver calls it
    order = np.argsort(-z25, kind="stable")
    cases[-1] = (cases[-1][0], "sign_branch", (cases[-1][2][0][order], z25[order], np.inf, 1 << 24))

    print(f"{'kernel':28s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speedup':>9s}  match")
    for label, name, case_args in cases:
        tc, rc = _time(getattr(compiled, name), case_args, args.repeat)
        tp, rp = _time(getattr(fallback, name), case_args, max(1, args.repeat // 3))
        print(f"{label:28s} {1e3 * tc:12.3f} {1e3 * tp:12.3f} {tp / tc:9.1f}  {_same(rc, rp)}")


if __name__ == "__main__":
    main()
