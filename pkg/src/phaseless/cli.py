"""Command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure, 3 phase conflict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io
from .errors import PhaseConflict, PhaselessError
from .fixtures import hat_example
from .generators import XI_ZP, Generator, bspline, box, fixture, tensor
from .harness import (
    ExperimentConfig,
    box_shifts,
    build_system,
    default_box,
    difference_surface,
    emit_plot_data,
    run_campaign,
    sample_with_noise,
    trial_inputs,
    trial_seeds,
)
from .mapset import ReconstructionConfig, mapset_reconstruct
from .regions import NAMED_REGIONS, Region, interval
from .sampling import (
    build_patch_system,
    default_regions,
    grid_candidates,
    local_complement_property,
    phi_inverse_norm_details,
)
from .signals import build_graph, components, is_nonseparable

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PHASE = 0, 1, 2, 3

BUILTIN_SIGNALS = {"hat-example": lambda: hat_example()[0]}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_generator(text: str) -> Generator:
    """A JSON file, a JSON object, or shorthand: ``bspline:3``, ``tensor:3,3``, ``zp``,
    ``box:1,1,0,1;0,0,1,1`` or ``fixture:phi0``."""
    if os.path.exists(text):
        return io.read_generator(text)
    text = text.strip()
    if text.startswith("{"):
        try:
            return Generator.from_spec(json.loads(text))
        except (json.JSONDecodeError, KeyError) as exc:
            raise UsageError(f"invalid generator spec: {exc}") from None
    kind, _, arg = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "bspline":
            return bspline(int(arg))
        if kind == "tensor":
            return tensor(*[int(v) for v in arg.split(",")])
        if kind == "zp":
            return box(XI_ZP)
        if kind == "box":
            return box([[int(v) for v in row.split(",")] for row in arg.split(";")])
        if kind == "fixture":
            return fixture(arg)
    except ValueError as exc:
        raise UsageError(f"invalid generator {text!r}: {exc}") from None
    raise UsageError(f"unknown generator {text!r}")


def parse_region(text: str) -> Region:
    """A named region (unit1, unit2, AU, AL), an interval ``a:b`` or a JSON object."""
    if text in NAMED_REGIONS:
        return NAMED_REGIONS[text]()
    if text.strip().startswith("{"):
        return Region.from_dict(json.loads(text))
    a, sep, b = text.partition(":")
    if sep:
        return interval(float(a), float(b))
    raise UsageError(f"unknown region {text!r}")


def parse_box(text: str):
    """``lo:hi,lo:hi`` to ``((lo, ...), (hi, ...))``."""
    try:
        parts = [p.split(":") for p in text.split(",")]
        return tuple(int(p[0]) for p in parts), tuple(int(p[1]) for p in parts)
    except (IndexError, ValueError):
        raise UsageError(f"invalid box {text!r}; expected lo:hi,lo:hi") from None


def _emit(data, out):
    text = json.dumps(data, indent=1, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_gen_set(args):
    g = parse_generator(args.generator)
    candidates = None
    if args.grid:
        candidates = [grid_candidates(A, args.grid) for A in default_regions(g)]
    P = build_patch_system(g, None, args.mode, candidates=candidates, seed=args.seed, draws=args.draws)
    if args.out:
        io.write_patch_system(P, args.out)
        print(f"patches={len(P.patches)} density={P.density} phi_inv_norm={P.phi_inv_norm!r}")
    else:
        print(json.dumps(io.patch_system_to_dict(P), indent=1))
    return EXIT_OK


def _load_signal(args):
    if args.signal in BUILTIN_SIGNALS:
        return BUILTIN_SIGNALS[args.signal]()
    if not args.generator:
        raise UsageError("--generator is required to read a signal file")
    return io.read_signal(args.signal, parse_generator(args.generator))


def cmd_check(args):
    f = _load_signal(args)
    verdict = is_nonseparable(f)
    comps = components(build_graph(f))
    if args.format == "json":
        print(json.dumps({"verdict": str(verdict), "components": [[list(k) for k in c] for c in comps]}))
    else:
        print(verdict)
        print(f"components: {len(comps)}")
        for c in comps:
            print(" ".join(",".join(map(str, k)) for k in c))
    return EXIT_OK


def cmd_sample(args):
    P = io.read_patch_system(args.set)
    if not args.generator:
        args.generator = json.dumps(P.generator.to_spec())
    f = _load_signal(args)
    if f.generator.to_spec() != P.generator.to_spec():
        raise UsageError(f"signal generator {f.generator.id} does not match the design's {P.generator.id}")
    if args.K:
        K = parse_box(args.K)
    else:
        ks = np.array([k for k, v in f.coeffs.items() if v != 0.0])
        K = (tuple(ks.min(axis=0)), tuple(ks.max(axis=0)))
    S = sample_with_noise(f, P, box_shifts(*K), args.noise, np.random.SeedSequence(args.seed))
    out = args.out or "/dev/stdout"
    io.write_samples(S, P, out)
    return EXIT_OK


def cmd_reconstruct(args):
    P = io.read_patch_system(args.set)
    S = io.read_samples(args.samples, P, args.noise)
    cfg = ReconstructionConfig(m0=args.m0, force_exact=args.exact_local_solver, seed=args.seed)
    report = mapset_reconstruct(S, P, cfg, F0=args.F0 if args.noise is not None else None)
    if args.format == "csv":
        io.write_signal(report.signal, args.out or "/dev/stdout")
    elif args.out:
        io.write_report(report, args.out)
    else:
        print(json.dumps(report.to_dict(), indent=1))
    return EXIT_OK


def cmd_phi_inv_norm(args):
    P = io.read_patch_system(args.set)
    details = phi_inverse_norm_details(P)
    value = max(v for v, _ in details)
    if args.format == "json":
        print(json.dumps({"phi_inv_norm": value, "per_patch": [v for v, _ in details]}))
    else:
        print(repr(value))
    return EXIT_OK


def cmd_bench(args):
    if args.config:
        cfg = ExperimentConfig.from_dict(io.read_json(args.config))
    else:
        if not args.generator and not args.set:
            raise UsageError("bench needs --generator, --set or --config")
        spec = parse_generator(args.generator).to_spec() if args.generator else {}
        cfg = ExperimentConfig(
            generator=spec,
            mode=args.mode,
            system=args.set,
            K=parse_box(args.K) if args.K else None,
            eps=args.noise,
            trials=args.trials,
            m0=args.m0,
            seed=args.seed,
            exact_local_solver=args.exact_local_solver,
            system_seed=args.set_seed,
            frame_draws=args.draws,
        )
    P = build_system(cfg)
    results, summary = run_campaign(cfg, P)
    if args.format == "csv":
        rows = [(r.index, r.e, r.bound, int(r.phase_saved), r.error or "") for r in results]
        emit_plot_data(rows, args.out or "/dev/stdout", ["trial", "e", "bound", "phase_saved", "error"])
    else:
        _emit({"config": cfg.to_dict(), "summary": summary}, args.out)
    if args.surface and cfg.trials:
        # first trial again, deterministically, to get its coefficient surface
        K = cfg.K or default_box(P.generator)
        f, S, rcfg = trial_inputs(trial_seeds(cfg)[0], P, K, cfg)
        try:
            fe = mapset_reconstruct(S, P, rcfg).signal
        except PhaseConflict:
            fe = None
        if fe is not None:
            header = [f"k{i + 1}" for i in range(P.generator.dim)] + ["diff"]
            emit_plot_data(difference_surface(f, fe), args.surface, header)
    return EXIT_PHASE if summary["conflicts"] else EXIT_OK


def cmd_lcp_check(args):
    g = parse_generator(args.generator)
    result = local_complement_property(g, parse_region(args.region))
    print("true" if result else "false")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phaseless", description="Phaseless sampling and reconstruction in shift-invariant spaces.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("gen-set", help="build and save a sampling design")
    s.add_argument("--generator", required=True)
    s.add_argument("--mode", choices=["spanning", "frame"], default="spanning")
    s.add_argument("--grid", type=int, help="candidate grid Z^d/N for spanning mode")
    s.add_argument("--draws", type=int, default=1, help="frame mode: keep the best of this many passing draws")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen_set)

    s = sub.add_parser("check", help="nonseparability verdict and graph components")
    s.add_argument("--signal", required=True, help="signal CSV or a builtin name (hat-example)")
    s.add_argument("--generator")
    s.add_argument("--format", choices=["text", "json"], default="text")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("sample", help="noisy magnitude samples of a signal")
    s.add_argument("--set", required=True)
    s.add_argument("--signal", required=True)
    s.add_argument("--generator")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--K", help="shift box lo:hi,lo:hi (default: coefficient box)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("reconstruct", help="run MAPSET on a samples file")
    s.add_argument("--set", required=True)
    s.add_argument("--samples", required=True)
    s.add_argument("--m0", type=float, default=0.0)
    s.add_argument("--noise", type=float, help="noise level, enables the stability bound")
    s.add_argument("--F0", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exact-local-solver", action="store_true")
    s.add_argument("--format", choices=["csv", "json"], default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("phi-inv-norm", help="stability constant of a sampling design")
    s.add_argument("--set", required=True)
    s.add_argument("--format", choices=["text", "json"], default="text")
    s.set_defaults(func=cmd_phi_inv_norm)

    s = sub.add_parser("bench", help="seeded reconstruction campaign")
    s.add_argument("--generator")
    s.add_argument("--set")
    s.add_argument("--config")
    s.add_argument("--mode", choices=["spanning", "frame"], default="spanning")
    s.add_argument("--set-seed", type=int, default=0)
    s.add_argument("--draws", type=int, default=1)
    s.add_argument("--K")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--m0", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exact-local-solver", action="store_true")
    s.add_argument("--format", choices=["csv", "json"], default="json")
    s.add_argument("--out")
    s.add_argument("--surface", help="write the first trial's coefficient difference surface here")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("lcp-check", help="local complement property on a region")
    s.add_argument("--generator", required=True)
    s.add_argument("--region", required=True)
    s.set_defaults(func=cmd_lcp_check)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PhaseConflict as exc:
        print(f"phase conflict: {exc}", file=sys.stderr)
        return EXIT_PHASE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhaselessError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
