"""File formats: generator specs, signal CSV, patch-system JSON, samples CSV, reports.

Floats are written with ``repr`` (shortest string that round-trips), so every
file reads back bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import FileFormatError, PhaselessError
from .generators import Generator
from .mapset import NoisySamples
from .regions import Region
from .sampling import PatchSystem, make_patch
from .signals import Signal


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(path, f"cannot read file: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(path, exc.msg, exc.lineno) from None


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=1, allow_nan=False) + "\n")


def read_generator(path) -> Generator:
    data = _load_json(path)
    try:
        return Generator.from_spec(data)
    except (KeyError, TypeError, ValueError, PhaselessError) as exc:
        raise FileFormatError(path, f"invalid generator spec: {exc}") from None


def write_generator(g: Generator, path) -> None:
    _write_json(path, g.to_spec())


def _rows(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FileFormatError(path, f"cannot read file: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FileFormatError(path, "empty file", 1)
        header = [h.strip() for h in header]
        rows = [(reader.line_num, row) for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def _parse(path, line, text, kind):
    try:
        value = kind(text)
    except ValueError:
        raise FileFormatError(path, f"cannot parse {text.strip()!r} as {kind.__name__}", line) from None
    if kind is float and not math.isfinite(value):
        raise FileFormatError(path, f"non-finite value {text.strip()!r}", line)
    return value


def read_signal(path, generator: Generator) -> Signal:
    """CSV with header ``k1,...,kd,c``; one row per nonzero coefficient."""
    header, rows = _rows(path)
    d = generator.dim
    expected = [f"k{i + 1}" for i in range(d)] + ["c"]
    if header != expected:
        raise FileFormatError(path, f"expected header {','.join(expected)}, got {','.join(header)}", 1)
    coeffs = {}
    for line, row in rows:
        if len(row) != d + 1:
            raise FileFormatError(path, f"expected {d + 1} fields, got {len(row)}", line)
        k = tuple(_parse(path, line, v, int) for v in row[:d])
        if k in coeffs:
            raise FileFormatError(path, f"duplicate shift {k}", line)
        coeffs[k] = _parse(path, line, row[d], float)
    return Signal(generator, coeffs)


def write_signal(f: Signal, path, include_zeros: bool = False) -> None:
    d = f.generator.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"k{i + 1}" for i in range(d)] + ["c"])
        for k, v in f.coeffs.items():
            if v != 0.0 or include_zeros:
                w.writerow(list(k) + [repr(float(v))])


def patch_system_to_dict(P: PatchSystem) -> dict:
    return {
        "generator": P.generator.to_spec(),
        "mode": P.mode,
        "patches": [
            {
                "region": p.region.to_dict(),
                "gamma": np.asarray(p.gamma).tolist(),
                "omega": [list(k) for k in p.omega],
            }
            for p in P.patches
        ],
        "phi_inv_norm": P.phi_inv_norm,
        "density": P.density,
    }


def patch_system_from_dict(data: dict, path="<memory>") -> PatchSystem:
    try:
        g = Generator.from_spec(data["generator"])
        mode = data["mode"]
        if mode not in ("spanning", "frame"):
            raise ValueError(f"unknown mode {mode!r}")
        patches = []
        for p in data["patches"]:
            region = Region.from_dict(p["region"])
            gamma = np.asarray(p["gamma"], dtype=float).reshape(-1, g.dim)
            omega = [tuple(int(v) for v in k) for k in p["omega"]]
            patches.append(make_patch(g, region, gamma, omega))
        norm = data.get("phi_inv_norm")
        norm = None if norm is None else float(norm)
    except (KeyError, TypeError, ValueError, PhaselessError) as exc:
        raise FileFormatError(path, f"invalid patch system: {exc}") from None
    return PatchSystem(g, mode, tuple(patches), norm)


def write_patch_system(P: PatchSystem, path) -> None:
    _write_json(path, patch_system_to_dict(P))


def read_patch_system(path) -> PatchSystem:
    return patch_system_from_dict(_load_json(path), path)


def write_samples(S: NoisySamples, P: PatchSystem, path) -> None:
    """CSV ``m,l1..ld,g1..gd,z``: one row per patch, shift and offset."""
    d = P.generator.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m"] + [f"l{i + 1}" for i in range(d)] + [f"g{i + 1}" for i in range(d)] + ["z"])
        for m, patch in enumerate(P.patches):
            gam = np.asarray(patch.gamma)
            for i, l in enumerate(S.shifts):
                for j in range(patch.rows):
                    w.writerow([m] + list(l) + [repr(float(v)) for v in gam[j]] + [repr(float(S.values[m][i, j]))])


def read_samples(path, P: PatchSystem, eps: float | None = None) -> NoisySamples:
    """Read samples and check they cover every ``(gamma, l)`` of the system."""
    d = P.generator.dim
    header, rows = _rows(path)
    expected = ["m"] + [f"l{i + 1}" for i in range(d)] + [f"g{i + 1}" for i in range(d)] + ["z"]
    if header != expected:
        raise FileFormatError(path, f"expected header {','.join(expected)}, got {','.join(header)}", 1)
    lookup = [{tuple(g): j for j, g in enumerate(np.asarray(p.gamma).tolist())} for p in P.patches]
    data = {}
    shifts = []
    seen_shift = set()
    for line, row in rows:
        if len(row) != 2 * d + 2:
            raise FileFormatError(path, f"expected {2 * d + 2} fields, got {len(row)}", line)
        m = _parse(path, line, row[0], int)
        if not 0 <= m < len(P.patches):
            raise FileFormatError(path, f"patch index {m} out of range", line)
        l = tuple(_parse(path, line, v, int) for v in row[1 : d + 1])
        g = tuple(_parse(path, line, v, float) for v in row[d + 1 : 2 * d + 1])
        if g not in lookup[m]:
            raise FileFormatError(path, f"offset {g} is not in patch {m}", line)
        z = _parse(path, line, row[-1], float)
        if l not in seen_shift:
            seen_shift.add(l)
            shifts.append(l)
        key = (m, l, lookup[m][g])
        if key in data:
            raise FileFormatError(path, f"duplicate sample for patch {m}, shift {l}, offset {g}", line)
        data[key] = z
    shifts.sort()
    values = []
    for m, p in enumerate(P.patches):
        arr = np.empty((len(shifts), p.rows))
        for i, l in enumerate(shifts):
            for j in range(p.rows):
                if (m, l, j) not in data:
                    raise FileFormatError(path, f"missing sample for patch {m}, shift {l}, offset {j}")
                arr[i, j] = data[(m, l, j)]
        values.append(arr)
    return NoisySamples(tuple(shifts), values, eps)


def write_report(report, path) -> None:
    _write_json(path, report.to_dict())


def write_json(data, path) -> None:
    _write_json(path, data)


def read_json(path):
    return _load_json(path)


__all__ = [
    "read_generator",
    "read_json",
    "read_patch_system",
    "read_samples",
    "read_signal",
    "write_generator",
    "write_json",
    "write_patch_system",
    "write_report",
    "write_samples",
    "write_signal",
]
