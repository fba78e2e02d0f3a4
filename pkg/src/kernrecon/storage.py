"""Bit-stable file formats: matrices, trained models, traces, manifests.

Matrix files are plain text: a "rows cols" header line, then one row of
space-separated decimal literals per line, printed with 17 significant
digits so write -> read -> write is byte-identical.

Model files carry a version tag, the kernel spec on one line, and the
support/coefficient blocks as embedded matrix payloads.  The attack
subcommand never touches those blocks directly: it goes through
`load_oracle`, which returns only the query facade.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kernels import (
    BandwidthGaussianKernel,
    LaplaceKernel,
    NtkKernel,
    PolynomialKernel,
    RbfKernel,
)
from .models import ModelOracle, TrainedKernelModel

__all__ = [
    "write_matrix",
    "read_matrix",
    "write_model",
    "read_model",
    "load_oracle",
    "spec_to_string",
    "spec_from_string",
    "write_trace",
    "append_jsonl",
]

MODEL_FORMAT_TAG = "kernelmodel v1"


def _format_value(v: float) -> str:
    return format(float(v), ".17g")


def _matrix_lines(M) -> list[str]:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(_format_value(v) for v in row))
    return lines


def write_matrix(path, M) -> None:
    """Write a matrix file with full round-trip precision."""
    Path(path).write_text("\n".join(_matrix_lines(M)) + "\n")


def _parse_matrix(lines, start=0):
    header = lines[start].split()
    if len(header) != 2:
        raise ValueError(f"bad matrix header: {lines[start]!r}")
    rows, cols = int(header[0]), int(header[1])
    body = lines[start + 1:start + 1 + rows]
    if len(body) != rows:
        raise ValueError(f"matrix body truncated: wanted {rows} rows")
    M = np.empty((rows, cols))
    for i, line in enumerate(body):
        values = line.split()
        if len(values) != cols:
            raise ValueError(f"row {i} has {len(values)} values, expected {cols}")
        M[i] = [float(v) for v in values]
    return M, start + 1 + rows


def read_matrix(path) -> np.ndarray:
    """Read a matrix file; values round-trip bit-exactly."""
    lines = Path(path).read_text().splitlines()
    M, _ = _parse_matrix(lines)
    return M


def spec_to_string(spec) -> str:
    if isinstance(spec, LaplaceKernel):
        return f"laplace gamma={_format_value(spec.gamma)}"
    if isinstance(spec, RbfKernel):
        return f"rbf gamma={_format_value(spec.gamma)}"
    if isinstance(spec, PolynomialKernel):
        return (f"polynomial c0={_format_value(spec.c0)} "
                f"gamma={_format_value(spec.gamma)} degree={spec.degree}")
    if isinstance(spec, NtkKernel):
        return f"ntk depth={spec.depth}"
    if isinstance(spec, BandwidthGaussianKernel):
        h = ",".join(_format_value(v) for v in spec.h_diag)
        return f"bandwidth_gaussian h={h}"
    raise TypeError(f"unsupported kernel spec: {type(spec).__name__}")


def spec_from_string(text: str):
    tokens = text.split()
    if not tokens:
        raise ValueError("empty kernel spec")
    kind, fields = tokens[0], {}
    for token in tokens[1:]:
        key, _, value = token.partition("=")
        if not value:
            raise ValueError(f"bad kernel field: {token!r}")
        fields[key] = value
    try:
        if kind == "laplace":
            return LaplaceKernel(gamma=float(fields["gamma"]))
        if kind == "rbf":
            return RbfKernel(gamma=float(fields["gamma"]))
        if kind == "polynomial":
            return PolynomialKernel(c0=float(fields["c0"]),
                                    gamma=float(fields["gamma"]),
                                    degree=int(fields["degree"]))
        if kind == "ntk":
            return NtkKernel(depth=int(fields["depth"]))
        if kind == "bandwidth_gaussian":
            h = tuple(float(v) for v in fields["h"].split(","))
            return BandwidthGaussianKernel(h_diag=h)
    except KeyError as exc:
        raise ValueError(f"kernel {kind!r} is missing field {exc}") from exc
    raise ValueError(f"unknown kernel kind: {kind!r}")


def write_model(path, model: TrainedKernelModel) -> None:
    """Persist a trained model: version tag, kernel line, support, coefficients."""
    lines = [MODEL_FORMAT_TAG, "kernel " + spec_to_string(model.spec), "support"]
    lines += _matrix_lines(model.support)
    lines.append("coeffs")
    lines += _matrix_lines(model.coeffs)
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path) -> TrainedKernelModel:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MODEL_FORMAT_TAG:
        raise ValueError(
            f"unsupported model file version (expected {MODEL_FORMAT_TAG!r})")
    if not lines[1].startswith("kernel "):
        raise ValueError("missing kernel line")
    spec = spec_from_string(lines[1][len("kernel "):])
    if lines[2] != "support":
        raise ValueError("missing support block")
    support, pos = _parse_matrix(lines, 3)
    if lines[pos] != "coeffs":
        raise ValueError("missing coefficient block")
    coeffs, _ = _parse_matrix(lines, pos + 1)
    return TrainedKernelModel(spec, support, coeffs)


def load_oracle(path) -> ModelOracle:
    """Serving path for the attack: read a model file, hand back only the
    query facade."""
    return read_model(path).oracle()


def write_trace(path, trace) -> None:
    """Write (step, loss) records, one per line."""
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    with open(path, "w") as fh:
        for step, loss in trace:
            fh.write(f"{int(step)} {_format_value(loss)}\n")


def append_jsonl(path, record: dict) -> None:
    """Append one JSON record as a single line."""
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
