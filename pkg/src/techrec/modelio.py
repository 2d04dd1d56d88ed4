"""Text serialization for trained models.

A model file is a header line of `key=value` pairs followed by named
sections. Two section kinds exist:

    tensor <name> <d0> [<d1>]     float64 data, one row per line,
                                  values space separated
    ids <name> <count>            one raw string id per line

Floats are written with ``repr`` (shortest round-trip form), so a
save/load cycle reproduces every parameter bit-exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError


def fmt(x: float) -> str:
    return repr(float(x))


def write_header(f, fields: dict) -> None:
    f.write(" ".join(f"{k}={v}" for k, v in fields.items()) + "\n")


def write_tensor(f, name: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        f.write(f"tensor {name} {arr.shape[0]}\n")
        f.write(" ".join(fmt(v) for v in arr) + "\n")
    elif arr.ndim == 2:
        f.write(f"tensor {name} {arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            f.write(" ".join(fmt(v) for v in row) + "\n")
    else:
        raise ValueError(f"tensor {name} has unsupported rank {arr.ndim}")


def write_ids(f, name: str, ids: list[str]) -> None:
    f.write(f"ids {name} {len(ids)}\n")
    for i in ids:
        f.write(i + "\n")


def _parse_row(line: str, ncols: int, name: str) -> list[float]:
    parts = line.split()
    if len(parts) != ncols:
        raise DataError(f"section '{name}': expected {ncols} values per row, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as e:
        raise DataError(f"section '{name}': bad float ({e})") from None
    for v in vals:
        if not math.isfinite(v):
            raise DataError(f"section '{name}': non-finite value {v}")
    return vals


def read_model_file(path: str) -> tuple[dict, dict[str, np.ndarray], dict[str, list[str]]]:
    """Parse a model file into (header, tensors, id lists).

    Raises DataError on truncation, malformed sections, or bad values.
    """
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().split("\n")
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from None
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"model file {path} is empty")

    header: dict[str, str] = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise DataError(f"model file {path}: malformed header token '{tok}'")
        k, v = tok.split("=", 1)
        header[k] = v

    tensors: dict[str, np.ndarray] = {}
    idlists: dict[str, list[str]] = {}
    pos = 1
    while pos < len(lines):
        decl = lines[pos].split()
        pos += 1
        if not decl:
            continue
        if decl[0] == "tensor":
            if len(decl) not in (3, 4):
                raise DataError(f"model file {path}: bad tensor declaration '{' '.join(decl)}'")
            name = decl[1]
            try:
                dims = [int(d) for d in decl[2:]]
            except ValueError:
                raise DataError(f"model file {path}: bad tensor shape in '{' '.join(decl)}'") from None
            if any(d < 0 for d in dims):
                raise DataError(f"model file {path}: negative dimension for tensor '{name}'")
            nrows = dims[0] if len(dims) == 2 else 1
            ncols = dims[1] if len(dims) == 2 else dims[0]
            if pos + nrows > len(lines):
                raise DataError(f"model file {path}: truncated in tensor '{name}'")
            data = [_parse_row(lines[pos + r], ncols, name) for r in range(nrows)]
            pos += nrows
            arr = np.array(data, dtype=np.float64)
            tensors[name] = arr[0] if len(dims) == 1 else arr.reshape(dims[0], dims[1])
        elif decl[0] == "ids":
            if len(decl) != 3:
                raise DataError(f"model file {path}: bad ids declaration '{' '.join(decl)}'")
            name = decl[1]
            try:
                count = int(decl[2])
            except ValueError:
                raise DataError(f"model file {path}: bad ids count in '{' '.join(decl)}'") from None
            if pos + count > len(lines):
                raise DataError(f"model file {path}: truncated in ids '{name}'")
            idlists[name] = lines[pos:pos + count]
            pos += count
        else:
            raise DataError(f"model file {path}: unknown section keyword '{decl[0]}'")
    return header, tensors, idlists


def require(header: dict, key: str, path: str) -> str:
    if key not in header:
        raise DataError(f"model file {path}: missing header field '{key}'")
    return header[key]


def require_version(header: dict, expected: str, path: str) -> None:
    got = require(header, "version", path)
    if got != expected:
        raise DataError(f"model file {path}: version {got} not supported (expected {expected})")


def require_tensor(tensors: dict[str, np.ndarray], name: str, shape: tuple, path: str) -> np.ndarray:
    if name not in tensors:
        raise DataError(f"model file {path}: missing tensor '{name}'")
    arr = tensors[name]
    if arr.shape != shape:
        raise DataError(f"model file {path}: tensor '{name}' has shape {arr.shape}, expected {shape}")
    return arr
