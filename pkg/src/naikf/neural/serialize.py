"""Versioned self-describing text container for network weights.

Layout::

    NAIKF-WEIGHTS v1
    meta <one-line JSON>
    tensor <name> <dtype> <dim0> [<dim1> ...]
    <row-major values, 8 per line, repr() formatting>
    ...
    end

repr() of Python floats guarantees a bit-exact decimal round trip for both
float32 and float64 tensors (float32 values survive the widening to double
and round back to the identical single).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import NetworkWeights

MAGIC = "NAIKF-WEIGHTS"
VERSION = "v1"
_PER_LINE = 8


class FormatError(ValueError):
    """The weight file does not match the documented layout."""


class VersionError(FormatError):
    """The weight file is from an incompatible format version."""


def weights_save(w: NetworkWeights, path) -> Path:
    path = Path(path)
    lines = [f"{MAGIC} {VERSION}", "meta " + json.dumps(w.meta, sort_keys=True)]
    for name in sorted(w.tensors):
        arr = w.tensors[name]
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {arr.dtype.name} {dims}")
        flat = arr.reshape(-1)
        for start in range(0, len(flat), _PER_LINE):
            chunk = flat[start:start + _PER_LINE]
            lines.append(" ".join(repr(float(v)) for v in chunk))
    lines.append("end")
    path.write_text("\n".join(lines) + "\n")
    return path


def weights_load(path) -> NetworkWeights:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty weight file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise FormatError(f"bad header {lines[0]!r}")
    if head[1] != VERSION:
        raise VersionError(f"unsupported version {head[1]!r} (need {VERSION})")
    if len(lines) < 2 or not lines[1].startswith("meta "):
        raise FormatError("missing meta line")
    try:
        meta = json.loads(lines[1][5:])
    except json.JSONDecodeError as exc:
        raise FormatError(f"unparseable meta line: {exc}") from exc

    tensors = {}
    i = 2
    while i < len(lines):
        line = lines[i]
        if line == "end":
            break
        parts = line.split()
        if len(parts) < 4 or parts[0] != "tensor":
            raise FormatError(f"expected tensor header at line {i + 1}: {line!r}")
        name, dtype_name = parts[1], parts[2]
        try:
            dtype = np.dtype(dtype_name)
            shape = tuple(int(d) for d in parts[3:])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad tensor header {line!r}") from exc
        count = int(np.prod(shape))
        values = []
        i += 1
        while len(values) < count:
            if i >= len(lines) or lines[i].startswith(("tensor", "end")):
                raise FormatError(f"tensor {name}: expected {count} values, "
                                  f"got {len(values)}")
            try:
                values.extend(float(v) for v in lines[i].split())
            except ValueError as exc:
                raise FormatError(f"tensor {name}: bad value line") from exc
            i += 1
        if len(values) != count:
            raise FormatError(f"tensor {name}: expected {count} values, "
                              f"got {len(values)}")
        tensors[name] = np.array(values, dtype=dtype).reshape(shape)
    else:
        raise FormatError("missing end marker")
    return NetworkWeights(tensors=tensors, meta=meta)
