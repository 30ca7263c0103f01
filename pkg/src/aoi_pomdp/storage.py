"""
Text serialization of solved policies and value tables.

Layout (version 1)::

    # <comment lines>
    format = aoi-pomdp-policy        (or aoi-pomdp-values)
    version = 1
    n_c = 2
    n_r = 3
    N = 20
    resolution = 100
    model_hash = 3f2a...
    data
    <one line per (k, grid point), one column per aoi>

Rows run over ``k`` first and grid point second, in the grid's lexicographic
order; values are written with ``repr`` so they round-trip exactly.
"""

import hashlib

import numpy as np

from . import __version__
from .channel import ChannelModel
from .model import CostModel
from .solver import BeliefGrid, Policy, ValueTable, build_belief_grid

FORMAT_VERSION = 1
POLICY_FORMAT = "aoi-pomdp-policy"
VALUES_FORMAT = "aoi-pomdp-values"


class FormatError(ValueError):
    """A policy or value file is malformed or has an unsupported version."""


def model_hash(channel: ChannelModel, cost: CostModel) -> str:
    """Stable digest of everything the solver output depends on besides N and the grid."""
    parts = [
        ("Tc", channel.Tc),
        ("q", channel.q),
        ("lambda", np.array([channel.lam])),
        ("n_r", np.array([channel.n_r], dtype=float)),
        ("trace", cost.trace_table),
        ("energy", cost.energy),
        ("terminal", cost.terminal_trace_table),
    ]
    h = hashlib.sha256()
    for name, arr in parts:
        h.update(name.encode())
        h.update(repr(arr.shape).encode())
        h.update(",".join(float(v).hex() for v in np.ravel(arr)).encode())
        h.update(b";")
    return h.hexdigest()[:16]


def _write(path, kind, array, grid: BeliefGrid, n_r, horizon, mhash, meta, fmt):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {kind} file written by aoi_pomdp\n")
        fh.write(f"# tool_version = {__version__}\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        header = {
            "format": kind,
            "version": FORMAT_VERSION,
            "n_c": grid.n_c,
            "n_r": n_r,
            "N": horizon,
            "resolution": grid.resolution,
            "model_hash": mhash,
        }
        for key, value in header.items():
            fh.write(f"{key} = {value}\n")
        fh.write("data\n")
        for block in array:
            for row in block:
                fh.write(" ".join(fmt(v) for v in row) + "\n")


def save_policy(path, policy: Policy, mhash: str, meta=None):
    _write(path, POLICY_FORMAT, policy.actions, policy.grid, policy.n_r, policy.horizon, mhash, meta, lambda v: str(int(v)))


def save_values(path, table: ValueTable, mhash: str, meta=None):
    n_r = table.values.shape[2] - 1
    _write(path, VALUES_FORMAT, table.values, table.grid, n_r, table.horizon, mhash, meta, lambda v: repr(float(v)))


def read_header(path) -> dict:
    """Header fields of a policy/value file (without reading the data block)."""
    header, _ = _read(path, data=False)
    return header


def _read(path, data=True):
    header = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        in_data = False
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if in_data:
                rows.append(line.split())
                continue
            if line == "data":
                in_data = True
                if not data:
                    break
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            header[key.strip()] = value.strip()
    missing = {"format", "version", "n_c", "n_r", "N", "resolution", "model_hash"} - header.keys()
    if missing:
        raise FormatError(f"{path}: missing header fields {sorted(missing)}")
    if int(header["version"]) != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {header['version']}")
    for key in ("n_c", "n_r", "N", "resolution"):
        header[key] = int(header[key])
    return header, rows


def _load(path, kind, layers_extra, dtype):
    header, rows = _read(path)
    if header["format"] != kind:
        raise FormatError(f"{path}: expected a {kind} file, found {header['format']}")
    grid = build_belief_grid(header["n_c"], header["resolution"])
    shape = (header["N"] + layers_extra, len(grid), header["n_r"] + 1)
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric data: {exc}") from exc
    if arr.size != np.prod(shape) or arr.ndim != 2 or arr.shape[1] != shape[2]:
        raise FormatError(f"{path}: data block does not match header shape {shape}")
    arr = arr.reshape(shape).astype(dtype)
    arr.setflags(write=False)
    return header, grid, arr


def load_policy(path):
    """Returns ``(Policy, header)``."""
    header, grid, arr = _load(path, POLICY_FORMAT, 0, np.int8)
    if not np.all((arr == 0) | (arr == 1)):
        raise FormatError(f"{path}: actions must be 0 or 1")
    return Policy(arr, grid), header


def load_values(path):
    """Returns ``(ValueTable, header)``."""
    header, grid, arr = _load(path, VALUES_FORMAT, 1, float)
    return ValueTable(arr, grid), header
