"""Deterministic file formats for fields and run reports.

Field files are self-describing: a short key/value header (format tag,
kind, grid size, domain bounds, payload length) followed by the payload,
either as decimal text with 17 significant digits (bit-exact round trips,
diffable) or as raw little-endian float64 for large sweeps. Reports are
JSON documents carrying the full misfit history and the effective run
configuration, enough to re-plot or re-run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import fem
from .errors import InvalidArgumentError, ParseError
from .fem import NodalField, QuadVectorField
from .optimizer import ReconReport

FORMAT_TAG = "magrecon-field-v1"
REPORT_TAG = "magrecon-report-v1"

_BOUND_KEYS = ("x_min", "x_max", "y_min", "y_max")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field(path, field: NodalField | QuadVectorField, *, binary: bool = False):
    """Write a nodal or quad-vector field; text payload unless binary=True."""
    path = Path(path)
    grid = field.grid
    lines = [FORMAT_TAG]
    if isinstance(field, NodalField):
        kind, payload = "nodal", field.values.reshape(-1, 1)
    elif isinstance(field, QuadVectorField):
        kind, payload = "quad-vector", field.vectors.reshape(-1, 2)
    else:
        raise InvalidArgumentError(f"cannot write object of type {type(field).__name__}")
    lines.append(f"kind {kind}")
    lines.append(f"dim {grid.dim}")
    for key in _BOUND_KEYS:
        lines.append(f"{key} {_fmt(getattr(grid, key))}")
    if kind == "quad-vector":
        lines.append(f"q_per_cell {field.q_per_cell}")
        lines.append("weights " + " ".join(_fmt(w) for w in field.quad_weights))
    lines.append(f"encoding {'binary' if binary else 'text'}")
    lines.append(f"count {payload.shape[0]}")
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())
        else:
            body = "\n".join(" ".join(_fmt(v) for v in row) for row in payload)
            fh.write((body + "\n").encode("ascii"))


def read_field(path) -> NodalField | QuadVectorField:
    """Read a field file written by write_field; raises ParseError on damage."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()

    header: dict[str, str] = {}
    offset = 0
    line_no = 0
    first = None
    while True:
        nl = raw.find(b"\n", offset)
        if nl < 0:
            raise ParseError("unexpected end of header", path, line_no + 1)
        line_no += 1
        try:
            line = raw[offset:nl].decode("ascii").strip()
        except UnicodeDecodeError:
            raise ParseError("header is not ASCII text", path, line_no) from None
        offset = nl + 1
        if first is None:
            first = line
            if first != FORMAT_TAG:
                raise ParseError(f"not a {FORMAT_TAG} file (got {first!r})", path, 1)
            continue
        key, _, value = line.partition(" ")
        if not value:
            raise ParseError(f"malformed header line {line!r}", path, line_no)
        header[key] = value
        if key == "count":
            break

    def need(key: str) -> str:
        if key not in header:
            raise ParseError(f"missing header key {key!r}", path, line_no)
        return header[key]

    kind = need("kind")
    if kind not in ("nodal", "quad-vector"):
        raise ParseError(f"unknown field kind {kind!r}", path, line_no)
    try:
        dim = int(need("dim"))
        count = int(need("count"))
        bounds = tuple(float(need(k)) for k in _BOUND_KEYS)
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", path, line_no) from None
    encoding = header.get("encoding", "text")
    if encoding not in ("text", "binary"):
        raise ParseError(f"unknown encoding {encoding!r}", path, line_no)

    grid = fem.build_grid(dim)
    if bounds != (grid.x_min, grid.x_max, grid.y_min, grid.y_max):
        raise ParseError(f"unsupported domain bounds {bounds}", path, line_no)

    if kind == "nodal":
        width, expected = 1, grid.n_nodes
    else:
        try:
            q = int(need("q_per_cell"))
            weights = np.array([float(w) for w in need("weights").split()])
        except ValueError as exc:
            raise ParseError(f"bad header value: {exc}", path, line_no) from None
        if weights.size != q:
            raise ParseError(f"expected {q} weights, got {weights.size}", path, line_no)
        width, expected = 2, grid.n_cells * q
    if count != expected:
        raise ParseError(f"count {count} does not match grid "
                         f"(expected {expected} for kind {kind}, dim {dim})",
                         path, line_no)

    if encoding == "binary":
        body = raw[offset:]
        if len(body) != count * width * 8:
            raise ParseError(f"binary payload has {len(body)} bytes, "
                             f"expected {count * width * 8}", path, line_no + 1)
        payload = np.frombuffer(body, dtype="<f8").reshape(count, width).astype(float)
    else:
        try:
            rows = raw[offset:].decode("ascii").splitlines()
        except UnicodeDecodeError:
            raise ParseError("text payload is not ASCII", path, line_no + 1) from None
        values = []
        for i, row in enumerate(rows):
            row = row.strip()
            if not row:
                continue
            parts = row.split()
            if len(parts) != width:
                raise ParseError(f"expected {width} value(s) per line, got {len(parts)}",
                                 path, line_no + 1 + i)
            try:
                values.append([float(p) for p in parts])
            except ValueError:
                raise ParseError(f"not a number: {row!r}", path, line_no + 1 + i) from None
            if not all(np.isfinite(values[-1])):
                raise ParseError(f"non-finite value {row!r}", path, line_no + 1 + i)
        payload = np.asarray(values, dtype=float).reshape(-1, width)
        if payload.shape[0] != count:
            raise ParseError(f"payload has {payload.shape[0]} rows, header promised "
                             f"{count}", path, line_no + 1 + len(rows))

    if not np.all(np.isfinite(payload)):
        raise ParseError("payload contains non-finite values", path, line_no + 1)
    if kind == "nodal":
        return NodalField(grid, payload[:, 0])
    vectors = payload.reshape(grid.n_cells, q, 2)
    return QuadVectorField(grid, vectors, weights)


def write_report(path, report: ReconReport, effective_config: dict | None = None):
    """Write a reconstruction report as JSON (history, stop reason, config)."""
    doc = {
        "format": REPORT_TAG,
        "iterations": int(report.iterations),
        "stop_reason": report.stop_reason,
        "f1_history": [float(v) for v in report.f1_history],
        "wall_time_s": float(report.wall_time),
    }
    if report.mismatch_count is not None:
        doc["mismatch_count"] = int(report.mismatch_count)
    if effective_config is not None:
        doc["config"] = effective_config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_report(path) -> dict:
    """Read a report JSON document back into a plain dict."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != REPORT_TAG:
        raise ParseError(f"not a {REPORT_TAG} document", path, 1)
    return doc


def write_history_csv(path, f1_history):
    """Write the misfit history as a two-column CSV (iteration, misfit)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,f1\n")
        for k, v in enumerate(f1_history):
            fh.write(f"{k},{_fmt(v)}\n")


def compare_fields(a: NodalField, b: NodalField) -> int:
    """Count the nodes at which two binary phase fields differ."""
    if a.grid != b.grid:
        raise InvalidArgumentError("fields live on different grids")
    for name, f in (("first", a), ("second", b)):
        if not np.all((f.values == 1.0) | (f.values == 2.0)):
            raise InvalidArgumentError(f"{name} field is not binary ({{1,2}}-valued)")
    return int(np.count_nonzero(a.values != b.values))
