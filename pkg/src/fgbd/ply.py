"""PLY reader/writer for colored point clouds (ascii and binary little-endian)."""

from __future__ import annotations

import io
import warnings
from pathlib import Path

import numpy as np

from .cloud import CloudError, PointCloud, infer_bit_depth


class PlyError(ValueError):
    """Base class for PLY format problems."""


class PlyParseError(PlyError):
    """Malformed or unsupported PLY input."""


_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_COORD_NAMES = ("x", "y", "z")
_COLOR_NAMES = ("red", "green", "blue")


class _Element:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        self.properties: list[tuple[str, str]] = []  # (name, numpy dtype code)
        self.has_list = False


def _parse_header(data: bytes):
    end = data.find(b"end_header")
    if end < 0:
        raise PlyParseError("missing end_header")
    nl = data.find(b"\n", end)
    if nl < 0:
        raise PlyParseError("no newline after end_header")
    header = data[:nl].decode("ascii", errors="replace")
    body = data[nl + 1:]

    lines = [ln.strip() for ln in header.splitlines() if ln.strip()]
    if not lines or lines[0] != "ply":
        raise PlyParseError("file does not start with 'ply'")

    fmt = None
    elements: list[_Element] = []
    for ln in lines[1:]:
        parts = ln.split()
        kw = parts[0]
        if kw == "format":
            if len(parts) != 3:
                raise PlyParseError(f"bad format line: {ln!r}")
            if parts[1] == "ascii":
                fmt = "ascii"
            elif parts[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise PlyParseError(f"unsupported PLY format {parts[1]!r}")
        elif kw in ("comment", "obj_info"):
            continue
        elif kw == "element":
            if len(parts) != 3:
                raise PlyParseError(f"bad element line: {ln!r}")
            try:
                count = int(parts[2])
            except ValueError:
                raise PlyParseError(f"bad element count in {ln!r}") from None
            if count < 0:
                raise PlyParseError(f"negative element count in {ln!r}")
            elements.append(_Element(parts[1], count))
        elif kw == "property":
            if not elements:
                raise PlyParseError("property before any element")
            el = elements[-1]
            if parts[1] == "list":
                if len(parts) != 5:
                    raise PlyParseError(f"bad list property line: {ln!r}")
                el.has_list = True
                el.properties.append((parts[4], "list"))
            else:
                if len(parts) != 3:
                    raise PlyParseError(f"bad property line: {ln!r}")
                if parts[1] not in _PLY_DTYPES:
                    raise PlyParseError(f"unsupported property type {parts[1]!r}")
                el.properties.append((parts[2], _PLY_DTYPES[parts[1]]))
        elif kw == "end_header":
            break
        else:
            raise PlyParseError(f"unrecognized header line: {ln!r}")
    if fmt is None:
        raise PlyParseError("header has no format line")
    if not any(el.name == "vertex" for el in elements):
        raise PlyParseError("header has no vertex element")
    return fmt, elements, body


def _vertex_columns(columns: dict[str, np.ndarray]) -> PointCloud:
    for name in _COORD_NAMES:
        if name not in columns:
            raise PlyParseError(f"vertex element lacks coordinate property {name!r}")
    for name in _COLOR_NAMES:
        if name not in columns:
            raise PlyParseError(f"vertex element lacks color property {name!r}")
        if columns[name].dtype != np.uint8:
            raise PlyParseError(f"color property {name!r} must be 8-bit")
    coords = np.stack([columns[n] for n in _COORD_NAMES], axis=1)
    colors = np.stack(
        [columns[n].astype(np.float64) for n in _COLOR_NAMES], axis=1
    )
    if all(np.issubdtype(columns[n].dtype, np.integer) for n in _COORD_NAMES):
        coords = coords.astype(np.int64)
        if coords.min() < 0:
            raise PlyParseError("negative integer coordinates are not supported")
        return PointCloud(coords, colors, infer_bit_depth(coords))
    # float coordinates pass through unquantized; the caller must quantize
    # before any graph construction
    return PointCloud(coords.astype(np.float64), colors, None)


def load_ply(source) -> PointCloud:
    """Parse a PLY file (path, bytes, or binary stream) into a PointCloud.

    Supports ascii and binary little-endian files whose vertex element has
    x/y/z (any non-list numeric type) and red/green/blue (8-bit) properties.
    Other vertex properties are skipped with a warning. Integer coordinates
    yield a quantized cloud with inferred bit depth; float coordinates yield
    an unquantized cloud that requires quantize_coordinates before graph use.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    fmt, elements, body = _parse_header(data)

    known = set(_COORD_NAMES) | set(_COLOR_NAMES)
    vertex_cloud = None
    if fmt == "ascii":
        lines = body.decode("ascii", errors="replace").splitlines()
        pos = 0
        for el in elements:
            if pos + el.count > len(lines):
                raise PlyParseError(
                    f"truncated body: element {el.name!r} needs {el.count} rows"
                )
            if el.name != "vertex":
                pos += el.count
                continue
            if el.has_list:
                raise PlyParseError("list properties in vertex element are unsupported")
            _warn_unknown(el, known)
            rows = []
            for ln in lines[pos:pos + el.count]:
                toks = ln.split()
                if len(toks) < len(el.properties):
                    raise PlyParseError(f"short vertex row: {ln!r}")
                rows.append(toks[: len(el.properties)])
            try:
                raw = np.asarray(rows, dtype=np.float64)
            except ValueError:
                raise PlyParseError("non-numeric token in vertex data") from None
            raw = raw.reshape(el.count, len(el.properties))
            columns = {}
            for j, (name, code) in enumerate(el.properties):
                if name not in known:
                    continue
                dt = np.dtype(code)
                col = raw[:, j]
                if np.issubdtype(dt, np.integer):
                    info = np.iinfo(dt)
                    if col.min() < info.min or col.max() > info.max:
                        raise PlyParseError(
                            f"value out of range for {dt} property {name!r}"
                        )
                columns[name] = col.astype(dt)
            vertex_cloud = _vertex_columns(columns)
            pos += el.count
            break
    else:
        offset = 0
        for el in elements:
            if el.name != "vertex":
                if el.has_list:
                    raise PlyParseError(
                        f"cannot skip binary element {el.name!r} with list properties"
                    )
                offset += el.count * sum(
                    np.dtype(code).itemsize for _, code in el.properties
                )
                continue
            if el.has_list:
                raise PlyParseError("list properties in vertex element are unsupported")
            _warn_unknown(el, known)
            row_dt = np.dtype([(n, "<" + c) for n, c in el.properties])
            need = el.count * row_dt.itemsize
            if len(body) - offset < need:
                raise PlyParseError(
                    f"truncated body: need {need} bytes for {el.count} vertices, "
                    f"have {len(body) - offset}"
                )
            rec = np.frombuffer(body, dtype=row_dt, count=el.count, offset=offset)
            columns = {n: rec[n] for n, _ in el.properties if n in known}
            vertex_cloud = _vertex_columns(columns)
            break
    if vertex_cloud is None:
        raise PlyParseError("no vertex data found")
    return vertex_cloud


def _warn_unknown(el: _Element, known: set[str]) -> None:
    extra = [n for n, _ in el.properties if n not in known]
    if extra:
        warnings.warn(
            f"skipping unknown vertex properties: {', '.join(extra)}",
            stacklevel=3,
        )


def _color_bytes(colors: np.ndarray) -> np.ndarray:
    # round half up, then clamp to the displayable range
    return np.clip(np.floor(colors + 0.5), 0, 255).astype(np.uint8)


def save_ply(pc: PointCloud, fmt: str = "binary") -> bytes:
    """Serialize a cloud to PLY bytes, parseable back by load_ply.

    Quantized clouds store coordinates as uint32, unquantized ones as
    float32. Colors are rounded half-up to 8-bit.
    """
    if fmt not in ("ascii", "binary"):
        raise PlyError(f"format must be 'ascii' or 'binary', got {fmt!r}")
    n = pc.n_points
    quantized = pc.is_quantized
    coord_ply, coord_np = ("uint", "<u4") if quantized else ("float", "<f4")
    header = "\n".join(
        [
            "ply",
            "format ascii 1.0" if fmt == "ascii" else "format binary_little_endian 1.0",
            f"element vertex {n}",
            f"property {coord_ply} x",
            f"property {coord_ply} y",
            f"property {coord_ply} z",
            "property uchar red",
            "property uchar green",
            "property uchar blue",
            "end_header",
        ]
    ) + "\n"

    coords = pc.coords.astype(np.dtype(coord_np))
    colors = _color_bytes(pc.colors)
    if fmt == "ascii":
        buf = io.StringIO()
        buf.write(header)
        for i in range(n):
            cs = " ".join(
                str(int(v)) if quantized else str(np.float32(v)) for v in coords[i]
            )
            buf.write(f"{cs} {colors[i, 0]} {colors[i, 1]} {colors[i, 2]}\n")
        return buf.getvalue().encode("ascii")
    rec = np.empty(
        n,
        dtype=np.dtype(
            [("x", coord_np), ("y", coord_np), ("z", coord_np),
             ("red", "u1"), ("green", "u1"), ("blue", "u1")]
        ),
    )
    for j, name in enumerate(_COORD_NAMES):
        rec[name] = coords[:, j]
    for j, name in enumerate(_COLOR_NAMES):
        rec[name] = colors[:, j]
    return header.encode("ascii") + rec.tobytes()


def write_ply(pc: PointCloud, path, fmt: str = "binary") -> None:
    Path(path).write_bytes(save_ply(pc, fmt))
