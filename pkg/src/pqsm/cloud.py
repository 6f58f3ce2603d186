"""Colored point cloud container and PLY file I/O.

Positions are held as float64 and colors as uint8 RGB. Both PLY flavors
commonly found in quality-assessment datasets are supported: ``ascii`` and
``binary_little_endian``. Files written in binary round-trip positions
bit-exactly because coordinates are stored as doubles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ColorlessCloudError, PlyParseError, TruncatedPlyError

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
_COLOR_SCHEMAS = (("red", "green", "blue"), ("r", "g", "b"))


class PointCloud:
    """Immutable point cloud with RGB colors and an optional saliency channel.

    Arrays are coerced to canonical dtypes (float64 positions, uint8 colors,
    float64 saliency) and marked read-only. Color values outside [0, 255] and
    non-finite coordinates are rejected rather than silently wrapped.
    """

    __slots__ = ("positions", "colors", "saliency")

    def __init__(self, positions, colors, saliency=None):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {positions.shape}")
        if positions.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.isfinite(positions).all():
            raise ValueError("positions contain non-finite values")

        colors_in = np.asarray(colors)
        if colors_in.shape != positions.shape:
            raise ValueError(
                f"colors shape {colors_in.shape} does not match positions shape {positions.shape}"
            )
        if colors_in.dtype != np.uint8:
            if not np.isfinite(colors_in.astype(np.float64)).all():
                raise ValueError("colors contain non-finite values")
            if colors_in.min() < 0 or colors_in.max() > 255:
                raise ValueError("color values must lie in [0, 255]")
        colors_in = np.ascontiguousarray(colors_in, dtype=np.uint8)

        if saliency is not None:
            saliency = np.ascontiguousarray(saliency, dtype=np.float64)
            if saliency.shape != (positions.shape[0],):
                raise ValueError(
                    f"saliency must have shape ({positions.shape[0]},), got {saliency.shape}"
                )
            if not np.isfinite(saliency).all() or (saliency < 0).any():
                raise ValueError("saliency values must be finite and >= 0")
            saliency.setflags(write=False)

        positions.setflags(write=False)
        colors_in.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "colors", colors_in)
        object.__setattr__(self, "saliency", saliency)

    def __setattr__(self, name, value):
        raise AttributeError("PointCloud is immutable")

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    def with_saliency(self, values) -> "PointCloud":
        """Copy of this cloud with `values` as its saliency channel."""
        return PointCloud(self.positions, self.colors, values)

    def without_saliency(self) -> "PointCloud":
        return PointCloud(self.positions, self.colors)

    def __repr__(self):
        sal = "with" if self.saliency is not None else "no"
        return f"PointCloud({self.n_points} points, {sal} saliency)"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned bounding box; degenerate (zero-extent) axes are allowed."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    @property
    def side_lengths(self) -> np.ndarray:
        return self.max_corner - self.min_corner

    @property
    def max_side(self) -> float:
        return float(self.side_lengths.max())


def bounding_box(cloud: PointCloud) -> BoundingBox:
    """Componentwise min/max corners of the cloud."""
    pos = cloud.positions
    return BoundingBox(pos.min(axis=0), pos.max(axis=0))


def _parse_header(fh):
    """Read the PLY header from a binary stream.

    Returns (format, elements, n_lines) where elements is a list of
    (name, count, [(prop_name, prop_type), ...]) in file order. List
    properties are stored with type ("list", count_type, value_type).
    """
    line_no = 0

    def next_line():
        nonlocal line_no
        raw = fh.readline()
        if not raw:
            raise PlyParseError("unexpected end of file inside header", line_no + 1)
        line_no += 1
        try:
            return raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise PlyParseError("header is not ascii", line_no) from None

    magic = next_line()
    if magic != "ply":
        raise PlyParseError(f"not a PLY file (expected 'ply', got {magic!r})", line_no)

    fmt = None
    elements = []
    while True:
        line = next_line()
        if line == "" or line.startswith("comment") or line.startswith("obj_info"):
            continue
        fields = line.split()
        keyword = fields[0]
        if keyword == "format":
            if len(fields) != 3:
                raise PlyParseError(f"malformed format line: {line!r}", line_no)
            if fields[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise PlyParseError(f"unknown format {fields[1]!r}", line_no)
            if fields[1] == "binary_big_endian":
                raise PlyParseError(
                    "binary_big_endian is not supported; re-export the file as "
                    "ascii or binary_little_endian",
                    line_no,
                )
            fmt = fields[1]
        elif keyword == "element":
            if len(fields) != 3:
                raise PlyParseError(f"malformed element line: {line!r}", line_no)
            try:
                count = int(fields[2])
            except ValueError:
                raise PlyParseError(f"bad element count in {line!r}", line_no) from None
            if count < 0:
                raise PlyParseError(f"negative element count in {line!r}", line_no)
            elements.append((fields[1], count, []))
        elif keyword == "property":
            if not elements:
                raise PlyParseError("property before any element", line_no)
            if len(fields) == 5 and fields[1] == "list":
                if fields[2] not in _PLY_DTYPES or fields[3] not in _PLY_DTYPES:
                    raise PlyParseError(f"unknown type in {line!r}", line_no)
                elements[-1][2].append((fields[4], ("list", fields[2], fields[3])))
            elif len(fields) == 3:
                if fields[1] not in _PLY_DTYPES:
                    raise PlyParseError(f"unknown property type {fields[1]!r}", line_no)
                names = [p[0] for p in elements[-1][2]]
                if fields[2] in names:
                    raise PlyParseError(f"duplicate property {fields[2]!r}", line_no)
                elements[-1][2].append((fields[2], fields[1]))
            else:
                raise PlyParseError(f"malformed property line: {line!r}", line_no)
        elif keyword == "end_header":
            break
        else:
            raise PlyParseError(f"unknown header keyword {keyword!r}", line_no)

    if fmt is None:
        raise PlyParseError("header has no format line", line_no)
    if not any(name == "vertex" for name, _, _ in elements):
        raise PlyParseError("header has no vertex element", line_no)
    return fmt, elements, line_no


def _vertex_layout(props, path):
    """Resolve coordinate/color/saliency columns from the vertex properties.

    Extra properties (normals, alpha, ...) are skipped. The optional saliency
    channel is only recognized as a float property named 'saliency'.
    """
    by_name = {}
    for name, typ in props:
        if isinstance(typ, tuple):
            raise PlyParseError(
                f"{path}: vertex property {name!r} is a list; lists are not supported here"
            )
        by_name[name] = typ

    for axis in _COORD_NAMES:
        if axis not in by_name:
            raise PlyParseError(f"{path}: vertex element lacks coordinate property {axis!r}")
        if _PLY_DTYPES[by_name[axis]] not in ("f4", "f8"):
            raise PlyParseError(f"{path}: coordinate property {axis!r} must be float or double")

    color_names = None
    for schema in _COLOR_SCHEMAS:
        if all(name in by_name for name in schema):
            color_names = schema
            break
    if color_names is None:
        raise ColorlessCloudError(
            f"{path}: vertex element has no color properties (expected red/green/blue or r/g/b)"
        )
    for name in color_names:
        if _PLY_DTYPES[by_name[name]] not in ("u1", "i1"):
            raise PlyParseError(f"{path}: color property {name!r} must be an 8-bit integer type")

    saliency_name = None
    if "saliency" in by_name and _PLY_DTYPES[by_name["saliency"]] in ("f4", "f8"):
        saliency_name = "saliency"
    return color_names, saliency_name


def load_ply(path) -> PointCloud:
    """Load a colored point cloud from an ascii or binary little-endian PLY.

    Raises PlyParseError (with the offending header line), ColorlessCloudError
    when RGB attributes are absent, and TruncatedPlyError when the payload is
    shorter than the declared vertex count.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, elements, _ = _parse_header(fh)
        if fmt == "ascii":
            return _load_ascii(fh, elements, path)
        return _load_binary(fh, elements, path)


def _load_ascii(fh, elements, path):
    for name, count, props in elements:
        if name == "vertex":
            break
        # skip a leading non-vertex element line by line
        for _ in range(count):
            if not fh.readline():
                raise TruncatedPlyError(f"{path}: file ends inside element {name!r}")
    color_names, saliency_name = _vertex_layout(props, path)
    names = [p[0] for p in props]

    if count == 0:
        raise PlyParseError(f"{path}: vertex element is empty")
    try:
        table = np.loadtxt(fh, dtype=np.float64, max_rows=count, ndmin=2, comments=None)
    except ValueError as exc:
        raise PlyParseError(f"{path}: malformed vertex row ({exc})") from None
    if table.shape[0] < count:
        raise TruncatedPlyError(
            f"{path}: expected {count} vertices, payload has {table.shape[0]}"
        )
    if table.shape[1] != len(names):
        raise PlyParseError(
            f"{path}: vertex rows have {table.shape[1]} values, header declares {len(names)}"
        )

    cols = {name: table[:, i] for i, name in enumerate(names)}
    positions = np.column_stack([cols[a] for a in _COORD_NAMES])
    colors = np.column_stack([cols[c] for c in color_names])
    if not np.isfinite(positions).all():
        raise PlyParseError(f"{path}: non-finite vertex coordinate")
    if colors.min() < 0 or colors.max() > 255 or (colors != np.round(colors)).any():
        raise PlyParseError(f"{path}: color values must be integers in [0, 255]")
    saliency = cols[saliency_name] if saliency_name else None
    if saliency is not None and (not np.isfinite(saliency).all() or (saliency < 0).any()):
        raise PlyParseError(f"{path}: saliency values must be finite and >= 0")
    return PointCloud(positions, colors.astype(np.uint8), saliency)


def _load_binary(fh, elements, path):
    for name, count, props in elements:
        if name == "vertex":
            break
        # pre-vertex elements can only be skipped when their byte size is known
        row_size = 0
        for pname, typ in props:
            if isinstance(typ, tuple):
                raise PlyParseError(
                    f"{path}: cannot skip binary list property {pname!r} ahead of the vertex element"
                )
            row_size += np.dtype("<" + _PLY_DTYPES[typ]).itemsize
        fh.seek(row_size * count, 1)
    color_names, saliency_name = _vertex_layout(props, path)

    if count == 0:
        raise PlyParseError(f"{path}: vertex element is empty")
    dtype = np.dtype([(p[0], "<" + _PLY_DTYPES[p[1]]) for p in props])
    raw = fh.read(dtype.itemsize * count)
    if len(raw) < dtype.itemsize * count:
        raise TruncatedPlyError(
            f"{path}: expected {count} vertices ({dtype.itemsize * count} bytes), "
            f"payload has {len(raw)} bytes"
        )
    table = np.frombuffer(raw, dtype=dtype)

    positions = np.column_stack([table[a].astype(np.float64) for a in _COORD_NAMES])
    colors = np.column_stack([table[c] for c in color_names])
    if not np.isfinite(positions).all():
        raise PlyParseError(f"{path}: non-finite vertex coordinate")
    saliency = table[saliency_name].astype(np.float64) if saliency_name else None
    if saliency is not None and (not np.isfinite(saliency).all() or (saliency < 0).any()):
        raise PlyParseError(f"{path}: saliency values must be finite and >= 0")
    return PointCloud(positions, colors, saliency)


def save_ply(cloud: PointCloud, path, format: str = "binary") -> None:
    """Write the cloud to `path` as PLY.

    `format` is "ascii" or "binary" (binary_little_endian). Coordinates are
    written as doubles so binary saves round-trip bit-exactly; the saliency
    channel, when present, is written as a float property named 'saliency'.
    """
    if format in ("binary", "binary_little_endian", "binary-little-endian"):
        fmt = "binary_little_endian"
    elif format == "ascii":
        fmt = "ascii"
    else:
        raise ValueError(f"unknown PLY format {format!r}")

    has_sal = cloud.saliency is not None
    header = [
        "ply",
        f"format {fmt} 1.0",
        f"element vertex {cloud.n_points}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if has_sal:
        header.append("property float saliency")
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if fmt == "ascii":
            ncol = 7 if has_sal else 6
            table = np.empty((cloud.n_points, ncol), dtype=np.float64)
            table[:, :3] = cloud.positions
            table[:, 3:6] = cloud.colors
            fmts = ["%.17g"] * 3 + ["%d"] * 3
            if has_sal:
                table[:, 6] = cloud.saliency.astype(np.float32)
                fmts.append("%.9g")
            np.savetxt(fh, table, fmt=fmts)
        else:
            fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                      ("red", "u1"), ("green", "u1"), ("blue", "u1")]
            if has_sal:
                fields.append(("saliency", "<f4"))
            out = np.empty(cloud.n_points, dtype=np.dtype(fields))
            for i, a in enumerate(_COORD_NAMES):
                out[a] = cloud.positions[:, i]
            for i, c in enumerate(("red", "green", "blue")):
                out[c] = cloud.colors[:, i]
            if has_sal:
                out["saliency"] = cloud.saliency
            fh.write(out.tobytes())
