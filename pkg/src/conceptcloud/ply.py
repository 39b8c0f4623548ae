"""PLY readers and writers.

Three file kinds share the machinery here:

* segmented frames — vertex x,y,z (float32), red,green,blue (uint8),
  object_id (uint32), with the frame's timestep carried in a comment;
* concept clouds — float64 positions plus a per-vertex feature list;
* colored exports — plain x,y,z + rgb vertices (relevancy maps).

Frames whose coordinates are float32-representable and whose colors sit on
the 8-bit grid round-trip bit-exactly; everything produced by read_frame
is in that set, so writes of read data are a fixpoint. ASCII and binary
little-endian are both supported for frames; machine artifacts (concept
clouds) are always binary.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .model import MAX_OBJECT_ID, ConceptCloud, SegmentedPointCloud, validate_cloud


class PlyFormatError(ValueError):
    """Malformed or schema-violating PLY content."""


_SCALARS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}

_FRAME_SCHEMA = {
    "x": "<f4", "y": "<f4", "z": "<f4",
    "red": "u1", "green": "u1", "blue": "u1",
    "object_id": "<u4",
}


def _format_float(v: float) -> str:
    # repr of the widened float round-trips the float32 value exactly
    return repr(float(v))


class _Header:
    def __init__(self):
        self.fmt = None  # "ascii" | "binary_little_endian"
        self.comments: list[str] = []
        self.vertex_count = None
        # (name, scalar_dtype) or (name, (count_dtype, value_dtype)) for lists
        self.properties: list[tuple[str, object]] = []
        self.data_offset = 0


def _parse_header(raw: bytes, path) -> _Header:
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise PlyFormatError(f"{path}: not a PLY file (missing magic or end_header)")
    hdr = _Header()
    hdr.data_offset = end + len(b"end_header\n")
    in_vertex = False
    for lineno, line in enumerate(raw[:end].decode("ascii", "replace").splitlines(), start=1):
        tok = line.split()
        if not tok or tok[0] == "ply":
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian"):
                raise PlyFormatError(f"{path}:{lineno}: unsupported format {line!r}")
            hdr.fmt = tok[1]
        elif tok[0] == "comment":
            hdr.comments.append(line[len("comment "):] if len(line) > 8 else "")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    hdr.vertex_count = int(tok[2])
                except (IndexError, ValueError):
                    raise PlyFormatError(f"{path}:{lineno}: bad element line {line!r}") from None
            elif hdr.vertex_count is not None:
                break  # only the vertex element is read
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _SCALARS or tok[3] not in _SCALARS:
                    raise PlyFormatError(f"{path}:{lineno}: bad list property {line!r}")
                hdr.properties.append((tok[4], (_SCALARS[tok[2]], _SCALARS[tok[3]])))
            else:
                if len(tok) != 3 or tok[1] not in _SCALARS:
                    raise PlyFormatError(f"{path}:{lineno}: bad property {line!r}")
                hdr.properties.append((tok[2], _SCALARS[tok[1]]))
    if hdr.fmt is None or hdr.vertex_count is None:
        raise PlyFormatError(f"{path}: header missing format or vertex element")
    if not hdr.properties and hdr.vertex_count > 0:
        raise PlyFormatError(f"{path}: vertex element declares no properties")
    return hdr


def _read_vertices(path) -> tuple[_Header, dict[str, np.ndarray]]:
    """Read the vertex element into one array per property."""
    with open(path, "rb") as f:
        raw = f.read()
    hdr = _parse_header(raw, path)
    body = raw[hdr.data_offset:]
    n = hdr.vertex_count
    has_list = any(isinstance(kind, tuple) for _, kind in hdr.properties)

    if hdr.fmt == "ascii":
        lines = body.decode("ascii", "replace").splitlines()
        if len(lines) < n:
            raise PlyFormatError(f"{path}: expected {n} vertex lines, found {len(lines)}")
        cols: dict[str, list] = {name: [] for name, _ in hdr.properties}
        for i in range(n):
            tok = lines[i].split()
            pos = 0
            try:
                for name, kind in hdr.properties:
                    if isinstance(kind, tuple):
                        count = int(tok[pos]); pos += 1
                        vals = [float(t) for t in tok[pos:pos + count]]
                        if len(vals) != count:
                            raise IndexError
                        pos += count
                        cols[name].append(np.array(vals, dtype=kind[1]))
                    else:
                        cols[name].append(float(tok[pos]) if "f" in kind else int(tok[pos]))
                        pos += 1
            except (ValueError, IndexError):
                raise PlyFormatError(f"{path}: vertex record {i} (line {i + 1} after header) is malformed") from None
        out = {}
        for name, kind in hdr.properties:
            if isinstance(kind, tuple):
                lens = {len(v) for v in cols[name]}
                if len(lens) > 1:
                    raise PlyFormatError(f"{path}: list property {name} has varying lengths {sorted(lens)}")
                out[name] = np.array(cols[name], dtype=kind[1]).reshape(n, -1)
            else:
                out[name] = np.array(cols[name], dtype=kind)
        return hdr, out

    # binary little-endian
    if not has_list:
        dt = np.dtype([(name, kind) for name, kind in hdr.properties])
        need = dt.itemsize * n
        if len(body) < need:
            raise PlyFormatError(f"{path}: truncated body, need {need} bytes, have {len(body)}")
        rec = np.frombuffer(body, dtype=dt, count=n)
        return hdr, {name: np.ascontiguousarray(rec[name]) for name, _ in hdr.properties}

    # fixed-length lists: infer the length from the first record
    list_lens: dict[str, int] = {}
    off = 0
    for name, kind in hdr.properties:
        if isinstance(kind, tuple):
            cdt = np.dtype(kind[0])
            if off + cdt.itemsize > len(body):
                raise PlyFormatError(f"{path}: truncated at record 0 while reading list count")
            count = int(np.frombuffer(body, dtype=cdt, count=1, offset=off)[0])
            list_lens[name] = count
            off += cdt.itemsize + count * np.dtype(kind[1]).itemsize
        else:
            off += np.dtype(kind).itemsize
    dt_fields = []
    for name, kind in hdr.properties:
        if isinstance(kind, tuple):
            dt_fields.append((name + "__count", kind[0]))
            dt_fields.append((name, kind[1], (list_lens[name],)))
        else:
            dt_fields.append((name, kind))
    dt = np.dtype(dt_fields)
    need = dt.itemsize * n
    if len(body) < need:
        raise PlyFormatError(f"{path}: truncated body, need {need} bytes, have {len(body)}")
    rec = np.frombuffer(body, dtype=dt, count=n)
    out = {}
    for name, kind in hdr.properties:
        if isinstance(kind, tuple):
            counts = rec[name + "__count"]
            if n and not np.all(counts == list_lens[name]):
                bad = int(np.flatnonzero(counts != list_lens[name])[0])
                raise PlyFormatError(f"{path}: vertex record {bad}: list {name} length differs from record 0")
            out[name] = np.ascontiguousarray(rec[name])
        else:
            out[name] = np.ascontiguousarray(rec[name])
    return hdr, out


def _comment_value(hdr: _Header, key: str) -> str | None:
    for c in hdr.comments:
        tok = c.split()
        if len(tok) == 2 and tok[0] == key:
            return tok[1]
    return None


# ---------------------------------------------------------------- frames

def read_frame(path) -> SegmentedPointCloud:
    """Read a segmented frame; the result always passes validate_cloud."""
    hdr, data = _read_vertices(path)
    declared = {name: kind for name, kind in hdr.properties}
    for name, want in _FRAME_SCHEMA.items():
        if name not in declared:
            raise PlyFormatError(f"{path}: frame is missing required property {name!r}")
        if declared[name] != want:
            raise PlyFormatError(
                f"{path}: property {name!r} has type {declared[name]!r}, expected {want!r}")
    ts_raw = _comment_value(hdr, "timestep")
    timestep = int(ts_raw) if ts_raw is not None else 0
    n = hdr.vertex_count
    pos = np.empty((n, 3), np.float64)
    pos[:, 0], pos[:, 1], pos[:, 2] = data["x"], data["y"], data["z"]
    col_u8 = np.stack([data["red"], data["green"], data["blue"]], axis=1).astype(np.uint8)
    colors = col_u8.astype(np.float64) / 255.0
    cloud = SegmentedPointCloud(timestep, pos, colors, data["object_id"].astype(np.int64))
    bad = validate_cloud(cloud)
    if bad:
        raise PlyFormatError(f"{path}: frame violates cloud invariants: {bad[0]}")
    return cloud


def write_frame(cloud: SegmentedPointCloud, path, binary: bool = True) -> None:
    """Write a frame readable by read_frame.

    Coordinates are stored as float32 and colors on the 8-bit grid, so a
    first write may quantize; anything obtained from read_frame writes
    back bit-identically.
    """
    bad = validate_cloud(cloud)
    if bad:
        raise ValueError(f"refusing to write invalid cloud: {bad[0]}")
    if len(cloud) and int(cloud.object_ids.max()) > MAX_OBJECT_ID:
        raise ValueError(f"object_id {int(cloud.object_ids.max())} exceeds uint32 range")
    n = len(cloud)
    col_u8 = np.rint(cloud.colors * 255.0).clip(0, 255).astype(np.uint8)
    pos32 = cloud.positions.astype(np.float32)
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"comment timestep {cloud.timestep}\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "property uint object_id\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if binary:
            rec = np.empty(n, dtype=np.dtype([
                ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                ("red", "u1"), ("green", "u1"), ("blue", "u1"),
                ("object_id", "<u4"),
            ]))
            rec["x"], rec["y"], rec["z"] = pos32[:, 0], pos32[:, 1], pos32[:, 2]
            rec["red"], rec["green"], rec["blue"] = col_u8[:, 0], col_u8[:, 1], col_u8[:, 2]
            rec["object_id"] = cloud.object_ids.astype(np.uint32)
            f.write(rec.tobytes())
        else:
            out = io.StringIO()
            for i in range(n):
                x, y, z = (_format_float(v) for v in pos32[i])
                r, g, b = (int(v) for v in col_u8[i])
                out.write(f"{x} {y} {z} {r} {g} {b} {int(cloud.object_ids[i])}\n")
            f.write(out.getvalue().encode("ascii"))


# ---------------------------------------------------------- concept clouds

def write_concept_cloud(cloud: ConceptCloud, path) -> None:
    """Write a concept cloud (binary; features stored as float32)."""
    m = len(cloud)
    header_lines = [
        "ply",
        "format binary_little_endian 1.0",
        f"comment feature_dim {cloud.feature_dim}",
    ]
    if cloud.voxel_size is not None:
        header_lines.append(f"comment voxel_size {_format_float(cloud.voxel_size)}")
    header_lines += [
        f"element vertex {m}",
        "property double x", "property double y", "property double z",
        "property uint source_object",
        "property uchar has_source",
        "property list ushort float feature",
        "end_header",
    ]
    d = cloud.feature_dim
    rec = np.empty(m, dtype=np.dtype([
        ("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
        ("source_object", "<u4"), ("has_source", "u1"),
        ("feature__count", "<u2"), ("feature", "<f4", (d,)),
    ]))
    has_src = cloud.source_objects >= 0
    rec["x"], rec["y"], rec["z"] = cloud.positions[:, 0], cloud.positions[:, 1], cloud.positions[:, 2]
    rec["source_object"] = np.where(has_src, cloud.source_objects, 0).astype(np.uint32)
    rec["has_source"] = has_src.astype(np.uint8)
    rec["feature__count"] = d
    rec["feature"] = cloud.features.astype(np.float32)
    with open(path, "wb") as f:
        f.write(("\n".join(header_lines) + "\n").encode("ascii"))
        f.write(rec.tobytes())


def read_concept_cloud(path) -> ConceptCloud:
    hdr, data = _read_vertices(path)
    for name in ("x", "y", "z", "source_object", "has_source", "feature"):
        if name not in data:
            raise PlyFormatError(f"{path}: concept cloud is missing property {name!r}")
    dim_raw = _comment_value(hdr, "feature_dim")
    if dim_raw is None:
        raise PlyFormatError(f"{path}: missing feature_dim comment")
    dim = int(dim_raw)
    feats = np.asarray(data["feature"], dtype=np.float64).reshape(hdr.vertex_count, -1)
    if hdr.vertex_count and feats.shape[1] != dim:
        raise PlyFormatError(f"{path}: feature lists have length {feats.shape[1]}, header says {dim}")
    pos = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    src = np.where(data["has_source"].astype(bool), data["source_object"].astype(np.int64), -1)
    vs_raw = _comment_value(hdr, "voxel_size")
    voxel_size = float(vs_raw) if vs_raw is not None else None
    return ConceptCloud(pos, feats, src, feature_dim=dim, voxel_size=voxel_size)


# ------------------------------------------------------------- xyz + rgb

def write_xyzrgb(path, positions: np.ndarray, colors_u8: np.ndarray) -> None:
    """Write a plain colored point cloud (binary little-endian)."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    colors_u8 = np.asarray(colors_u8, dtype=np.uint8).reshape(-1, 3)
    if len(positions) != len(colors_u8):
        raise ValueError("positions and colors must have equal length")
    n = len(positions)
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    rec = np.empty(n, dtype=np.dtype([
        ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
        ("red", "u1"), ("green", "u1"), ("blue", "u1"),
    ]))
    pos32 = positions.astype(np.float32)
    rec["x"], rec["y"], rec["z"] = pos32[:, 0], pos32[:, 1], pos32[:, 2]
    rec["red"], rec["green"], rec["blue"] = colors_u8[:, 0], colors_u8[:, 1], colors_u8[:, 2]
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(rec.tobytes())
