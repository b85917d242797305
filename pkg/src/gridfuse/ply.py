"""PLY point cloud reader/writer.

Covers what the pipeline needs and nothing more: a vertex element with x/y/z
plus optional red/green/blue, intensity, and label properties, in ascii or
binary_little_endian form.  Unknown scalar properties are skipped; list
properties and big-endian files are rejected.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PlyError

__all__ = ["PointCloud", "read_ply", "write_ply"]

_SCALAR_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class PointCloud:
    positions: np.ndarray                       # (N, 3) float64
    colors: Optional[np.ndarray] = None         # (N, 3) uint8
    intensity: Optional[np.ndarray] = None      # (N,) float32
    labels: Optional[np.ndarray] = None         # (N,) uint8

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {pos.shape}")
        self.positions = pos
        n = len(pos)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.uint8)
            if c.shape != (n, 3):
                raise ValueError(f"colors must be ({n}, 3), got {c.shape}")
            self.colors = c
        if self.intensity is not None:
            v = np.asarray(self.intensity, dtype=np.float32)
            if v.shape != (n,):
                raise ValueError(f"intensity must be ({n},), got {v.shape}")
            self.intensity = v
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.uint8)
            if lab.shape != (n,):
                raise ValueError(f"labels must be ({n},), got {lab.shape}")
            self.labels = lab

    def __len__(self):
        return len(self.positions)


def _parse_header(fh, path):
    def next_line():
        raw = fh.readline()
        if not raw:
            raise PlyError(f"{path}: header ended unexpectedly")
        try:
            return raw.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise PlyError(f"{path}: non-ascii header") from exc

    if next_line() != "ply":
        raise PlyError(f"{path}: missing 'ply' signature")
    fmt = None
    elements = []        # (name, count, [(prop_name, np_type), ...])
    while True:
        line = next_line()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment" or parts[0] == "obj_info":
            continue
        if parts[0] == "format":
            if len(parts) != 3:
                raise PlyError(f"{path}: malformed format line")
            if parts[1] == "ascii":
                fmt = "ascii"
            elif parts[1] == "binary_little_endian":
                fmt = "binary"
            else:
                raise PlyError(f"{path}: unsupported format '{parts[1]}'")
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PlyError(f"{path}: malformed element line")
            try:
                count = int(parts[2])
            except ValueError as exc:
                raise PlyError(f"{path}: bad element count '{parts[2]}'") from exc
            if count < 0:
                raise PlyError(f"{path}: negative element count")
            elements.append((parts[1], count, []))
        elif parts[0] == "property":
            if not elements:
                raise PlyError(f"{path}: property before any element")
            if parts[1] == "list":
                raise PlyError(f"{path}: list properties are not supported")
            if len(parts) != 3:
                raise PlyError(f"{path}: malformed property line")
            if parts[1] not in _SCALAR_TYPES:
                raise PlyError(f"{path}: unknown property type '{parts[1]}'")
            elements[-1][2].append((parts[2], _SCALAR_TYPES[parts[1]]))
        else:
            raise PlyError(f"{path}: unrecognized header line '{line}'")
    if fmt is None:
        raise PlyError(f"{path}: missing format line")
    return fmt, elements


def read_ply(path) -> PointCloud:
    with open(path, "rb") as fh:
        fmt, elements = _parse_header(fh, path)
        vertex = None
        for idx, (name, count, props) in enumerate(elements):
            if name == "vertex":
                vertex = (idx, count, props)
                break
        if vertex is None:
            raise PlyError(f"{path}: no vertex element")
        vidx, count, props = vertex
        if any(c > 0 for (_, c, _) in elements[:vidx]):
            raise PlyError(f"{path}: vertex element must come first")
        names = [p[0] for p in props]
        for needed in ("x", "y", "z"):
            if needed not in names:
                raise PlyError(f"{path}: vertex element lacks property '{needed}'")

        if fmt == "binary":
            dtype = np.dtype([(n, "<" + t) for n, t in props])
            raw = fh.read(dtype.itemsize * count)
            if len(raw) < dtype.itemsize * count:
                raise PlyError(
                    f"{path}: truncated vertex data "
                    f"({len(raw)} of {dtype.itemsize * count} bytes)"
                )
            data = np.frombuffer(raw, dtype=dtype, count=count)
        else:
            rows = []
            for _ in range(count):
                raw = fh.readline()
                if not raw:
                    raise PlyError(f"{path}: truncated vertex data")
                fields = raw.split()
                if len(fields) != len(props):
                    raise PlyError(
                        f"{path}: vertex row has {len(fields)} fields, "
                        f"expected {len(props)}"
                    )
                rows.append(fields)
            data = {}
            cols = list(zip(*rows)) if rows else [[] for _ in props]
            for (pname, ptype), col in zip(props, cols):
                try:
                    data[pname] = np.asarray(col, dtype=np.dtype(ptype))
                except ValueError as exc:
                    raise PlyError(f"{path}: bad value in column '{pname}'") from exc

        def column(name):
            return np.asarray(data[name])

        pos = np.column_stack([
            column("x").astype(np.float64),
            column("y").astype(np.float64),
            column("z").astype(np.float64),
        ])
        colors = None
        if all(c in names for c in ("red", "green", "blue")):
            colors = np.column_stack([
                column("red").astype(np.uint8),
                column("green").astype(np.uint8),
                column("blue").astype(np.uint8),
            ])
        intensity = column("intensity").astype(np.float32) if "intensity" in names else None
        labels = column("label").astype(np.uint8) if "label" in names else None
        return PointCloud(pos, colors=colors, intensity=intensity, labels=labels)


def write_ply(cloud: PointCloud, path, binary: bool = True):
    n = len(cloud)
    props = [("x", "f8", "double"), ("y", "f8", "double"), ("z", "f8", "double")]
    if cloud.colors is not None:
        props += [("red", "u1", "uchar"), ("green", "u1", "uchar"),
                  ("blue", "u1", "uchar")]
    if cloud.intensity is not None:
        props.append(("intensity", "f4", "float"))
    if cloud.labels is not None:
        props.append(("label", "u1", "uchar"))

    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += [f"property {ply_t} {name}" for name, _, ply_t in props]
    header.append("end_header")

    rec = np.empty(n, dtype=[(name, "<" + t) for name, t, _ in props])
    rec["x"], rec["y"], rec["z"] = cloud.positions.T
    if cloud.colors is not None:
        rec["red"], rec["green"], rec["blue"] = cloud.colors.T
    if cloud.intensity is not None:
        rec["intensity"] = cloud.intensity
    if cloud.labels is not None:
        rec["label"] = cloud.labels

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(rec.tobytes())
        else:
            fmt_parts = []
            for name, t, _ in props:
                fmt_parts.append("%d" if t in ("u1",) else "%.17g")
            for row in rec:
                fh.write((" ".join(
                    fmt % row[name]
                    for (name, _, _), fmt in zip(props, fmt_parts)
                ) + "\n").encode("ascii"))
