"""Multi-view label transfer: vote per-pixel class logits onto 3D points.

For each point p the aggregate is L(p) = sum over visible views of
w_c * logits_c[pixel], the label is argmax L(p) with ties going to the lowest
class index, and points no camera sees get the ignore label 255.

Exactness note: both the vectorized path and the test oracle accumulate in
camera-index order with float64, so their sums agree bitwise.
"""

import concurrent.futures
import enum
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DataError
from .geometry import ProjectionStatus, project, project_batch

__all__ = [
    "IGNORE_LABEL",
    "WeightMode",
    "ViewWeighting",
    "ClassMapping",
    "load_class_mapping",
    "default_class_mapping",
    "remap_labels",
    "aggregate_logits",
    "transfer_labels",
    "TransferConfig",
]

IGNORE_LABEL = 255


class WeightMode(enum.Enum):
    UNIFORM = "uniform"
    INVERSE_DISTANCE = "invdist"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ViewWeighting:
    mode: WeightMode = WeightMode.UNIFORM
    table: tuple = ()        # per-camera scalars, CUSTOM only

    def __post_init__(self):
        if self.mode is WeightMode.CUSTOM:
            tab = tuple(float(w) for w in self.table)
            if any(w < 0 for w in tab):
                raise ValueError("custom view weights must be >= 0")
            object.__setattr__(self, "table", tab)

    def weight_for(self, cam_index: int, distance: float) -> float:
        if self.mode is WeightMode.UNIFORM:
            return 1.0
        if self.mode is WeightMode.INVERSE_DISTANCE:
            return 1.0 / max(distance, 1e-6)
        return self.table[cam_index]


@dataclass(frozen=True)
class TransferConfig:
    tau_z: float = 0.15
    weighting: ViewWeighting = ViewWeighting()
    bilinear: bool = False   # nearest-neighbor sampling unless enabled


# ---------------------------------------------------------------------------
# class remapping

@dataclass(frozen=True)
class ClassMapping:
    """Total map original_id -> training_id over the declared original ids."""

    table: dict
    names: dict

    def __post_init__(self):
        for src, dst in self.table.items():
            if not (0 <= src <= 255 and 0 <= dst <= 255):
                raise ValueError(f"mapping ids must be bytes, got {src}->{dst}")


def load_class_mapping(path) -> ClassMapping:
    """Parse the whitespace table: original_id, training_id, optional name."""
    table = {}
    names = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 2)
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected 'src dst [name]'")
            try:
                src = int(parts[0])
                dst = int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer id") from exc
            if src in table:
                raise DataError(f"{path}:{lineno}: duplicate original id {src}")
            table[src] = dst
            if len(parts) == 3:
                names[src] = parts[2].strip()
    if not table:
        raise DataError(f"{path}: empty mapping")
    return ClassMapping(table=table, names=names)


def default_class_mapping() -> ClassMapping:
    ref = resources.files("gridfuse").joinpath("data/class_mapping.txt")
    with resources.as_file(ref) as path:
        return load_class_mapping(path)


def remap_labels(labels, mapping: ClassMapping) -> np.ndarray:
    """Element-wise lookup; any id outside the mapping is a data error."""
    arr = np.asarray(labels)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise DataError(f"label {int(arr.min() if arr.min() < 0 else arr.max())} outside byte range")
    lut = np.full(256, -1, dtype=np.int16)
    for src, dst in mapping.table.items():
        lut[src] = dst
    out = lut[arr.astype(np.int64)]
    bad = out < 0
    if bad.any():
        offending = int(arr[np.argmax(bad)] if arr.ndim else arr)
        raise DataError(f"label id {offending} not covered by the class mapping")
    return out.astype(np.uint8)


# ---------------------------------------------------------------------------
# logit aggregation

def _check_logits(cameras, logit_images):
    if len(cameras) != len(logit_images):
        raise ValueError(
            f"{len(cameras)} cameras but {len(logit_images)} logit images"
        )
    k = None
    for cam, img in zip(cameras, logit_images):
        img = np.asarray(img)
        if img.ndim != 3:
            raise ValueError(f"logit image must be (H, W, K), got {img.shape}")
        if img.shape[0] != cam.intrinsics.height or img.shape[1] != cam.intrinsics.width:
            raise ValueError(
                f"logit image {img.shape[:2]} does not match camera "
                f"{cam.intrinsics.height}x{cam.intrinsics.width}"
            )
        if k is None:
            k = img.shape[2]
        elif img.shape[2] != k:
            raise ValueError(f"inconsistent class count: {img.shape[2]} vs {k}")
    if k is not None and k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    return k


def aggregate_logits(point, view_indices, cameras, logit_images, weighting: ViewWeighting):
    """Weighted per-view logit sum for one point; None when no views vote."""
    k = _check_logits(cameras, logit_images)
    if not view_indices:
        return None
    point = np.asarray(point, dtype=np.float64).reshape(3)
    acc = np.zeros(k, dtype=np.float64)
    for ci in view_indices:
        cam = cameras[ci]
        res = project(cam.intrinsics, cam.pose, point)
        if res.status != ProjectionStatus.IN_FRAME:
            raise ValueError(f"point does not project into view {ci}")
        px = int(np.floor(res.f_x))
        py = int(np.floor(res.f_y))
        d = point - cam.pose.position
        dist = float(np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))
        w = weighting.weight_for(ci, dist)
        acc += w * logit_images[ci][py, px, :].astype(np.float64)
    return acc


def _bilinear_sample(img, fx, fy):
    h, w, _ = img.shape
    x0 = np.clip(np.floor(fx - 0.5).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(fy - 0.5).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = np.clip(fx - 0.5 - x0, 0.0, 1.0)[:, None]
    ay = np.clip(fy - 0.5 - y0, 0.0, 1.0)[:, None]
    top = img[y0, x0].astype(np.float64) * (1 - ax) + img[y0, x1].astype(np.float64) * ax
    bot = img[y1, x0].astype(np.float64) * (1 - ax) + img[y1, x1].astype(np.float64) * ax
    return top * (1 - ay) + bot * ay


def _transfer_chunk(pts, cameras, depthmaps, logit_images, config, k, acc, nviews):
    weighting = config.weighting
    for ci, cam in enumerate(cameras):
        f_x, f_y, z, status = project_batch(cam.intrinsics, cam.pose, pts)
        m = status == ProjectionStatus.IN_FRAME
        if not m.any():
            continue
        idx = np.nonzero(m)[0]
        fx = f_x[idx]
        fy = f_y[idx]
        cols = np.floor(fx).astype(np.int64)
        rows = np.floor(fy).astype(np.int64)
        cell = depthmaps[ci].grid[rows, cols].astype(np.float64)
        vis = np.abs(cell - z[idx]) <= config.tau_z
        if not vis.any():
            continue
        idx = idx[vis]
        rows = rows[vis]
        cols = cols[vis]
        if weighting.mode is WeightMode.UNIFORM:
            w = 1.0
        elif weighting.mode is WeightMode.INVERSE_DISTANCE:
            dx = pts[idx, 0] - cam.pose.position[0]
            dy = pts[idx, 1] - cam.pose.position[1]
            dz = pts[idx, 2] - cam.pose.position[2]
            dist = np.sqrt(dx * dx + dy * dy + dz * dz)
            w = (1.0 / np.maximum(dist, 1e-6))[:, None]
        else:
            w = weighting.table[ci]
        if config.bilinear:
            sampled = _bilinear_sample(logit_images[ci], fx[vis], fy[vis])
        else:
            sampled = logit_images[ci][rows, cols, :].astype(np.float64)
        acc[idx] += w * sampled
        nviews[idx] += 1


def transfer_labels(points, cameras, depthmaps, logit_images,
                    config: TransferConfig = TransferConfig(),
                    threads: int = 1) -> np.ndarray:
    """Label every point by multi-view logit voting.

    Returns uint8 labels; points visible in no view get 255.  Results are
    identical for any `threads` value (points are split into disjoint chunks,
    cameras always accumulate in index order).
    """
    k = _check_logits(cameras, logit_images)
    if len(cameras) != len(depthmaps):
        raise ValueError(
            f"{len(cameras)} cameras but {len(depthmaps)} depth maps"
        )
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) cloud, got shape {pts.shape}")
    n = len(pts)
    if n == 0:
        return np.empty(0, dtype=np.uint8)
    if weighting_is_degenerate(config.weighting, len(cameras)):
        raise ValueError("custom weighting needs at least one positive weight")

    acc = np.zeros((n, k), dtype=np.float64)
    nviews = np.zeros(n, dtype=np.int64)
    if threads and threads > 1 and n >= 4096:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_transfer_chunk, pts[a:b], cameras, depthmaps,
                            logit_images, config, k, acc[a:b], nviews[a:b])
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a
            ]
            for fu in futs:
                fu.result()
    else:
        _transfer_chunk(pts, cameras, depthmaps, logit_images, config, k, acc, nviews)

    labels = np.argmax(acc, axis=1).astype(np.uint8)   # ties: lowest index
    labels[nviews == 0] = IGNORE_LABEL
    return labels


def weighting_is_degenerate(weighting: ViewWeighting, n_cameras: int) -> bool:
    if weighting.mode is not WeightMode.CUSTOM:
        return False
    if len(weighting.table) != n_cameras:
        raise ValueError(
            f"custom weighting has {len(weighting.table)} entries "
            f"for {n_cameras} cameras"
        )
    return not any(w > 0 for w in weighting.table)
