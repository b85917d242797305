"""Depth rasters and visibility queries.

A depth map stores, per pixel, the smallest depth among all cloud points
whose buffered footprint covers that pixel; untouched cells hold +inf.  The
grid is float32 (the same representation it has on disk), depths are computed
in float64 and cast once before the min-reduction.  Because the cast is
monotone, min and cast commute: any accumulation order, any tiling, and the
scalar oracle all produce identical bits.
"""

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import ProjectionStatus, project_batch

__all__ = [
    "DepthMap",
    "VisibilityConfig",
    "render_depth_map",
    "is_visible",
    "visible_views",
    "save_depth_npy",
    "load_depth_npy",
]

# points per chunk before the renderer bothers spinning up worker threads
_PARALLEL_THRESHOLD = 200_000


@dataclass
class DepthMap:
    grid: np.ndarray                    # (height, width) float32, +inf = empty
    buffer_radius: int = 0

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2:
            raise ValueError(f"depth grid must be 2-D, got shape {g.shape}")
        if g.dtype != np.float32:
            raise ValueError(f"depth grid must be float32, got {g.dtype}")
        if self.buffer_radius < 0:
            raise ValueError("buffer_radius must be >= 0")
        self.grid = g

    @property
    def height(self):
        return self.grid.shape[0]

    @property
    def width(self):
        return self.grid.shape[1]


@dataclass(frozen=True)
class VisibilityConfig:
    tau_z: float = 0.15
    buffer_radius: int = 2

    def __post_init__(self):
        if not (self.tau_z > 0):
            raise ValueError(f"tau_z must be positive, got {self.tau_z!r}")
        if self.buffer_radius < 0:
            raise ValueError("buffer_radius must be >= 0")


def _rasterize(grid, rows, cols, z32, radius, height, width):
    # One pass of minimum-scatter per neighborhood offset; np.minimum.at is
    # unbuffered, so duplicate pixels within a pass reduce correctly.
    for dr in range(-radius, radius + 1):
        rr = rows + dr
        for dc in range(-radius, radius + 1):
            cc = cols + dc
            m = (rr >= 0) & (rr < height) & (cc >= 0) & (cc < width)
            if m.all():
                np.minimum.at(grid, (rr, cc), z32)
            else:
                np.minimum.at(grid, (rr[m], cc[m]), z32[m])


def render_depth_map(intrinsics, pose, points, buffer_radius: int = 2,
                     threads: int = 1) -> DepthMap:
    """Render the min-depth grid of a cloud seen from one camera.

    Only points projecting in front of the camera and inside the frame
    contribute; each one covers the (2r+1)^2 neighborhood of its floored
    pixel, clipped at the image border.  An empty cloud (or one with no
    visible point) yields an all-infinity map.  Output is independent of
    point order and of `threads`.
    """
    if buffer_radius < 0:
        raise ValueError("buffer_radius must be >= 0")
    h, w = intrinsics.height, intrinsics.width
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return DepthMap(np.full((h, w), np.inf, dtype=np.float32), buffer_radius)

    f_x, f_y, z, status = project_batch(intrinsics, pose, pts)
    keep = status == ProjectionStatus.IN_FRAME
    cols = np.floor(f_x[keep]).astype(np.int64)
    rows = np.floor(f_y[keep]).astype(np.int64)
    z32 = z[keep].astype(np.float32)

    grid = np.full((h, w), np.inf, dtype=np.float32)
    n = len(z32)
    if threads and threads > 1 and n > _PARALLEL_THRESHOLD:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        partials = [np.full((h, w), np.inf, dtype=np.float32) for _ in range(threads)]
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_rasterize, partials[i],
                            rows[bounds[i]:bounds[i + 1]],
                            cols[bounds[i]:bounds[i + 1]],
                            z32[bounds[i]:bounds[i + 1]],
                            buffer_radius, h, w)
                for i in range(threads)
            ]
            for fu in futs:
                fu.result()
        for part in partials:        # deterministic merge, min is order-free
            np.minimum(grid, part, out=grid)
    else:
        _rasterize(grid, rows, cols, z32, buffer_radius, h, w)
    return DepthMap(grid, buffer_radius)


def is_visible(depthmap: DepthMap, x: int, y: int, z: float, tau_z: float) -> bool:
    """Depth-consistency test at integer pixel (x, y), x along width.

    Cells still holding +inf never pass.
    """
    if not (0 <= x < depthmap.width and 0 <= y < depthmap.height):
        raise ValueError(
            f"pixel ({x}, {y}) outside {depthmap.width}x{depthmap.height} grid"
        )
    cell = float(depthmap.grid[y, x])
    return abs(cell - z) <= tau_z


def visible_views(point, cameras, depthmaps, config: VisibilityConfig):
    """Indices of cameras that see `point` unoccluded, in camera order."""
    if len(cameras) != len(depthmaps):
        raise ValueError(
            f"{len(cameras)} cameras but {len(depthmaps)} depth maps"
        )
    from .geometry import project  # local import to keep module load light
    out = []
    for idx, (cam, dm) in enumerate(zip(cameras, depthmaps)):
        res = project(cam.intrinsics, cam.pose, point)
        if res.status != ProjectionStatus.IN_FRAME:
            continue
        px = int(np.floor(res.f_x))
        py = int(np.floor(res.f_y))
        if is_visible(dm, px, py, res.z, config.tau_z):
            out.append(idx)
    return out


def save_depth_npy(depthmap: DepthMap, path):
    """Write the grid as a little-endian float32 NPY (format version 1.0)."""
    arr = np.ascontiguousarray(depthmap.grid, dtype="<f4")
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, arr, version=(1, 0))


def load_depth_npy(path, buffer_radius: int = 0) -> DepthMap:
    arr = np.load(path)
    if arr.ndim != 2 or arr.dtype != np.float32:
        raise DataError(
            f"{path}: expected a 2-D float32 array, got {arr.dtype} {arr.shape}"
        )
    return DepthMap(arr, buffer_radius)
