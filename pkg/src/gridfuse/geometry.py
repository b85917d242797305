"""Camera geometry: Euler rotations, frame changes, lens distortion, pixels.

Conventions
-----------
* The rotation attached to a pose is ``R = Rz(kappa) @ Ry(phi) @ Rx(omega)``
  with the sign pattern of aerial-survey software: ``Rx`` carries ``+sin`` at
  (1, 2), ``Ry`` carries ``-sin`` at (0, 2), ``Rz`` carries ``+sin`` at (0, 1).
* A world point ``M`` lands in the camera frame as ``R @ (M - S)`` where ``S``
  is the camera position.  The camera looks along ``-Z``: points in front have
  ``Z_c < 0`` and depth ``z = -Z_c``.
* Normalized coordinates are ``x = -X_c / Z_c``, ``y = -Y_c / Z_c``; the
  distortion polynomial is driven by ``r = x**2 + y**2`` (the squared radius).
* Pixel mapping: ``f_x = width/2 + cx + x'*f + x'*b1 + y'*b2`` and
  ``f_y = height/2 + cy + y'*f``.  Pixel coordinates stay continuous here;
  rasterization floors them later.  A point is in frame iff
  ``0 <= f_x < width`` and ``0 <= f_y < height`` (half-open on purpose, so a
  floored pixel always indexes inside the grid).

All arithmetic is float64.  The batch path below sticks to elementwise
expressions (no matmul) so that results are bitwise reproducible and equal to
a straightforward scalar evaluation of the same formulas.
"""

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
import math

import numpy as np

from .errors import ConvergenceError

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "ProjectionStatus",
    "ProjectionResult",
    "rotation_from_euler",
    "euler_from_rotation",
    "world_to_camera",
    "distort",
    "undistort",
    "project",
    "project_batch",
]


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Interior orientation: focal length, offsets, skew, distortion."""

    width: int
    height: int
    f: float
    cx: float = 0.0
    cy: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0
    p4: float = 0.0

    def __post_init__(self):
        if int(self.width) != self.width or self.width <= 0:
            raise ValueError(f"width must be a positive integer, got {self.width!r}")
        if int(self.height) != self.height or self.height <= 0:
            raise ValueError(f"height must be a positive integer, got {self.height!r}")
        if not (self.f > 0):
            raise ValueError(f"focal length must be positive, got {self.f!r}")
        _require_finite(
            "intrinsics", self.f, self.cx, self.cy, self.b1, self.b2,
            self.k1, self.k2, self.k3, self.k4, self.k5,
            self.p1, self.p2, self.p3, self.p4,
        )


@dataclass(frozen=True)
class CameraPose:
    """Exterior orientation: position plus omega/phi/kappa in radians."""

    position: np.ndarray
    omega: float
    phi: float
    kappa: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"camera position must be finite, got {pos}")
        object.__setattr__(self, "position", pos)
        _require_finite("euler angles", self.omega, self.phi, self.kappa)

    @cached_property
    def rotation(self) -> np.ndarray:
        return rotation_from_euler(self.omega, self.phi, self.kappa)


class ProjectionStatus(IntEnum):
    IN_FRAME = 0          # in front of the camera, inside the sensor bounds
    OUT_OF_FRAME = 1      # in front, but outside the sensor bounds
    BEHIND_CAMERA = 2     # Z_c >= 0, pixel undefined


@dataclass(frozen=True)
class ProjectionResult:
    f_x: float
    f_y: float
    z: float
    status: ProjectionStatus


def rotation_from_euler(omega: float, phi: float, kappa: float) -> np.ndarray:
    """Rotation matrix Rz(kappa) @ Ry(phi) @ Rx(omega), closed-form entries.

    The nine entries are spelled out rather than composed with matmul so the
    scalar and batch code paths produce identical bits.
    """
    _require_finite("euler angles", omega, phi, kappa)
    co, so = math.cos(omega), math.sin(omega)
    cp, sp = math.cos(phi), math.sin(phi)
    ck, sk = math.cos(kappa), math.sin(kappa)
    return np.array(
        [
            [ck * cp, ck * sp * so + sk * co, -(ck * sp * co) + sk * so],
            [-(sk * cp), -(sk * sp * so) + ck * co, sk * sp * co + ck * so],
            [sp, -(cp * so), cp * co],
        ],
        dtype=np.float64,
    )


def euler_from_rotation(r: np.ndarray) -> tuple:
    """Recover (omega, phi, kappa) from a rotation built as above.

    At the gimbal-lock poles (|cos phi| ~ 0) omega is pinned to zero and the
    residual twist is folded into kappa.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {r.shape}")
    sp = min(1.0, max(-1.0, float(r[2, 0])))
    phi = math.asin(sp)
    cp = math.sqrt(max(0.0, 1.0 - sp * sp))
    if cp < 1e-12:
        return 0.0, phi, math.atan2(float(r[0, 1]), float(r[1, 1]))
    omega = math.atan2(-float(r[2, 1]), float(r[2, 2]))
    kappa = math.atan2(-float(r[1, 0]), float(r[0, 0]))
    return omega, phi, kappa


def world_to_camera(pose: CameraPose, points) -> np.ndarray:
    """R @ (M - S) for one point or an (N, 3) batch; no projection."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have 3 components, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    r = pose.rotation
    dx = pts[:, 0] - pose.position[0]
    dy = pts[:, 1] - pose.position[1]
    dz = pts[:, 2] - pose.position[2]
    out = np.empty_like(pts)
    out[:, 0] = dx * r[0, 0] + dy * r[0, 1] + dz * r[0, 2]
    out[:, 1] = dx * r[1, 0] + dy * r[1, 1] + dz * r[1, 2]
    out[:, 2] = dx * r[2, 0] + dy * r[2, 1] + dz * r[2, 2]
    return out[0] if single else out


def distort(intr: CameraIntrinsics, x, y):
    """Apply radial + tangential distortion to normalized coordinates.

    Accepts scalars or arrays.  With all coefficients zero this is exactly
    the identity.  Powers of r are built by chained multiplication; keep it
    that way, the depth/transfer oracles replicate the op order.
    """
    r = x * x + y * y
    r2 = r * r
    r3 = r2 * r
    r4 = r3 * r
    r5 = r4 * r
    d_r = 1.0 + intr.k1 * r + intr.k2 * r2 + intr.k3 * r3 + intr.k4 * r4 + intr.k5 * r5
    t = 1.0 + intr.p3 * r + intr.p4 * r2
    d_tx = intr.p1 * (r + 2.0 * x * x) + 2.0 * intr.p2 * x * y * t
    d_ty = intr.p2 * (r + 2.0 * y * y) + 2.0 * intr.p1 * x * y * t
    return x * d_r + d_tx, y * d_r + d_ty


def _distortion_jacobian(intr, x, y):
    # Analytic 2x2 Jacobian of distort() w.r.t. (x, y).
    r = x * x + y * y
    r2 = r * r
    r3 = r2 * r
    r4 = r3 * r
    r5 = r4 * r
    d_r = 1.0 + intr.k1 * r + intr.k2 * r2 + intr.k3 * r3 + intr.k4 * r4 + intr.k5 * r5
    g = intr.k1 + 2.0 * intr.k2 * r + 3.0 * intr.k3 * r2 + 4.0 * intr.k4 * r3 + 5.0 * intr.k5 * r4
    t = 1.0 + intr.p3 * r + intr.p4 * r2
    dt = intr.p3 + 2.0 * intr.p4 * r
    j11 = d_r + 2.0 * x * x * g + 6.0 * intr.p1 * x + 2.0 * intr.p2 * y * t \
        + 4.0 * intr.p2 * x * x * y * dt
    j12 = 2.0 * x * y * g + 2.0 * intr.p1 * y + 2.0 * intr.p2 * x * t \
        + 4.0 * intr.p2 * x * y * y * dt
    j21 = 2.0 * x * y * g + 2.0 * intr.p2 * x + 2.0 * intr.p1 * y * t \
        + 4.0 * intr.p1 * x * x * y * dt
    j22 = d_r + 2.0 * y * y * g + 6.0 * intr.p2 * y + 2.0 * intr.p1 * x * t \
        + 4.0 * intr.p1 * x * y * y * dt
    return j11, j12, j21, j22


def undistort(intr: CameraIntrinsics, xp: float, yp: float,
              tol: float = 1e-12, max_iter: int = 100):
    """Invert distort() by damped Newton iteration.

    Valid in the regime where the distortion is a diffeomorphism (moderate
    coefficients); raises ConvergenceError otherwise.
    """
    _require_finite("distorted coordinates", xp, yp)
    x, y = float(xp), float(yp)
    fx, fy = distort(intr, x, y)
    res = math.hypot(fx - xp, fy - yp)
    for _ in range(max_iter):
        if res <= tol:
            return x, y
        j11, j12, j21, j22 = _distortion_jacobian(intr, x, y)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            break
        ex = fx - xp
        ey = fy - yp
        step_x = (j22 * ex - j12 * ey) / det
        step_y = (j11 * ey - j21 * ex) / det
        scale = 1.0
        for _ in range(25):
            nx = x - scale * step_x
            ny = y - scale * step_y
            nfx, nfy = distort(intr, nx, ny)
            nres = math.hypot(nfx - xp, nfy - yp)
            if nres < res:
                x, y, fx, fy, res = nx, ny, nfx, nfy, nres
                break
            scale *= 0.5
        else:
            break
    if res <= tol:
        return x, y
    raise ConvergenceError(
        f"undistort stalled at residual {res:.3e} for ({xp}, {yp})"
    )


def project(intr: CameraIntrinsics, pose: CameraPose, point) -> ProjectionResult:
    """Full pipeline for one point: frame change, normalize, distort, pixels."""
    cam = world_to_camera(pose, point)
    xc, yc, zc = float(cam[0]), float(cam[1]), float(cam[2])
    z = -zc
    if zc >= 0.0:
        return ProjectionResult(math.nan, math.nan, z, ProjectionStatus.BEHIND_CAMERA)
    x = -(xc / zc)
    y = -(yc / zc)
    xp, yp = distort(intr, x, y)
    f_x = intr.width / 2.0 + intr.cx + xp * intr.f + xp * intr.b1 + yp * intr.b2
    f_y = intr.height / 2.0 + intr.cy + yp * intr.f
    if 0.0 <= f_x < intr.width and 0.0 <= f_y < intr.height:
        status = ProjectionStatus.IN_FRAME
    else:
        status = ProjectionStatus.OUT_OF_FRAME
    return ProjectionResult(f_x, f_y, z, status)


def project_batch(intr: CameraIntrinsics, pose: CameraPose, points):
    """Vectorized projection of an (N, 3) array.

    Returns (f_x, f_y, z, status) as float64/uint8 arrays.  Pixel entries for
    points behind the camera are NaN.  Expression order mirrors project().
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    r = pose.rotation
    dx = pts[:, 0] - pose.position[0]
    dy = pts[:, 1] - pose.position[1]
    dz = pts[:, 2] - pose.position[2]
    xc = dx * r[0, 0] + dy * r[0, 1] + dz * r[0, 2]
    yc = dx * r[1, 0] + dy * r[1, 1] + dz * r[1, 2]
    zc = dx * r[2, 0] + dy * r[2, 1] + dz * r[2, 2]
    z = -zc
    front = zc < 0.0
    safe = np.where(front, zc, -1.0)
    x = -(xc / safe)
    y = -(yc / safe)
    xp, yp = distort(intr, x, y)
    f_x = intr.width / 2.0 + intr.cx + xp * intr.f + xp * intr.b1 + yp * intr.b2
    f_y = intr.height / 2.0 + intr.cy + yp * intr.f
    f_x = np.where(front, f_x, np.nan)
    f_y = np.where(front, f_y, np.nan)
    in_frame = front & (f_x >= 0.0) & (f_x < intr.width) & (f_y >= 0.0) & (f_y < intr.height)
    status = np.full(len(pts), ProjectionStatus.BEHIND_CAMERA, dtype=np.uint8)
    status[front] = ProjectionStatus.OUT_OF_FRAME
    status[in_frame] = ProjectionStatus.IN_FRAME
    return f_x, f_y, z, status
