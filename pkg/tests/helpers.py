"""Shared scene builders for the test suite."""

import numpy as np

from gridfuse import Camera, CameraIntrinsics, CameraPose


def random_intrinsics(rng, width=64, height=64, distortion=True):
    kw = {}
    if distortion:
        kw = dict(
            k1=rng.uniform(-0.05, 0.05),
            k2=rng.uniform(-0.02, 0.02),
            k3=rng.uniform(-0.01, 0.01),
            p1=rng.uniform(-0.005, 0.005),
            p2=rng.uniform(-0.005, 0.005),
        )
    return CameraIntrinsics(
        width=width,
        height=height,
        f=rng.uniform(0.8, 1.6) * width,
        cx=rng.uniform(-2.0, 2.0),
        cy=rng.uniform(-2.0, 2.0),
        b1=rng.uniform(-0.5, 0.5),
        b2=rng.uniform(-0.5, 0.5),
        **kw,
    )


def downward_pose(rng, altitude=50.0, wobble=0.15):
    """Camera above the origin looking straight-ish down (-Z boresight)."""
    pos = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5),
                    altitude + rng.uniform(-5, 5)])
    return CameraPose(
        position=pos,
        omega=rng.uniform(-wobble, wobble),
        phi=rng.uniform(-wobble, wobble),
        kappa=rng.uniform(-np.pi, np.pi),
    )


def ground_cloud(rng, n, half=25.0, zmax=10.0):
    return np.column_stack([
        rng.uniform(-half, half, n),
        rng.uniform(-half, half, n),
        rng.uniform(0.0, zmax, n),
    ])


def random_scene(seed, n_points=2000, n_cameras=1, distortion=True):
    rng = np.random.default_rng(seed)
    cams = [
        Camera(image=f"img_{i:03d}",
               intrinsics=random_intrinsics(rng, distortion=distortion),
               pose=downward_pose(rng))
        for i in range(n_cameras)
    ]
    return cams, ground_cloud(rng, n_points)


def planted_logits(rng, height, width, k):
    """Per-pixel logits with a clear winner planted at every pixel."""
    logits = rng.normal(0.0, 0.3, (height, width, k)).astype(np.float32)
    winner = rng.integers(0, k, (height, width))
    rows, cols = np.indices((height, width))
    logits[rows, cols, winner] += 5.0
    return logits
