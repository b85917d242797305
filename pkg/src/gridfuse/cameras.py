"""Camera file I/O.

The on-disk format is a single JSON document:

    {"cameras": [{"image": "IMG_0001", "width": 5280, "height": 3956,
                  "f": 3715.8, "cx": 0.0, "cy": 0.0, "b1": 0.0, "b2": 0.0,
                  "k1": 0.0, "k2": 0.0, "k3": 0.0, "k4": 0.0, "k5": 0.0,
                  "p1": 0.0, "p2": 0.0, "p3": 0.0, "p4": 0.0,
                  "x": 0.0, "y": 0.0, "z": 0.0,
                  "omega": 0.0, "phi": 0.0, "kappa": 0.0}, ...]}

Angles are stored in degrees and converted to radians on load; positions are
meters in the project coordinate frame.  Every field is required; a missing
one is reported with the field name and the offending record.
"""

import json
import math
from dataclasses import dataclass

from .errors import DataError
from .geometry import CameraIntrinsics, CameraPose

__all__ = ["Camera", "load_cameras", "save_cameras", "CAMERA_FIELDS"]

CAMERA_FIELDS = (
    "image", "width", "height", "f", "cx", "cy", "b1", "b2",
    "k1", "k2", "k3", "k4", "k5", "p1", "p2", "p3", "p4",
    "x", "y", "z", "omega", "phi", "kappa",
)


@dataclass(frozen=True)
class Camera:
    image: str
    intrinsics: CameraIntrinsics
    pose: CameraPose


def _record_to_camera(rec, index):
    if not isinstance(rec, dict):
        raise DataError(f"camera record {index} is not an object")
    label = rec.get("image", f"#{index}")
    missing = [f for f in CAMERA_FIELDS if f not in rec]
    if missing:
        raise DataError(
            f"camera record '{label}': missing field '{missing[0]}'"
        )
    try:
        intr = CameraIntrinsics(
            width=int(rec["width"]), height=int(rec["height"]),
            f=float(rec["f"]), cx=float(rec["cx"]), cy=float(rec["cy"]),
            b1=float(rec["b1"]), b2=float(rec["b2"]),
            k1=float(rec["k1"]), k2=float(rec["k2"]), k3=float(rec["k3"]),
            k4=float(rec["k4"]), k5=float(rec["k5"]),
            p1=float(rec["p1"]), p2=float(rec["p2"]),
            p3=float(rec["p3"]), p4=float(rec["p4"]),
        )
        pose = CameraPose(
            position=(float(rec["x"]), float(rec["y"]), float(rec["z"])),
            omega=math.radians(float(rec["omega"])),
            phi=math.radians(float(rec["phi"])),
            kappa=math.radians(float(rec["kappa"])),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"camera record '{label}': {exc}") from exc
    return Camera(image=str(rec["image"]), intrinsics=intr, pose=pose)


def load_cameras(path) -> list:
    """Parse a camera file; returns cameras in file order."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "cameras" not in doc:
        raise DataError(f"{path}: expected a top-level 'cameras' list")
    if not isinstance(doc["cameras"], list):
        raise DataError(f"{path}: 'cameras' must be a list")
    return [_record_to_camera(rec, i) for i, rec in enumerate(doc["cameras"])]


def save_cameras(cameras, path):
    """Inverse of load_cameras; angles written back in degrees."""
    records = []
    for cam in cameras:
        i = cam.intrinsics
        p = cam.pose
        records.append({
            "image": cam.image,
            "width": i.width, "height": i.height, "f": i.f,
            "cx": i.cx, "cy": i.cy, "b1": i.b1, "b2": i.b2,
            "k1": i.k1, "k2": i.k2, "k3": i.k3, "k4": i.k4, "k5": i.k5,
            "p1": i.p1, "p2": i.p2, "p3": i.p3, "p4": i.p4,
            "x": float(p.position[0]), "y": float(p.position[1]),
            "z": float(p.position[2]),
            "omega": math.degrees(p.omega),
            "phi": math.degrees(p.phi),
            "kappa": math.degrees(p.kappa),
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"cameras": records}, fh, indent=2)
        fh.write("\n")
