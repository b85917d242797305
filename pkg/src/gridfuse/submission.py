"""Submission archives: one flat uint8 label vector per zone, zipped.

Entries are standard NPY payloads (format 1.0, little-endian) named
"<zone>.npy", stored uncompressed with zeroed timestamps and written in
sorted zone order, so the same labels always produce the same bytes.  numpy
reads the result as a regular NPZ.
"""

import io
import zipfile
from importlib import resources

import numpy as np

from .errors import DataError, ValidationError

__all__ = [
    "write_submission",
    "read_submission",
    "validate_labels",
    "load_zone_assignment",
    "default_zone_assignment",
    "zones_for_subset",
]

_EPOCH = (1980, 1, 1, 0, 0, 0)          # zip cannot store anything earlier


def validate_labels(zone: str, arr, n_classes: int = 11):
    """Check one zone's vector: 1-D uint8, values in [0, K) or 255."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValidationError(
            f"zone '{zone}': labels must be uint8, got {arr.dtype}"
        )
    if arr.ndim != 1:
        raise ValidationError(
            f"zone '{zone}': labels must be 1-D, got shape {arr.shape}"
        )
    if arr.size:
        bad = ~((arr < n_classes) | (arr == 255))
        if bad.any():
            raise ValidationError(
                f"zone '{zone}': label {int(arr[np.argmax(bad)])} outside "
                f"[0, {n_classes}) and not 255"
            )
    return arr


def write_submission(labels_by_zone, path, n_classes: int = 11,
                     expected_zones=None):
    """Write a deterministic archive; point order is preserved verbatim."""
    if expected_zones is not None:
        missing = sorted(set(expected_zones) - set(labels_by_zone))
        extra = sorted(set(labels_by_zone) - set(expected_zones))
        if missing:
            raise ValidationError(f"missing zones: {', '.join(missing)}")
        if extra:
            raise ValidationError(f"unexpected zones: {', '.join(extra)}")
    for zone, arr in labels_by_zone.items():
        validate_labels(zone, arr, n_classes)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for zone in sorted(labels_by_zone):
            buf = io.BytesIO()
            arr = np.ascontiguousarray(labels_by_zone[zone], dtype="<u1")
            np.lib.format.write_array(buf, arr, version=(1, 0))
            info = zipfile.ZipInfo(f"{zone}.npy", date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_STORED
            zf.writestr(info, buf.getvalue())


def read_submission(path, expected_zones=None, n_classes: int = 11) -> dict:
    """Read and validate an archive; returns {zone: uint8 labels}."""
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise ValidationError(f"{path}: not a readable zip archive ({exc})") from exc
    out = {}
    with zf:
        for name in zf.namelist():
            if not name.endswith(".npy"):
                raise ValidationError(f"{path}: unexpected entry '{name}'")
            zone = name[:-4]
            try:
                with zf.open(name) as fh:
                    arr = np.lib.format.read_array(fh)
            except ValueError as exc:
                raise ValidationError(
                    f"{path}: entry '{name}' is not a valid array ({exc})"
                ) from exc
            out[zone] = validate_labels(zone, arr, n_classes)
    if expected_zones is not None:
        missing = sorted(set(expected_zones) - set(out))
        extra = sorted(set(out) - set(expected_zones))
        if missing:
            raise ValidationError(f"{path}: missing zones: {', '.join(missing)}")
        if extra:
            raise ValidationError(f"{path}: unexpected zones: {', '.join(extra)}")
    return out


# ---------------------------------------------------------------------------
# zone assignment tables

def load_zone_assignment(path) -> dict:
    """Parse 'zone subset' lines; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'zone subset'")
            zone, subset = parts
            if subset not in ("train", "val", "test"):
                raise DataError(
                    f"{path}:{lineno}: unknown subset '{subset}'"
                )
            if zone in out:
                raise DataError(f"{path}:{lineno}: duplicate zone '{zone}'")
            out[zone] = subset
    if not out:
        raise DataError(f"{path}: no zone assignments found")
    return out


def default_zone_assignment() -> dict:
    ref = resources.files("gridfuse").joinpath("data/zones.txt")
    with resources.as_file(ref) as path:
        return load_zone_assignment(path)


def zones_for_subset(assignment: dict, subset: str) -> list:
    return sorted(z for z, s in assignment.items() if s == subset)
