"""Run manifests: what ran, with which parameters, on which input bytes."""

import datetime
import hashlib
import json
import os

from . import __version__

__all__ = ["sha256_file", "write_manifest", "load_manifest", "manifests_equal"]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, parameters: dict, inputs):
    """Drop manifest.json into out_dir; inputs are hashed by content."""
    digests = {}
    for p in inputs:
        p = str(p)
        if os.path.isdir(p):
            for root, dirs, files in os.walk(p):
                dirs.sort()
                for f in sorted(files):
                    fp = os.path.join(root, f)
                    digests[fp] = sha256_file(fp)
        else:
            digests[p] = sha256_file(p)
    doc = {
        "tool": "gridfuse",
        "version": __version__,
        "command": command,
        "parameters": parameters,
        "inputs": digests,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def manifests_equal(a: dict, b: dict) -> bool:
    """Equality modulo the creation timestamp."""
    sa = {k: v for k, v in a.items() if k != "created"}
    sb = {k: v for k, v in b.items() if k != "created"}
    return sa == sb
