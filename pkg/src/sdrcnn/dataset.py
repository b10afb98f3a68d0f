"""Dataset directory layout.

One raster file per patch role plus a line-based UTF-8 manifest:

    # sdrcnn dataset 1
    <id>\t<role>\t<relative path>\t<norm min>\t<norm max>\t<split>

Roles are pan/lrms/gt; the normalization min/max are the per-scene values
recorded by the Wald pipeline (PAN normalization for the pan role, MS
normalization for lrms and gt).
"""
from __future__ import annotations

import hashlib
import os

from .errors import RasterFormatError
from .raster import atomic_write_bytes, read_raster, write_raster
from .wald import DatasetSplit, SamplePair

_HEAD = "# sdrcnn dataset 1"
_ROLES = ("pan", "lrms", "gt")


def save_dataset(samples, split: DatasetSplit, directory) -> str:
    """Write every sample and the manifest; returns the manifest path."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    membership = {}
    for name in ("train", "val", "test"):
        for sid in getattr(split, name):
            membership[sid] = name
    lines = [_HEAD]
    for sample in samples:
        if sample.id not in membership:
            raise ValueError(f"sample {sample.id} missing from the split")
        part = membership[sample.id]
        for role in _ROLES:
            arr = getattr(sample, role)
            rel = f"{sample.id}_{role}.msr"
            write_raster(arr, os.path.join(directory, rel))
            if role == "pan":
                lo, hi = sample.norm.get("pan_min", 0.0), sample.norm.get("pan_max", 1.0)
            else:
                lo, hi = sample.norm.get("ms_min", 0.0), sample.norm.get("ms_max", 1.0)
            lines.append(f"{sample.id}\t{role}\t{rel}\t{lo!r}\t{hi!r}\t{part}")
    lines.append(f"# seed {split.seed}")
    path = os.path.join(directory, "manifest.txt")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return path


def load_dataset(directory):
    """Returns ({id: SamplePair}, DatasetSplit)."""
    directory = os.fspath(directory)
    path = os.path.join(directory, "manifest.txt")
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise RasterFormatError(f"cannot read dataset manifest: {exc}") from exc
    if not lines or lines[0] != _HEAD:
        raise RasterFormatError(f"{path} is not a dataset manifest")

    seed = 0
    rows = []
    for line in lines[1:]:
        if not line or line.startswith("#"):
            if line.startswith("# seed "):
                seed = int(line.split()[-1])
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise RasterFormatError(f"malformed manifest line: {line!r}")
        rows.append(parts)

    samples: dict = {}
    membership: dict = {}
    for sid, role, rel, lo, hi, part in rows:
        if role not in _ROLES:
            raise RasterFormatError(f"unknown role {role!r} in manifest")
        entry = samples.setdefault(sid, {"norm": {}})
        entry[role] = read_raster(os.path.join(directory, rel))
        key = "pan" if role == "pan" else "ms"
        entry["norm"][f"{key}_min"] = float(lo)
        entry["norm"][f"{key}_max"] = float(hi)
        membership[sid] = part

    pairs = {}
    for sid, entry in samples.items():
        missing = [r for r in _ROLES if r not in entry]
        if missing:
            raise RasterFormatError(f"sample {sid} is missing roles {missing}")
        pairs[sid] = SamplePair(id=sid, pan=entry["pan"], lrms=entry["lrms"],
                                gt=entry["gt"], norm=entry["norm"])

    # preserve manifest order, one entry per id
    ordered_ids = []
    for sid, *_ in rows:
        if sid not in ordered_ids:
            ordered_ids.append(sid)
    split = DatasetSplit(
        train=[s for s in ordered_ids if membership[s] == "train"],
        val=[s for s in ordered_ids if membership[s] == "val"],
        test=[s for s in ordered_ids if membership[s] == "test"],
        seed=seed,
    ).validate()
    return pairs, split


def manifest_hash(directory) -> str:
    """Git-style blob SHA-1 of the manifest file."""
    path = os.path.join(os.fspath(directory), "manifest.txt")
    with open(path, "rb") as fh:
        data = fh.read()
    h = hashlib.sha1()
    h.update(b"blob %d\x00" % len(data))
    h.update(data)
    return h.hexdigest()
