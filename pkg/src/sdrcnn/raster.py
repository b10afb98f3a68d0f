"""Binary raster container and checkpoint files.

Raster layout: magic "MSR1", version u16, bands u16, height u32, width u32,
dtype code u8 (0 = float64, 1 = float32), 3 reserved bytes, then the
payload little-endian in band-major, row-major order.  Checkpoints are a
UTF-8 manifest (config lines plus one line per tensor) followed by the
tensors as concatenated raster blobs.  All writes go through a temp file
and an atomic rename.
"""
from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import RasterFormatError

_MAGIC = b"MSR1"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIIB3x")
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def raster_bytes(raster: np.ndarray, dtype=None) -> bytes:
    arr = np.asarray(raster)
    if arr.ndim != 3:
        raise RasterFormatError(f"raster must be (bands, h, w), got shape {arr.shape}")
    if dtype is None:
        dtype = np.float32 if arr.dtype == np.float32 else np.float64
    dtype = np.dtype(dtype)
    if dtype not in _CODES:
        raise RasterFormatError(f"unsupported dtype {dtype}; use float64 or float32")
    b, h, w = arr.shape
    if b > 0xFFFF:
        raise RasterFormatError(f"too many bands for the container: {b}")
    header = _HEADER.pack(_MAGIC, _VERSION, b, h, w, _CODES[dtype])
    payload = np.ascontiguousarray(arr, dtype=dtype.newbyteorder("<")).tobytes()
    return header + payload


def write_raster(raster: np.ndarray, path, dtype=None) -> None:
    atomic_write_bytes(path, raster_bytes(raster, dtype))


def raster_from_bytes(data: bytes, offset: int = 0):
    """Parse one raster blob; returns (array, bytes consumed)."""
    if len(data) - offset < _HEADER.size:
        raise RasterFormatError("unexpected end of file: header truncated")
    magic, version, b, h, w, code = _HEADER.unpack_from(data, offset)
    if magic != _MAGIC:
        raise RasterFormatError(f"not a raster file: bad magic {magic!r}")
    if version != _VERSION:
        raise RasterFormatError(f"unsupported raster version {version}")
    if code not in _DTYPES:
        raise RasterFormatError(f"unknown dtype code {code}")
    dtype = _DTYPES[code]
    need = b * h * w * dtype.itemsize
    start = offset + _HEADER.size
    if len(data) - start < need:
        raise RasterFormatError("unexpected end of file: payload truncated")
    arr = np.frombuffer(data, dtype=dtype, count=b * h * w, offset=start)
    return arr.reshape(b, h, w).copy(), _HEADER.size + need


def read_raster(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    arr, consumed = raster_from_bytes(data)
    if consumed != len(data):
        raise RasterFormatError(f"trailing bytes after payload: {len(data) - consumed}")
    return arr


# ------------------------------------------------------------------ checkpoint

_CKPT_HEAD = "SDRCNN-CKPT 1"


def save_checkpoint(params, path, extra: dict | None = None) -> None:
    """Serialize an SdrcnnParams: manifest lines, then one raster blob per
    tensor (learnables and batch-norm buffers), float64, bit-exact."""
    cfg = params.config
    lines = [_CKPT_HEAD]
    for key in ("bands", "width", "expansion", "n_residual_blocks", "kernel", "upsample_factor"):
        lines.append(f"cfg {key}={getattr(cfg, key)}")
    lines.append(f"cfg use_bn={'true' if params.use_bn else 'false'}")
    for key, val in (extra or {}).items():
        text = str(val)
        if "\n" in text or " " in str(key):
            raise ValueError(f"checkpoint metadata {key!r} must be single-line, simple text")
        lines.append(f"meta {key}={text}")

    blobs = []
    for name, tensor in params.named().items():
        d0, d1, d2, d3 = tensor.shape
        blob = raster_bytes(tensor.data.reshape(d0 * d1, d2, d3), np.float64)
        lines.append(f"tensor {name} {d0} {d1} {d2} {d3} {len(blob)}")
        blobs.append(blob)
    for name, buf in params.buffers().items():
        blob = raster_bytes(buf.reshape(1, 1, buf.size), np.float64)
        lines.append(f"buffer {name} {buf.size} {len(blob)}")
        blobs.append(blob)
    lines.append("end")
    manifest = ("\n".join(lines) + "\n").encode("utf-8")
    atomic_write_bytes(path, manifest + b"".join(blobs))


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise RasterFormatError(f"bad boolean {text!r} in checkpoint")
    return text == "true"


def load_checkpoint(path):
    """Returns (SdrcnnParams, meta dict)."""
    from .model import SdrcnnConfig, init_params

    with open(path, "rb") as fh:
        data = fh.read()
    end_mark = b"\nend\n"
    cut = data.find(end_mark)
    if cut < 0 or not data.startswith(_CKPT_HEAD.encode()):
        raise RasterFormatError("not a checkpoint file")
    lines = data[:cut].decode("utf-8").splitlines()[1:]
    blob_data = data[cut + len(end_mark):]

    cfg_fields: dict = {}
    meta: dict = {}
    records = []
    for line in lines:
        kind, _, rest = line.partition(" ")
        if kind == "cfg":
            key, _, val = rest.partition("=")
            cfg_fields[key] = val
        elif kind == "meta":
            key, _, val = rest.partition("=")
            meta[key] = val
        elif kind in ("tensor", "buffer"):
            parts = rest.split(" ")
            records.append((kind, parts[0], [int(p) for p in parts[1:]]))
        else:
            raise RasterFormatError(f"unknown checkpoint record {kind!r}")

    try:
        use_bn = _parse_bool(cfg_fields.pop("use_bn"))
        config = SdrcnnConfig(**{k: int(v) for k, v in cfg_fields.items()})
    except (KeyError, TypeError, ValueError) as exc:
        raise RasterFormatError(f"bad checkpoint config: {exc}") from exc
    params = init_params(config, np.random.default_rng(0), bn=use_bn)

    named = params.named()
    buffers = params.buffers()
    offset = 0
    seen = set()
    for kind, name, nums in records:
        nbytes = nums[-1]
        arr, consumed = raster_from_bytes(blob_data, offset)
        if consumed != nbytes:
            raise RasterFormatError(f"blob size mismatch for {name}")
        offset += consumed
        seen.add(name)
        if kind == "tensor":
            if name not in named:
                raise RasterFormatError(f"unknown tensor {name!r} in checkpoint")
            shape = tuple(nums[:4])
            named[name].data = np.ascontiguousarray(arr.astype(np.float64).reshape(shape))
        else:
            if name not in buffers:
                raise RasterFormatError(f"unknown buffer {name!r} in checkpoint")
            buffers[name][:] = arr.ravel()
    missing = (set(named) | set(buffers)) - seen
    if missing:
        raise RasterFormatError(f"checkpoint is missing tensors: {sorted(missing)}")
    return params, meta
