"""Binary I/Q capture files and their JSON sidecars.

Layout (all little-endian):

    header  magic "VPHY" (4 bytes) | version u16 | flags u16 |
            sample_rate_per_ms u32 | sample_count u64
    body    interleaved float32 I0, Q0, I1, Q1, ...

In-memory processing is double precision; the file body is float32, so a
write/read round trip reproduces the float32-cast values bit-exactly.

A capture ``name.vphy`` may carry a sidecar ``name.meta.json`` holding the
channel config, labels, and embedding ground truth.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .baseband import IqStream

MAGIC = b"VPHY"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIQ")


class CaptureFormatError(ValueError):
    """Raised for bad magic, unsupported version, or truncated bodies."""


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def write_capture(path, stream: IqStream, flags: int = 0,
                  sidecar: dict | None = None) -> None:
    p = Path(path)
    interleaved = np.empty(2 * len(stream), dtype="<f4")
    interleaved[0::2] = stream.samples.real
    interleaved[1::2] = stream.samples.imag
    with open(p, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, flags, stream.sample_rate, len(stream)))
        f.write(interleaved.tobytes())
    if sidecar is not None:
        sidecar_path(p).write_text(json.dumps(sidecar, indent=2))


def read_capture(path) -> tuple[IqStream, dict | None]:
    """Read a capture; returns the stream and its sidecar dict if present."""
    p = Path(path)
    raw = p.read_bytes()
    if len(raw) < _HEADER.size:
        raise CaptureFormatError(f"{p}: file shorter than header")
    magic, version, _flags, rate, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CaptureFormatError(f"{p}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CaptureFormatError(f"{p}: unsupported format version {version}")
    expected = _HEADER.size + 8 * count
    if len(raw) < expected:
        raise CaptureFormatError(f"{p}: body truncated ({len(raw)} < {expected} bytes)")
    body = np.frombuffer(raw, dtype="<f4", count=2 * count, offset=_HEADER.size)
    samples = body[0::2].astype(np.float64) + 1j * body[1::2].astype(np.float64)
    stream = IqStream(samples, sample_rate=rate)
    meta = sidecar_path(p)
    sidecar = json.loads(meta.read_text()) if meta.exists() else None
    return stream, sidecar


def read_header(path) -> dict:
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CaptureFormatError(f"{path}: file shorter than header")
    magic, version, flags, rate, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CaptureFormatError(f"{path}: bad magic {magic!r}")
    return {
        "version": version,
        "flags": flags,
        "sample_rate_per_ms": rate,
        "sample_count": count,
    }
