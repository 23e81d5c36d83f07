"""Field serialization: human-readable JSON and a compact binary checkpoint.

JSON: {"format": "specvort-field", "version": 1, "max_mode": M,
       "modes": [[kx, ky, kz, re1, im1, re2, im2, re3, im3], ...]}.

Binary: little-endian; 8-byte magic "SVFIELD\\0", then uint32 version,
uint32 max_mode, uint64 mode count n, then n int32 triples, then n
complex128 3-vectors (as 6 float64 each).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .field import ModeSet, SpectralField, mode_set

MAGIC = b"SVFIELD\x00"
BINARY_VERSION = 1
JSON_VERSION = 1


def _place(ms: ModeSet, modes: np.ndarray, coeff: np.ndarray) -> SpectralField:
    idx = ms.index_of(modes)
    if np.any(idx < 0):
        raise ValueError("stored mode outside the declared truncation")
    f = SpectralField.zero(ms)
    f.coeff[idx] = coeff
    return f


def field_to_json(f: SpectralField) -> str:
    rows = np.concatenate(
        [f.ms.modes.astype(np.float64),
         f.coeff.view(np.float64).reshape(f.ms.n, 6)], axis=1)
    return json.dumps({"format": "specvort-field", "version": JSON_VERSION,
                       "max_mode": f.ms.max_mode, "modes": rows.tolist()})


def field_from_json(text: str) -> SpectralField:
    doc = json.loads(text)
    if doc.get("format") != "specvort-field":
        raise ValueError("not a field document")
    if doc.get("version") != JSON_VERSION:
        raise ValueError(f"unsupported field-JSON version {doc.get('version')!r}")
    rows = np.asarray(doc["modes"], dtype=np.float64).reshape(-1, 9)
    modes = rows[:, :3].astype(np.int64)
    coeff = rows[:, 3:].copy().view(np.complex128)
    return _place(mode_set(int(doc["max_mode"])), modes, coeff)


def field_to_bytes(f: SpectralField) -> bytes:
    head = MAGIC + struct.pack("<IIQ", BINARY_VERSION, f.ms.max_mode, f.ms.n)
    return (head
            + f.ms.modes.astype("<i4").tobytes()
            + f.coeff.astype("<c16").tobytes())


def field_from_bytes(buf: bytes) -> SpectralField:
    if buf[:8] != MAGIC:
        raise ValueError("bad magic; not a field checkpoint")
    version, max_mode, n = struct.unpack_from("<IIQ", buf, 8)
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 8 + 16
    modes = np.frombuffer(buf, dtype="<i4", count=3 * n, offset=off)
    modes = modes.astype(np.int64).reshape(n, 3)
    off += 12 * n
    coeff = np.frombuffer(buf, dtype="<c16", count=3 * n, offset=off)
    coeff = coeff.astype(np.complex128).reshape(n, 3)
    return _place(mode_set(int(max_mode)), modes, coeff)
