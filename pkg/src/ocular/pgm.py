"""Binary PGM (P5) reading and writing, 8-bit only."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imgcore import as_gray


class PgmError(ValueError):
    pass


def _tokens(buf: bytes, pos: int, count: int):
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError("truncated PGM header")
        out.append(buf[start:pos])
    return out, pos


def decode_pgm(buf: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _tokens(buf, 0, 4)
    if magic != b"P5":
        raise PgmError(f"not a binary PGM (magic {magic!r})")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PgmError("malformed PGM header") from exc
    if maxval != 255:
        raise PgmError(f"only 8-bit PGM (maxval 255) is supported, got {maxval}")
    if w < 1 or h < 1:
        raise PgmError("empty PGM")
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    data = buf[pos:pos + w * h]
    if len(data) != w * h:
        raise PgmError("truncated PGM raster")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()


def encode_pgm(img) -> bytes:
    img = as_gray(img)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, img) -> None:
    Path(path).write_bytes(encode_pgm(img))
