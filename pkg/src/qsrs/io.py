"""CSV, binary trace and PGM/PPM readers and writers.

All writers go through a temporary file in the target directory followed
by a rename, so an output either exists completely or not at all.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import UsageError

TRACE_MAGIC = b"QTR1"
_HEADER = struct.Struct("<4sdI")  # magic, sample rate, length: 16 bytes


def _file_mode():
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


def atomic_write(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, _file_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write(path, csv_text(header, rows))


def read_csv(path, columns):
    """Read a headed numeric CSV and return the named columns as float arrays.

    Errors carry the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    lines = text.splitlines()
    if not lines:
        raise UsageError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in columns if c not in header]
    if missing:
        raise UsageError(f"{path}:1: missing column(s) {', '.join(missing)}")
    idx = [header.index(c) for c in columns]
    out = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise UsageError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            vals = [float(parts[i]) for i in idx]
        except ValueError:
            raise UsageError(f"{path}:{lineno}: non-numeric value") from None
        if not all(np.isfinite(vals)):
            raise UsageError(f"{path}:{lineno}: non-finite value")
        out.append(vals)
    if not out:
        raise UsageError(f"{path}: no data rows")
    arr = np.array(out)
    return tuple(arr[:, k] for k in range(len(columns)))


def write_trace_binary(path, samples, sample_rate):
    x = np.ascontiguousarray(samples, dtype="<f8")
    return atomic_write(path, _HEADER.pack(TRACE_MAGIC, float(sample_rate), x.size) + x.tobytes())


def read_trace_binary(path):
    """Returns ``(samples, sample_rate)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise UsageError(f"{path}: truncated header")
    magic, rate, n = _HEADER.unpack_from(data)
    if magic != TRACE_MAGIC:
        raise UsageError(f"{path}: not a trace file")
    body = data[_HEADER.size:]
    if len(body) != 8 * n:
        raise UsageError(f"{path}: header says {n} samples, file holds {len(body) / 8:g}")
    return np.frombuffer(body, dtype="<f8").copy(), rate


def _to_u16(img):
    img = np.asarray(img, dtype=float)
    if img.size and (np.nanmin(img) < 0 or np.nanmax(img) > 1):
        raise UsageError("image values must lie in [0, 1]")
    return np.round(np.nan_to_num(img) * 65535).astype(">u2")


def write_pgm(path, img):
    """16-bit binary PGM from values in [0, 1]."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise UsageError("PGM needs a 2-D image")
    h, w = img.shape
    return atomic_write(path, f"P5\n{w} {h}\n65535\n".encode() + _to_u16(img).tobytes())


def write_ppm(path, rgb):
    """16-bit binary PPM from an (h, w, 3) array in [0, 1]."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise UsageError("PPM needs an (h, w, 3) image")
    h, w, _ = rgb.shape
    return atomic_write(path, f"P6\n{w} {h}\n65535\n".encode() + _to_u16(rgb).tobytes())


def read_pnm(path):
    """Read a 16-bit P5/P6 file back to floats in [0, 1]."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode())
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in ("P5", "P6") or maxval != 65535:
        raise UsageError(f"{path}: unsupported image format")
    ch = 3 if magic == "P6" else 1
    arr = np.frombuffer(data[pos:], dtype=">u2", count=w * h * ch).astype(float) / 65535
    return arr.reshape((h, w, 3) if ch == 3 else (h, w))
