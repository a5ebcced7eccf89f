"""Deterministic file output: JSON, CSV and a minimal grayscale PNG encoder."""

from __future__ import annotations

import csv
import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np


def sanitize(obj):
    """Make obj strict-JSON friendly: non-finite floats become None, arrays lists."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    text = json.dumps(sanitize(obj), indent=2, sort_keys=True, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_points_csv(path, points: np.ndarray) -> Path:
    """One point per row; the point at infinity is written as inf in every column."""
    header = [f"x{i + 1}" for i in range(points.shape[1])]
    return write_csv(path, header, points.tolist())


def _png_chunk(kind: bytes, data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + kind + data + \
        struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)


def encode_png_gray(image: np.ndarray) -> bytes:
    """8-bit grayscale PNG of a 2-D uint8 array (row 0 at the top)."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("grayscale image must be 2-D")
    h, w = img.shape
    raw = b"".join(b"\x00" + img[r].tobytes() for r in range(h))
    header = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + _png_chunk(b"IHDR", header)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9)) + _png_chunk(b"IEND", b""))


def write_png_gray(path, image: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(encode_png_gray(image))
    return path


def rasterize(points: np.ndarray, size: int = 512, window=None) -> tuple[np.ndarray, tuple]:
    """Black dots on white for the finite points of a planar cloud.

    ``window`` is (xmin, xmax, ymin, ymax); by default the padded bounding
    square of the finite points.
    """
    pts = points[np.isfinite(points).all(axis=1)]
    if window is None:
        if pts.shape[0] == 0:
            window = (-1.0, 1.0, -1.0, 1.0)
        else:
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            center, half = (lo + hi) / 2, max(float((hi - lo).max()) / 2, 1e-9) * 1.05
            window = (center[0] - half, center[0] + half, center[1] - half, center[1] + half)
    xmin, xmax, ymin, ymax = window
    img = np.full((size, size), 255, dtype=np.uint8)
    col = np.floor((pts[:, 0] - xmin) / (xmax - xmin) * size).astype(int)
    row = np.floor((ymax - pts[:, 1]) / (ymax - ymin) * size).astype(int)
    ok = (col >= 0) & (col < size) & (row >= 0) & (row < size)
    img[row[ok], col[ok]] = 0
    return img, tuple(float(v) for v in window)
