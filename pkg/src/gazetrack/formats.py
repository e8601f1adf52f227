"""PFM / PGM / PPM encoding, gaze CSV ingestion and atomic file output.

Float maps are single-channel little-endian PFM (``Pf``, scale ``-1.0``,
rows stored bottom-up).  Masks and previews are 8-bit binary PGM (``P5``).
"""

from __future__ import annotations

import csv
import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import AmbiguousOrder, FormatError, InvalidParameter, ParseError
from .grid import FixationPoint, GazeRecord, GridShape, check_mask

GAZE_HEADER = ("image_id", "x", "y", "duration_ms", "start_ms")
_PNM_HEADER = re.compile(rb"^P([56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def encode_pfm(values) -> bytes:
    arr = np.asarray(values)
    if arr.ndim == 3 and arr.shape[-1] == 3:
        tag = b"PF"
    elif arr.ndim == 2:
        tag = b"Pf"
    else:
        raise FormatError(f"PFM holds (H, W) or (H, W, 3) arrays, got {arr.shape}")
    h, w = arr.shape[:2]
    payload = np.ascontiguousarray(np.flipud(arr), dtype="<f4").tobytes()
    return b"%s\n%d %d\n-1.0\n" % (tag, w, h) + payload


def decode_pfm(data: bytes) -> np.ndarray:
    """Decode a PFM file into float64, top row first."""
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] not in (b"PF", b"Pf"):
        raise FormatError("not a PFM file (bad magic number)")
    channels = 3 if parts[0] == b"PF" else 1
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2])
    except ValueError as exc:
        raise FormatError(f"malformed PFM header: {exc}") from None
    if w < 1 or h < 1 or scale == 0:
        raise FormatError("malformed PFM header")
    dtype = "<f4" if scale < 0 else ">f4"
    if channels == 3 and len(parts[3]) == 4 * w * h:
        channels = 1  # single-channel payload mislabelled as colour
    n = w * h * channels
    if len(parts[3]) != 4 * n:
        raise FormatError(f"PFM payload has {len(parts[3])} bytes, expected {4 * n}")
    arr = np.frombuffer(parts[3], dtype=dtype).astype(np.float64)
    arr = arr.reshape((h, w, channels) if channels == 3 else (h, w))
    return np.flipud(arr).copy()


def encode_pgm(values) -> bytes:
    """8-bit PGM of a uint8 array; boolean masks map to {0, 255}."""
    arr = np.asarray(values)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise FormatError(f"PGM needs a 2-D uint8 or bool array, got {arr.dtype} {arr.shape}")
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def encode_ppm(values) -> bytes:
    arr = np.asarray(values)
    if arr.ndim != 3 or arr.shape[-1] != 3 or arr.dtype != np.uint8:
        raise FormatError(f"PPM needs an (H, W, 3) uint8 array, got {arr.dtype} {arr.shape}")
    h, w = arr.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + arr.tobytes()


def decode_pnm(data: bytes) -> np.ndarray:
    """Decode binary PGM (``P5``) or PPM (``P6``) with maxval <= 255."""
    m = _PNM_HEADER.match(data)
    if m is None:
        raise FormatError("not a binary PGM/PPM file (bad magic number or header)")
    kind, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if not 0 < maxval <= 255 or w < 1 or h < 1:
        raise FormatError(f"unsupported PGM/PPM header (maxval {maxval})")
    channels = 3 if kind == b"6" else 1
    payload = data[m.end():]
    n = w * h * channels
    if len(payload) != n:
        raise FormatError(f"PGM/PPM payload has {len(payload)} bytes, expected {n}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    return arr.reshape((h, w, 3) if channels == 3 else (h, w)).copy()


def decode_mask(data: bytes) -> np.ndarray:
    arr = decode_pnm(data)
    if arr.ndim != 2:
        raise FormatError("mask must be a single-channel PGM")
    return arr > 127


def mask_to_pgm(mask) -> bytes:
    return encode_pgm(check_mask(mask))


def preview_to_pgm(values) -> bytes:
    """Quantize a [0, 1] map to an 8-bit preview."""
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return encode_pgm(np.floor(arr * 255.0 + 0.5).astype(np.uint8))


def intensity_from_pnm(data: bytes) -> np.ndarray:
    """8-bit PGM/PPM image as [0, 1] float64 intensities."""
    return decode_pnm(data).astype(np.float64) / 255.0


def write_map(path, values):
    atomic_write(path, encode_pfm(values))


def read_map(path) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())


def read_image(path) -> np.ndarray:
    return intensity_from_pnm(Path(path).read_bytes())


def atomic_write(path, data: bytes):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_gaze_log(data, shape=GridShape(224, 224), shapes=None) -> list[GazeRecord]:
    """Parse a gaze CSV into one record per image, in first-appearance order.

    ``shapes`` optionally maps image ids to their grid; other ids use
    ``shape``.  Fixations stay in file order.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"gaze log is not UTF-8: {exc}") from None
    reader = csv.reader(io.StringIO(data))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != GAZE_HEADER:
        raise FormatError(f"gaze log header must be {','.join(GAZE_HEADER)}")
    rows: dict[str, list[FixationPoint]] = {}
    seen: set[tuple[str, float]] = set()
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(GAZE_HEADER):
            raise ParseError(f"line {line}: expected {len(GAZE_HEADER)} fields, got {len(row)}", line)
        image_id = row[0].strip()
        if not image_id:
            raise ParseError(f"line {line}: empty image_id", line)
        try:
            x, y, dur, start = (float(c) for c in row[1:])
        except ValueError:
            raise ParseError(f"line {line}: non-numeric field", line) from None
        grid = GridShape(*(shapes or {}).get(image_id, shape))
        try:
            fix = FixationPoint(x, y, dur, start)
        except InvalidParameter as exc:
            raise ParseError(f"line {line}: {exc}", line) from None
        if not (0 <= x < grid.width and 0 <= y < grid.height):
            raise ParseError(f"line {line}: fixation ({x}, {y}) outside {grid.width}x{grid.height}", line)
        if (image_id, start) in seen:
            raise AmbiguousOrder(f"line {line}: duplicate start_ms {start} for {image_id!r}", line)
        seen.add((image_id, start))
        rows.setdefault(image_id, []).append(fix)
    return [
        GazeRecord(image_id, GridShape(*(shapes or {}).get(image_id, shape)), tuple(fixes))
        for image_id, fixes in rows.items()
    ]


def format_gaze_log(records) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(GAZE_HEADER)
    for rec in records:
        for f in rec.fixations:
            writer.writerow([rec.image_id, repr(f.x), repr(f.y), repr(f.duration), repr(f.start_ts)])
    return out.getvalue()
