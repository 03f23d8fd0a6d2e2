"""Binary PGM (P5) and PPM (P6) readers/writers, 8-bit only.

Saliency and ground-truth maps travel as grayscale PGM scaled to 0..255;
fixation maps are PGM with any nonzero pixel meaning "fixated"; RGB
frames travel as PPM.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError


def _read_header(blob: bytes, magic: bytes, path: Path) -> tuple[int, int, int]:
    if not blob.startswith(magic):
        raise FormatError(f"{path}: expected {magic.decode()} image")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        try:
            fields.append(int(blob[start:pos]))
        except ValueError as exc:
            raise FormatError(f"{path}: bad header token {blob[start:pos]!r}") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit (maxval 255) images supported")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid size {width}x{height}")
    return width, height, pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Grayscale image as float32 [H,W] scaled to [0,1]."""
    path = Path(path)
    blob = path.read_bytes()
    width, height, pos = _read_header(blob, b"P5", path)
    need = width * height
    data = blob[pos : pos + need]
    if len(data) != need:
        raise FormatError(f"{path}: payload holds {len(data)} bytes, needs {need}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).astype(np.float32) / 255.0


def read_pgm_mask(path: str | Path) -> np.ndarray:
    """Fixation mask: nonzero pixel = fixated."""
    path = Path(path)
    blob = path.read_bytes()
    width, height, pos = _read_header(blob, b"P5", path)
    need = width * height
    data = blob[pos : pos + need]
    if len(data) != need:
        raise FormatError(f"{path}: payload holds {len(data)} bytes, needs {need}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width) > 0


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Write a [H,W] float map in [0,1] as 8-bit grayscale."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"PGM needs a 2-D map, got shape {arr.shape}")
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(q.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """RGB image as float32 [3,H,W] scaled to [0,1]."""
    path = Path(path)
    blob = path.read_bytes()
    width, height, pos = _read_header(blob, b"P6", path)
    need = width * height * 3
    data = blob[pos : pos + need]
    if len(data) != need:
        raise FormatError(f"{path}: payload holds {len(data)} bytes, needs {need}")
    hwc = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(hwc.transpose(2, 0, 1)).astype(np.float32) / 255.0


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """Write a [3,H,W] float image in [0,1] as 8-bit RGB."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise FormatError(f"PPM needs a [3,H,W] image, got shape {arr.shape}")
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    hwc = np.ascontiguousarray(q.transpose(1, 2, 0))
    h, w = hwc.shape[:2]
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(hwc.tobytes())
