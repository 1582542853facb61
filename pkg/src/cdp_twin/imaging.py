"""Image types, template generation, resolution conversion and PGM I/O.

In memory everything is a numpy array:

* a binary template ``z`` is a 2-D ``uint8`` array holding only 0 and 1,
* a gray image (``x``, ``x_hat``, ``z_tilde`` ...) is a 2-D ``float64`` array in [0, 1],
* a realization stack is a 3-D ``float64`` array of shape ``(k, height, width)``.

Quantization only happens in :func:`write_pgm`.
"""

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from cdp_twin import rng
from cdp_twin.errors import FormatError, ParameterError


def as_template(bits) -> np.ndarray:
    """Validate and return ``bits`` as a binary template array."""
    arr = np.asarray(bits)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ParameterError(f"template must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ParameterError("template values must be exactly 0 or 1")
    return arr.astype(np.uint8, copy=False)


def as_gray(pixels, *, check_range=True) -> np.ndarray:
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ParameterError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("image contains non-finite values")
    if check_range and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ParameterError("gray image values must lie in [0, 1]")
    return arr


def as_stack(images) -> np.ndarray:
    """Coerce a sequence of equally sized images (or a 3-D array) into a stack."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] == 0 or arr.shape[2] == 0:
        raise ParameterError(f"realization stack must have shape (k, h, w) with k >= 1, got {arr.shape}")
    return arr


def generate_template(width: int, height: int, density: float = 0.5, seed: int = 0, index: int = 0) -> np.ndarray:
    """Draw an i.i.d. Bernoulli(``density``) binary template.

    The result depends only on the arguments; ``index`` selects one template of a
    seeded family without having to generate its predecessors.
    """
    if int(width) <= 0 or int(height) <= 0:
        raise ParameterError(f"template dimensions must be positive, got {width}x{height}")
    if not 0.0 < float(density) < 1.0:
        raise ParameterError(f"density must lie strictly between 0 and 1, got {density}")
    gen = rng.stream(seed, "template", index)
    return (gen.random((int(height), int(width))) < density).astype(np.uint8)


def upscale(template, s: int) -> np.ndarray:
    """Replicate every pixel as an ``s`` x ``s`` block."""
    if int(s) < 1:
        raise ParameterError(f"scale must be >= 1, got {s}")
    arr = np.asarray(template)
    if arr.ndim != 2:
        raise ParameterError("upscale expects a 2-D array")
    s = int(s)
    return np.repeat(np.repeat(arr, s, axis=0), s, axis=1)


def block_mean_downscale(image, s: int) -> np.ndarray:
    if int(s) < 1:
        raise ParameterError(f"scale must be >= 1, got {s}")
    arr = np.asarray(image, dtype=np.float64)
    s = int(s)
    h, w = arr.shape
    if h % s or w % s:
        raise ParameterError(f"image {w}x{h} is not divisible by scale {s}")
    if s == 1:
        return arr.copy()
    return arr.reshape(h // s, s, w // s, s).mean(axis=(1, 3))


def block_center(image, s: int) -> np.ndarray:
    """Pick the central pixel of every ``s`` x ``s`` block (``s`` odd)."""
    arr = np.asarray(image)
    if int(s) < 1 or s % 2 == 0:
        raise ParameterError(f"central-pixel reduction needs an odd scale, got {s}")
    h, w = arr.shape[-2:]
    if h % s or w % s:
        raise ParameterError(f"image {w}x{h} is not divisible by scale {s}")
    c = s // 2
    return arr[..., c::s, c::s]


# --- PGM -----------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _header_fields(data: bytes, path):
    """Parse width, height and maxval after the magic number.

    Returns ``[(token, offset), ...]`` and the offset of the first raster byte.
    """
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < 3:
        while pos < n and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise FormatError("truncated PGM header", offset=pos, path=path)
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append((data[start:pos], start))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or data[pos] not in _WS:
        raise FormatError("missing whitespace after PGM maxval", offset=pos, path=path)
    return tokens, pos + 1


def parse_pgm(data: bytes, path=None) -> tuple[np.ndarray, int]:
    """Decode a binary (P5) PGM. Returns the image in [0, 1] and its maxval."""
    if len(data) < 2 or data[:2] != b"P5":
        raise FormatError("not a binary PGM (magic number P5 expected)", offset=0, path=path)
    tokens, payload = _header_fields(data, path)
    values = []
    for raw, off in tokens:
        if not re.fullmatch(rb"[0-9]+", raw):
            raise FormatError(f"invalid header field {raw!r}", offset=off, path=path)
        values.append(int(raw))
    width, height, maxval = values
    if width <= 0 or height <= 0:
        raise FormatError(f"invalid dimensions {width}x{height}", offset=tokens[0][1], path=path)
    if maxval not in (255, 65535):
        raise FormatError(f"unsupported maxval {maxval} (255 or 65535 expected)", offset=tokens[2][1], path=path)
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    have = len(data) - payload
    if have < need:
        raise FormatError(f"truncated raster: {have} of {need} bytes", offset=len(data), path=path)
    raster = np.frombuffer(data, dtype=dtype, count=width * height, offset=payload)
    img = raster.reshape(height, width).astype(np.float64) / maxval
    return img, maxval


def read_pgm(path) -> np.ndarray:
    path = Path(path)
    img, _ = parse_pgm(path.read_bytes(), path=path)
    return img


def encode_pgm(image, bit_depth: int = 8) -> bytes:
    if bit_depth not in (8, 16):
        raise ParameterError(f"bit depth must be 8 or 16, got {bit_depth}")
    arr = as_gray(image)
    maxval = 255 if bit_depth == 8 else 65535
    q = np.rint(arr * maxval)
    raster = q.astype(">u2" if bit_depth == 16 else "u1").tobytes()
    h, w = arr.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + raster


def write_pgm(path, image, bit_depth: int = 8) -> None:
    atomic_write_bytes(path, encode_pgm(image, bit_depth))


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
