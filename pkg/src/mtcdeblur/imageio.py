"""Binary PGM (P5, 8-bit) and lossless raw float64 grid files.

Raw layout: little-endian ``uint32 width, uint32 height`` followed by
``width * height`` little-endian float64 values in row-major order.
"""

import re

import numpy as np

_RAW_HEADER = np.dtype([("width", "<u4"), ("height", "<u4")])


def write_raw(path, image):
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("raw grids are 2-D")
    h, w = image.shape
    with open(path, "wb") as fh:
        np.array([(w, h)], dtype=_RAW_HEADER).tofile(fh)
        image.astype("<f8").tofile(fh)


def read_raw(path):
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype=_RAW_HEADER, count=1)
        if header.size != 1:
            raise ValueError(f"{path}: truncated header")
        w, h = int(header["width"][0]), int(header["height"][0])
        values = np.fromfile(fh, dtype="<f8", count=w * h)
    if values.size != w * h:
        raise ValueError(f"{path}: expected {w * h} values, found {values.size}")
    return values.reshape(h, w).astype(float)


def write_pgm(path, image, scale=None):
    """Write an 8-bit binary PGM; values are rounded and clipped to [0, 255].

    With ``scale="minmax"`` the image is first stretched to the full range.
    """
    image = np.asarray(image, dtype=float)
    if scale == "minmax":
        lo, hi = image.min(), image.max()
        image = (image - lo) * (255.0 / (hi - lo)) if hi > lo else np.zeros_like(image)
    data = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    """Read a binary 8-bit PGM into a float array (no quantization afterwards)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 0
    token_re = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")
    while len(tokens) < 4:
        m = token_re.match(blob, pos)
        if m is None:
            raise ValueError(f"{path}: malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).astype(float)


def read_image(path):
    """Dispatch on extension: ``.pgm`` or raw float grid otherwise."""
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_raw(path)
