"""
Image file readers/writers.

Supported: binary PGM (P5) and PPM (P6) with maxval 255, mapped to [0,1] by
v/255, and the raw ``IMGF`` format: a 16-byte little-endian header
(magic, u32 height, u32 width, u32 channels) followed by float64 samples.
"""

import struct

import numpy as np

from ..core import Image
from ..errors import ShapeError

RAW_MAGIC = b"IMGF"
_RAW_HEADER = struct.Struct("<4sIII")


def _netpbm_tokens(buf, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ShapeError("truncated netpbm header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_netpbm(buf):
    tokens, offset = _netpbm_tokens(buf, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ShapeError(f"unsupported netpbm magic {magic!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ShapeError(f"only 8-bit netpbm files are supported (maxval {maxval})")
    channels = 1 if magic == b"P5" else 3
    n = width * height * channels
    raster = np.frombuffer(buf, dtype=np.uint8, count=n, offset=offset)
    return Image(height, width, channels, raster.astype(np.float64) / 255.0)


def write_netpbm(image):
    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (image.width, image.height)
    raster = np.clip(np.rint(image.data * 255.0), 0, 255).astype(np.uint8)
    return header + raster.tobytes()


def read_raw(buf):
    if len(buf) < _RAW_HEADER.size:
        raise ShapeError("truncated raw image header")
    magic, h, w, c = _RAW_HEADER.unpack_from(buf)
    if magic != RAW_MAGIC:
        raise ShapeError(f"bad raw image magic {magic!r}")
    data = np.frombuffer(buf, dtype="<f8", offset=_RAW_HEADER.size)
    return Image(h, w, c, data.astype(np.float64))


def write_raw(image):
    header = _RAW_HEADER.pack(RAW_MAGIC, image.height, image.width, image.channels)
    return header + image.data.astype("<f8").tobytes()


def read_image(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] == RAW_MAGIC:
        return read_raw(buf)
    return read_netpbm(buf)


def write_image(image, path):
    path = str(path)
    if path.endswith((".pgm", ".ppm", ".pnm")):
        payload = write_netpbm(image)
    else:
        payload = write_raw(image)
    with open(path, "wb") as fh:
        fh.write(payload)
