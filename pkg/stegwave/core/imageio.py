"""PNM (P5/P6) image codec and raster types"""

from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
import structlog

from .errors import (
    ConfigurationError,
    MalformedHeaderError,
    TruncatedDataError,
    UnsupportedMagicError,
    UnsupportedMaxvalError,
)

logger = structlog.get_logger(__name__)

_WHITESPACE = b" \t\n\r\x0b\x0c"
_KNOWN_MAGICS = {b"P1", b"P2", b"P3", b"P4", b"P7"}


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """Single 8-bit channel, pixels held as a (height, width) uint8 array"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigurationError(f"image dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels)
        if pixels.size != self.width * self.height:
            raise ConfigurationError(
                f"pixel count {pixels.size} does not match {self.width}x{self.height}"
            )
        if not np.issubdtype(pixels.dtype, np.integer):
            raise ConfigurationError(f"pixels must be an integer array, got dtype {pixels.dtype}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ConfigurationError("pixel intensities must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        object.__setattr__(self, "pixels", pixels.reshape(self.height, self.width))

    @classmethod
    def from_array(cls, array) -> "ImagePlane":
        array = np.asarray(array)
        if array.ndim != 2:
            raise ConfigurationError(f"expected a 2-D array, got shape {array.shape}")
        return cls(width=array.shape[1], height=array.shape[0], pixels=array)

    @property
    def channel_count(self) -> int:
        return 1

    def planes(self) -> List["ImagePlane"]:
        return [self]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImagePlane):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Three ImagePlanes (R, G, B) of identical dimensions"""
    width: int
    height: int
    channels: Tuple[ImagePlane, ImagePlane, ImagePlane]

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(channels) != 3:
            raise ConfigurationError(f"RGB image needs exactly 3 channels, got {len(channels)}")
        for plane in channels:
            if (plane.width, plane.height) != (self.width, self.height):
                raise ConfigurationError("all RGB channels must share width and height")
        object.__setattr__(self, "channels", channels)

    @classmethod
    def from_array(cls, array) -> "RgbImage":
        """Build from an (height, width, 3) array"""
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ConfigurationError(f"expected an (h, w, 3) array, got shape {array.shape}")
        planes = tuple(ImagePlane.from_array(np.ascontiguousarray(array[:, :, c])) for c in range(3))
        return cls(width=array.shape[1], height=array.shape[0], channels=planes)

    @property
    def channel_count(self) -> int:
        return 3

    def planes(self) -> List[ImagePlane]:
        return list(self.channels)

    def interleaved(self) -> np.ndarray:
        return np.stack([plane.pixels for plane in self.channels], axis=-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return all(a == b for a, b in zip(self.channels, other.channels))


Image = Union[ImagePlane, RgbImage]


def from_planes(planes: List[ImagePlane]) -> Image:
    """Rebuild an image from its channel list (1 or 3 planes)"""
    if len(planes) == 1:
        return planes[0]
    return RgbImage(width=planes[0].width, height=planes[0].height, channels=tuple(planes))


class _HeaderReader:
    """Tokenizer over the PNM header: whitespace runs and '#' comments are skipped"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def token(self, what: str) -> bytes:
        data = self.data
        while self.pos < len(data):
            byte = data[self.pos:self.pos + 1]
            if byte in _WHITESPACE:
                self.pos += 1
            elif byte == b"#":
                newline = data.find(b"\n", self.pos)
                self.pos = len(data) if newline < 0 else newline + 1
            else:
                break
        start = self.pos
        while self.pos < len(data) and data[self.pos:self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        if start == self.pos:
            raise MalformedHeaderError(f"PNM header ended before {what}")
        return data[start:self.pos]

    def integer(self, what: str) -> int:
        raw = self.token(what)
        if not raw.isdigit():
            raise MalformedHeaderError(f"PNM {what} is not a decimal integer: {raw!r}")
        return int(raw)

    def raster_start(self) -> int:
        # exactly one whitespace byte separates maxval from the raster
        if self.pos >= len(self.data) or self.data[self.pos:self.pos + 1] not in _WHITESPACE:
            raise MalformedHeaderError("missing whitespace after PNM maxval")
        return self.pos + 1


def read_pnm(data: bytes) -> Image:
    """Decode a binary P5 (grayscale) or P6 (RGB) image with maxval 255"""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        if magic in _KNOWN_MAGICS:
            raise UnsupportedMagicError(f"unsupported PNM variant {magic.decode()}: only binary P5/P6 are read")
        raise MalformedHeaderError(f"not a PNM stream (magic {magic!r})")

    reader = _HeaderReader(data)
    reader.pos = 2
    if reader.pos < len(data) and data[reader.pos:reader.pos + 1] not in _WHITESPACE + b"#":
        raise MalformedHeaderError("PNM magic must be followed by whitespace")
    width = reader.integer("width")
    height = reader.integer("height")
    maxval = reader.integer("maxval")
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"PNM dimensions must be positive, got {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval}: only 255 is supported")
    start = reader.raster_start()

    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[start:start + expected]
    if len(raster) < expected:
        raise TruncatedDataError(f"PNM raster truncated: expected {expected} bytes, got {len(raster)}")

    pixels = np.frombuffer(raster, dtype=np.uint8)
    logger.debug("pnm_decoded", magic=magic.decode(), width=width, height=height)
    if channels == 1:
        return ImagePlane(width=width, height=height, pixels=pixels.copy())
    return RgbImage.from_array(pixels.reshape(height, width, 3))


def write_pnm(image: Image) -> bytes:
    """Encode in the canonical single-newline header form"""
    if isinstance(image, RgbImage):
        header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
        return header + image.interleaved().astype(np.uint8).tobytes()
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.astype(np.uint8).tobytes()


def load_image(path) -> Image:
    with open(path, "rb") as handle:
        return read_pnm(handle.read())


def save_image(image: Image, path) -> None:
    with open(path, "wb") as handle:
        handle.write(write_pnm(image))
