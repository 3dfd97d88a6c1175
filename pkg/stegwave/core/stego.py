"""Seeded LSB replacement embedder and LSB-plane extraction"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import structlog

from .errors import ConfigurationError
from .imageio import Image, ImagePlane, from_planes
from .prng import MASK64, POSITION_STREAM_KEY, splitmix64_block

logger = structlog.get_logger(__name__)


class EmbedOrder(Enum):
    """How pixel positions are chosen"""
    RANDOMIZED = "randomized"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class StegoParams:
    """Embedding level (fraction of pixels), seed and position order"""
    level: float
    seed: int = 1
    order: EmbedOrder = EmbedOrder.RANDOMIZED

    def __post_init__(self):
        if not (0.0 <= self.level <= 1.0):
            raise ConfigurationError(f"embedding level must lie in [0, 1], got {self.level}")
        if not (0 <= int(self.seed) <= MASK64):
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if not isinstance(self.order, EmbedOrder):
            object.__setattr__(self, "order", EmbedOrder(self.order))


@dataclass(frozen=True, eq=False)
class LsbPlane:
    """LSBs of every pixel, channel planes concatenated (R, G, B)"""
    bits: np.ndarray
    width: int
    height: int
    channel_count: int

    def to_bytes(self) -> bytes:
        """Bits packed MSB-first, ready for Word32 assembly"""
        return np.packbits(self.bits).tobytes()


@dataclass(frozen=True, eq=False)
class EmbedTrace:
    """Embedder instrumentation: where bits went and which bits they were"""
    image: Image
    positions: np.ndarray
    data_bits: np.ndarray
    changed: int


def _flatten(image: Image) -> np.ndarray:
    return np.concatenate([plane.pixels.ravel() for plane in image.planes()])


def _unflatten(flat: np.ndarray, template: Image) -> Image:
    size = template.width * template.height
    planes = [
        ImagePlane(width=template.width, height=template.height,
                   pixels=flat[c * size:(c + 1) * size].reshape(template.height, template.width))
        for c in range(template.channel_count)
    ]
    return from_planes(planes)


def select_positions(total: int, count: int, seed: int, order: EmbedOrder) -> np.ndarray:
    """First ``count`` entries of a seeded partial Fisher-Yates shuffle of 0..total-1"""
    if order is EmbedOrder.SEQUENTIAL:
        return np.arange(count, dtype=np.int64)
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    draws = splitmix64_block(seed ^ POSITION_STREAM_KEY, count)
    spans = np.uint64(total) - np.arange(count, dtype=np.uint64)
    offsets = (draws % spans).tolist()
    perm = list(range(total))
    for t, offset in enumerate(offsets):
        j = t + offset
        perm[t], perm[j] = perm[j], perm[t]
    return np.array(perm[:count], dtype=np.int64)


def data_bits(seed: int, count: int) -> np.ndarray:
    """Payload stand-in: MSB of each output of the seed's own stream"""
    return (splitmix64_block(seed, count) >> np.uint64(63)).astype(np.uint8)


def embed_lsb_traced(image: Image, params: StegoParams) -> EmbedTrace:
    flat = _flatten(image).copy()
    total = flat.size
    count = int(math.floor(params.level * total))
    positions = select_positions(total, count, int(params.seed), params.order)
    bits = data_bits(int(params.seed), count)

    before = flat[positions]
    after = (before & np.uint8(0xFE)) | bits
    flat[positions] = after
    changed = int(np.count_nonzero(before != after))
    logger.debug("lsb_embedded", level=params.level, positions=count, changed=changed,
                 order=params.order.value)
    return EmbedTrace(image=_unflatten(flat, image), positions=positions, data_bits=bits, changed=changed)


def embed_lsb(image: Image, params: StegoParams) -> Image:
    """Replace the LSB of floor(level * N) selected pixels with payload bits"""
    return embed_lsb_traced(image, params).image


def extract_lsb_plane(image: Image) -> LsbPlane:
    return LsbPlane(
        bits=(_flatten(image) & 1).astype(np.uint8),
        width=image.width,
        height=image.height,
        channel_count=image.channel_count,
    )


def lsb_fraction_even(image: Image) -> float:
    """Fraction of pixels whose LSB is 0"""
    flat = _flatten(image)
    return float(np.count_nonzero((flat & 1) == 0) / flat.size)
