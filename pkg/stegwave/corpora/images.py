"""Synthetic natural-statistics images with a tunable even-LSB bias"""

import numpy as np
import structlog
from scipy import ndimage

from ..core.errors import ConfigurationError
from ..core.imageio import ImagePlane, RgbImage
from ..core.prng import derive_seed

logger = structlog.get_logger(__name__)


def _smooth_field(width: int, height: int, rng: np.random.Generator, grid: int) -> np.ndarray:
    coarse = rng.uniform(40.0, 215.0, size=(height // grid + 2, width // grid + 2))
    fine = ndimage.zoom(coarse, grid, order=1)
    return fine[:height, :width]


def _bias_lsb(pixels: np.ndarray, p_even: float, rng: np.random.Generator) -> np.ndarray:
    """Push the even-LSB fraction of a roughly balanced plane towards p_even"""
    if p_even >= 0.5:
        hit = rng.random(pixels.shape) < 2.0 * p_even - 1.0
        return np.where(hit, pixels & 0xFE, pixels)
    hit = rng.random(pixels.shape) < 1.0 - 2.0 * p_even
    return np.where(hit, pixels | 0x01, pixels)


def natural_image(width: int, height: int, seed: int = 1, p_even: float = 0.65,
                  noise_sigma: float = 2.0, grid: int = 8) -> ImagePlane:
    """Bilinearly upsampled coarse random grid plus sensor noise, 8-bit quantized"""
    if width < 1 or height < 1 or grid < 1:
        raise ConfigurationError("width, height and grid must be positive")
    if not (0.0 <= p_even <= 1.0):
        raise ConfigurationError(f"p_even must lie in [0, 1], got {p_even}")
    rng = np.random.default_rng(seed)
    field = _smooth_field(width, height, rng, grid) + rng.normal(0.0, noise_sigma, size=(height, width))
    pixels = np.clip(np.rint(field), 0, 255).astype(np.uint8)
    return ImagePlane.from_array(_bias_lsb(pixels, p_even, rng).astype(np.uint8))


def natural_rgb(width: int, height: int, seed: int = 1, p_even: float = 0.65,
                noise_sigma: float = 2.0, grid: int = 8) -> RgbImage:
    """Three correlated channels: a shared luminance field plus per-channel fields"""
    if width < 1 or height < 1 or grid < 1:
        raise ConfigurationError("width, height and grid must be positive")
    if not (0.0 <= p_even <= 1.0):
        raise ConfigurationError(f"p_even must lie in [0, 1], got {p_even}")
    base = _smooth_field(width, height, np.random.default_rng(derive_seed(seed, 0)), grid)
    channels = []
    for c in range(3):
        rng = np.random.default_rng(derive_seed(seed, c + 1))
        tint = _smooth_field(width, height, rng, grid * 2) - 127.5
        field = base + 0.25 * tint + rng.normal(0.0, noise_sigma, size=(height, width))
        pixels = np.clip(np.rint(field), 0, 255).astype(np.uint8)
        channels.append(_bias_lsb(pixels, p_even, rng).astype(np.uint8))
    logger.debug("natural_rgb", width=width, height=height, seed=seed, p_even=p_even)
    return RgbImage.from_array(np.stack(channels, axis=-1))
