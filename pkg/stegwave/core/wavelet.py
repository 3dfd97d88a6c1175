"""Second-level Haar sub-bands over non-overlapping 4x4 blocks"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .imageio import ImagePlane

BLOCK = 4


@dataclass(frozen=True, eq=False)
class SubBands:
    """LL, LH, HL, HH planes, one coefficient per 4x4 block"""
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    @property
    def shape(self):
        return self.ll.shape

    def band(self, name: str) -> np.ndarray:
        try:
            return {"ll": self.ll, "lh": self.lh, "hl": self.hl, "hh": self.hh}[name.lower()]
        except KeyError:
            raise ValueError(f"unknown sub-band {name!r}; expected ll, lh, hl or hh") from None


def block_view(pixels: np.ndarray) -> np.ndarray:
    """(rows, cols, 4, 4) view of the largest multiple-of-4 region"""
    pixels = np.asarray(pixels)
    if pixels.shape[0] < BLOCK or pixels.shape[1] < BLOCK:
        raise InsufficientDataError(f"plane {pixels.shape[1]}x{pixels.shape[0]} is smaller than 4x4")
    rows, cols = pixels.shape[0] // BLOCK, pixels.shape[1] // BLOCK
    cropped = pixels[: rows * BLOCK, : cols * BLOCK]
    return cropped.reshape(rows, BLOCK, cols, BLOCK).swapaxes(1, 2)


def subbands_from_array(pixels: np.ndarray) -> SubBands:
    """Same as :func:`second_level_subbands` for a real-valued 2-D array"""
    blocks = block_view(np.asarray(pixels, dtype=np.float64))
    left = blocks[:, :, :, :2].sum(axis=(2, 3))
    right = blocks[:, :, :, 2:].sum(axis=(2, 3))
    top = blocks[:, :, :2, :].sum(axis=(2, 3))
    bottom = blocks[:, :, 2:, :].sum(axis=(2, 3))
    main_diag = blocks[:, :, :2, :2].sum(axis=(2, 3)) + blocks[:, :, 2:, 2:].sum(axis=(2, 3))
    anti_diag = blocks[:, :, :2, 2:].sum(axis=(2, 3)) + blocks[:, :, 2:, :2].sum(axis=(2, 3))
    return SubBands(
        ll=(left + right) / 4.0,
        lh=(left - right) / 4.0,
        hl=(top - bottom) / 4.0,
        hh=(main_diag - anti_diag) / 4.0,
    )


def second_level_subbands(plane: ImagePlane) -> SubBands:
    return subbands_from_array(plane.pixels)


def haar_step(pixels: np.ndarray) -> SubBands:
    """One-level 2x2 Haar step with the same sign conventions"""
    p = np.asarray(pixels, dtype=np.float64)
    rows, cols = p.shape[0] // 2, p.shape[1] // 2
    p = p[: rows * 2, : cols * 2]
    p00, p01 = p[0::2, 0::2], p[0::2, 1::2]
    p10, p11 = p[1::2, 0::2], p[1::2, 1::2]
    return SubBands(
        ll=(p00 + p01 + p10 + p11) / 2.0,
        lh=((p00 + p10) - (p01 + p11)) / 2.0,
        hl=((p00 + p01) - (p10 + p11)) / 2.0,
        hh=((p00 + p11) - (p01 + p10)) / 2.0,
    )


def ll_plane(plane: ImagePlane) -> np.ndarray:
    """LL only; block sums / 4"""
    return block_view(plane.pixels.astype(np.float64)).sum(axis=(2, 3)) / 4.0
