"""Forced-embedding detector: block statistics, eta / Gamma, the analytic model and k estimation"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.optimize import brentq
from scipy.special import comb
from scipy.stats import binom

from .errors import (
    CalibrationError,
    ConfigurationError,
    DimensionMismatchError,
    InsufficientDataError,
)
from .imageio import Image, ImagePlane
from .prng import derive_seed
from .stego import EmbedOrder, StegoParams, embed_lsb, lsb_fraction_even
from .wavelet import BLOCK, block_view, ll_plane

logger = structlog.get_logger(__name__)

ETA_SCALE = 500.0
# C(16, 2m) * C(2m, m) for m = 0..8
_CANCEL_COEFFS = [int(comb(16, 2 * m, exact=True) * comb(2 * m, m, exact=True)) for m in range(9)]


@dataclass(frozen=True)
class BlockDiffStats:
    """X0, X1, X2 over the 4x4 blocks of an image pair"""
    x0: int
    x1: int
    x2: int
    blocks_total: int


@dataclass(frozen=True)
class LsbStats:
    """Measured fraction of even-LSB pixels"""
    p_hat: float


@dataclass(frozen=True)
class AnalyticModel:
    """Even-LSB probabilities through cover -> S_k -> S_ki"""
    p: float
    k: float
    i: float

    def __post_init__(self):
        _check_unit("p", self.p)
        _check_unit("k", self.k)
        _check_unit("i", self.i)

    @property
    def p_prime(self) -> float:
        return self.k / 2.0 + (1.0 - self.k) * self.p

    @property
    def p_double_prime(self) -> float:
        return self.i / 2.0 + (1.0 - self.i) * self.p_prime

    def pr(self) -> float:
        return analytic_pr(self.i, self.p_prime)


@dataclass(frozen=True)
class EtaReading:
    i: float
    eta: float
    gamma_db: float


@dataclass(frozen=True)
class CalibrationRow:
    """One (image, k, repeat) measurement behind a curve point"""
    image: int
    k: float
    i: float
    eta: float
    gamma_db: float
    repeat: int = 0


@dataclass(frozen=True)
class CalibrationCurve:
    """Mean eta (and Gamma) against initial level k at a fixed forced level"""
    i_fixed: float
    points: Tuple[Tuple[float, float], ...]
    mean_gamma_db: Tuple[float, ...] = ()
    rows: Tuple[CalibrationRow, ...] = ()
    width: Optional[int] = None
    height: Optional[int] = None
    channels: Optional[int] = None

    def __post_init__(self):
        points = tuple((float(k), float(e)) for k, e in self.points)
        if not points:
            raise CalibrationError("a calibration curve needs at least one point")
        ks = [k for k, _ in points]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise CalibrationError("calibration k values must be strictly increasing")
        object.__setattr__(self, "points", points)

    @property
    def ks(self) -> np.ndarray:
        return np.array([k for k, _ in self.points])

    @property
    def etas(self) -> np.ndarray:
        return np.array([e for _, e in self.points])


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")


def _check_same_shape(base: ImagePlane, modified: ImagePlane) -> None:
    if (base.width, base.height) != (modified.width, modified.height):
        raise DimensionMismatchError(
            f"image sizes differ: {base.width}x{base.height} vs {modified.width}x{modified.height}"
        )


# -- measurements ----------------------------------------------------------

def block_diff_stats(base: ImagePlane, modified: ImagePlane) -> BlockDiffStats:
    """d = sum(base - modified) per 4x4 block; X0 counts d != 0, X1 sums |d|, X2 sums d"""
    _check_same_shape(base, modified)
    d = (block_view(base.pixels.astype(np.int64)) - block_view(modified.pixels.astype(np.int64))).sum(axis=(2, 3))
    return BlockDiffStats(
        x0=int(np.count_nonzero(d)),
        x1=int(np.abs(d).sum()),
        x2=int(d.sum()),
        blocks_total=int(d.size),
    )


def eta(stats_per_channel: Sequence[BlockDiffStats], width: int, height: int) -> float:
    """X0 summed over channels * 500 / (width * height)"""
    if not stats_per_channel:
        raise InsufficientDataError("eta needs statistics for at least one channel")
    return sum(s.x0 for s in stats_per_channel) * ETA_SCALE / (width * height)


def snr_ll(base: ImagePlane, modified: ImagePlane) -> float:
    """SNR in dB between the 2nd-level LL planes; +inf when noiseless"""
    _check_same_shape(base, modified)
    c = ll_plane(base)
    noise = float(((c - ll_plane(modified)) ** 2).sum())
    signal = float((c ** 2).sum())
    if noise == 0.0:
        return math.inf
    if signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal / noise)


def combine_gamma(values: Sequence[float]) -> float:
    """Mean of per-channel dB values; noiseless channels drop out unless all are noiseless"""
    finite = [v for v in values if v != math.inf]
    if not finite:
        return math.inf
    return float(np.mean(finite))


def measure_lsb_stats(image: Image) -> LsbStats:
    return LsbStats(p_hat=lsb_fraction_even(image))


def measure_pair(start: Image, forced: Image) -> Tuple[float, float]:
    """(eta, Gamma) between a start image and its forced-embedded copy"""
    if start.channel_count != forced.channel_count:
        raise DimensionMismatchError("start and forced images have different channel counts")
    pairs = list(zip(start.planes(), forced.planes()))
    stats = [block_diff_stats(a, b) for a, b in pairs]
    gamma_db = combine_gamma([snr_ll(a, b) for a, b in pairs])
    return eta(stats, start.width, start.height), gamma_db


# -- analytic model --------------------------------------------------------

def p_prime_chain(p: float, k: float, i: float) -> Tuple[float, float]:
    model = AnalyticModel(p=p, k=k, i=i)
    return model.p_prime, model.p_double_prime


def _pr_from_q(i: float, q: float) -> float:
    half = i / 2.0
    unchanged = sum(
        coeff * half ** (2 * m) * (1.0 - half) ** (16 - 2 * m) * q ** m
        for m, coeff in enumerate(_CANCEL_COEFFS)
    )
    return min(1.0, max(0.0, 1.0 - unchanged))


def analytic_pr(i: float, p_prime: float) -> float:
    """Probability that a block's LL coefficient changes under forced level i.

    A block stays unchanged when as many pixels go up by one (even LSB, prob. p')
    as go down (odd LSB), each pixel changing with probability i/2.
    """
    _check_unit("i", i)
    _check_unit("p_prime", p_prime)
    return _pr_from_q(i, p_prime * (1.0 - p_prime))


def expected_eta(i: float, p_prime: float, channels: int, width: int, height: int) -> float:
    blocks = _blocks_per_channel(width, height)
    return channels * blocks * analytic_pr(i, p_prime) * ETA_SCALE / (width * height)


def _blocks_per_channel(width: int, height: int) -> int:
    if width < BLOCK or height < BLOCK:
        raise InsufficientDataError(f"image {width}x{height} holds no 4x4 block")
    return (width // BLOCK) * (height // BLOCK)


def sigma_mc(pr: float, channels: int, width: int, height: int) -> float:
    """Binomial standard deviation of a measured eta"""
    blocks = channels * _blocks_per_channel(width, height)
    return float(binom.std(blocks, pr)) * ETA_SCALE / (width * height)


def model_table(p: float, k_grid: Sequence[float], i_grid: Sequence[float], channels: int = 3,
                width: int = 800, height: int = 600) -> List[Tuple[float, float, float, float, float]]:
    """Rows (k, i, p_prime, pr, expected_eta) over the grid"""
    rows = []
    for k in k_grid:
        p_prime, _ = p_prime_chain(p, k, 0.0)
        for i in i_grid:
            pr = analytic_pr(i, p_prime)
            rows.append((k, i, p_prime, pr, expected_eta(i, p_prime, channels, width, height)))
    return rows


# -- forced embedding ------------------------------------------------------

def _forced_reading(image: Image, i: float, seed: int) -> EtaReading:
    forced = embed_lsb(image, StegoParams(level=i, seed=seed, order=EmbedOrder.RANDOMIZED))
    value, gamma_db = measure_pair(image, forced)
    return EtaReading(i=i, eta=value, gamma_db=gamma_db)


def _check_grid(name: str, values: Sequence[float], strict: bool) -> None:
    if not values:
        raise InsufficientDataError(f"{name} must not be empty")
    for value in values:
        _check_unit(name, value)
    for a, b in zip(values, values[1:]):
        if b < a or (strict and b == a):
            raise ConfigurationError(f"{name} must be sorted ascending")


def forced_embedding_curve(image: Image, i_levels: Sequence[float], seed: int) -> List[EtaReading]:
    """eta and Gamma of S_ki against S_k (the input) for each forced level"""
    i_levels = [float(i) for i in i_levels]
    _check_grid("i_levels", i_levels, strict=False)
    readings = [_forced_reading(image, i, derive_seed(seed, index)) for index, i in enumerate(i_levels)]
    logger.info("eta_curve", levels=len(readings), width=image.width, height=image.height)
    return readings


def calibrate(images: Sequence[Image], k_grid: Sequence[float], i_fixed: float, seed: int,
              repeats: int = 1, workers: int = 1) -> CalibrationCurve:
    """Embed each image at every k, force-embed at i_fixed, average eta per k.

    Seeds come from (seed, image, k index, repeat), so the grid can run on a
    thread pool and adding images never perturbs existing rows.
    """
    if not images:
        raise InsufficientDataError("calibration needs at least one image")
    k_grid = [float(k) for k in k_grid]
    _check_grid("k_grid", k_grid, strict=True)
    _check_unit("i_fixed", i_fixed)
    if repeats < 1:
        raise ConfigurationError("repeats must be >= 1")

    tasks = [(m, a, r) for m in range(len(images)) for a in range(len(k_grid)) for r in range(repeats)]

    def run(task) -> CalibrationRow:
        m, a, r = task
        start = embed_lsb(images[m], StegoParams(level=k_grid[a], seed=derive_seed(seed, m, a, r, 0)))
        reading = _forced_reading(start, i_fixed, derive_seed(seed, m, a, r, 1))
        return CalibrationRow(image=m, k=k_grid[a], i=i_fixed, eta=reading.eta,
                              gamma_db=reading.gamma_db, repeat=r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(task) for task in tasks]

    return curve_from_rows(rows, i_fixed, images)


def curve_from_rows(rows: Sequence[CalibrationRow], i_fixed: float,
                    images: Sequence[Image] = ()) -> CalibrationCurve:
    """Average per-image rows into a curve (used by calibrate and leave-one-out runs)"""
    ks = sorted({row.k for row in rows})
    points, gammas = [], []
    for k in ks:
        at_k = [row for row in rows if row.k == k]
        points.append((k, float(np.mean([row.eta for row in at_k]))))
        gammas.append(combine_gamma([row.gamma_db for row in at_k]))
    shapes = {(img.width, img.height, img.channel_count) for img in images}
    width, height, channels = shapes.pop() if len(shapes) == 1 else (None, None, None)
    return CalibrationCurve(i_fixed=i_fixed, points=tuple(points), mean_gamma_db=tuple(gammas),
                            rows=tuple(rows), width=width, height=height, channels=channels)


def _check_curve(image: Image, curve: CalibrationCurve) -> None:
    if len(curve.points) < 2:
        raise CalibrationError("estimation needs a curve with at least 2 points")
    steps = np.diff(curve.etas)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise CalibrationError("calibration curve eta values are not strictly monotone")
    if curve.channels is not None and curve.channels != image.channel_count:
        raise DimensionMismatchError(
            f"curve was calibrated on {curve.channels}-channel images, got {image.channel_count}"
        )
    if curve.width is not None and (curve.width, curve.height) != (image.width, image.height):
        raise DimensionMismatchError(
            f"curve was calibrated on {curve.width}x{curve.height} images, got {image.width}x{image.height}"
        )


def measured_eta(image: Image, i: float, seed: int, repeats: int = 1) -> float:
    """Mean eta over ``repeats`` independently seeded forced embeddings"""
    return float(np.mean([_forced_reading(image, i, derive_seed(seed, r)).eta for r in range(repeats)]))


def interpolate_k(value: float, curve: CalibrationCurve) -> float:
    """Piecewise-linear inverse of the curve, clamped to its k range"""
    ks, etas = curve.ks, curve.etas
    if etas[-1] < etas[0]:
        ks, etas = ks[::-1], etas[::-1]
    return float(np.interp(value, etas, ks))


def estimate_k(image: Image, curve: CalibrationCurve, seed: int, repeats: int = 1) -> float:
    _check_curve(image, curve)
    value = measured_eta(image, curve.i_fixed, seed, repeats)
    k_hat = interpolate_k(value, curve)
    logger.info("k_estimated", eta=value, k_hat=k_hat, i_fixed=curve.i_fixed)
    return k_hat


def estimate_k_model(image: Image, i: float, seed: int, cover_p: float = 0.65, repeats: int = 1) -> float:
    """Model-only estimate: invert expected_eta for p', then p' = k/2 + (1-k)*cover_p.

    Biased: cover_p is an assumption, the true cover statistic is unobservable.
    """
    _check_unit("cover_p", cover_p)
    if i <= 0.0:
        raise ConfigurationError("model-only estimation needs a positive forced level")
    if cover_p == 0.5:
        raise ConfigurationError("k is unidentifiable when cover_p is 0.5")

    value = measured_eta(image, i, seed, repeats)
    blocks = image.channel_count * _blocks_per_channel(image.width, image.height)
    pr = min(1.0, max(0.0, value * image.width * image.height / (ETA_SCALE * blocks)))

    # Pr decreases in q = p'(1 - p') over [0, 1/4]
    pr_high, pr_low = _pr_from_q(i, 0.0), _pr_from_q(i, 0.25)
    if pr >= pr_high:
        q = 0.0
    elif pr <= pr_low:
        q = 0.25
    else:
        q = brentq(lambda x: _pr_from_q(i, x) - pr, 0.0, 0.25)

    root = math.sqrt(max(0.0, 1.0 - 4.0 * q))
    p_hat = measure_lsb_stats(image).p_hat
    p_prime = (1.0 + root) / 2.0 if p_hat >= 0.5 else (1.0 - root) / 2.0
    k_hat = (cover_p - p_prime) / (cover_p - 0.5)
    return float(min(1.0, max(0.0, k_hat)))
