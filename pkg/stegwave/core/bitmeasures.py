"""Statistical bit-stream measures (mu1..mu9) and the feature scaler"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import hadamard

from .errors import ConfigurationError, InsufficientDataError

logger = structlog.get_logger(__name__)

WORD_BITS = 32
WORD_BYTES = 4
FEATURE_COUNT = 9

_POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)
# Sylvester ordering: H[j, k] = (-1) ** popcount(j & k)
_HADAMARD8 = hadamard(8).astype(np.float64)
_MU1_WEIGHTS = {k: float(2 ** (4 * (k + 1))) for k in range(1, 5)}


@dataclass(frozen=True)
class MeasureConfig:
    """Window size and entropy weights for the feature vector"""
    window_words: int = 2000
    entropy_weights: Tuple[float, float, float, float] = (16.0, 256.0, 4096.0, 65536.0)

    def __post_init__(self):
        if self.window_words < 1:
            raise ConfigurationError(f"window_words must be >= 1, got {self.window_words}")
        weights = tuple(float(w) for w in self.entropy_weights)
        if len(weights) != 4 or any(w <= 0 for w in weights):
            raise ConfigurationError("entropy_weights must be 4 positive reals")
        object.__setattr__(self, "entropy_weights", weights)

    @property
    def window_bytes(self) -> int:
        return self.window_words * WORD_BYTES

    @classmethod
    def from_settings(cls, measure_settings=None) -> "MeasureConfig":
        if measure_settings is None:
            from ..config import settings
            measure_settings = settings.measure
        return cls(
            window_words=measure_settings.window_words,
            entropy_weights=tuple(measure_settings.entropy_weights),
        )


@dataclass(frozen=True, eq=False)
class Word32:
    """32 bits a0..a31; a0 is the most significant bit of the first byte"""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size != WORD_BITS or np.any(bits > 1):
            raise ConfigurationError("a Word32 holds exactly 32 bits")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_int(cls, value: int) -> "Word32":
        return cls.from_bytes(int(value).to_bytes(WORD_BYTES, "big"))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Word32":
        raw = np.frombuffer(bytes(data), dtype=np.uint8)
        if raw.size != WORD_BYTES:
            raise ConfigurationError("a Word32 is built from exactly 4 bytes")
        return cls(np.unpackbits(raw))

    def byte_values(self) -> np.ndarray:
        return np.packbits(self.bits)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """The nine measures for one data window"""
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        if mu.size != FEATURE_COUNT:
            raise ConfigurationError(f"feature vector needs {FEATURE_COUNT} entries, got {mu.size}")
        if not np.all(np.isfinite(mu)):
            raise ConfigurationError("feature vector entries must be finite")
        object.__setattr__(self, "mu", mu)

    def as_array(self) -> np.ndarray:
        return self.mu.copy()

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return np.array_equal(self.mu, other.mu)


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-dimension centering and scaling fitted on training vectors"""
    means: np.ndarray = field(default_factory=lambda: np.zeros(FEATURE_COUNT))
    stddevs: np.ndarray = field(default_factory=lambda: np.ones(FEATURE_COUNT))

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64).reshape(-1)
        stddevs = np.asarray(self.stddevs, dtype=np.float64).reshape(-1)
        if means.size != FEATURE_COUNT or stddevs.size != FEATURE_COUNT:
            raise ConfigurationError("scaler needs 9 means and 9 stddevs")
        if np.any(stddevs < 0):
            raise ConfigurationError("scaler stddevs must be non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stddevs", stddevs)

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Scale a (n, 9) or (9,) array; zero-variance dimensions map to 0"""
        features = np.asarray(features, dtype=np.float64)
        safe = np.where(self.stddevs > 0, self.stddevs, 1.0)
        scaled = (features - self.means) / safe
        return np.where(self.stddevs > 0, scaled, 0.0)


# -- word assembly ---------------------------------------------------------

def words_from_bytes(data: bytes, word_count: Optional[int] = None) -> np.ndarray:
    """Pack consecutive 4-byte groups into an (n, 32) bit matrix, MSB first"""
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    available = raw.size // WORD_BYTES
    if word_count is None:
        word_count = available
    if word_count > available:
        raise InsufficientDataError(f"need {word_count} words, only {available} available")
    grouped = raw[: word_count * WORD_BYTES].reshape(word_count, WORD_BYTES)
    return np.unpackbits(grouped, axis=1)


def _as_bit_matrix(words) -> np.ndarray:
    if isinstance(words, Word32):
        return words.bits[None, :]
    bits = np.asarray(words, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] != WORD_BITS:
        raise ConfigurationError(f"expected an (n, 32) bit matrix, got shape {bits.shape}")
    return bits


def _gram_values(bits: np.ndarray, k: int) -> np.ndarray:
    """Integer value of every overlapping k-bit window along the last axis"""
    span = bits.shape[-1] - k + 1
    values = np.zeros(bits.shape[:-1] + (span,), dtype=np.int64)
    for t in range(k):
        values = (values << 1) | bits[..., t:t + span]
    return values


# -- per-word measures (batched over rows) ---------------------------------

def mu1_batch(bits: np.ndarray) -> np.ndarray:
    bits = _as_bit_matrix(bits)
    total = np.zeros(bits.shape[0])
    for k in range(1, 5):
        grams = _gram_values(bits, k)
        counts = (grams[..., None] == np.arange(2 ** k)).sum(axis=1)
        total += (counts.max(axis=1) - counts.min(axis=1)) * _MU1_WEIGHTS[k]
    return total


def run_length_matrix(bits: np.ndarray) -> np.ndarray:
    """(n, 32) matrix whose row r lists the maximal run lengths of word r, zero padded"""
    bits = _as_bit_matrix(bits)
    n = bits.shape[0]
    changes = bits[:, 1:] != bits[:, :-1]
    run_ids = np.concatenate([np.zeros((n, 1), dtype=np.int64), np.cumsum(changes, axis=1)], axis=1)
    lengths = np.zeros((n, WORD_BITS), dtype=np.int64)
    rows = np.repeat(np.arange(n)[:, None], WORD_BITS, axis=1)
    np.add.at(lengths, (rows, run_ids), 1)
    return lengths


def mu2_batch(bits: np.ndarray) -> np.ndarray:
    lengths = run_length_matrix(bits)
    return np.where(lengths > 0, np.exp2(lengths.astype(np.float64)), 0.0).sum(axis=1)


def mu3_batch(bits: np.ndarray) -> np.ndarray:
    bits = _as_bit_matrix(bits)
    octets = np.packbits(bits.reshape(-1, 4, 8), axis=-1)[..., 0]
    weights = [_POPCOUNT[octets[:, 0]]]
    for t in range(1, 4):
        weights.append(_POPCOUNT[octets[:, t - 1] ^ octets[:, t]])
    return np.exp2(np.stack(weights, axis=1).astype(np.float64)).sum(axis=1)


def autocorrelation(bits: np.ndarray) -> np.ndarray:
    """c_i = sum_j a_j AND a_(j+i), reduced mod 32, for i = 0..31"""
    bits = _as_bit_matrix(bits).astype(np.int64)
    c = np.empty(bits.shape, dtype=np.int64)
    for i in range(WORD_BITS):
        c[:, i] = (bits[:, : WORD_BITS - i] & bits[:, i:]).sum(axis=1)
    return c % WORD_BITS


def mu4_batch(bits: np.ndarray) -> np.ndarray:
    spectrum = np.fft.fft(autocorrelation(bits).astype(np.float64), axis=1)
    return np.sqrt((np.abs(spectrum) ** 2).sum(axis=1))


def mu5_batch(bits: np.ndarray) -> np.ndarray:
    bits = _as_bit_matrix(bits)
    x = bits.reshape(-1, 4, 8).astype(np.float64)
    y = x @ _HADAMARD8.T
    # row 0 is the DC term (the byte's Hamming weight), already covered by mu3
    per_byte = np.abs(y[..., 1:]).sum(axis=-1)
    return per_byte.mean(axis=1)


def mu1(word: Word32) -> float:
    return float(mu1_batch(word)[0])


def mu2(word: Word32) -> float:
    return float(mu2_batch(word)[0])


def mu3(word: Word32) -> float:
    return float(mu3_batch(word)[0])


def mu4(word: Word32) -> float:
    return float(mu4_batch(word)[0])


def mu5(word: Word32) -> float:
    return float(mu5_batch(word)[0])


def run_lengths(word: Word32) -> List[int]:
    row = run_length_matrix(word)[0]
    return [int(length) for length in row if length > 0]


def mu3_overlapping(word: Word32) -> float:
    """mu3 over the seven overlapping bytes starting every 4 bits"""
    windows = np.stack([word.bits[4 * t:4 * t + 8] for t in range(7)])
    octets = np.packbits(windows, axis=1)[:, 0]
    total = 2.0 ** _POPCOUNT[octets[0]]
    for t in range(1, 7):
        total += 2.0 ** _POPCOUNT[octets[t - 1] ^ octets[t]]
    return float(total)


# -- window measures -------------------------------------------------------

def gram_entropies(window: bytes, config: Optional[MeasureConfig] = None) -> Tuple[float, float, float, float]:
    """Weighted 1..4-gram Shannon entropies (base 2) of the window bitstream"""
    config = config or MeasureConfig()
    bits = np.unpackbits(np.frombuffer(bytes(window), dtype=np.uint8))
    if bits.size < 4:
        raise InsufficientDataError(f"gram entropies need at least 4 bits, got {bits.size}")
    entropies = []
    for k, weight in zip(range(1, 5), config.entropy_weights):
        grams = _gram_values(bits, k)
        counts = np.bincount(grams, minlength=2 ** k)
        p = counts[counts > 0] / grams.size
        entropy = float(-(p * np.log2(p)).sum()) if p.size > 1 else 0.0
        entropies.append(weight * entropy)
    return tuple(entropies)


def feature_vector(window: bytes, config: Optional[MeasureConfig] = None) -> FeatureVector:
    """mu1..mu5 averaged over the window's words, mu6..mu9 from its gram entropies"""
    config = config or MeasureConfig()
    window = bytes(window)
    if len(window) < config.window_bytes:
        raise InsufficientDataError(
            f"window needs {config.window_bytes} bytes ({config.window_words} words), got {len(window)}"
        )
    window = window[: config.window_bytes]
    bits = words_from_bytes(window, config.window_words)
    per_word = [
        mu1_batch(bits).mean(),
        mu2_batch(bits).mean(),
        mu3_batch(bits).mean(),
        mu4_batch(bits).mean(),
        mu5_batch(bits).mean(),
    ]
    return FeatureVector(np.array(per_word + list(gram_entropies(window, config))))


def batch_feature_vectors(data: bytes, config: Optional[MeasureConfig] = None) -> List[FeatureVector]:
    """One vector per consecutive full window of ``data``"""
    config = config or MeasureConfig()
    data = bytes(data)
    count = len(data) // config.window_bytes
    if count == 0:
        raise InsufficientDataError(
            f"stream of {len(data)} bytes is shorter than one {config.window_bytes}-byte window"
        )
    vectors = [
        feature_vector(data[w * config.window_bytes:(w + 1) * config.window_bytes], config)
        for w in range(count)
    ]
    logger.debug("windows_measured", windows=count, window_words=config.window_words)
    return vectors


# -- scaler ----------------------------------------------------------------

def fit_scaler(vectors: Sequence[FeatureVector]) -> Scaler:
    """Sample means and population standard deviations of the training vectors"""
    if len(vectors) < 2:
        raise InsufficientDataError(f"fitting a scaler needs at least 2 vectors, got {len(vectors)}")
    matrix = np.stack([v.mu if isinstance(v, FeatureVector) else np.asarray(v, float) for v in vectors])
    means = matrix.mean(axis=0)
    stddevs = matrix.std(axis=0)
    constant = np.ptp(matrix, axis=0) == 0
    stddevs[constant] = 0.0
    if np.any(constant):
        logger.warning("scaler_degenerate_dimensions", dimensions=np.flatnonzero(constant).tolist())
    return Scaler(means=means, stddevs=stddevs)


def apply_scaler(scaler: Scaler, v: FeatureVector) -> FeatureVector:
    return FeatureVector(scaler.transform(v.mu))
