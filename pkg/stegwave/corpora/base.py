"""Byte-stream class generators for classifier corpora"""

import zlib
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple, Type

import numpy as np
import structlog

from ..core.errors import ConfigurationError
from ..core.prng import derive_seed

logger = structlog.get_logger(__name__)

_WORDS = (
    "the of and to in is was for on that with as by at from this are be it an which "
    "image pixel signal data model noise block level window measure channel random "
    "value file stream source report system method result sample order table value "
    "under over between through during before after within without against among"
).split()


class StreamGenerator(ABC):
    """One class of synthetic byte streams"""

    def __init__(self, name: str):
        self.name = name
        self.logger = structlog.get_logger(f"{__name__}.{self.__class__.__name__}")

    @abstractmethod
    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        """Exactly ``size`` bytes of this class"""


def _sentences(size: int, rng: np.random.Generator) -> str:
    parts, length = [], 0
    while length < size:
        words = rng.choice(_WORDS, size=int(rng.integers(5, 14))).tolist()
        sentence = " ".join(words).capitalize() + ". "
        parts.append(sentence)
        length += len(sentence)
    return "".join(parts)


class AsciiTextGenerator(StreamGenerator):
    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        return _sentences(size, rng).encode("ascii")[:size]


class UniformRandomGenerator(StreamGenerator):
    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        return rng.integers(0, 256, size=size, dtype=np.uint8).tobytes()


class CompressedTextGenerator(StreamGenerator):
    """zlib output of text; high entropy with deflate block structure"""

    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        out = b""
        while len(out) < size:
            out += zlib.compress(_sentences(6 * size, rng).encode("ascii"), 9)[2:]
        return out[:size]


class CounterRecordGenerator(StreamGenerator):
    """Fixed 16-byte records: big-endian counter, small field, padding"""

    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        count = size // 16 + 1
        start = int(rng.integers(0, 1 << 20))
        records = np.zeros((count, 16), dtype=np.uint8)
        counters = (start + np.arange(count, dtype=np.uint64)).astype(">u4")
        records[:, :4] = counters.view(np.uint8).reshape(count, 4)
        records[:, 4:6] = rng.integers(0, 4, size=(count, 2), dtype=np.uint8)
        records[:, 8:12] = np.frombuffer(b"REC\x00", dtype=np.uint8)
        return records.tobytes()[:size]


class SmoothRowsGenerator(StreamGenerator):
    """Raster rows of a slowly varying 8-bit field"""

    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        steps = rng.integers(-2, 3, size=size)
        values = np.cumsum(steps) + int(rng.integers(64, 192))
        return np.mod(values, 256).astype(np.uint8).tobytes()


class HexDumpGenerator(StreamGenerator):
    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        raw = rng.integers(0, 256, size=size // 2 + 16, dtype=np.uint8).tobytes()
        lines = [f"{offset:08x}: {raw[offset:offset + 16].hex(' ')}\n" for offset in range(0, len(raw), 16)]
        text = "".join(lines)
        while len(text) < size:
            text += text
        return text.encode("ascii")[:size]


class Utf16TextGenerator(StreamGenerator):
    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        return _sentences(size // 2 + 1, rng).encode("utf-16-le")[:size]


class SparseBinaryGenerator(StreamGenerator):
    """Mostly zero bytes with a few percent random values"""

    def __init__(self, name: str, density: float = 0.03):
        super().__init__(name)
        self.density = density

    def generate(self, size: int, rng: np.random.Generator) -> bytes:
        data = np.zeros(size, dtype=np.uint8)
        hits = rng.random(size) < self.density
        data[hits] = rng.integers(1, 256, size=int(hits.sum()), dtype=np.uint8)
        return data.tobytes()


class CorpusFactory:
    """Registry of stream classes"""

    _generators: Dict[str, Type[StreamGenerator]] = {
        "text": AsciiTextGenerator,
        "random": UniformRandomGenerator,
        "zlib": CompressedTextGenerator,
        "records": CounterRecordGenerator,
        "smooth": SmoothRowsGenerator,
        "hexdump": HexDumpGenerator,
        "utf16": Utf16TextGenerator,
        "sparse": SparseBinaryGenerator,
    }

    @classmethod
    def create_generator(cls, name: str) -> StreamGenerator:
        if name not in cls._generators:
            raise ConfigurationError(f"Unsupported stream class: {name}")
        return cls._generators[name](name)

    @classmethod
    def get_supported_classes(cls) -> List[str]:
        return list(cls._generators.keys())

    @classmethod
    def build_corpus(cls, classes: Sequence[str], per_class: int, size: int,
                     seed: int = 1) -> List[Tuple[bytes, int]]:
        """(stream, label) pairs; label is the class's index in ``classes``"""
        if per_class < 1 or size < 1:
            raise ConfigurationError("per_class and size must be positive")
        corpus = []
        for label, name in enumerate(classes):
            generator = cls.create_generator(name)
            for index in range(per_class):
                rng = np.random.default_rng(derive_seed(seed, label, index))
                corpus.append((generator.generate(size, rng), label))
        logger.info("corpus_built", classes=len(classes), per_class=per_class, size=size)
        return corpus
