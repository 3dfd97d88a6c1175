"""Synthetic corpora: byte-stream classes and natural-statistics images"""

from .base import CorpusFactory, StreamGenerator
from .images import natural_image, natural_rgb

__all__ = ["CorpusFactory", "StreamGenerator", "natural_image", "natural_rgb"]
