"""Core engines for stegwave"""

from .errors import StegwaveError
from .imageio import ImagePlane, RgbImage, read_pnm, write_pnm
from .bitmeasures import FeatureVector, MeasureConfig, Scaler, feature_vector
from .classifier import MulticlassModel, SvmConfig, train_multiclass, predict_class
from .stego import StegoParams, EmbedOrder, embed_lsb, extract_lsb_plane
from .wavelet import SubBands, second_level_subbands
from .detector import forced_embedding_curve, calibrate, estimate_k

__all__ = [
    "StegwaveError",
    "ImagePlane", "RgbImage", "read_pnm", "write_pnm",
    "FeatureVector", "MeasureConfig", "Scaler", "feature_vector",
    "MulticlassModel", "SvmConfig", "train_multiclass", "predict_class",
    "StegoParams", "EmbedOrder", "embed_lsb", "extract_lsb_plane",
    "SubBands", "second_level_subbands",
    "forced_embedding_curve", "calibrate", "estimate_k",
]
