"""Configuration management for stegwave"""

from typing import Literal, Tuple

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    """Process-wide settings"""
    model_config = SettingsConfigDict(env_prefix="STEGWAVE_", env_file=".env", extra="ignore")

    log_level: str = Field(default="WARNING")
    log_format: Literal["console", "json"] = Field(default="console")
    workers: int = Field(default=1, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)


class MeasureSettings(BaseSettings):
    """Bit-stream measure settings"""
    model_config = SettingsConfigDict(env_prefix="STEGWAVE_MEASURE_", env_file=".env", extra="ignore")

    window_words: int = Field(default=2000, ge=1)
    entropy_weights: Tuple[float, float, float, float] = Field(default=(16.0, 256.0, 4096.0, 65536.0))

    @field_validator("entropy_weights")
    @classmethod
    def _positive_weights(cls, value):
        if any(w <= 0 for w in value):
            raise ValueError("entropy weights must be positive")
        return value


class SvmSettings(BaseSettings):
    """Kernel SVM settings"""
    model_config = SettingsConfigDict(env_prefix="STEGWAVE_SVM_", env_file=".env", extra="ignore")

    gamma: float = Field(default=1.0 / 9.0, gt=0)
    c: float = Field(default=10.0, gt=0)
    tol: float = Field(default=1e-3, gt=0)
    max_passes: int = Field(default=200, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)


class DetectorSettings(BaseSettings):
    """Forced-embedding detector settings"""
    model_config = SettingsConfigDict(env_prefix="STEGWAVE_DETECTOR_", env_file=".env", extra="ignore")

    i_fixed: float = Field(default=0.2, ge=0, le=1)
    gamma_i_fixed: float = Field(default=0.7, ge=0, le=1)
    estimate_repeats: int = Field(default=4, ge=1)
    cover_p: float = Field(default=0.65, ge=0, le=1)


class Settings:
    """Global settings container"""

    def __init__(self):
        self.app = AppSettings()
        self.measure = MeasureSettings()
        self.svm = SvmSettings()
        self.detector = DetectorSettings()


# Global settings instance
settings = Settings()
