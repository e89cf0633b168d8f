from functools import lru_cache

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Welch spectra
    segment_seconds: float = 2.0
    overlap_fraction: float = 0.5
    window: str = "hann"
    f_min: float = 1.0
    f_max: float = 30.0
    detrend: str = "demean"

    # Temporal QC
    voltage_amplitude_threshold: float = 100.0
    variance_z_threshold: float = 3.0
    palosi_flag: float = 0.7

    # Stepwise CPC
    cpc_tol: float = 1e-9
    cpc_max_iter: int = 500

    # FastICA
    ica_tol: float = 1e-6
    ica_max_iter: int = 1000

    # sLORETA: alpha = scale * trace(L L^T) / N_e
    sloreta_alpha_scale: float = 0.05

    # Batch
    max_workers: int = 4

    log_level: str = "INFO"

    model_config = {"env_prefix": "PALOSI_", "env_file": ".env", "env_file_encoding": "utf-8"}


@lru_cache
def get_settings() -> Settings:
    return Settings()
