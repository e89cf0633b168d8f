"""Shared loaders for the command modules: config files, settings and output helpers."""

import json
import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import BaseModel

from app.config import get_settings
from app.errors import RecordingIOError
from app.models import QcThresholds, SpectralConfig

logger = logging.getLogger(__name__)


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RecordingIOError(f"cannot read {path}: {exc}") from exc


def get_spectral_config(path: Optional[Path] = None) -> SpectralConfig:
    """Welch configuration from a JSON file, else from the environment settings."""
    if path is None:
        return SpectralConfig.from_settings()
    return SpectralConfig.model_validate_json(_read_text(path))


def get_thresholds(path: Optional[Path] = None) -> QcThresholds:
    if path is None:
        return QcThresholds.from_settings()
    return QcThresholds.model_validate_json(_read_text(path))


def get_workers(workers: Optional[int]) -> int:
    return workers or get_settings().max_workers


def write_json(model: BaseModel, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise RecordingIOError(f"cannot write {path}: {exc}") from exc
    return path


def write_bytes(content: bytes, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
    except OSError as exc:
        raise RecordingIOError(f"cannot write {path}: {exc}") from exc
    return path


def echo_kv(key: str, value) -> None:
    """One `key value` line on stdout; floats with six decimals."""
    if isinstance(value, float):
        value = f"{value:.6f}"
    click.echo(f"{key} {value}")
