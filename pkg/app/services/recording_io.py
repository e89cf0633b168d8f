"""Recording files: a JSON sidecar header next to a CSV or raw float64 payload."""

import json
import logging
from pathlib import Path
from typing import List, Literal, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.errors import MalformedHeader, RecordingIOError, ShapeMismatch, UnsupportedUnits
from app.models import Leadfield, Recording, RecordingHeader, ValidatedRecording
from app.services.recording import validate_recording

logger = logging.getLogger(__name__)

# factor to the stored unit; voltages are kept in microvolts
UNIT_SCALE = {"uV": 1.0, "µV": 1.0, "mV": 1e3, "V": 1e6, "nAm": 1.0, "au": 1.0}
STORED_UNITS = {"uV": "uV", "µV": "uV", "mV": "uV", "V": "uV", "nAm": "nAm", "au": "au"}
PAYLOAD_SUFFIX = {"csv": ".csv", "f64": ".f64"}
MANIFEST_SUFFIX = ".manifest.json"

PathLike = Union[str, Path]


def header_path(path: PathLike) -> Path:
    path = Path(path)
    return path if path.suffix == ".json" else path.with_suffix(".json")


def recording_id(path: PathLike) -> str:
    return header_path(path).stem


def read_header(path: PathLike) -> RecordingHeader:
    sidecar = header_path(path)
    try:
        text = sidecar.read_text(encoding="utf-8")
    except OSError as exc:
        raise RecordingIOError(f"cannot read header {sidecar}: {exc}") from exc
    try:
        return RecordingHeader.model_validate_json(text)
    except ValidationError as exc:
        raise MalformedHeader(f"{sidecar.name}: {exc.errors()[0]['msg']}") from exc


def _read_payload(header: RecordingHeader, payload: Path) -> np.ndarray:
    n_channels, n_samples = header.shape
    if header.format == "f64":
        values = np.fromfile(payload, dtype="<f8")
        if values.size != n_channels * n_samples:
            raise ShapeMismatch(
                f"{payload.name} holds {values.size} values, header shape {header.shape} needs {n_channels * n_samples}"
            )
        return values.reshape(n_channels, n_samples).astype(np.float64)

    frame = pd.read_csv(payload, float_precision="round_trip")
    columns = [str(c) for c in frame.columns]
    if columns != list(header.channels):
        raise ShapeMismatch(f"{payload.name} has columns {columns}, header lists {header.channels}")
    data = frame.to_numpy(dtype=np.float64).T
    if data.shape[1] != n_samples:
        raise ShapeMismatch(f"{payload.name} has {data.shape[1]} rows, header shape {header.shape}")
    return data


def read_recording(path: PathLike) -> ValidatedRecording:
    header = read_header(path)
    if header.units not in UNIT_SCALE:
        raise UnsupportedUnits(header.units)

    payload = header_path(path).parent / header.payload
    try:
        data = _read_payload(header, payload)
    except OSError as exc:
        raise RecordingIOError(f"cannot read payload {payload}: {exc}") from exc

    scale = UNIT_SCALE[header.units]
    if scale != 1.0:
        data = data * scale
    rec = Recording(
        data=data,
        fs=header.fs,
        channels=header.channels,
        reference=header.reference,
        units=STORED_UNITS[header.units],
        provenance=header.provenance,
        bad_channels=header.bad_channels,
    )
    logger.debug("Read %s: %d channels x %d samples at %g Hz", payload.name, rec.n_channels, rec.n_samples, rec.fs)
    return validate_recording(rec)


def write_recording(rec: Recording, path: PathLike, fmt: Literal["csv", "f64"] = "f64") -> Path:
    """Write payload and sidecar; returns the sidecar path."""
    sidecar = header_path(path)
    payload = sidecar.with_suffix(PAYLOAD_SUFFIX[fmt])
    header = RecordingHeader(
        fs=rec.fs,
        channels=list(rec.channels),
        reference=rec.reference,
        units=rec.units,
        provenance=rec.provenance,
        bad_channels=list(rec.bad_channels),
        format=fmt,
        shape=(rec.n_channels, rec.n_samples),
        payload=payload.name,
    )
    try:
        sidecar.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "f64":
            np.ascontiguousarray(rec.data, dtype="<f8").tofile(payload)
        else:
            frame = pd.DataFrame(rec.data.T, columns=list(rec.channels))
            frame.to_csv(payload, index=False, float_format="%.17g")
        sidecar.write_text(json.dumps(header.model_dump(mode="json"), sort_keys=True, indent=2), encoding="utf-8")
    except OSError as exc:
        raise RecordingIOError(f"cannot write {sidecar}: {exc}") from exc
    logger.debug("Wrote %s (%s payload)", sidecar, fmt)
    return sidecar


def discover_recordings(inputs: List[PathLike]) -> List[Path]:
    """Sidecar headers named directly or found in the given directories, sorted."""
    found = set()
    for item in inputs:
        item = Path(item)
        if item.is_dir():
            found.update(p for p in item.glob("*.json") if not p.name.endswith(MANIFEST_SUFFIX))
        else:
            found.add(header_path(item))
    return sorted(found)


def write_leadfield(leadfield: Leadfield, path: PathLike) -> Path:
    """Leadfield as CSV, one row per channel and one column per source."""
    path = Path(path)
    frame = pd.DataFrame(leadfield.matrix, index=leadfield.channels, columns=leadfield.source_labels)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, float_format="%.17g", index_label="channel")
    except OSError as exc:
        raise RecordingIOError(f"cannot write leadfield {path}: {exc}") from exc
    return path


def read_leadfield(path: PathLike) -> Leadfield:
    try:
        frame = pd.read_csv(path, index_col=0, float_precision="round_trip")
    except OSError as exc:
        raise RecordingIOError(f"cannot read leadfield {path}: {exc}") from exc
    if frame.empty:
        raise ShapeMismatch(f"leadfield {path} is empty")
    return Leadfield(
        matrix=frame.to_numpy(dtype=np.float64),
        channels=[str(c) for c in frame.index],
        source_labels=[str(c) for c in frame.columns],
    )
