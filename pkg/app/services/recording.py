import logging

import numpy as np

from app.errors import DuplicateChannel, NonFinite, ShapeMismatch, TooFewChannels, TooShort
from app.models import Recording, ValidatedRecording

logger = logging.getLogger(__name__)

MIN_SECONDS = 2.0


def validate_recording(rec: Recording) -> ValidatedRecording:
    """Check the Recording invariants and return the same content as a ValidatedRecording."""
    data = rec.data
    if data.ndim != 2:
        raise ShapeMismatch(f"Recording data must be 2-D (channels x samples), got shape {data.shape}")
    if data.shape[0] != len(rec.channels):
        raise ShapeMismatch(f"{data.shape[0]} data rows but {len(rec.channels)} channel labels")
    if data.shape[0] < 2:
        raise TooFewChannels(data.shape[0])
    if not rec.fs > 0:
        raise ShapeMismatch(f"Sampling rate must be positive, got {rec.fs}")

    required = int(np.ceil(MIN_SECONDS * rec.fs))
    if data.shape[1] < required:
        raise TooShort(data.shape[1], required)

    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        raise NonFinite(bad[0])

    seen = set()
    for label in rec.channels:
        if label in seen:
            raise DuplicateChannel(label)
        seen.add(label)

    if isinstance(rec, ValidatedRecording):
        return rec
    return ValidatedRecording(**{name: getattr(rec, name) for name in Recording.model_fields})


def with_data(rec: Recording, data: np.ndarray, **changes) -> Recording:
    """Copy of rec with replaced data (and optionally other fields)."""
    fields = {name: getattr(rec, name) for name in Recording.model_fields}
    fields.update(changes)
    fields["data"] = data
    return Recording(**fields)
