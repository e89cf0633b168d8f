from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, field_validator, model_validator

from app.config import Settings, get_settings


def _float_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _complex_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _int_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def _to_list(arr: np.ndarray) -> list:
    return arr.tolist()


FloatArray = Annotated[np.ndarray, BeforeValidator(_float_array), PlainSerializer(_to_list, when_used="json")]
ComplexArray = Annotated[np.ndarray, BeforeValidator(_complex_array)]
IntArray = Annotated[np.ndarray, BeforeValidator(_int_array), PlainSerializer(_to_list, when_used="json")]


class ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# --- Recordings & configuration ---


class Recording(ArrayModel):
    data: FloatArray  # channels x samples, microvolts
    fs: float
    channels: List[str]
    reference: str = "common-average"
    units: str = "uV"
    provenance: Dict[str, Any] = Field(default_factory=dict)
    bad_channels: List[str] = Field(default_factory=list)  # flagged upstream, input to RBC

    @property
    def n_channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.data.shape[1]) if self.data.ndim == 2 else 0

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs


class ValidatedRecording(Recording):
    """A Recording that passed validate_recording."""


class SpectralConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    segment_seconds: float = Field(2.0, gt=0)
    overlap_fraction: float = Field(0.5, ge=0, lt=1)
    window: Literal["hann", "hamming", "rect"] = "hann"
    f_min: float = Field(1.0, gt=0)
    f_max: float = 30.0
    detrend: Literal["demean", "none"] = "demean"

    @model_validator(mode="after")
    def _check_band(self):
        if not self.f_min < self.f_max:
            raise ValueError(f"f_min ({self.f_min}) must be below f_max ({self.f_max})")
        return self

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None) -> "SpectralConfig":
        s = settings or get_settings()
        return cls(
            segment_seconds=s.segment_seconds,
            overlap_fraction=s.overlap_fraction,
            window=s.window,
            f_min=s.f_min,
            f_max=s.f_max,
            detrend=s.detrend,
        )


DEFAULT_BANDS: Dict[str, Tuple[float, float]] = {
    "delta": (1.0, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}


class BandSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    bands: Dict[str, Tuple[float, float]] = Field(default_factory=lambda: dict(DEFAULT_BANDS))

    @field_validator("bands")
    @classmethod
    def _check_bands(cls, bands):
        for name, (lo, hi) in bands.items():
            if not lo < hi:
                raise ValueError(f"band {name!r}: lo ({lo}) must be below hi ({hi})")
        edges = sorted(bands.values())
        for (_, hi), (lo_next, _) in zip(edges, edges[1:]):
            if lo_next < hi:
                raise ValueError("bands overlap")
        return bands

    @property
    def names(self) -> List[str]:
        return list(self.bands)

    def edges(self, name: str) -> Tuple[float, float]:
        if name not in self.bands:
            raise ValueError(f"Unknown band {name!r}; known: {', '.join(self.bands)}")
        return self.bands[name]


class MetricThresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    good_max: float
    ok_max: float

    @model_validator(mode="after")
    def _check_order(self):
        if not 0 < self.good_max < self.ok_max < 1:
            raise ValueError(f"need 0 < good_max < ok_max < 1, got {self.good_max}, {self.ok_max}")
        return self


class QcThresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    oha: MetricThresholds = MetricThresholds(good_max=0.1, ok_max=0.2)
    thv: MetricThresholds = MetricThresholds(good_max=0.1, ok_max=0.2)
    chv: MetricThresholds = MetricThresholds(good_max=0.15, ok_max=0.3)
    rbc: MetricThresholds = MetricThresholds(good_max=0.15, ok_max=0.3)
    voltage_amplitude_threshold: float = Field(100.0, gt=0)
    variance_z_threshold: float = Field(3.0, gt=0)
    palosi_flag: float = Field(0.7, ge=0, le=1)

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None) -> "QcThresholds":
        s = settings or get_settings()
        return cls(
            voltage_amplitude_threshold=s.voltage_amplitude_threshold,
            variance_z_threshold=s.variance_z_threshold,
            palosi_flag=s.palosi_flag,
        )


# --- Spectra ---


class FourierSeries(ArrayModel):
    coefficients: ComplexArray  # freqs x channels x segments
    freqs: FloatArray
    window_norm: float
    channels: List[str]
    fs: float

    @property
    def n_segments(self) -> int:
        return int(self.coefficients.shape[2])


class CrossSpectra(ArrayModel):
    matrices: ComplexArray  # freqs x channels x channels
    freqs: FloatArray
    n_segments: int
    channels: List[str]

    @property
    def n_channels(self) -> int:
        return int(self.matrices.shape[1])

    def traces(self) -> np.ndarray:
        return np.real(np.trace(self.matrices, axis1=1, axis2=2))


class PerFrequencyPca(ArrayModel):
    eigenvalues: FloatArray  # freqs x channels, descending
    eigenvectors: ComplexArray  # freqs x channels x channels, columns
    components: Optional[ComplexArray] = None  # freqs x channels x segments
    freqs: FloatArray


class CpcResult(ArrayModel):
    gamma: ComplexArray  # channels x K
    diagonals: FloatArray  # freqs x K
    iterations: List[int]
    freqs: FloatArray

    @property
    def n_components(self) -> int:
        return int(self.gamma.shape[1])


class PalosIndices(ArrayModel):
    global_index: float = Field(serialization_alias="global", validation_alias="global")
    per_frequency: FloatArray
    per_channel: FloatArray
    freqs: FloatArray
    channels: List[str]
    flag: bool
    threshold: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)


# --- Temporal QC ---


class QcLabel(str, Enum):
    GOOD = "Good"
    OK = "Ok"
    BAD = "Bad"


class TemporalMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    oha: float = Field(ge=0, le=1)
    thv: float = Field(ge=0, le=1)
    chv: float = Field(ge=0, le=1)
    rbc: float = Field(ge=0, le=1)
    label: QcLabel


# --- Connectivity ---


class Network(ArrayModel):
    weights: FloatArray
    labels: List[str]
    band: Optional[str] = None
    frequency: Optional[float] = None

    @property
    def n_nodes(self) -> int:
        return int(self.weights.shape[0])


class WeightHistogram(ArrayModel):
    counts: IntArray
    probabilities: FloatArray
    edges: FloatArray


# --- Simulation ---


class HeadModel(ArrayModel):
    radii_mm: Tuple[float, float, float] = (85.0, 88.0, 92.0)  # brain, skull, scalp
    conductivities: Tuple[float, float, float] = (0.33, 0.0042, 0.33)  # S/m
    electrode_positions: FloatArray  # unit sphere, N_e x 3
    electrode_labels: List[str]

    @model_validator(mode="after")
    def _check_shells(self):
        r = self.radii_mm
        if not 0 < r[0] < r[1] < r[2]:
            raise ValueError(f"shell radii must be strictly increasing, got {r}")
        if min(self.conductivities) <= 0:
            raise ValueError("conductivities must be positive")
        norms = np.linalg.norm(self.electrode_positions, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("electrode positions must lie on the unit sphere")
        if len(self.electrode_labels) != self.electrode_positions.shape[0]:
            raise ValueError("one label per electrode required")
        return self

    @property
    def brain_radius_mm(self) -> float:
        return self.radii_mm[0]

    @property
    def scalp_radius_mm(self) -> float:
        return self.radii_mm[2]


class DipoleScenario(ArrayModel):
    positions_mm: FloatArray  # N_d x 3
    orientations: FloatArray  # N_d x 3, unit
    intensities: FloatArray  # N_d
    coherence_range: Tuple[float, float] = (0.0, 0.1)
    tag: Literal["A", "B", "C", "D", "custom"] = "custom"
    rings: Optional[List[int]] = None  # ring index per dipole, 0 = centre

    @model_validator(mode="after")
    def _check(self):
        n = self.positions_mm.shape[0]
        if self.orientations.shape != (n, 3) or self.intensities.shape != (n,):
            raise ValueError("positions, orientations and intensities disagree on dipole count")
        if not np.allclose(np.linalg.norm(self.orientations, axis=1), 1.0, atol=1e-9):
            raise ValueError("orientations must be unit vectors")
        if np.any(self.intensities < 0):
            raise ValueError("intensities must be non-negative")
        lo, hi = self.coherence_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError(f"coherence range must satisfy 0 <= lo <= hi <= 1, got {self.coherence_range}")
        return self

    @property
    def n_dipoles(self) -> int:
        return int(self.positions_mm.shape[0])


class Leadfield(ArrayModel):
    matrix: FloatArray  # N_e x N_d, uV per nA*m, average reference
    channels: List[str]
    source_labels: List[str]


# --- ICA / inverse ---


class IcaModel(ArrayModel):
    mixing: FloatArray  # N_e x N_c
    unmixing: FloatArray  # N_c x N_e
    sources: FloatArray  # N_c x N_t
    explained_variance: FloatArray  # N_c, descending
    mean: FloatArray  # N_e
    fs: float
    channels: List[str]
    reference: str = "common-average"

    @property
    def n_components(self) -> int:
        return int(self.mixing.shape[1])


class InverseOperator(ArrayModel):
    kernel: FloatArray  # standardized, N_d x N_e
    minimum_norm: FloatArray  # N_d x N_e
    resolution_diagonal: FloatArray  # N_d
    alpha: float = Field(gt=0)
    channels: List[str]
    source_labels: List[str]


class RoiTimeSeries(ArrayModel):
    data: FloatArray  # N_r x N_t
    labels: List[str]
    explained_variance: FloatArray  # PC1 variance per ROI
    explained_variance_ratio: FloatArray


# --- Reports ---


class RecordingHeader(BaseModel):
    """Sidecar JSON describing a recording payload."""

    fs: float = Field(gt=0)
    channels: List[str] = Field(min_length=1)
    reference: str = "common-average"
    units: str = "uV"
    provenance: Dict[str, Any] = Field(default_factory=dict)
    bad_channels: List[str] = Field(default_factory=list)
    format: Literal["csv", "f64"] = "f64"
    shape: Tuple[int, int]
    payload: str

    @model_validator(mode="after")
    def _check_shape(self):
        if self.shape[0] != len(self.channels):
            raise ValueError(f"shape {self.shape} disagrees with {len(self.channels)} channel labels")
        return self


class QualityReport(ArrayModel):
    recording_id: str
    channels: List[str]
    fs: float
    n_segments: int
    spectral_config: SpectralConfig
    thresholds: QcThresholds
    temporal: TemporalMetrics
    palosi: PalosIndices
    band_palosi: Dict[str, float]
    band_entropy: Dict[str, float]
    artifact_choices: Dict[str, Any] = Field(default_factory=dict)
    tool_version: str
    seeds: List[int] = Field(default_factory=list)


class BatchError(BaseModel):
    recording_id: str
    reason: str


class BatchSummary(BaseModel):
    n_files: int
    n_processed: int
    n_failed: int
    crosstab: Dict[str, Dict[str, int]]
    crosstab_fraction: Dict[str, Dict[str, float]]
    fraction_flagged: float
    fraction_flagged_by_label: Dict[str, float]
    fraction_above_0_9: float
    fraction_above_0_9_by_label: Dict[str, float]
    errors: List[BatchError] = Field(default_factory=list)


class ScenarioManifest(BaseModel):
    tag: str
    seed: int
    duration_s: float
    fs: float
    positions_mm: List[List[float]]
    orientations: List[List[float]]
    intensities: List[float]
    coherence_range: Tuple[float, float]
    mixing_weight: float
    measured_coherence: float
    pairwise_coherence_min: float
    pairwise_coherence_max: float
    head_model: Dict[str, Any]


# --- Degradation suite ---


class DegradationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_datasets: int = Field(50, ge=1)
    seed: int = 0
    fs: float = Field(100.0, gt=0)
    duration_s: float = Field(60.0, gt=0)
    n_sources: int = Field(103, ge=2)
    gt_palosi_target: float = Field(0.3, gt=0, lt=1)
    gt_palosi_range: Tuple[float, float] = (0.2, 0.4)
    gt_cpc_components: int = Field(8, ge=1)
    max_attempts: int = Field(20, ge=1)
    epe_threshold: float = Field(0.7, ge=0, le=1)
    similarity_hz: float = Field(10.0, gt=0)
    max_workers: int = Field(4, ge=1)


class SweepPoint(BaseModel):
    dataset: int
    k_removed: int
    n_kept: int
    scalp_palosi: float
    source_palosi: float


class DatasetOutcome(BaseModel):
    dataset: int
    seed: int
    attempts: int
    mixing_weight: float
    gt_palosi: float
    ce_palosi: float
    sce_palosi: float
    epe_k_removed: int
    epe_palosi: float
    sepe_palosi: float
    spearman: float
    source_below_scalp: bool
    se_ce: Dict[str, float]
    se_epe: Dict[str, float]
    similarity: Dict[str, float]
    epe_histograms: Dict[str, List[int]]
    sweep: List[SweepPoint]


class SuiteSummary(BaseModel):
    n_datasets: int
    config: DegradationConfig
    median_spearman: float
    fraction_source_below_scalp: float
    median_palosi: Dict[str, float]
    ordering: Dict[str, float]
    se_sign_test: Dict[str, Dict[str, float]]
    epe_modal_bin: Dict[str, List[float]]
    modal_bin_in_0_7_0_8: int
    median_similarity: Dict[str, float]
