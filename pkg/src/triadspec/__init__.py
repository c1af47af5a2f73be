"""Cross-sensor RGB spectrograms for magnetometer triads.

Fuses the short-time Fourier power of three synchronously sampled
magnetometers into one colour image, classifies its pixels against a
colour-anomaly taxonomy, and cross-checks the picture with pairwise
magnitude-squared coherence and the eigenvalue structure of the 3x3
cross-spectral matrix. A deterministic scenario generator provides
ground truth for verification.
"""

from .coherence import (
    ALL_PAIRS,
    CoherenceSpectrum,
    CrossSpectralDensity,
    RankSpectrum,
    cross_spectral_rank,
    eigvalsh3,
    msc,
    welch_csd,
)
from .dsp import (
    DECIBEL,
    DEFAULT_DB_FLOOR,
    LINEAR,
    ScalarSeries,
    Spectrogram,
    StftParams,
    db_compress,
    frame_count,
    hann_window,
    power_spectrogram,
    stft,
)
from .errors import (
    AliasingError,
    BoundaryGapError,
    DegenerateNormalizationWarning,
    FormatError,
    InsufficientDataError,
    MalformedInputError,
    NoOverlapError,
    ParameterError,
    PipelineStageError,
    RateMismatchError,
    ResolutionMismatchError,
    ScaleError,
    ShapeMismatchError,
    TriadspecError,
    UndefinedShareError,
)
from .pipeline import (
    DEFAULT_CHANNEL_MAP,
    JOINT,
    PER_CHANNEL,
    LowFreqParams,
    NormalizedSpectrogram,
    PipelineConfig,
    PipelineResult,
    RgbTensor,
    VectorSeries,
    align_triad,
    crop_common,
    crop_frequency,
    fuse_rgb,
    normalize,
    repair_gaps,
    run_pipeline,
    scalar_magnitude,
    trim_residual_gaps,
)
from .synth import (
    RNG_ALGORITHM,
    Injector,
    ScenarioFile,
    ScenarioSpec,
    ScheduleRecord,
    expected_class,
    generate,
    load_scenario,
    parse_scenario,
    schedule,
)
from .taxonomy import (
    COLOUR_CLASSES,
    DEFAULT_THRESHOLDS,
    PC_BANDS,
    PRIMARY_BY_SENSOR,
    SECONDARY_BY_PAIR,
    ClassifierThresholds,
    DriftReport,
    PixelClass,
    RegionReport,
    classify_image,
    classify_pixel,
    detect_drift,
    pc_band_lookup,
    segment_regions,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
