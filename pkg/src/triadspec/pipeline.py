"""Triad pipeline: magnitude reduction, gap repair, alignment,
normalisation, common-rectangle cropping and RGB fusion.

The full chain is ``run_pipeline``: repair/align, scalar magnitude,
power spectrogram, optional dB compression, normalisation, crop, fuse.
The three sensor branches are independent pure computations, so their
evaluation order never changes the result.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import (
    DECIBEL,
    LINEAR,
    ScalarSeries,
    Spectrogram,
    StftParams,
    db_compress,
    power_spectrogram,
)
from .errors import (
    BoundaryGapError,
    DegenerateNormalizationWarning,
    MalformedInputError,
    NoOverlapError,
    ParameterError,
    PipelineStageError,
    RateMismatchError,
    ResolutionMismatchError,
    ScaleError,
    ShapeMismatchError,
    TriadspecError,
)

PER_CHANNEL = "per_channel"
JOINT = "joint"
_NORM_MODES = (PER_CHANNEL, JOINT)

DEFAULT_CHANNEL_MAP = {"R": 1, "G": 2, "B": 3}
DEFAULT_MAX_GAP = 5


@dataclass(frozen=True, eq=False)
class VectorSeries:
    """Three-component field samples from one sensor at a fixed rate."""

    bx: np.ndarray
    by: np.ndarray
    bz: np.ndarray
    sample_rate: float
    sensor_id: int = 1
    start_time: float = 0.0

    def __post_init__(self):
        for name in ("bx", "by", "bz"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (self.bx.ndim == self.by.ndim == self.bz.ndim == 1):
            raise MalformedInputError("components must be one-dimensional")
        if not (self.bx.size == self.by.size == self.bz.size):
            raise MalformedInputError(
                f"component lengths differ: {self.bx.size}, {self.by.size}, {self.bz.size}"
            )
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.sensor_id not in (1, 2, 3):
            raise ParameterError(f"sensor_id must be 1, 2 or 3, got {self.sensor_id}")

    def __len__(self) -> int:
        return self.bx.size

    @property
    def end_time(self) -> float:
        """Time of the last sample in seconds."""
        return self.start_time + (len(self) - 1) / self.sample_rate


@dataclass(eq=False)
class NormalizedSpectrogram:
    """A spectrogram rescaled into [0, 1], ready for fusion."""

    values: np.ndarray
    freq_step: float
    frame_times: np.ndarray
    sensor_id: int
    norm_mode: str
    source_scale: str

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(eq=False)
class RgbTensor:
    """Three aligned normalised spectrograms stacked as colour channels.

    ``channel_map`` records which sensor feeds which channel, e.g.
    ``{"R": 1, "G": 2, "B": 3}``; it must accompany any rendering of the
    tensor so the colour code stays interpretable.
    """

    r: NormalizedSpectrogram
    g: NormalizedSpectrogram
    b: NormalizedSpectrogram
    channel_map: dict
    freq_step: float
    frame_times: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.r.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.r.values.shape[1]

    def to_array(self) -> np.ndarray:
        """Stack the channels into an array indexed [bin, frame, rgb]."""
        return np.stack([self.r.values, self.g.values, self.b.values], axis=-1)


@dataclass(frozen=True)
class LowFreqParams:
    """Long-window variant parameters: window length, overlap and the
    frequency-axis crop limit in Hz."""

    window_len: int
    overlap: float
    f_max: float

    def __post_init__(self):
        if not isinstance(self.window_len, int) or self.window_len < 2:
            raise ParameterError(f"lowfreq window_len must be an integer >= 2, got {self.window_len}")
        if not 0.0 <= self.overlap < 1.0:
            raise ParameterError(f"lowfreq overlap must be in [0, 1), got {self.overlap}")
        if not self.f_max > 0:
            raise ParameterError(f"lowfreq f_max must be positive, got {self.f_max}")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything ``run_pipeline`` needs besides the data."""

    stft: StftParams
    norm_mode: str = PER_CHANNEL
    lowfreq: LowFreqParams | None = None
    max_gap: int = DEFAULT_MAX_GAP

    def __post_init__(self):
        if self.norm_mode not in _NORM_MODES:
            raise ParameterError(f"norm_mode must be one of {_NORM_MODES}, got {self.norm_mode!r}")
        if self.max_gap < 0:
            raise ParameterError(f"max_gap must be non-negative, got {self.max_gap}")
        if self.lowfreq is not None and self.lowfreq.window_len <= self.stft.window_len:
            raise ParameterError(
                f"lowfreq window_len ({self.lowfreq.window_len}) must exceed the "
                f"broadband window_len ({self.stft.window_len})"
            )


@dataclass(eq=False)
class PipelineResult:
    """Broadband tensor plus, when configured, the low-frequency variant."""

    broadband: RgbTensor
    lowfreq: RgbTensor | None = None


def scalar_magnitude(v: VectorSeries) -> ScalarSeries:
    """Rotation-invariant magnitude sqrt(bx^2 + by^2 + bz^2) per sample."""
    if len(v) == 0:
        raise MalformedInputError("series is empty")
    b = np.sqrt(v.bx**2 + v.by**2 + v.bz**2)
    return ScalarSeries(b, v.sample_rate, v.sensor_id, v.start_time)


def _mask_runs(mask: np.ndarray):
    """Yield (start, stop) index pairs of contiguous True runs."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    stops = np.concatenate((idx[breaks] + 1, [idx[-1] + 1]))
    yield from zip(starts, stops)


def repair_gaps(
    v: VectorSeries, gap_mask, max_gap: int = DEFAULT_MAX_GAP
) -> tuple[VectorSeries, np.ndarray]:
    """Linearly interpolate short dropouts, flag the rest.

    Masked runs of length <= ``max_gap`` are interpolated per component
    from the bounding valid samples. Longer runs are left untouched and
    returned in the residual mask so the caller can trim around them
    (see ``align_triad`` / ``run_pipeline``). A run of repairable length
    that touches the series boundary has no bounding sample on one side
    and raises ``BoundaryGapError``.

    Returns (repaired series, residual gap mask).
    """
    mask = np.asarray(gap_mask, dtype=bool)
    if mask.shape != (len(v),):
        raise MalformedInputError(
            f"gap_mask length {mask.size} does not match series length {len(v)}"
        )
    comps = [v.bx.copy(), v.by.copy(), v.bz.copy()]
    residual = np.zeros(len(v), dtype=bool)
    for start, stop in _mask_runs(mask):
        run_len = stop - start
        if run_len > max_gap:
            residual[start:stop] = True
            continue
        if start == 0 or stop == len(v):
            raise BoundaryGapError(
                f"gap of {run_len} sample(s) at the series boundary "
                f"(samples {start}..{stop - 1}) has no bounding valid sample"
            )
        frac = np.arange(1, run_len + 1) / (run_len + 1)
        for comp in comps:
            comp[start:stop] = comp[start - 1] + frac * (comp[stop] - comp[start - 1])
    repaired = VectorSeries(
        comps[0], comps[1], comps[2], v.sample_rate, v.sensor_id, v.start_time
    )
    return repaired, residual


def align_triad(
    v1: VectorSeries, v2: VectorSeries, v3: VectorSeries
) -> tuple[VectorSeries, VectorSeries, VectorSeries]:
    """Trim the three series to their common temporal support.

    All outputs share the same start time and length. Unequal sample
    rates raise ``RateMismatchError`` (resampling is out of scope), as
    does a sensor whose start is offset by a non-integer number of
    samples. An empty intersection raises ``NoOverlapError``.
    """
    triad = (v1, v2, v3)
    rate = v1.sample_rate
    for v in triad[1:]:
        if not math.isclose(v.sample_rate, rate, rel_tol=1e-12):
            raise RateMismatchError(
                f"sample rates differ: {rate} Hz vs {v.sample_rate} Hz (resampling not supported)"
            )
    if any(len(v) == 0 for v in triad):
        raise NoOverlapError("at least one series is empty")
    t0 = max(v.start_time for v in triad)
    t1 = min(v.end_time for v in triad)
    if t1 < t0:
        raise NoOverlapError(f"no common support: latest start {t0} s is after earliest end {t1} s")
    offsets = []
    for v in triad:
        off = (t0 - v.start_time) * rate
        if abs(off - round(off)) > 1e-6:
            raise RateMismatchError(
                f"sensor {v.sensor_id} is offset by a non-integer number of samples "
                f"({off:.6f}); triads must share a common sample phase"
            )
        offsets.append(int(round(off)))
    n_common = min(len(v) - off for v, off in zip(triad, offsets))
    out = []
    for v, off in zip(triad, offsets):
        out.append(
            VectorSeries(
                v.bx[off : off + n_common],
                v.by[off : off + n_common],
                v.bz[off : off + n_common],
                rate,
                v.sensor_id,
                t0,
            )
        )
    return tuple(out)


def _rescale(values: np.ndarray, lo: float, hi: float, sensor_id: int) -> np.ndarray:
    if hi == lo:
        warnings.warn(
            f"sensor {sensor_id}: constant spectrogram, normalising to all zeros",
            DegenerateNormalizationWarning,
            stacklevel=3,
        )
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def normalize(specs, mode: str = PER_CHANNEL) -> list[NormalizedSpectrogram]:
    """Min-max rescale three spectrograms into [0, 1].

    ``per_channel`` rescales each grid by its own extrema, emphasising
    shape agreement; ``joint`` applies a single (min, max) taken over all
    three grids, preserving absolute amplitude differences between
    sensors. A constant grid normalises to all zeros with a warning.
    """
    specs = list(specs)
    if len(specs) != 3:
        raise MalformedInputError(f"normalize expects exactly 3 spectrograms, got {len(specs)}")
    if mode not in _NORM_MODES:
        raise ParameterError(f"mode must be one of {_NORM_MODES}, got {mode!r}")
    scales = {s.scale for s in specs}
    if len(scales) != 1:
        raise ScaleError(
            f"spectrograms carry mixed scales {sorted(scales)}; normalise one scale at a time"
        )
    if mode == JOINT:
        lo = min(float(s.values.min()) for s in specs)
        hi = max(float(s.values.max()) for s in specs)
    out = []
    for s in specs:
        if mode == PER_CHANNEL:
            lo, hi = float(s.values.min()), float(s.values.max())
        out.append(
            NormalizedSpectrogram(
                values=_rescale(s.values, lo, hi, s.sensor_id),
                freq_step=s.freq_step,
                frame_times=s.frame_times.copy(),
                sensor_id=s.sensor_id,
                norm_mode=mode,
                source_scale=s.scale,
            )
        )
    return out


def crop_common(specs) -> list[NormalizedSpectrogram]:
    """Truncate three grids to their smallest common (bins, frames)
    rectangle, keeping leading indices on both axes."""
    specs = list(specs)
    if len(specs) != 3:
        raise MalformedInputError(f"crop_common expects exactly 3 spectrograms, got {len(specs)}")
    step = specs[0].freq_step
    for s in specs[1:]:
        if not math.isclose(s.freq_step, step, rel_tol=1e-9):
            raise ResolutionMismatchError(
                f"frequency resolutions differ: {step} Hz vs {s.freq_step} Hz"
            )
    nb = min(s.n_bins for s in specs)
    nf = min(s.n_frames for s in specs)
    out = []
    for s in specs:
        out.append(
            NormalizedSpectrogram(
                values=s.values[:nb, :nf],
                freq_step=s.freq_step,
                frame_times=s.frame_times[:nf],
                sensor_id=s.sensor_id,
                norm_mode=s.norm_mode,
                source_scale=s.source_scale,
            )
        )
    return out


def crop_frequency(spec: NormalizedSpectrogram, f_max: float) -> NormalizedSpectrogram:
    """Keep bins whose centre frequency is at most ``f_max`` (inclusive)."""
    if not f_max > 0:
        raise ParameterError(f"f_max must be positive, got {f_max}")
    n_keep = int(math.floor(f_max / spec.freq_step + 1e-9)) + 1
    n_keep = min(max(n_keep, 1), spec.n_bins)
    return NormalizedSpectrogram(
        values=spec.values[:n_keep],
        freq_step=spec.freq_step,
        frame_times=spec.frame_times.copy(),
        sensor_id=spec.sensor_id,
        norm_mode=spec.norm_mode,
        source_scale=spec.source_scale,
    )


def fuse_rgb(specs, channel_map: dict | None = None) -> RgbTensor:
    """Stack three normalised spectrograms as colour channels.

    ``channel_map`` maps channel letters to sensor ids and must be a
    bijection onto {1, 2, 3}; the default puts sensor 1 on red, 2 on
    green, 3 on blue.
    """
    specs = list(specs)
    if len(specs) != 3:
        raise MalformedInputError(f"fuse_rgb expects exactly 3 spectrograms, got {len(specs)}")
    if channel_map is None:
        channel_map = dict(DEFAULT_CHANNEL_MAP)
    if sorted(channel_map.keys()) != ["B", "G", "R"] or sorted(channel_map.values()) != [1, 2, 3]:
        raise ParameterError(f"channel_map must map R, G, B onto sensors 1, 2, 3; got {channel_map}")
    by_id = {s.sensor_id: s for s in specs}
    if sorted(by_id.keys()) != [1, 2, 3]:
        raise MalformedInputError(
            f"expected one spectrogram per sensor 1, 2, 3; got sensors {sorted(s.sensor_id for s in specs)}"
        )
    r, g, b = (by_id[channel_map[ch]] for ch in ("R", "G", "B"))
    shape = r.values.shape
    if g.values.shape != shape or b.values.shape != shape:
        raise ShapeMismatchError(
            f"channel shapes differ: {r.values.shape}, {g.values.shape}, {b.values.shape} "
            "(apply crop_common first)"
        )
    return RgbTensor(
        r=r,
        g=g,
        b=b,
        channel_map=dict(channel_map),
        freq_step=r.freq_step,
        frame_times=r.frame_times.copy(),
    )


def trim_residual_gaps(v: VectorSeries, residual: np.ndarray) -> VectorSeries:
    """Drop unrepaired gap runs at the series edges; interior runs are fatal."""
    if not residual.any():
        return v
    valid = np.flatnonzero(~residual)
    if valid.size == 0:
        raise MalformedInputError(f"sensor {v.sensor_id}: no valid samples remain after gap repair")
    first, last = int(valid[0]), int(valid[-1])
    if residual[first : last + 1].any():
        raise MalformedInputError(
            f"sensor {v.sensor_id}: interior gap run exceeds max_gap and cannot be repaired or trimmed"
        )
    return VectorSeries(
        v.bx[first : last + 1],
        v.by[first : last + 1],
        v.bz[first : last + 1],
        v.sample_rate,
        v.sensor_id,
        v.start_time + first / v.sample_rate,
    )


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except TriadspecError as err:
        raise PipelineStageError(name, err) from err


def _branch(series, params: StftParams) -> Spectrogram:
    spec = power_spectrogram(series, params)
    if params.scale == DECIBEL:
        spec = db_compress(spec, params.db_floor)
    return spec


def run_pipeline(
    v1: VectorSeries,
    v2: VectorSeries,
    v3: VectorSeries,
    cfg: PipelineConfig,
    gap_masks=None,
) -> PipelineResult:
    """Run the full triad pipeline and return the fused tensor(s).

    Stages, in order: gap repair (when masks are given), alignment,
    scalar magnitude, power spectrogram, optional dB compression,
    normalisation, common-rectangle crop, RGB fusion. With
    ``cfg.lowfreq`` set, a second tensor is produced from the same
    aligned magnitudes using the long window, with the frequency axis
    cropped to [0, f_max] between normalisation and the common crop.

    Errors from any stage are re-raised as ``PipelineStageError`` with
    the stage name, the original error chained.
    """
    triad = [v1, v2, v3]
    if gap_masks is not None:
        repaired = []
        for v, mask in zip(triad, gap_masks):
            if mask is None:
                repaired.append(v)
                continue
            fixed, residual = _stage("repair_gaps", repair_gaps, v, mask, cfg.max_gap)
            repaired.append(_stage("repair_gaps", trim_residual_gaps, fixed, residual))
        triad = repaired
    triad = _stage("align_triad", align_triad, *triad)
    mags = [_stage("scalar_magnitude", scalar_magnitude, v) for v in triad]

    nyquist = triad[0].sample_rate / 2.0
    specs = [_stage("power_spectrogram", _branch, m, cfg.stft) for m in mags]
    norms = _stage("normalize", normalize, specs, cfg.norm_mode)
    norms = _stage("crop_common", crop_common, norms)
    broadband = _stage("fuse_rgb", fuse_rgb, norms)

    lowfreq_tensor = None
    if cfg.lowfreq is not None:
        lf = cfg.lowfreq
        if lf.f_max > nyquist:
            raise PipelineStageError(
                "lowfreq",
                ParameterError(f"lowfreq f_max {lf.f_max} Hz exceeds the Nyquist frequency {nyquist} Hz"),
            )
        lf_params = StftParams(
            window_len=lf.window_len,
            overlap=lf.overlap,
            scale=cfg.stft.scale,
            db_floor=cfg.stft.db_floor,
        )
        lf_specs = [_stage("lowfreq_spectrogram", _branch, m, lf_params) for m in mags]
        lf_norms = _stage("normalize", normalize, lf_specs, cfg.norm_mode)
        lf_norms = [_stage("lowfreq_crop", crop_frequency, s, lf.f_max) for s in lf_norms]
        lf_norms = _stage("crop_common", crop_common, lf_norms)
        lowfreq_tensor = _stage("fuse_rgb", fuse_rgb, lf_norms)

    return PipelineResult(broadband=broadband, lowfreq=lowfreq_tensor)
