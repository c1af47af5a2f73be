"""Windowed short-time Fourier analysis of a single scalar series.

Conventions, fixed across the package:

* symmetric Hann window with the N-1 denominator (zero endpoints),
* hop H = floor(N * (1 - overlap)), full windows only (no padding,
  trailing samples that do not fill a window are discarded),
* one-sided spectrum, bins 0 .. floor(N/2), bin i at frequency i * fs / N,
* raw |S|^2 power without window-energy normalisation,
* frame timestamps at the window centre, (m*H + N/2) / fs.

Every function is pure: fresh arrays out, inputs never mutated, so all of
this is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ParameterError, ScaleError

LINEAR = "linear"
DECIBEL = "decibel"
_SCALES = (LINEAR, DECIBEL)

#: Default clamp floor for decibel compression, in linear power units.
#: Far below any physical magnetometer power yet safely above underflow.
DEFAULT_DB_FLOOR = 1e-30

_SENSOR_IDS = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class ScalarSeries:
    """Scalar field-magnitude samples from one sensor at a fixed rate.

    Parameters
    ----------
    samples : array_like
        Field magnitudes in nanotesla, one per sample.
    sample_rate : float
        Sampling rate in Hz, strictly positive.
    sensor_id : int
        Sensor index, one of 1, 2, 3.
    start_time : float
        Time of sample 0 in seconds.
    """

    samples: np.ndarray
    sample_rate: float
    sensor_id: int = 1
    start_time: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.sensor_id not in _SENSOR_IDS:
            raise ParameterError(f"sensor_id must be 1, 2 or 3, got {self.sensor_id}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ParameterError("samples must be finite (no NaN or Inf)")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class StftParams:
    """Framing and scaling parameters shared by the STFT and the Welch
    estimators.

    ``window_len`` is the analysis window length N in samples, ``overlap``
    the fractional overlap in [0, 1). ``scale`` selects linear power or
    decibel compression downstream; ``db_floor`` is the clamp floor used
    by the compression (and, squared, the undefined-bin threshold of the
    coherence estimator).
    """

    window_len: int
    overlap: float = 0.5
    scale: str = LINEAR
    db_floor: float = DEFAULT_DB_FLOOR

    def __post_init__(self):
        if not isinstance(self.window_len, int) or self.window_len < 2:
            raise ParameterError(f"window_len must be an integer >= 2, got {self.window_len}")
        if not 0.0 <= self.overlap < 1.0:
            raise ParameterError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.scale not in _SCALES:
            raise ParameterError(f"scale must be one of {_SCALES}, got {self.scale!r}")
        if not self.db_floor > 0:
            raise ParameterError(f"db_floor must be positive, got {self.db_floor}")
        if self.hop < 1:
            raise ParameterError(
                f"window_len={self.window_len} with overlap={self.overlap} gives hop < 1"
            )

    @property
    def hop(self) -> int:
        # floor(N * (1 - overlap)); the 1e-9 nudge keeps mathematically
        # integral products (e.g. 1000 * 0.1) from landing one below.
        return int(math.floor(self.window_len * (1.0 - self.overlap) + 1e-9))

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1


@dataclass(eq=False)
class Spectrogram:
    """Time-frequency power grid with axis metadata.

    ``values`` is indexed [freq_bin, frame]; ``freq_step`` is the bin
    spacing fs / N in Hz; ``frame_times`` holds the window-centre time of
    each frame in seconds. ``scale`` is ``"linear"`` or ``"decibel"``.
    """

    values: np.ndarray
    freq_step: float
    frame_times: np.ndarray
    scale: str
    sensor_id: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def frequencies(self) -> np.ndarray:
        """Centre frequency of every bin, in Hz."""
        return np.arange(self.n_bins) * self.freq_step


def hann_window(window_len: int) -> np.ndarray:
    """Symmetric Hann weights w[n] = (1 - cos(2*pi*n / (N-1))) / 2.

    Zero at both endpoints, unity at the centre for odd N, and
    sum(w) = (N - 1) / 2.
    """
    if not isinstance(window_len, int) or window_len < 2:
        raise ParameterError(f"window_len must be an integer >= 2, got {window_len}")
    n = np.arange(window_len)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (window_len - 1)))


def frame_count(n_samples: int, window_len: int, hop: int) -> int:
    """Number of full analysis windows in a series of ``n_samples``."""
    if n_samples < window_len:
        return 0
    return (n_samples - window_len) // hop + 1


def stft(series: ScalarSeries, params: StftParams) -> np.ndarray:
    """Short-time Fourier transform of a scalar series.

    Frame m covers samples [m*H, m*H + N); each column is the one-sided
    DFT of the Hann-weighted frame. Returns a complex grid indexed
    [freq_bin, frame] with floor(N/2) + 1 bins and
    floor((len - N) / H) + 1 frames.
    """
    x = series.samples
    n = params.window_len
    if x.size < n:
        raise InsufficientDataError(
            f"series has {x.size} samples; need at least {n} (one full window)"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, n)[:: params.hop]
    return np.fft.rfft(frames * hann_window(n), axis=1).T


def power_spectrogram(series: ScalarSeries, params: StftParams) -> Spectrogram:
    """Linear-scale power spectrogram |S|^2 with axis metadata."""
    s = stft(series, params)
    power = s.real**2 + s.imag**2
    n, hop = params.window_len, params.hop
    m = np.arange(power.shape[1])
    frame_times = series.start_time + (m * hop + n / 2.0) / series.sample_rate
    return Spectrogram(
        values=power,
        freq_step=series.sample_rate / n,
        frame_times=frame_times,
        scale=LINEAR,
        sensor_id=series.sensor_id,
    )


def db_compress(spec: Spectrogram, db_floor: float = DEFAULT_DB_FLOOR) -> Spectrogram:
    """Logarithmic compression 10*log10(max(v, db_floor)) of a linear grid.

    Refuses to run twice: compressing an already-decibel grid raises
    ``ScaleError``.
    """
    if spec.scale != LINEAR:
        raise ScaleError("spectrogram is already in decibels; refusing to compress twice")
    if not db_floor > 0:
        raise ParameterError(f"db_floor must be positive, got {db_floor}")
    values = 10.0 * np.log10(np.maximum(spec.values, db_floor))
    return Spectrogram(
        values=values,
        freq_step=spec.freq_step,
        frame_times=spec.frame_times.copy(),
        scale=DECIBEL,
        sensor_id=spec.sensor_id,
    )
