"""Colour-anomaly classification of fused RGB spectrograms.

A pixel is Dark below the luminance floor, Achromatic when its chroma
(max - min) / max stays under the saturation threshold, and otherwise
takes the primary or secondary colour named by the set of channels that
pass the presence cut. Chroma is scale-invariant, so the class of a
non-dark pixel does not depend on overall brightness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import InsufficientDataError, ParameterError, UndefinedShareError
from .pipeline import RgbTensor


class PixelClass(IntEnum):
    DARK = 0
    ACHROMATIC = 1
    PURE_RED = 2
    PURE_GREEN = 3
    PURE_BLUE = 4
    YELLOW = 5
    MAGENTA = 6
    CYAN = 7

    @property
    def label(self) -> str:
        return self.name.lower()


#: Classes that indicate sensor disagreement (everything but dark/grey).
COLOUR_CLASSES = frozenset(
    {
        PixelClass.PURE_RED,
        PixelClass.PURE_GREEN,
        PixelClass.PURE_BLUE,
        PixelClass.YELLOW,
        PixelClass.MAGENTA,
        PixelClass.CYAN,
    }
)

PRIMARY_BY_SENSOR = {1: PixelClass.PURE_RED, 2: PixelClass.PURE_GREEN, 3: PixelClass.PURE_BLUE}
SECONDARY_BY_PAIR = {
    (1, 2): PixelClass.YELLOW,
    (1, 3): PixelClass.MAGENTA,
    (2, 3): PixelClass.CYAN,
}

# Presence bitmask (R=1, G=2, B=4) to class; 0 cannot occur because the
# brightest channel always passes its own presence cut.
_PRESENCE_LUT = np.array(
    [
        PixelClass.DARK,        # 0: unreachable
        PixelClass.PURE_RED,    # 1: R
        PixelClass.PURE_GREEN,  # 2: G
        PixelClass.YELLOW,      # 3: R+G
        PixelClass.PURE_BLUE,   # 4: B
        PixelClass.MAGENTA,     # 5: R+B
        PixelClass.CYAN,        # 6: G+B
        PixelClass.ACHROMATIC,  # 7: all bright despite chroma
    ],
    dtype=np.uint8,
)


@dataclass(frozen=True)
class ClassifierThresholds:
    """Tunable cuts for the pixel classifier, all in (0, 1).

    ``luminance_floor``: below this max-channel value a pixel is Dark.
    ``saturation_threshold``: chroma at or below this is Achromatic.
    ``channel_presence``: a channel counts as bright at or above this
    fraction of the pixel's brightest channel.
    """

    luminance_floor: float = 0.1
    saturation_threshold: float = 0.3
    channel_presence: float = 0.5

    def __post_init__(self):
        for name in ("luminance_floor", "saturation_threshold", "channel_presence"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name} must be in (0, 1), got {value}")


DEFAULT_THRESHOLDS = ClassifierThresholds()

#: Default minimum pixel count for a reported region.
DEFAULT_MIN_REGION_PIXELS = 8


@dataclass
class RegionReport:
    """A connected same-class region with its bounding ranges.

    Ranges are inclusive index pairs; ``freq_range`` and ``time_range``
    give the corresponding physical extents. ``pc_band`` labels the
    geomagnetic micropulsation band of the region's centre frequency,
    when one applies.
    """

    pixel_class: PixelClass
    frame_range: tuple[int, int]
    bin_range: tuple[int, int]
    freq_range: tuple[float, float]
    time_range: tuple[float, float]
    mean_saturation: float
    mean_luminance: float
    pixel_count: int
    pc_band: str | None = None

    def as_dict(self) -> dict:
        return {
            "pixel_class": self.pixel_class.label,
            "frame_range": list(self.frame_range),
            "bin_range": list(self.bin_range),
            "freq_range": list(self.freq_range),
            "time_range": list(self.time_range),
            "mean_saturation": self.mean_saturation,
            "mean_luminance": self.mean_luminance,
            "pixel_count": self.pixel_count,
            "pc_band": self.pc_band,
        }


@dataclass
class DriftReport:
    """Per-sensor trend of the luminance share across frames.

    ``share_slope`` is the least-squares slope of that channel's share
    of total luminance per frame; ``significance`` is slope divided by
    its standard error.
    """

    sensor_id: int
    share_slope: float
    significance: float

    def as_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "share_slope": self.share_slope,
            "significance": self.significance,
        }


def classify_pixel(
    r: float, g: float, b: float, thresholds: ClassifierThresholds = DEFAULT_THRESHOLDS
) -> PixelClass:
    """Classify one (r, g, b) pixel with values in [0, 1]."""
    for name, value in (("r", r), ("g", g), ("b", b)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"channel {name} must be in [0, 1], got {value}")
    mx = max(r, g, b)
    if mx < thresholds.luminance_floor:
        return PixelClass.DARK
    chroma = (mx - min(r, g, b)) / mx
    if chroma <= thresholds.saturation_threshold:
        return PixelClass.ACHROMATIC
    cut = thresholds.channel_presence * mx
    bits = (r >= cut) | (g >= cut) << 1 | (b >= cut) << 2
    return PixelClass(int(_PRESENCE_LUT[bits]))


def classify_image(
    img: RgbTensor, thresholds: ClassifierThresholds = DEFAULT_THRESHOLDS
) -> np.ndarray:
    """Classify every pixel of a tensor; returns a grid of PixelClass
    codes (uint8) with the tensor's [bin, frame] shape."""
    rgb = img.to_array()
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    out = np.zeros(mx.shape, dtype=np.uint8)  # PixelClass.DARK
    lit = mx >= thresholds.luminance_floor
    chroma = (mx - mn) / np.where(mx > 0, mx, 1.0)
    achromatic = lit & (chroma <= thresholds.saturation_threshold)
    coloured = lit & ~achromatic
    cut = thresholds.channel_presence * mx
    bits = (rgb >= cut[..., None]).astype(np.uint8) @ np.array([1, 2, 4], dtype=np.uint8)
    out[achromatic] = PixelClass.ACHROMATIC
    out[coloured] = _PRESENCE_LUT[bits[coloured]]
    return out


def segment_regions(
    classes: np.ndarray,
    image: RgbTensor,
    min_region_pixels: int = DEFAULT_MIN_REGION_PIXELS,
) -> list[RegionReport]:
    """Group non-dark pixels into 4-connected same-class regions.

    Components smaller than ``min_region_pixels`` are dropped; the rest
    are reported with bounding ranges and mean saturation/luminance,
    brightest first.
    """
    classes = np.asarray(classes)
    if classes.size == 0:
        raise ParameterError("class grid is empty")
    if classes.shape != (image.n_bins, image.n_frames):
        raise ParameterError(
            f"class grid shape {classes.shape} does not match the tensor "
            f"({image.n_bins}, {image.n_frames})"
        )
    rgb = image.to_array()
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    luminance = mx
    saturation = (mx - mn) / np.where(mx > 0, mx, 1.0)

    n_bins, n_frames = classes.shape
    seen = classes == int(PixelClass.DARK)  # dark pixels are never visited
    reports = []
    for i0 in range(n_bins):
        for j0 in range(n_frames):
            if seen[i0, j0]:
                continue
            cls = classes[i0, j0]
            stack = [(i0, j0)]
            seen[i0, j0] = True
            pixels = []
            while stack:
                i, j = stack.pop()
                pixels.append((i, j))
                for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                    if 0 <= ni < n_bins and 0 <= nj < n_frames and not seen[ni, nj] \
                            and classes[ni, nj] == cls:
                        seen[ni, nj] = True
                        stack.append((ni, nj))
            if len(pixels) < min_region_pixels:
                continue
            rows = np.array([p[0] for p in pixels])
            cols = np.array([p[1] for p in pixels])
            b_lo, b_hi = int(rows.min()), int(rows.max())
            f_lo, f_hi = int(cols.min()), int(cols.max())
            freq_lo, freq_hi = b_lo * image.freq_step, b_hi * image.freq_step
            centre_freq = 0.5 * (freq_lo + freq_hi)
            reports.append(
                RegionReport(
                    pixel_class=PixelClass(int(cls)),
                    frame_range=(f_lo, f_hi),
                    bin_range=(b_lo, b_hi),
                    freq_range=(freq_lo, freq_hi),
                    time_range=(float(image.frame_times[f_lo]), float(image.frame_times[f_hi])),
                    mean_saturation=float(saturation[rows, cols].mean()),
                    mean_luminance=float(luminance[rows, cols].mean()),
                    pixel_count=len(pixels),
                    pc_band=pc_band_lookup(centre_freq),
                )
            )
    reports.sort(key=lambda rep: rep.mean_luminance, reverse=True)
    return reports


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and slope/stderr significance."""
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    if n > 2:
        resid = y - (ym + slope * (x - xm))
        sigma2 = float((resid**2).sum()) / (n - 2)
        stderr = math.sqrt(sigma2 / sxx)
    else:
        stderr = 0.0
    if stderr > 0.0:
        significance = slope / stderr
    else:
        significance = 0.0 if slope == 0.0 else math.copysign(math.inf, slope)
    return slope, significance


def detect_drift(img: RgbTensor) -> list[DriftReport]:
    """Fit a line to each sensor's share of total luminance per frame.

    Shares at each frame sum to one over the three sensors; frames with
    zero total luminance are excluded from the fit. A slow gain drift in
    one sensor shows up as a nonzero slope of that sensor's share.
    """
    if img.n_frames < 8:
        raise InsufficientDataError(f"drift detection needs at least 8 frames, got {img.n_frames}")
    rgb = img.to_array()
    channel_totals = rgb.sum(axis=0)  # (n_frames, 3), summed over frequency
    totals = channel_totals.sum(axis=-1)
    valid = totals > 0
    if valid.sum() < 2:
        raise UndefinedShareError("image carries no luminance; channel shares are undefined")
    x = np.flatnonzero(valid).astype(np.float64)
    shares = channel_totals[valid] / totals[valid, None]
    reports = []
    for channel_index, channel in enumerate(("R", "G", "B")):
        slope, significance = _line_fit(x, shares[:, channel_index])
        reports.append(
            DriftReport(
                sensor_id=img.channel_map[channel],
                share_slope=slope,
                significance=significance,
            )
        )
    reports.sort(key=lambda rep: rep.sensor_id)
    return reports


#: Continuous micropulsation bands with published edges, in Hz.
PC_BANDS = (
    ("Pc5", 1.7e-3, 6.7e-3),
    ("Pc4", 6.7e-3, 22e-3),
    ("Pc3", 22e-3, 100e-3),
)


def pc_band_lookup(freq: float) -> str | None:
    """Name the Pc band containing ``freq`` (Hz), if any.

    Pc5 covers [1.7, 6.7) mHz, Pc4 [6.7, 22) mHz, Pc3 [22, 100) mHz;
    frequencies outside these ranges return None.
    """
    if freq < 0:
        raise ParameterError(f"frequency must be non-negative, got {freq}")
    for name, lo, hi in PC_BANDS:
        if lo <= freq < hi:
            return name
    return None
