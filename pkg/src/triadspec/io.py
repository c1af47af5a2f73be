"""Triad CSV ingestion, PNG serialisation and report writers.

The triad file is a single CSV with columns
``time,b1x,b1y,b1z,b2x,b2y,b2z,b3x,b3y,b3z``, preceded by comment lines
of the form ``# key=value``; ``# rate=<Hz>`` is mandatory. Empty cells
or ``nan`` tokens mark dropouts and come back as gap-mask entries.
All numbers are written with ``repr`` so a write/read cycle is exact.

PNG output is one byte per channel with the pixel grid equal to the
tensor grid (width = frames, height = bins); axis calibration and the
channel map travel in PNG text chunks rather than burned-in axes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .dsp import StftParams
from .errors import FormatError, MalformedInputError, ParameterError, RateMismatchError
from .pipeline import RgbTensor, VectorSeries
from .taxonomy import PC_BANDS, DriftReport, RegionReport

COLUMNS = ("time", "b1x", "b1y", "b1z", "b2x", "b2y", "b2z", "b3x", "b3y", "b3z")

LOW_AT_BOTTOM = "low_at_bottom"
LOW_AT_TOP = "low_at_top"
_ORIENTATIONS = (LOW_AT_BOTTOM, LOW_AT_TOP)

_GAP_TOKENS = {"", "nan"}


@dataclass(frozen=True)
class TriadFileHeader:
    """Metadata parsed from the comment lines of a triad CSV."""

    sample_rate: float
    start_time: float = 0.0
    sensor_count: int = 3
    columns: tuple = COLUMNS

    def __post_init__(self):
        if self.sensor_count != 3:
            raise FormatError(f"triad files carry exactly 3 sensors, got {self.sensor_count}")
        if not self.sample_rate > 0:
            raise FormatError(f"sample rate must be positive, got {self.sample_rate}")


def fmt(value: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(value))


def load_triad_csv(path):
    """Read a triad CSV.

    Returns ``((v1, v2, v3), (mask1, mask2, mask3))`` where each mask is
    True at samples with at least one missing component for that sensor.
    The time column must be uniform at the declared rate to within 1e-6
    of a sample period.
    """
    path = Path(path)
    meta = {}
    data_rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            first = row[0].lstrip()
            if first.startswith("#"):
                comment = ",".join(row).lstrip("# ").strip()
                key, sep, value = comment.partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            if len(row) != len(COLUMNS):
                raise FormatError(
                    f"expected {len(COLUMNS)} columns ({','.join(COLUMNS)}), got {len(row)}",
                    line=lineno,
                )
            data_rows.append((lineno, row))
    if "rate" not in meta:
        raise FormatError("missing required '# rate=<Hz>' header line")
    try:
        rate = float(meta["rate"])
    except ValueError:
        raise FormatError(f"rate header must be a number, got {meta['rate']!r}") from None
    header = TriadFileHeader(sample_rate=rate)
    if not data_rows:
        raise FormatError("file contains no data rows")

    n = len(data_rows)
    values = np.empty((n, 9))
    masks = np.zeros((n, 9), dtype=bool)
    times = np.empty(n)
    for i, (lineno, row) in enumerate(data_rows):
        try:
            times[i] = float(row[0])
        except ValueError:
            raise FormatError(f"bad time value {row[0]!r}", line=lineno) from None
        for j, cell in enumerate(row[1:]):
            token = cell.strip()
            if token.lower() in _GAP_TOKENS:
                values[i, j] = np.nan
                masks[i, j] = True
                continue
            try:
                values[i, j] = float(token)
            except ValueError:
                raise FormatError(f"bad value {cell!r} in column {COLUMNS[j + 1]}", line=lineno) from None
            if not np.isfinite(values[i, j]):
                masks[i, j] = True

    start_time = float(times[0])
    tolerance = 1e-6 / rate
    expected = start_time + np.arange(n) / rate
    bad = np.flatnonzero(np.abs(times - expected) > tolerance)
    if bad.size:
        i = int(bad[0])
        raise RateMismatchError(
            f"row {data_rows[i][0]}: timestamp {times[i]!r} deviates from the uniform grid "
            f"value {expected[i]!r} by more than {tolerance:g} s"
        )

    series = []
    gap_masks = []
    for k in range(3):
        block = values[:, 3 * k : 3 * k + 3]
        mask = masks[:, 3 * k : 3 * k + 3].any(axis=1)
        series.append(
            VectorSeries(
                block[:, 0], block[:, 1], block[:, 2],
                sample_rate=header.sample_rate,
                sensor_id=k + 1,
                start_time=start_time,
            )
        )
        gap_masks.append(mask)
    return tuple(series), tuple(gap_masks)


def write_triad_csv(path, v1, v2, v3, comments: dict | None = None) -> Path:
    """Write three vector series as a triad CSV (repr floats, exact
    round-trip). Extra ``comments`` become ``# key=value`` lines."""
    triad = (v1, v2, v3)
    n = len(v1)
    rate = v1.sample_rate
    start = v1.start_time
    for v in triad[1:]:
        if len(v) != n:
            raise MalformedInputError("triad series lengths differ")
        if v.sample_rate != rate or v.start_time != start:
            raise RateMismatchError("triad series must share rate and start time")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# rate={fmt(rate)}\n")
        fh.write(f"# start={fmt(start)}\n")
        fh.write(f"# columns={','.join(COLUMNS)}\n")
        for key, value in (comments or {}).items():
            fh.write(f"# {key}={value}\n")
        for i in range(n):
            t = start + i / rate
            cells = [fmt(t)]
            for v in triad:
                cells.extend((fmt(v.bx[i]), fmt(v.by[i]), fmt(v.bz[i])))
            fh.write(",".join(cells) + "\n")
    return path


@dataclass(frozen=True)
class RenderOptions:
    """PNG rendering options; bit depth is fixed at 8 per channel."""

    path: Path
    orientation: str = LOW_AT_BOTTOM
    annotate_pc_bands: bool = False
    bit_depth: int = 8

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        if self.orientation not in _ORIENTATIONS:
            raise ParameterError(f"orientation must be one of {_ORIENTATIONS}, got {self.orientation!r}")
        if self.bit_depth != 8:
            raise ParameterError("only 8 bits per channel are supported")


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] channel values to bytes, round half up."""
    return np.floor(np.asarray(values) * 255.0 + 0.5).astype(np.uint8)


def write_png(
    img: RgbTensor,
    opts: RenderOptions,
    params: StftParams | None = None,
    extra_text: dict | None = None,
) -> Path:
    """Write a tensor as an 8-bit RGB PNG with calibration metadata.

    Width is the frame count, height the bin count. The channel map,
    framing parameters, normalisation mode and axis calibration go into
    PNG text chunks so the image stays self-describing.
    """
    arr = quantize(img.to_array())
    if opts.orientation == LOW_AT_BOTTOM:
        arr = arr[::-1]
    info = PngInfo()
    text = {
        "software": "triadspec",
        "channel_map": json.dumps(img.channel_map, sort_keys=True),
        "norm_mode": img.r.norm_mode,
        "scale": img.r.source_scale,
        "freq_step_hz": fmt(img.freq_step),
        "orientation": opts.orientation,
        "n_bins": str(img.n_bins),
        "n_frames": str(img.n_frames),
    }
    if img.n_frames >= 2:
        text["hop_seconds"] = fmt(img.frame_times[1] - img.frame_times[0])
    if params is not None:
        text["window_len"] = str(params.window_len)
        text["overlap"] = fmt(params.overlap)
    if opts.annotate_pc_bands:
        top = (img.n_bins - 1) * img.freq_step
        bands = {}
        for name, lo, hi in PC_BANDS:
            if lo <= top:
                lo_bin = int(np.ceil(lo / img.freq_step - 1e-9))
                hi_bin = int(min(np.floor(hi / img.freq_step + 1e-9), img.n_bins - 1))
                if lo_bin <= hi_bin:
                    bands[name] = [lo_bin, hi_bin]
        text["pc_bands"] = json.dumps(bands, sort_keys=True)
    for key, value in (extra_text or {}).items():
        text[key] = value
    for key in sorted(text):
        info.add_text(key, text[key])
    image = Image.fromarray(arr, mode="RGB")
    image.save(opts.path, format="PNG", pnginfo=info)
    return opts.path


def read_png(path):
    """Read back a PNG written by ``write_png``.

    Returns ``(pixels, text)`` with pixels as a (height, width, 3) uint8
    array in file row order and ``text`` the PNG text chunks.
    """
    with Image.open(path) as image:
        pixels = np.asarray(image.convert("RGB"))
        text = dict(image.text)
    return pixels, text


# -- region / drift reports -------------------------------------------------

#: Fixed column order of the CSV region report.
REGION_CSV_COLUMNS = (
    "pixel_class",
    "frame_first",
    "frame_last",
    "bin_first",
    "bin_last",
    "freq_lo_hz",
    "freq_hi_hz",
    "time_lo_s",
    "time_hi_s",
    "mean_saturation",
    "mean_luminance",
    "pixel_count",
    "pc_band",
)


def write_region_report_json(path, regions: list[RegionReport]) -> Path:
    path = Path(path)
    payload = [region.as_dict() for region in regions]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def write_region_report_csv(path, regions: list[RegionReport]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REGION_CSV_COLUMNS)
        for region in regions:
            writer.writerow(
                [
                    region.pixel_class.label,
                    region.frame_range[0],
                    region.frame_range[1],
                    region.bin_range[0],
                    region.bin_range[1],
                    fmt(region.freq_range[0]),
                    fmt(region.freq_range[1]),
                    fmt(region.time_range[0]),
                    fmt(region.time_range[1]),
                    fmt(region.mean_saturation),
                    fmt(region.mean_luminance),
                    region.pixel_count,
                    region.pc_band or "",
                ]
            )
    return path


def format_drift_line(report: DriftReport) -> str:
    return (
        f"drift sensor={report.sensor_id} share_slope={fmt(report.share_slope)}"
        f" significance={fmt(report.significance)}"
    )


def write_coherence_table(path, freqs: np.ndarray, columns) -> Path:
    """Write columnar coherence text: a header naming each column, then
    one row per frequency bin; undefined values print as ``nan``."""
    path = Path(path)
    names = ["frequency"] + [name for name, _ in columns]
    series = [np.asarray(values) for _, values in columns]
    with path.open("w", encoding="utf-8") as fh:
        fh.write(" ".join(names) + "\n")
        for i, freq in enumerate(freqs):
            cells = [fmt(freq)]
            for values in series:
                value = values[i]
                cells.append("nan" if np.isnan(value) else fmt(value))
            fh.write(" ".join(cells) + "\n")
    return path


def write_schedule_json(path, spec, params: StftParams, records) -> Path:
    """Write the synth ground-truth schedule as structured JSON."""
    path = Path(path)
    payload = {
        "sample_rate": spec.sample_rate,
        "duration": spec.duration,
        "seed": spec.seed,
        "bias_nt": spec.bias_nt,
        "rng": "numpy-pcg64",
        "window_len": params.window_len,
        "overlap": params.overlap,
        "records": [record.as_dict() for record in records],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
