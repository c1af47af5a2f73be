"""Matplotlib report figures, rendered to files alongside the delimited
outputs. These are analyst-facing views; the exact-pixel PNG written by
``triadspec.io.write_png`` remains the machine-readable contract."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle

from .pipeline import RgbTensor
from .taxonomy import PC_BANDS


def _tensor_extent(img: RgbTensor):
    hop = img.frame_times[1] - img.frame_times[0] if img.n_frames >= 2 else 1.0
    t0 = img.frame_times[0] - hop / 2.0
    t1 = img.frame_times[-1] + hop / 2.0
    f1 = (img.n_bins - 0.5) * img.freq_step
    return (t0, t1, -0.5 * img.freq_step, f1)


def save_tensor_figure(
    img: RgbTensor,
    path,
    regions=None,
    annotate_pc_bands: bool = False,
    title: str | None = None,
):
    """Plot the fused tensor with physical axes; outline the given
    regions and optionally mark the Pc band edges."""
    fig, ax = plt.subplots(figsize=(9, 5))
    extent = _tensor_extent(img)
    ax.imshow(
        img.to_array(),
        origin="lower",
        aspect="auto",
        extent=extent,
        interpolation="nearest",
    )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    legend = ", ".join(f"{ch}=sensor {sid}" for ch, sid in sorted(img.channel_map.items()))
    ax.set_title(title or f"cross-sensor RGB spectrogram ({legend})")
    if regions:
        hop = img.frame_times[1] - img.frame_times[0] if img.n_frames >= 2 else 1.0
        for region in regions:
            t_lo, t_hi = region.time_range
            f_lo, f_hi = region.freq_range
            rect = Rectangle(
                (t_lo - hop / 2.0, f_lo - img.freq_step / 2.0),
                (t_hi - t_lo) + hop,
                (f_hi - f_lo) + img.freq_step,
                fill=False,
                edgecolor="white",
                linewidth=1.2,
            )
            ax.add_patch(rect)
            ax.annotate(
                region.pixel_class.label,
                (t_lo, f_hi),
                color="white",
                fontsize=8,
                va="bottom",
            )
    if annotate_pc_bands:
        top = extent[3]
        for name, lo, hi in PC_BANDS:
            if lo > top:
                continue
            ax.axhline(lo, color="white", linestyle=":", linewidth=0.8)
            ax.annotate(name, (extent[0], lo), color="white", fontsize=7, va="bottom")
            if hi <= top:
                ax.axhline(hi, color="white", linestyle=":", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_coherence_figure(freqs, columns, path, title: str | None = None):
    """Line plots of coherence (and rank-ratio) columns over frequency."""
    fig, ax = plt.subplots(figsize=(9, 5))
    for name, values in columns:
        ax.plot(np.asarray(freqs), np.asarray(values), label=name, linewidth=1.0)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("magnitude-squared coherence / eigenvalue ratio")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
