"""Welch cross-spectra, magnitude-squared coherence and the per-bin
eigenvalue structure of the 3x3 cross-spectral matrix.

Welch segmentation deliberately reuses the STFT framing (same Hann
window, same hop) so coherence bins line up one-for-one with the RGB
spectrogram bins. The coherence ratio is scale-invariant, so the raw
|S|^2 power convention upstream drops out here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import ScalarSeries, StftParams, stft
from .errors import InsufficientDataError, MalformedInputError

#: Sensor index pairs in reporting order.
ALL_PAIRS = ((1, 2), (1, 3), (2, 3))


@dataclass(eq=False)
class CrossSpectralDensity:
    """Welch-averaged cross-spectral density G_xy over frequency bins."""

    values: np.ndarray
    freq_step: float
    pair: tuple[int, int]
    n_averages: int

    def frequencies(self) -> np.ndarray:
        return np.arange(self.values.size) * self.freq_step


@dataclass(eq=False)
class CoherenceSpectrum:
    """Magnitude-squared coherence per bin, in [0, 1]; NaN marks bins
    whose denominator sits below the power floor (undefined)."""

    values: np.ndarray
    freq_step: float
    pair: tuple[int, int]
    n_averages: int

    def frequencies(self) -> np.ndarray:
        return np.arange(self.values.size) * self.freq_step


@dataclass(eq=False)
class RankSpectrum:
    """Sorted eigenvalues (descending) of the 3x3 cross-spectral matrix
    per bin, plus the lambda2/lambda1 and lambda3/lambda1 ratios."""

    eigenvalues: np.ndarray  # (3, n_bins)
    ratios: np.ndarray       # (2, n_bins), NaN where lambda1 == 0
    freq_step: float
    n_averages: int

    def frequencies(self) -> np.ndarray:
        return np.arange(self.eigenvalues.shape[1]) * self.freq_step


def _check_pairable(x: ScalarSeries, y: ScalarSeries):
    if len(x) != len(y):
        raise MalformedInputError(f"series lengths differ: {len(x)} vs {len(y)}")
    if not math.isclose(x.sample_rate, y.sample_rate, rel_tol=1e-12):
        raise MalformedInputError(
            f"sample rates differ: {x.sample_rate} Hz vs {y.sample_rate} Hz"
        )


def welch_csd(x: ScalarSeries, y: ScalarSeries, params: StftParams) -> CrossSpectralDensity:
    """Cross-spectral density: the frame average of S_x * conj(S_y)
    under the shared Hann framing."""
    _check_pairable(x, y)
    sx = stft(x, params)
    sy = stft(y, params)
    values = (sx * np.conj(sy)).mean(axis=1)
    return CrossSpectralDensity(
        values=values,
        freq_step=x.sample_rate / params.window_len,
        pair=(x.sensor_id, y.sensor_id),
        n_averages=sx.shape[1],
    )


def _min_length_for(params: StftParams, segments: int) -> int:
    return params.window_len + (segments - 1) * params.hop


def msc(x: ScalarSeries, y: ScalarSeries, params: StftParams) -> CoherenceSpectrum:
    """Magnitude-squared coherence |G_xy|^2 / (G_xx * G_yy) per bin.

    Needs at least two Welch segments; a single segment is identically 1
    and carries no information. Bins where G_xx * G_yy falls below
    db_floor^2 are reported as NaN rather than biased toward 0 or 1.
    """
    _check_pairable(x, y)
    sx = stft(x, params)
    sy = stft(y, params)
    n_avg = sx.shape[1]
    if n_avg < 2:
        raise InsufficientDataError(
            f"coherence needs >= 2 Welch segments, got {n_avg}; supply at least "
            f"{_min_length_for(params, 2)} samples"
        )
    gxy = (sx * np.conj(sy)).mean(axis=1)
    gxx = (sx.real**2 + sx.imag**2).mean(axis=1)
    gyy = (sy.real**2 + sy.imag**2).mean(axis=1)
    denom = gxx * gyy
    defined = denom >= params.db_floor**2
    values = np.full(gxy.size, np.nan)
    num = gxy.real**2 + gxy.imag**2
    values[defined] = np.clip(num[defined] / denom[defined], 0.0, 1.0)
    return CoherenceSpectrum(
        values=values,
        freq_step=x.sample_rate / params.window_len,
        pair=(x.sensor_id, y.sensor_id),
        n_averages=n_avg,
    )


def eigvalsh3(mats: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of 3x3 Hermitian matrices, closed form.

    ``mats`` has shape (..., 3, 3); only the upper triangle is read.
    Returns real eigenvalues sorted descending along the last axis,
    via the trigonometric solution of the characteristic cubic.
    """
    mats = np.asarray(mats)
    if mats.shape[-2:] != (3, 3):
        raise MalformedInputError(f"expected (..., 3, 3) matrices, got shape {mats.shape}")
    single = mats.ndim == 2
    if single:
        mats = mats[None]
    a = mats[..., 0, 0].real
    b = mats[..., 1, 1].real
    c = mats[..., 2, 2].real
    x = mats[..., 0, 1]
    y = mats[..., 0, 2]
    z = mats[..., 1, 2]

    q = (a + b + c) / 3.0
    abs2 = lambda w: w.real**2 + w.imag**2  # noqa: E731
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2.0 * (abs2(x) + abs2(y) + abs2(z))
    p = np.sqrt(p2 / 6.0)

    # det(A - q I) for Hermitian A with diagonal (alpha, beta, gamma):
    # alpha*beta*gamma - alpha|z|^2 - beta|y|^2 - gamma|x|^2 + 2 Re(x z conj(y))
    alpha, beta, gamma = a - q, b - q, c - q
    det = (
        alpha * beta * gamma
        - alpha * abs2(z)
        - beta * abs2(y)
        - gamma * abs2(x)
        + 2.0 * (x * z * np.conj(y)).real
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.clip(det / 2.0 / p**3, -1.0, 1.0)
    phi = np.arccos(np.where(p > 0, r, 0.0)) / 3.0

    lam1 = q + 2.0 * p * np.cos(phi)
    lam3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    out = np.stack([lam1, lam2, lam3], axis=-1)
    out = np.where((p > 0)[..., None], out, np.stack([q, q, q], axis=-1))
    return out[0] if single else out


def cross_spectral_rank(
    x1: ScalarSeries, x2: ScalarSeries, x3: ScalarSeries, params: StftParams
) -> RankSpectrum:
    """Per-bin eigenvalues of the 3x3 Hermitian matrix [G_ij].

    Rank one (lambda2/lambda1 and lambda3/lambda1 near zero) means fully
    coherent activity across the triad; rank three means mutually
    incoherent sensors.
    """
    _check_pairable(x1, x2)
    _check_pairable(x1, x3)
    s = [stft(x, params) for x in (x1, x2, x3)]
    n_avg = s[0].shape[1]
    if n_avg < 3:
        raise InsufficientDataError(
            f"rank analysis needs >= 3 Welch segments, got {n_avg}; supply at least "
            f"{_min_length_for(params, 3)} samples"
        )
    n_bins = s[0].shape[0]
    mats = np.empty((n_bins, 3, 3), dtype=np.complex128)
    for i in range(3):
        for j in range(3):
            mats[:, i, j] = (s[i] * np.conj(s[j])).mean(axis=1)
    lam = eigvalsh3(mats)  # (n_bins, 3) descending
    lam = np.maximum(lam, 0.0)  # PSD up to roundoff; clamp stray negatives
    eigenvalues = lam.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(eigenvalues[0] > 0, eigenvalues[1:] / eigenvalues[0], np.nan)
    return RankSpectrum(
        eigenvalues=eigenvalues,
        ratios=ratios,
        freq_step=x1.sample_rate / params.window_len,
        n_averages=n_avg,
    )
