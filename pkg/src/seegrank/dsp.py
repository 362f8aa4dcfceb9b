"""Per-channel signal conditioning and frame features.

Pipeline: zero-phase Butterworth bandpass, fixed-length frames with
overlap, periodized multilevel discrete wavelet transform, and four
summary statistics per band. Everything here is a pure function; featurize
may fan channels out across threads with deterministic output order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .config import RunConfig
from .errors import BandOutOfRange, FrameTooShort, SchemaError, UnstableFilter
from .ingest import Recording
from .montage import ChannelLabel

# Daubechies orthonormal lowpass decomposition filters. Each sums to
# sqrt(2) and has unit energy; the highpass mate is the alternating-sign
# reversal derived in _filters.
_DEC_LO = {
    "db1": (0.7071067811865476, 0.7071067811865476),
    "db2": (-0.12940952255092145, 0.22414386804185735, 0.836516303737469,
            0.48296291314469025),
    "db4": (-0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
            -0.18703481171888114, -0.02798376941698385, 0.6308807679295904,
            0.7148465705525415, 0.23037781330885523),
}

STAT_NAMES = ("meanabs", "std", "energy", "linelength")


# -- filtering --------------------------------------------------------------

def design_bandpass(fs: float, band: tuple[float, float], order: int) -> np.ndarray:
    """Design an order-`order` Butterworth bandpass as second-order sections.

    `order` is the order of the bandpass itself (must be even: a bandpass of
    order 2N comes from an order-N lowpass prototype). Zero-phase application
    later squares the magnitude response.
    """
    low, high = band
    if not (0 < low < high < fs / 2):
        raise BandOutOfRange(
            f"band must satisfy 0 < low < high < fs/2, got ({low}, {high}) at fs={fs}"
        )
    if order % 2 != 0 or not 2 <= order <= 8:
        raise BandOutOfRange(f"filter order must be even and in [2, 8], got {order}")
    sos = sps.butter(order // 2, [low, high], btype="bandpass", fs=fs, output="sos")
    # pole magnitudes per biquad section; >= 1 means an unstable design
    for section in sos:
        poles = np.roots(section[3:])
        if np.any(np.abs(poles) >= 1.0):
            raise UnstableFilter(
                f"bandpass ({low}, {high}) at fs={fs}, order {order} has poles on or "
                f"outside the unit circle"
            )
    return sos


def butterworth_bandpass(x: np.ndarray, fs: float, band: tuple[float, float],
                         order: int) -> np.ndarray:
    """Zero-phase (forward-backward) Butterworth bandpass; output length = input length."""
    sos = design_bandpass(fs, band, order)
    return sps.sosfiltfilt(sos, np.asarray(x, dtype=np.float64))


# -- framing ----------------------------------------------------------------

@dataclass(frozen=True)
class FrameSpec:
    frame_len: int
    hop: int
    n_frames: int

    @classmethod
    def build(cls, n_samples: int, frame_len: int, overlap: float) -> "FrameSpec":
        if frame_len < 1:
            raise SchemaError(f"frame_len must be >= 1 sample, got {frame_len}")
        hop = math.floor(frame_len * (1.0 - overlap))
        if hop < 1:
            raise SchemaError(
                f"frame_len {frame_len} with overlap {overlap} gives hop < 1 sample"
            )
        n_frames = (n_samples - frame_len) // hop + 1 if n_samples >= frame_len else 0
        return cls(frame_len, hop, n_frames)


def frame(x: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """Slice a 1-D signal into frames [t*hop, t*hop + frame_len); trailing remainder dropped."""
    x = np.asarray(x)
    if spec.n_frames == 0:
        return np.empty((0, spec.frame_len), dtype=x.dtype)
    windows = np.lib.stride_tricks.sliding_window_view(x, spec.frame_len)
    return windows[:: spec.hop][: spec.n_frames]


# -- discrete wavelet transform ----------------------------------------------

def _filters(wavelet: str) -> tuple[np.ndarray, np.ndarray]:
    if wavelet not in _DEC_LO:
        raise SchemaError(f"unknown wavelet {wavelet!r}; have {tuple(_DEC_LO)}")
    lo = np.array(_DEC_LO[wavelet], dtype=np.float64)
    m = len(lo)
    hi = np.array([(-1) ** k * lo[m - 1 - k] for k in range(m)])
    return lo, hi


def _circular_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Rows of y[n] = sum_m h[m] x[(n-m) mod L] for a (rows, L) matrix."""
    m = len(h)
    L = x.shape[1]
    if m == 1:
        return h[0] * x
    y = np.zeros_like(x)
    if L >= m - 1:
        ext = np.concatenate([x[:, -(m - 1):], x], axis=1)
        for k in range(m):
            y += h[k] * ext[:, m - 1 - k: m - 1 - k + L]
    else:
        # rows shorter than the filter wrap around more than once
        idx = np.arange(L)
        for k in range(m):
            y += h[k] * x[:, (idx - k) % L]
    return y


def _analyze_level(x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """One periodized analysis level on frame rows; returns (approx, detail, orig_len).

    Odd-length rows are padded by duplicating the final sample so the
    circular filter bank stays critically sampled; the original length is
    recorded so the inverse can truncate back.
    """
    orig_len = x.shape[1]
    if orig_len % 2 == 1:
        x = np.concatenate([x, x[:, -1:]], axis=1)
    approx = _circular_convolve(x, lo)[:, 1::2]
    detail = _circular_convolve(x, hi)[:, 1::2]
    return approx, detail, orig_len


def _synthesize_level(approx: np.ndarray, detail: np.ndarray, lo: np.ndarray,
                      hi: np.ndarray, orig_len: int) -> np.ndarray:
    """Inverse of _analyze_level: upsample at the odd phase, correlate, truncate."""
    rows, half = approx.shape
    L = 2 * half
    ua = np.zeros((rows, L))
    ud = np.zeros((rows, L))
    ua[:, 1::2] = approx
    ud[:, 1::2] = detail
    m = len(lo)
    x = np.zeros((rows, L))
    if L >= m - 1:
        ua_ext = np.concatenate([ua, ua[:, : m - 1]], axis=1)
        ud_ext = np.concatenate([ud, ud[:, : m - 1]], axis=1)
        for k in range(m):
            x += lo[k] * ua_ext[:, k: k + L] + hi[k] * ud_ext[:, k: k + L]
    else:
        idx = np.arange(L)
        for k in range(m):
            wrapped = (idx + k) % L
            x += lo[k] * ua[:, wrapped] + hi[k] * ud[:, wrapped]
    return x[:, :orig_len]


def dwt(frames: np.ndarray, wavelet: str, levels: int):
    """Multilevel periodized DWT of frame rows.

    Returns (details, approx, lengths): details = [D1 .. DL] (finest first),
    approx = AL, lengths = pre-pad input length per level for the inverse.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    if levels < 1:
        raise SchemaError(f"dwt levels must be >= 1, got {levels}")
    if frames.shape[1] < 2 ** levels:
        raise FrameTooShort(
            f"frame of {frames.shape[1]} samples cannot support {levels} DWT levels "
            f"(needs >= {2 ** levels})"
        )
    lo, hi = _filters(wavelet)
    details = []
    lengths = []
    approx = frames
    for _ in range(levels):
        approx, detail, orig_len = _analyze_level(approx, lo, hi)
        details.append(detail)
        lengths.append(orig_len)
    return details, approx, lengths


def inverse_dwt(details, approx, lengths, wavelet: str) -> np.ndarray:
    """Exact inverse of dwt (perfect reconstruction up to float rounding)."""
    lo, hi = _filters(wavelet)
    x = approx
    for detail, orig_len in zip(reversed(details), reversed(lengths)):
        x = _synthesize_level(x, detail, lo, hi, orig_len)
    return x


def band_names(levels: int) -> tuple[str, ...]:
    return tuple(f"D{l}" for l in range(1, levels + 1)) + (f"A{levels}",)


def _band_stats(coeffs: np.ndarray) -> np.ndarray:
    """Per-row [mean|c|, std(c), sum c^2, sum |c_i - c_{i-1}|] of one band."""
    meanabs = np.abs(coeffs).mean(axis=1)
    std = coeffs.std(axis=1)
    energy = (coeffs ** 2).sum(axis=1)
    linelength = np.abs(np.diff(coeffs, axis=1)).sum(axis=1) if coeffs.shape[1] > 1 \
        else np.zeros(coeffs.shape[0])
    return np.stack([meanabs, std, energy, linelength], axis=1)


def dwt_features(frames: np.ndarray, wavelet: str, levels: int) -> np.ndarray:
    """Feature rows per frame: 4 stats for each of D1..DL then AL.

    A single 1-D frame yields a 1-D feature vector.
    """
    single = np.asarray(frames).ndim == 1
    details, approx, _ = dwt(frames, wavelet, levels)
    parts = [_band_stats(band) for band in details] + [_band_stats(approx)]
    features = np.concatenate(parts, axis=1)
    return features[0] if single else features


# -- whole-recording featurization -------------------------------------------

@dataclass(frozen=True)
class ChannelFeatureBlock:
    channel: ChannelLabel
    feature_names: tuple[str, ...]
    values: np.ndarray
    frame_spec: FrameSpec


def feature_names_for(channel: ChannelLabel, wavelet: str, levels: int) -> tuple[str, ...]:
    return tuple(
        f"{channel}.{band}.{stat}" for band in band_names(levels) for stat in STAT_NAMES
    )


def featurize(rec: Recording, cfg: RunConfig) -> list[ChannelFeatureBlock]:
    """Filter, frame, and wavelet-featurize every channel of a recording.

    All blocks share one FrameSpec. Channel order follows the recording;
    with cfg.threads > 1 channels are processed concurrently but the output
    order is unchanged.
    """
    frame_len = int(round(cfg.frame_len_s * rec.sampling_rate))
    spec = FrameSpec.build(rec.n_samples, frame_len, cfg.overlap)
    if frame_len < 2 ** cfg.dwt_levels:
        raise FrameTooShort(
            f"{cfg.frame_len_s} s frames at {rec.sampling_rate} Hz are too short for "
            f"{cfg.dwt_levels} DWT levels"
        )
    band = (cfg.band_low, cfg.band_high)

    def one(col: int) -> ChannelFeatureBlock:
        channel = rec.channel_labels[col]
        filtered = butterworth_bandpass(rec.samples[:, col], rec.sampling_rate,
                                        band, cfg.filter_order)
        values = dwt_features(frame(filtered, spec), cfg.wavelet, cfg.dwt_levels)
        if spec.n_frames == 0:
            values = values.reshape(0, len(band_names(cfg.dwt_levels)) * len(STAT_NAMES))
        return ChannelFeatureBlock(
            channel=channel,
            feature_names=feature_names_for(channel, cfg.wavelet, cfg.dwt_levels),
            values=values,
            frame_spec=spec,
        )

    cols = range(rec.n_channels)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, cols))
    return [one(col) for col in cols]
