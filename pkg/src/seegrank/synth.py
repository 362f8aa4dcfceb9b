"""Deterministic synthetic depth-electrode recordings with known ground truth.

Baseline is per-channel pink noise at unit RMS. During each seizure window
the designated ictal channels additionally carry an amplitude-modulated
oscillation swept across a configurable band, scaled so its RMS is a fixed
ratio of the noise RMS. The oscillation may begin before the annotated
onset (onset_lead_s), mirroring how clinical onset marks trail the first
electrographic change; annotations always carry the nominal times.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, SpecError
from .ingest import Recording, SeizureAnnotation, make_recording
from .montage import ChannelLabel, Montage, expand_range

_SPEC_KEYS = {
    "montage", "fs_hz", "duration_s", "seizures", "ictal_channels", "ictal_band_hz",
    "ictal_amplitude_ratio", "propagation_s", "onset_lead_s", "clinician_selected",
    "seed",
}

# Gentle sinusoidal AM on the ictal burst; depth kept small so the burst RMS
# stays within a few percent of the configured ratio.
_AM_DEPTH = 0.3
_AM_RATE_HZ = 0.4


@dataclass(frozen=True)
class SynthSpec:
    montage: Montage
    fs: float
    duration_s: float
    seizures: tuple[tuple[float, float], ...]
    ictal_channels: tuple[ChannelLabel, ...]
    ictal_band: tuple[float, float] = (8.0, 14.0)
    ictal_amplitude_ratio: float = 4.0
    propagation: dict[ChannelLabel, float] = field(default_factory=dict)
    onset_lead_s: float = 0.0
    clinician_selected: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.fs <= 0:
            raise SpecError("fs must be positive")
        if self.duration_s <= 0:
            raise SpecError("duration_s must be positive")
        for onset, offset in self.seizures:
            if not 0 <= onset < offset <= self.duration_s:
                raise SpecError(f"seizure [{onset}, {offset}] outside [0, {self.duration_s}]")
        for ch in self.ictal_channels:
            if ch not in self.montage:
                raise SpecError(f"ictal channel {ch} is not in the montage")
        for ch in self.propagation:
            if ch not in self.montage:
                raise SpecError(f"propagation channel {ch} is not in the montage")
        if self.ictal_amplitude_ratio <= 1:
            raise SpecError("ictal_amplitude_ratio must exceed 1")
        low, high = self.ictal_band
        if not 0 < low < high:
            raise SpecError("ictal_band must satisfy 0 < low < high")
        if self.onset_lead_s < 0:
            raise SpecError("onset_lead_s must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "SynthSpec":
        if not isinstance(doc, dict):
            raise SchemaError("synth spec must be a JSON object")
        unknown = set(doc) - _SPEC_KEYS
        if unknown:
            raise SchemaError(f"synth spec has unknown keys: {sorted(unknown)}")
        missing = {"montage", "fs_hz", "duration_s", "seizures", "ictal_channels"} - set(doc)
        if missing:
            raise SchemaError(f"synth spec is missing keys: {sorted(missing)}")
        montage_doc = doc["montage"]
        if isinstance(montage_doc, str):
            montage = Montage.load(os.path.join(base_dir, montage_doc))
        elif isinstance(montage_doc, dict):
            montage = Montage.from_dict(montage_doc)
        else:
            raise SchemaError("montage must be an inline object or a file path")
        ictal = doc["ictal_channels"]
        if isinstance(ictal, str):
            ictal_channels = tuple(expand_range(ictal))
        elif isinstance(ictal, list):
            ictal_channels = tuple(ch for item in ictal for ch in expand_range(str(item)))
        else:
            raise SchemaError("ictal_channels must be a string or an array of strings")
        seizures = doc["seizures"]
        if not isinstance(seizures, list) or not all(
            isinstance(s, list) and len(s) == 2 for s in seizures
        ):
            raise SchemaError("seizures must be an array of [onset_s, offset_s] pairs")
        raw_prop = doc.get("propagation_s", {})
        if not isinstance(raw_prop, dict):
            raise SchemaError("propagation_s must be an object of channel -> lag seconds")
        propagation = {
            ch: float(lag)
            for key, lag in raw_prop.items()
            for ch in expand_range(key)
        }
        band = doc.get("ictal_band_hz", (8.0, 14.0))
        if not isinstance(band, (list, tuple)) or len(band) != 2:
            raise SchemaError("ictal_band_hz must be a [low, high] pair")
        return cls(
            montage=montage,
            fs=float(doc["fs_hz"]),
            duration_s=float(doc["duration_s"]),
            seizures=tuple((float(a), float(b)) for a, b in seizures),
            ictal_channels=ictal_channels,
            ictal_band=(float(band[0]), float(band[1])),
            ictal_amplitude_ratio=float(doc.get("ictal_amplitude_ratio", 4.0)),
            propagation=propagation,
            onset_lead_s=float(doc.get("onset_lead_s", 0.0)),
            clinician_selected=str(doc.get("clinician_selected", "")),
            seed=int(doc.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"synth spec {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))

    def ground_truth(self) -> dict:
        return {
            "ictal_channels": [str(ch) for ch in self.ictal_channels],
            "seizures": [[onset, offset] for onset, offset in self.seizures],
            "ictal_band_hz": list(self.ictal_band),
            "ictal_amplitude_ratio": self.ictal_amplitude_ratio,
            "onset_lead_s": self.onset_lead_s,
            "seed": self.seed,
        }


def _pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-RMS 1/f-amplitude noise via spectral shaping of white noise."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    shaped = np.fft.irfft(spectrum * scale, n)
    return shaped / np.sqrt((shaped ** 2).mean())


def _burst(t: np.ndarray, band: tuple[float, float], ratio: float) -> np.ndarray:
    """Swept oscillation over window-relative times t, RMS = ratio."""
    span = t[-1] - t[0] if len(t) > 1 else 1.0
    tau = t - t[0]
    low, high = band
    phase = 2 * np.pi * (low * tau + (high - low) / (2 * span) * tau ** 2)
    am = 1.0 + _AM_DEPTH * np.sin(2 * np.pi * _AM_RATE_HZ * tau)
    amplitude = ratio * np.sqrt(2.0) / np.sqrt(1.0 + _AM_DEPTH ** 2 / 2.0)
    return amplitude * am * np.sin(phase)


def generate(spec: SynthSpec):
    """Build (Recording, annotations, ground_truth) deterministically.

    Channel i draws from generator SeedSequence(spec.seed, spawn_key=(i,)),
    so any montage-order-preserving subset of channels reproduces bit-exactly.
    """
    n = int(round(spec.duration_s * spec.fs))
    channels = spec.montage.channels
    ictal = set(spec.ictal_channels)
    samples = np.empty((n, len(channels)), dtype=np.float64)
    times = np.arange(n) / spec.fs
    for i, ch in enumerate(channels):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(i,)))
        x = _pink_noise(rng, n)
        if ch in ictal:
            lag = spec.propagation.get(ch, 0.0)
            for onset, offset in spec.seizures:
                start = max(0.0, onset - spec.onset_lead_s + lag)
                end = min(spec.duration_s, offset + lag)
                window = (times >= start) & (times < end)
                if window.any():
                    x[window] += _burst(times[window], spec.ictal_band,
                                        spec.ictal_amplitude_ratio)
        samples[:, i] = x
    annotations = [
        SeizureAnnotation(onset, offset, f"sz{k + 1}")
        for k, (onset, offset) in enumerate(spec.seizures)
    ]
    rec = make_recording(samples, spec.fs, channels)
    return rec, annotations, spec.ground_truth()
