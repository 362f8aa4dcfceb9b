"""Recording and annotation ingestion.

Interchange format is a signal CSV (header of channel labels, one row per
sample) plus a JSON sidecar carrying sampling rate, unit, seizure
annotations, and the clinician-selected channel shorthand. Loaded
structures are immutable; sample arrays are marked read-only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    AnnotationOutOfBounds,
    NonFiniteSample,
    NyquistViolation,
    SchemaError,
    UnknownChannel,
)
from .montage import ChannelLabel, Montage, expand_range, parse_channel_label

# Ingestion floor on sampling rate: the analysis band extends to 60 Hz, so
# anything at or below 2 * 60 Hz cannot represent it.
_MIN_SAMPLING_RATE_HZ = 120.0

_SIDECAR_KEYS = {"sampling_rate_hz", "unit", "annotations", "clinician_selected"}
_ANNOTATION_KEYS = {"onset_s", "offset_s", "label"}


@dataclass(frozen=True)
class SeizureAnnotation:
    onset_s: float
    offset_s: float
    label: str = ""


@dataclass(frozen=True)
class Recording:
    """Multichannel signal: samples[n_samples, n_channels], one label per column."""

    samples: np.ndarray
    sampling_rate: float
    channel_labels: tuple[ChannelLabel, ...]
    unit: str = "uV"

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sampling_rate


def make_recording(samples: np.ndarray, sampling_rate: float, channel_labels, unit: str = "uV") -> Recording:
    """Validate and freeze a recording built in memory."""
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise SchemaError(f"samples must be 2-D, got shape {samples.shape}")
    labels = tuple(channel_labels)
    if samples.shape[1] != len(labels):
        raise SchemaError(
            f"{samples.shape[1]} signal columns but {len(labels)} channel labels"
        )
    if len(set(labels)) != len(labels):
        raise SchemaError("duplicate channel labels in recording")
    if sampling_rate <= _MIN_SAMPLING_RATE_HZ:
        raise NyquistViolation(
            f"sampling rate {sampling_rate} Hz is too low; need > {_MIN_SAMPLING_RATE_HZ} Hz"
        )
    if not np.isfinite(samples).all():
        raise NonFiniteSample("signal contains NaN or infinite samples")
    samples.flags.writeable = False
    return Recording(samples, float(sampling_rate), labels, unit)


def _parse_sidecar(doc: dict, duration_s: float, frame_len_s: float):
    if not isinstance(doc, dict):
        raise SchemaError("sidecar must be a JSON object")
    unknown = set(doc) - _SIDECAR_KEYS
    if unknown:
        raise SchemaError(f"sidecar has unknown keys: {sorted(unknown)}")
    missing = {"sampling_rate_hz", "annotations", "clinician_selected"} - set(doc)
    if missing:
        raise SchemaError(f"sidecar is missing keys: {sorted(missing)}")
    fs = doc["sampling_rate_hz"]
    if not isinstance(fs, (int, float)) or isinstance(fs, bool) or fs <= 0:
        raise SchemaError("sampling_rate_hz must be a positive number")
    unit = doc.get("unit", "uV")
    if not isinstance(unit, str):
        raise SchemaError("unit must be a string")
    raw_annotations = doc["annotations"]
    if not isinstance(raw_annotations, list):
        raise SchemaError("annotations must be an array")
    annotations = []
    for entry in raw_annotations:
        if not isinstance(entry, dict):
            raise SchemaError("each annotation must be a JSON object")
        unknown = set(entry) - _ANNOTATION_KEYS
        if unknown:
            raise SchemaError(f"annotation has unknown keys: {sorted(unknown)}")
        if "onset_s" not in entry or "offset_s" not in entry:
            raise SchemaError("annotation needs onset_s and offset_s")
        onset, offset = entry["onset_s"], entry["offset_s"]
        label = entry.get("label", "")
        for v in (onset, offset):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaError("annotation onset_s/offset_s must be numbers")
        if not isinstance(label, str):
            raise SchemaError("annotation label must be a string")
        if not 0 <= onset < offset:
            raise AnnotationOutOfBounds(
                f"annotation must satisfy 0 <= onset < offset, got [{onset}, {offset}]"
            )
        if offset > duration_s:
            raise AnnotationOutOfBounds(
                f"annotation offset {offset} s exceeds recording duration {duration_s} s"
            )
        if onset + frame_len_s > duration_s:
            raise AnnotationOutOfBounds(
                f"annotation onset {onset} s leaves no room for a {frame_len_s} s frame "
                f"in a {duration_s} s recording"
            )
        annotations.append(SeizureAnnotation(float(onset), float(offset), label))
    annotations.sort(key=lambda a: (a.onset_s, a.offset_s))
    selected_text = doc["clinician_selected"]
    if not isinstance(selected_text, str):
        raise SchemaError("clinician_selected must be a string")
    selected = expand_range(selected_text) if selected_text.strip() else []
    return float(fs), unit, annotations, selected


def load_recording(signal_path, sidecar_path, montage: Montage, frame_len_s: float = 1.0):
    """Load signal CSV + sidecar JSON, validated against the montage.

    Returns (Recording, annotations sorted by onset, clinician-selected
    channels). Every label in the header and the clinician shorthand must
    resolve in the montage; annotations whose onset cannot be covered by a
    full frame before the recording ends are rejected.
    """
    try:
        df = pd.read_csv(signal_path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"signal file {signal_path} is not parseable CSV: {exc}") from exc
    labels = tuple(parse_channel_label(c) for c in df.columns)
    for label in labels:
        montage.resolve(label)
    try:
        samples = df.to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"signal file {signal_path} has non-numeric cells: {exc}") from exc

    with open(sidecar_path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"sidecar {sidecar_path} is not valid JSON: {exc}") from exc
    fs = doc.get("sampling_rate_hz") if isinstance(doc, dict) else None
    duration_s = samples.shape[0] / fs if isinstance(fs, (int, float)) and fs else 0.0
    fs, unit, annotations, selected = _parse_sidecar(doc, duration_s, frame_len_s)
    for label in selected:
        montage.resolve(label)
    rec = make_recording(samples, fs, labels, unit)
    return rec, annotations, selected


def restrict_channels(rec: Recording, keep) -> Recording:
    """Project a recording onto `keep`, in `keep` order; values bit-identical."""
    positions = {label: i for i, label in enumerate(rec.channel_labels)}
    keep = list(keep)
    cols = []
    for label in keep:
        if label not in positions:
            raise UnknownChannel(f"channel {label} is not in the recording")
        cols.append(positions[label])
    samples = rec.samples[:, cols].copy()
    samples.flags.writeable = False
    return Recording(samples, rec.sampling_rate, tuple(keep), rec.unit)


def write_recording(rec: Recording, annotations, clinician_selected: str,
                    signal_path, sidecar_path) -> None:
    """Write the CSV + sidecar pair that load_recording reads back."""
    header = [str(label) for label in rec.channel_labels]
    df = pd.DataFrame(rec.samples, columns=header)
    df.to_csv(signal_path, index=False, float_format="%.6f")
    doc = {
        "sampling_rate_hz": rec.sampling_rate,
        "unit": rec.unit,
        "annotations": [
            {"onset_s": a.onset_s, "offset_s": a.offset_s, "label": a.label}
            for a in annotations
        ],
        "clinician_selected": clinician_selected,
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
