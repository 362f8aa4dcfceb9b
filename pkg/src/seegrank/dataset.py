"""Binary frame dataset: PPS (pre-seizure plus seizure) vs non-seizure.

A frame is PPS when its time span overlaps, by any amount, a seizure
annotation extended backwards by the configured lead; everything else is
non-seizure. Splits and folds are stratified and seeded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .dsp import ChannelFeatureBlock, FrameSpec
from .errors import EmptyDataset, FrameCountMismatch, SchemaError, SingleClassDataset
from .montage import ChannelLabel

NONSEIZURE = 0
PPS = 1

# Seed-stream tags so that split, folds, and background draws never share
# a random stream even under the same master seed.
_SPLIT_STREAM = 1
_FOLD_STREAM = 2


@dataclass(frozen=True)
class PpsWindow:
    start_s: float
    end_s: float


def pps_windows(annotations, pps_extension_s: float) -> list[PpsWindow]:
    """Extended seizure windows [max(0, onset - ext), offset], merged when overlapping."""
    spans = sorted(
        (max(0.0, a.onset_s - pps_extension_s), a.offset_s) for a in annotations
    )
    merged: list[list[float]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [PpsWindow(s, e) for s, e in merged]


def label_frames(annotations, cfg: RunConfig, frame_spec: FrameSpec, fs: float) -> np.ndarray:
    """Per-frame labels; PPS iff the frame [t*hop, t*hop+frame_len) overlaps a window.

    Overlap is strict on both sides, so a frame merely touching a window
    endpoint stays non-seizure.
    """
    starts = np.arange(frame_spec.n_frames) * frame_spec.hop / fs
    ends = starts + frame_spec.frame_len / fs
    labels = np.full(frame_spec.n_frames, NONSEIZURE, dtype=np.int8)
    for w in pps_windows(annotations, cfg.pps_extension_s):
        labels[(starts < w.end_s) & (ends > w.start_s)] = PPS
    return labels


@dataclass(frozen=True)
class FrameDataset:
    X: np.ndarray
    y: np.ndarray
    frame_times: np.ndarray
    feature_names: tuple[str, ...]
    channel_columns: dict[ChannelLabel, tuple[int, ...]]
    frame_spec: FrameSpec

    @property
    def n_frames(self) -> int:
        return self.X.shape[0]

    @property
    def channels(self) -> tuple[ChannelLabel, ...]:
        return tuple(self.channel_columns)

    def class_counts(self) -> tuple[int, int]:
        """(n_nonseizure, n_pps)."""
        return int((self.y == NONSEIZURE).sum()), int((self.y == PPS).sum())

    def subset(self, indices) -> "FrameDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return FrameDataset(
            X=self.X[indices],
            y=self.y[indices],
            frame_times=self.frame_times[indices],
            feature_names=self.feature_names,
            channel_columns=self.channel_columns,
            frame_spec=self.frame_spec,
        )


def assemble(blocks: list[ChannelFeatureBlock], labels: np.ndarray, fs: float) -> FrameDataset:
    """Stack per-channel feature blocks into one design matrix.

    Columns are grouped per channel in block order; channel_columns records
    the contiguous column span owned by each channel.
    """
    if not blocks:
        raise EmptyDataset("no feature blocks to assemble")
    n_frames = blocks[0].values.shape[0]
    for b in blocks:
        if b.values.shape[0] != n_frames:
            raise FrameCountMismatch(
                f"channel {b.channel} has {b.values.shape[0]} frames, expected {n_frames}"
            )
    if len(labels) != n_frames:
        raise FrameCountMismatch(f"{len(labels)} labels for {n_frames} frames")
    channels = [b.channel for b in blocks]
    if len(set(channels)) != len(channels):
        raise SchemaError("duplicate channels across feature blocks")
    channel_columns: dict[ChannelLabel, tuple[int, ...]] = {}
    names: list[str] = []
    offset = 0
    for b in blocks:
        width = b.values.shape[1]
        channel_columns[b.channel] = tuple(range(offset, offset + width))
        names.extend(b.feature_names)
        offset += width
    spec = blocks[0].frame_spec
    return FrameDataset(
        X=np.concatenate([b.values for b in blocks], axis=1),
        y=np.asarray(labels, dtype=np.int8),
        frame_times=np.arange(n_frames) * spec.hop / fs,
        feature_names=tuple(names),
        channel_columns=channel_columns,
        frame_spec=spec,
    )


def _require_both_classes(y: np.ndarray):
    if len(y) == 0:
        raise EmptyDataset("dataset has no frames")
    if (y == PPS).all() or (y == NONSEIZURE).all():
        raise SingleClassDataset("dataset contains a single class; need PPS and non-seizure")


def split(ds: FrameDataset, cfg: RunConfig) -> tuple[FrameDataset, FrameDataset]:
    """Stratified train/test split.

    The test set takes floor(n * test_fraction) frames total: the minority
    class contributes floor(n_minority * test_fraction) and the majority the
    remainder. Deterministic under cfg.seed; indices within each part keep
    chronological order.
    """
    _require_both_classes(ds.y)
    rng = np.random.default_rng([cfg.seed, _SPLIT_STREAM])
    counts = {c: int((ds.y == c).sum()) for c in (NONSEIZURE, PPS)}
    minority = PPS if counts[PPS] <= counts[NONSEIZURE] else NONSEIZURE
    majority = NONSEIZURE if minority == PPS else PPS
    n_test_total = int(len(ds.y) * cfg.test_fraction)
    n_test = {minority: int(counts[minority] * cfg.test_fraction)}
    n_test[majority] = n_test_total - n_test[minority]
    test_parts, train_parts = [], []
    for c in (NONSEIZURE, PPS):
        idx = np.flatnonzero(ds.y == c)
        perm = rng.permutation(idx)
        test_parts.append(perm[: n_test[c]])
        train_parts.append(perm[n_test[c]:])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.sort(np.concatenate(train_parts))
    return ds.subset(train_idx), ds.subset(test_idx)


def stratified_fold_indices(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint, covering validation index sets, stratified per class."""
    if k < 2:
        raise SchemaError(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng([seed, _FOLD_STREAM])
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in (NONSEIZURE, PPS):
        idx = np.flatnonzero(y == c)
        perm = rng.permutation(idx)
        for f in range(k):
            folds[f].extend(perm[f::k])
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def cv_folds(ds: FrameDataset, k: int, seed: int) -> list[tuple[FrameDataset, FrameDataset]]:
    """k stratified (train, validation) pairs; validation folds partition the dataset."""
    _require_both_classes(ds.y)
    all_idx = np.arange(ds.n_frames)
    pairs = []
    for val_idx in stratified_fold_indices(ds.y, k, seed):
        mask = np.ones(ds.n_frames, dtype=bool)
        mask[val_idx] = False
        pairs.append((ds.subset(all_idx[mask]), ds.subset(val_idx)))
    return pairs
