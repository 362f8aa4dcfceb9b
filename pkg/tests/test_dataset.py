"""Frame labeling, dataset assembly, and stratified splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seegrank.config import RunConfig
from seegrank.dataset import (NONSEIZURE, PPS, FrameDataset, assemble, cv_folds,
                              label_frames, pps_windows, split,
                              stratified_fold_indices)
from seegrank.dsp import ChannelFeatureBlock, FrameSpec, feature_names_for
from seegrank.errors import (EmptyDataset, FrameCountMismatch, SchemaError,
                             SingleClassDataset)
from seegrank.ingest import SeizureAnnotation
from seegrank.montage import ChannelLabel

FS = 1000.0


def _spec(n_frames: int) -> FrameSpec:
    return FrameSpec(frame_len=1000, hop=500, n_frames=n_frames)


class TestPpsWindows:
    def test_extension_prepended(self):
        windows = pps_windows([SeizureAnnotation(100.0, 140.0)], 20.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(80.0, 140.0)]

    def test_clamped_at_recording_start(self):
        windows = pps_windows([SeizureAnnotation(10.0, 30.0)], 20.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(0.0, 30.0)]

    def test_overlapping_windows_merge(self):
        annotations = [SeizureAnnotation(100.0, 140.0), SeizureAnnotation(150.0, 160.0)]
        windows = pps_windows(annotations, 20.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(80.0, 160.0)]

    def test_touching_windows_merge(self):
        annotations = [SeizureAnnotation(100.0, 140.0), SeizureAnnotation(160.0, 170.0)]
        windows = pps_windows(annotations, 20.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(80.0, 170.0)]

    def test_disjoint_windows_stay_separate(self):
        annotations = [SeizureAnnotation(100.0, 140.0), SeizureAnnotation(400.0, 440.0)]
        windows = pps_windows(annotations, 20.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(80.0, 140.0), (380.0, 440.0)]

    def test_zero_extension(self):
        windows = pps_windows([SeizureAnnotation(100.0, 140.0)], 0.0)
        assert [(w.start_s, w.end_s) for w in windows] == [(100.0, 140.0)]


class TestLabelFrames:
    def _labels(self, n_frames=400, ext=20.0):
        cfg = RunConfig(pps_extension_s=ext)
        annotations = [SeizureAnnotation(100.0, 140.0)]
        return label_frames(annotations, cfg, _spec(n_frames), FS)

    def test_frame_straddling_window_start_is_pps(self):
        labels = self._labels()
        # frame 159 starts at 79.5 and covers 79.5-80.5, overlapping [80, 140]
        assert labels[159] == PPS

    def test_frame_before_window_is_nonseizure(self):
        labels = self._labels()
        # frame 120 covers 60.0-61.0
        assert labels[120] == NONSEIZURE

    def test_overlap_is_strict_at_both_ends(self):
        labels = self._labels()
        assert labels[158] == NONSEIZURE  # 79.0-80.0 only touches the window start
        assert labels[279] == PPS         # 139.5-140.5 still overlaps
        assert labels[280] == NONSEIZURE  # starts exactly at the window end

    def test_no_annotations_all_nonseizure(self):
        cfg = RunConfig()
        labels = label_frames([], cfg, _spec(50), FS)
        assert np.array_equal(labels, np.zeros(50, dtype=labels.dtype))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=30.0),
           st.floats(min_value=0.0, max_value=30.0),
           st.lists(st.tuples(st.floats(min_value=1.0, max_value=150.0),
                              st.floats(min_value=0.5, max_value=30.0)),
                    min_size=1, max_size=3))
    def test_monotone_in_extension(self, ext_a, ext_b, seizure_params):
        lo, hi = sorted([ext_a, ext_b])
        annotations = [SeizureAnnotation(onset, onset + length)
                       for onset, length in seizure_params]
        spec = _spec(400)
        small = label_frames(annotations, RunConfig(pps_extension_s=lo), spec, FS)
        large = label_frames(annotations, RunConfig(pps_extension_s=hi), spec, FS)
        assert np.all(small <= large)


def _blocks(n_channels: int, n_frames: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    spec = _spec(n_frames)
    out = []
    for i in range(1, n_channels + 1):
        channel = ChannelLabel("LA", i)
        out.append(ChannelFeatureBlock(
            channel=channel,
            feature_names=feature_names_for(channel, "db4", 5),
            values=rng.standard_normal((n_frames, 24)),
            frame_spec=spec,
        ))
    return out


class TestAssemble:
    def test_columns_contiguous_per_channel(self):
        ds = assemble(_blocks(3, 10), np.zeros(10, dtype=np.int8), FS)
        assert ds.X.shape == (10, 72)
        assert len(ds.feature_names) == 72
        for i, channel in enumerate(ds.channels):
            assert ds.channel_columns[channel] == tuple(range(24 * i, 24 * (i + 1)))

    def test_frame_times(self):
        ds = assemble(_blocks(1, 5), np.zeros(5, dtype=np.int8), FS)
        np.testing.assert_allclose(ds.frame_times, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_empty_block_list(self):
        with pytest.raises(EmptyDataset):
            assemble([], np.zeros(0, dtype=np.int8), FS)

    def test_frame_count_mismatch(self):
        blocks = _blocks(2, 10)
        with pytest.raises(FrameCountMismatch):
            assemble(blocks, np.zeros(9, dtype=np.int8), FS)
        short = _blocks(1, 9)
        with pytest.raises(FrameCountMismatch):
            assemble(blocks[:1] + short, np.zeros(10, dtype=np.int8), FS)

    def test_duplicate_channel_rejected(self):
        blocks = _blocks(1, 10) + _blocks(1, 10, seed=1)
        with pytest.raises(SchemaError):
            assemble(blocks, np.zeros(10, dtype=np.int8), FS)

    def test_subset_picks_rows(self):
        labels = np.array([0, 1, 0, 1, 0], dtype=np.int8)
        ds = assemble(_blocks(1, 5), labels, FS)
        sub = ds.subset([1, 3])
        assert sub.n_frames == 2
        assert np.array_equal(sub.y, [1, 1])
        assert np.array_equal(sub.X, ds.X[[1, 3]])


def _dataset(n_pps: int, n_non: int, seed: int = 0) -> FrameDataset:
    n = n_pps + n_non
    labels = np.array([PPS] * n_pps + [NONSEIZURE] * n_non, dtype=np.int8)
    return assemble(_blocks(2, n, seed=seed), labels, FS)


class TestSplit:
    def test_stratified_counts_example(self):
        # 100 frames, 30 PPS, 20% test: 6 PPS + 14 NONSEIZURE held out
        ds = _dataset(30, 70)
        train, test = split(ds, RunConfig())
        assert test.n_frames == 20
        assert test.class_counts() == (14, 6)
        assert train.n_frames == 80
        assert train.class_counts() == (56, 24)

    def test_partition_is_disjoint_and_covering(self):
        ds = _dataset(30, 70)
        train, test = split(ds, RunConfig())
        times = np.concatenate([train.frame_times, test.frame_times])
        assert len(np.unique(times)) == 100

    def test_tie_goes_to_pps_as_minority(self):
        ds = _dataset(10, 10)
        _, test = split(ds, RunConfig())
        assert test.class_counts() == (2, 2)

    def test_deterministic_under_seed(self):
        ds = _dataset(30, 70)
        a_train, a_test = split(ds, RunConfig(seed=5))
        b_train, b_test = split(ds, RunConfig(seed=5))
        c_train, _ = split(ds, RunConfig(seed=6))
        assert np.array_equal(a_test.X, b_test.X)
        assert np.array_equal(a_train.X, b_train.X)
        assert not np.array_equal(a_train.X, c_train.X)

    def test_indices_stay_chronological(self):
        ds = _dataset(30, 70)
        train, test = split(ds, RunConfig())
        assert np.all(np.diff(train.frame_times) > 0)
        assert np.all(np.diff(test.frame_times) > 0)

    def test_single_class_rejected(self):
        ds = _dataset(0, 50)
        with pytest.raises(SingleClassDataset):
            split(ds, RunConfig())


class TestCvFolds:
    def test_fold_sizes_and_stratification(self):
        ds = _dataset(30, 70)
        folds = cv_folds(ds, 5, seed=0)
        assert len(folds) == 5
        for train, val in folds:
            assert val.n_frames == 20
            assert val.class_counts() == (14, 6)
            assert train.n_frames == 80

    def test_validation_folds_partition_dataset(self):
        ds = _dataset(13, 47)
        folds = cv_folds(ds, 5, seed=3)
        times = np.concatenate([val.frame_times for _, val in folds])
        assert len(times) == 60
        assert len(np.unique(times)) == 60

    def test_same_seed_identical_folds(self):
        y = np.array([PPS] * 30 + [NONSEIZURE] * 70, dtype=np.int8)
        a = stratified_fold_indices(y, 5, seed=7)
        b = stratified_fold_indices(y, 5, seed=7)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa, fb)

    def test_single_class_rejected(self):
        ds = _dataset(40, 0)
        with pytest.raises(SingleClassDataset):
            cv_folds(ds, 5, seed=0)
