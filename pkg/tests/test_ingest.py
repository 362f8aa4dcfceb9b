"""Recording construction, CSV + sidecar loading, and channel restriction."""

import json

import numpy as np
import pytest

from seegrank.errors import (AnnotationOutOfBounds, NonFiniteSample,
                             NyquistViolation, SchemaError, UnknownChannel)
from seegrank.ingest import (SeizureAnnotation, load_recording, make_recording,
                             restrict_channels, write_recording)
from seegrank.montage import ChannelLabel, expand_range

LABELS4 = (ChannelLabel("LA", 1), ChannelLabel("LA", 2),
           ChannelLabel("LB", 1), ChannelLabel("LC", 1))


def _write_fixture(tmp_path, samples, header, sidecar):
    signal_path = tmp_path / "signal.csv"
    rows = "\n".join(",".join(f"{v:.6f}" for v in row) for row in samples)
    signal_path.write_text(header + "\n" + rows + "\n")
    sidecar_path = tmp_path / "sidecar.json"
    sidecar_path.write_text(json.dumps(sidecar))
    return signal_path, sidecar_path


def _default_sidecar(**overrides):
    doc = {
        "sampling_rate_hz": 250,
        "unit": "uV",
        "annotations": [{"onset_s": 0.5, "offset_s": 1.2, "label": "sz1"}],
        "clinician_selected": "LA1-2",
    }
    doc.update(overrides)
    return doc


class TestMakeRecording:
    def test_dimensions(self):
        rec = make_recording(np.zeros((10000, 4)), 1000.0, LABELS4)
        assert rec.n_samples == 10000
        assert rec.n_channels == 4
        assert rec.duration_s == 10.0

    @pytest.mark.parametrize("fs", [100.0, 119.0, 120.0])
    def test_low_sampling_rate_rejected(self, fs):
        with pytest.raises(NyquistViolation):
            make_recording(np.zeros((100, 4)), fs, LABELS4)

    def test_non_finite_rejected(self):
        samples = np.zeros((100, 4))
        samples[3, 2] = np.nan
        with pytest.raises(NonFiniteSample):
            make_recording(samples, 1000.0, LABELS4)
        samples[3, 2] = np.inf
        with pytest.raises(NonFiniteSample):
            make_recording(samples, 1000.0, LABELS4)

    def test_duplicate_labels_rejected(self):
        labels = (ChannelLabel("LA", 1),) * 2
        with pytest.raises(SchemaError):
            make_recording(np.zeros((100, 2)), 1000.0, labels)

    def test_label_count_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            make_recording(np.zeros((100, 3)), 1000.0, LABELS4)

    def test_samples_become_read_only(self):
        rec = make_recording(np.zeros((100, 4)), 1000.0, LABELS4)
        with pytest.raises(ValueError):
            rec.samples[0, 0] = 1.0


class TestLoadRecording:
    def test_load(self, tmp_path, patient_montage):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal((500, 4))
        paths = _write_fixture(tmp_path, samples, "LA1,LA2,LB1,LC1",
                               _default_sidecar())
        rec, annotations, selected = load_recording(*paths, patient_montage)
        assert rec.n_samples == 500
        assert rec.n_channels == 4
        assert rec.sampling_rate == 250.0
        assert rec.channel_labels == LABELS4
        assert annotations == [SeizureAnnotation(0.5, 1.2, "sz1")]
        assert selected == [ChannelLabel("LA", 1), ChannelLabel("LA", 2)]
        np.testing.assert_allclose(rec.samples, samples, atol=1e-6)

    def test_patient_style_selection_expands_to_seven(self, tmp_path, patient_montage):
        sidecar = _default_sidecar(clinician_selected="LA1-3, LB1-2, LC1-2")
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,LC1",
                               sidecar)
        _, _, selected = load_recording(*paths, patient_montage)
        assert len(selected) == 7
        assert selected == expand_range("LA1-3, LB1-2, LC1-2")

    def test_annotations_sorted_by_onset(self, tmp_path, patient_montage):
        sidecar = _default_sidecar(annotations=[
            {"onset_s": 1.0, "offset_s": 1.5, "label": "b"},
            {"onset_s": 0.2, "offset_s": 0.8, "label": "a"},
        ])
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,LC1",
                               sidecar)
        _, annotations, _ = load_recording(*paths, patient_montage)
        assert [a.label for a in annotations] == ["a", "b"]

    def test_unknown_header_channel(self, tmp_path, patient_montage):
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,ZZ1",
                               _default_sidecar())
        with pytest.raises(UnknownChannel):
            load_recording(*paths, patient_montage)

    def test_unknown_sidecar_key(self, tmp_path, patient_montage):
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,LC1",
                               _default_sidecar(patient="p1000"))
        with pytest.raises(SchemaError):
            load_recording(*paths, patient_montage)

    def test_missing_sidecar_key(self, tmp_path, patient_montage):
        sidecar = _default_sidecar()
        del sidecar["annotations"]
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,LC1",
                               sidecar)
        with pytest.raises(SchemaError):
            load_recording(*paths, patient_montage)

    @pytest.mark.parametrize("annotation", [
        {"onset_s": -0.5, "offset_s": 1.0},               # negative onset
        {"onset_s": 1.0, "offset_s": 0.5},                # inverted
        {"onset_s": 1.0, "offset_s": 1.0},                # empty interval
        {"onset_s": 0.5, "offset_s": 9.0},                # offset beyond end
        {"onset_s": 1.5, "offset_s": 2.0},                # no room for a frame
    ])
    def test_annotation_bounds(self, tmp_path, patient_montage, annotation):
        paths = _write_fixture(tmp_path, np.zeros((500, 4)), "LA1,LA2,LB1,LC1",
                               _default_sidecar(annotations=[annotation]))
        with pytest.raises(AnnotationOutOfBounds):
            load_recording(*paths, patient_montage)

    def test_non_finite_sample_rejected(self, tmp_path, patient_montage):
        signal_path = tmp_path / "signal.csv"
        rows = ["0.0,0.0,0.0,0.0"] * 500
        rows[100] = "0.0,nan,0.0,0.0"
        signal_path.write_text("LA1,LA2,LB1,LC1\n" + "\n".join(rows) + "\n")
        sidecar_path = tmp_path / "sidecar.json"
        sidecar_path.write_text(json.dumps(_default_sidecar()))
        with pytest.raises(NonFiniteSample):
            load_recording(signal_path, sidecar_path, patient_montage)


class TestRestrictChannels:
    def _recording(self):
        rng = np.random.default_rng(1)
        return make_recording(rng.standard_normal((200, 4)), 1000.0, LABELS4)

    def test_identity(self):
        rec = self._recording()
        same = restrict_channels(rec, rec.channel_labels)
        assert same.channel_labels == rec.channel_labels
        assert np.array_equal(same.samples, rec.samples)

    def test_single_channel(self):
        rec = self._recording()
        one = restrict_channels(rec, [ChannelLabel("LB", 1)])
        assert one.n_channels == 1
        assert np.array_equal(one.samples[:, 0], rec.samples[:, 2])

    def test_keep_order_respected(self):
        rec = self._recording()
        flipped = restrict_channels(rec, [ChannelLabel("LC", 1), ChannelLabel("LA", 1)])
        assert flipped.channel_labels == (ChannelLabel("LC", 1), ChannelLabel("LA", 1))
        assert np.array_equal(flipped.samples[:, 0], rec.samples[:, 3])
        assert np.array_equal(flipped.samples[:, 1], rec.samples[:, 0])

    def test_absent_channel(self):
        with pytest.raises(UnknownChannel):
            restrict_channels(self._recording(), [ChannelLabel("ZZ", 1)])


def test_write_load_round_trip(tmp_path, patient_montage):
    rng = np.random.default_rng(2)
    rec = make_recording(rng.standard_normal((500, 4)) * 40.0, 250.0, LABELS4)
    annotations = [SeizureAnnotation(0.5, 1.2, "sz1")]
    signal_path = tmp_path / "signal.csv"
    sidecar_path = tmp_path / "sidecar.json"
    write_recording(rec, annotations, "LA1-2", signal_path, sidecar_path)
    loaded, loaded_annotations, selected = load_recording(
        signal_path, sidecar_path, patient_montage)
    assert loaded.channel_labels == rec.channel_labels
    assert loaded.sampling_rate == rec.sampling_rate
    assert loaded_annotations == annotations
    assert selected == [ChannelLabel("LA", 1), ChannelLabel("LA", 2)]
    # CSV carries six decimals, so the round trip is close, not bit-exact
    np.testing.assert_allclose(loaded.samples, rec.samples, atol=5e-7)
