"""Synthetic recording generator: validation, determinism, and signal shape.

The amplitude oracle: baseline noise is unit RMS and the seizure burst is an
independent oscillation with RMS equal to `ictal_amplitude_ratio`, so during
a seizure the ictal channel's RMS should approach sqrt(1 + ratio^2).
"""

import json

import numpy as np
import pytest

from seegrank.errors import SchemaError, SpecError
from seegrank.montage import ChannelLabel, Montage
from seegrank.synth import SynthSpec, generate

from .conftest import small_montage_dict

EA1 = ChannelLabel("EA", 1)
EB1 = ChannelLabel("EB", 1)


def spec_with(**overrides) -> SynthSpec:
    base = dict(
        montage=Montage.from_dict(small_montage_dict()),
        fs=200.0,
        duration_s=60.0,
        seizures=((20.0, 35.0),),
        ictal_channels=(EA1,),
    )
    base.update(overrides)
    return SynthSpec(**base)


def segment_rms(rec, channel: ChannelLabel, start_s: float, end_s: float) -> float:
    col = rec.channel_labels.index(channel)
    lo = int(start_s * rec.sampling_rate)
    hi = int(end_s * rec.sampling_rate)
    return float(np.sqrt((rec.samples[lo:hi, col] ** 2).mean()))


class TestSpecValidation:
    def test_seizure_beyond_duration(self):
        with pytest.raises(SpecError):
            spec_with(seizures=((20.0, 61.0),))

    def test_seizure_inverted_or_negative(self):
        with pytest.raises(SpecError):
            spec_with(seizures=((35.0, 20.0),))
        with pytest.raises(SpecError):
            spec_with(seizures=((-1.0, 20.0),))

    def test_ictal_channel_must_be_in_montage(self):
        with pytest.raises(SpecError):
            spec_with(ictal_channels=(ChannelLabel("ZZ", 1),))

    def test_propagation_channel_must_be_in_montage(self):
        with pytest.raises(SpecError):
            spec_with(propagation={ChannelLabel("ZZ", 1): 1.0})

    def test_amplitude_ratio_must_exceed_one(self):
        with pytest.raises(SpecError):
            spec_with(ictal_amplitude_ratio=1.0)

    def test_band_and_lead_and_timing(self):
        with pytest.raises(SpecError):
            spec_with(ictal_band=(14.0, 8.0))
        with pytest.raises(SpecError):
            spec_with(onset_lead_s=-1.0)
        with pytest.raises(SpecError):
            spec_with(fs=0.0)
        with pytest.raises(SpecError):
            spec_with(duration_s=0.0)


class TestSpecDocument:
    def doc(self, **overrides) -> dict:
        base = {
            "montage": small_montage_dict(),
            "fs_hz": 200.0,
            "duration_s": 60.0,
            "seizures": [[20.0, 35.0]],
            "ictal_channels": "EA1",
        }
        base.update(overrides)
        return base

    def test_round_trip_matches_constructor(self):
        spec = SynthSpec.from_dict(self.doc(
            ictal_band_hz=[8.0, 14.0],
            ictal_amplitude_ratio=3.0,
            propagation_s={"EB1": 1.5},
            onset_lead_s=2.0,
            clinician_selected="EA1-2",
            seed=5,
        ))
        assert spec.fs == 200.0
        assert spec.seizures == ((20.0, 35.0),)
        assert spec.ictal_channels == (EA1,)
        assert spec.ictal_band == (8.0, 14.0)
        assert spec.ictal_amplitude_ratio == 3.0
        assert spec.propagation == {EB1: 1.5}
        assert spec.onset_lead_s == 2.0
        assert spec.clinician_selected == "EA1-2"
        assert spec.seed == 5

    def test_ictal_channels_accepts_ranges_and_lists(self):
        assert SynthSpec.from_dict(self.doc()).ictal_channels == (EA1,)
        spec = SynthSpec.from_dict(self.doc(ictal_channels=["EA1-2", "EB1"]))
        assert spec.ictal_channels == (EA1, ChannelLabel("EA", 2), EB1)

    def test_unknown_key_rejected(self):
        with pytest.raises(SchemaError, match="unknown"):
            SynthSpec.from_dict(self.doc(bursts=3))

    def test_missing_required_key_rejected(self):
        doc = self.doc()
        del doc["seizures"]
        with pytest.raises(SchemaError, match="missing"):
            SynthSpec.from_dict(doc)

    def test_non_object_rejected(self):
        with pytest.raises(SchemaError):
            SynthSpec.from_dict([1, 2])

    def test_bad_seizure_and_band_shapes(self):
        with pytest.raises(SchemaError):
            SynthSpec.from_dict(self.doc(seizures=[[20.0]]))
        with pytest.raises(SchemaError):
            SynthSpec.from_dict(self.doc(ictal_band_hz=[8.0]))
        with pytest.raises(SchemaError):
            SynthSpec.from_dict(self.doc(propagation_s=[1.0]))

    def test_load_resolves_montage_path(self, tmp_path):
        (tmp_path / "montage.json").write_text(json.dumps(small_montage_dict()))
        (tmp_path / "spec.json").write_text(json.dumps(self.doc(montage="montage.json")))
        spec = SynthSpec.load(tmp_path / "spec.json")
        assert spec.montage.channels == Montage.from_dict(small_montage_dict()).channels

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text("{nope")
        with pytest.raises(SchemaError):
            SynthSpec.load(path)


class TestGenerate:
    def test_shapes_and_annotations(self, small_recording):
        rec, annotations, truth = small_recording
        assert rec.samples.shape == (30000, 4)
        assert rec.sampling_rate == 250.0
        assert rec.channel_labels == Montage.from_dict(small_montage_dict()).channels
        assert [(a.onset_s, a.offset_s, a.label) for a in annotations] \
            == [(30.0, 45.0, "sz1"), (80.0, 95.0, "sz2")]
        assert truth["ictal_channels"] == ["EA1"]
        assert truth["seizures"] == [[30.0, 45.0], [80.0, 95.0]]

    def test_zero_seizures_is_pure_noise(self):
        rec, annotations, _ = generate(spec_with(seizures=()))
        assert annotations == []
        assert np.isfinite(rec.samples).all()
        for ch in rec.channel_labels:
            assert segment_rms(rec, ch, 0.0, 60.0) == pytest.approx(1.0, abs=1e-9)

    def test_same_seed_is_bit_identical(self):
        a, _, _ = generate(spec_with(seed=3))
        b, _, _ = generate(spec_with(seed=3))
        assert np.array_equal(a.samples, b.samples)

    def test_different_seed_differs(self):
        a, _, _ = generate(spec_with(seed=3))
        b, _, _ = generate(spec_with(seed=4))
        assert not np.array_equal(a.samples, b.samples)

    @pytest.mark.parametrize("ratio", [2.5, 4.0])
    def test_ictal_rms_matches_quadrature_sum(self, ratio):
        rec, _, _ = generate(spec_with(ictal_amplitude_ratio=ratio))
        expected = np.sqrt(1.0 + ratio ** 2)
        assert segment_rms(rec, EA1, 20.0, 35.0) == pytest.approx(expected, rel=0.10)

    def test_non_ictal_channels_stay_at_baseline(self):
        rec, _, _ = generate(spec_with())
        for ch in rec.channel_labels:
            if ch == EA1:
                continue
            assert 0.8 <= segment_rms(rec, ch, 20.0, 35.0) <= 1.25

    def test_ictal_channel_quiet_outside_seizures(self):
        rec, _, _ = generate(spec_with())
        assert 0.8 <= segment_rms(rec, EA1, 0.0, 18.0) <= 1.25
        assert 0.8 <= segment_rms(rec, EA1, 37.0, 60.0) <= 1.25

    def test_burst_energy_concentrates_in_band(self):
        rec, _, _ = generate(spec_with())
        col = rec.channel_labels.index(EA1)
        seg = rec.samples[int(20 * 200):int(35 * 200), col]
        power = np.abs(np.fft.rfft(seg)) ** 2
        freqs = np.fft.rfftfreq(len(seg), d=1.0 / 200.0)
        in_band = power[(freqs >= 6.0) & (freqs <= 16.0)].sum()
        assert in_band / power.sum() > 0.6

    def test_propagation_shifts_the_burst(self):
        spec = spec_with(ictal_channels=(EA1, EB1), propagation={EB1: 2.0})
        rec, _, _ = generate(spec)
        # EB1 carries the burst over [22, 37]; EA1 stays on [20, 35].
        assert segment_rms(rec, EB1, 20.0, 22.0) < 2.0
        assert segment_rms(rec, EB1, 30.0, 37.0) > 2.5
        assert segment_rms(rec, EA1, 35.5, 37.0) < 2.0

    def test_onset_lead_elevates_preonset_window(self):
        lead, _, _ = generate(spec_with(onset_lead_s=10.0))
        flat, _, _ = generate(spec_with())
        assert segment_rms(lead, EA1, 12.0, 20.0) > 2.5
        assert segment_rms(flat, EA1, 12.0, 20.0) < 2.0
        # Annotations keep the nominal onset regardless of the lead.
        _, annotations, _ = generate(spec_with(onset_lead_s=10.0))
        assert annotations[0].onset_s == 20.0

    def test_ground_truth_echoes_the_spec(self):
        _, _, truth = generate(spec_with(onset_lead_s=5.0, seed=9))
        assert truth == {
            "ictal_channels": ["EA1"],
            "seizures": [[20.0, 35.0]],
            "ictal_band_hz": [8.0, 14.0],
            "ictal_amplitude_ratio": 4.0,
            "onset_lead_s": 5.0,
            "seed": 9,
        }
