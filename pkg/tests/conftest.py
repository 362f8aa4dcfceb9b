"""Shared fixtures: montages, stub games, and a small synthetic recording.

The small recording (4 channels, 120 s at 250 Hz) is expensive enough to
matter, so it is generated once per session and shared read-only.
"""

import numpy as np
import pytest

from seegrank.config import RunConfig
from seegrank.montage import ChannelLabel, Montage, expand_range
from seegrank.ranking import run_workflow
from seegrank.synth import SynthSpec, generate

# Small-but-real settings: enough rounds to separate the ictal channel,
# cheap enough to share across module tests.
CHEAP_OVERRIDES = dict(rounds=8, depth=3, folds=3, background_size=8)


def cheap_config(**overrides) -> RunConfig:
    merged = dict(CHEAP_OVERRIDES)
    merged.update(overrides)
    return RunConfig(**merged)


def patient_montage_dict() -> dict:
    return {
        "electrodes": [
            {"name": "LA", "contacts": 10, "zone_neighbors": ["LI", "LC"]},
            {"name": "LB", "contacts": 10, "zone_neighbors": ["LI", "LC"]},
            {"name": "LC", "contacts": 16, "zone_neighbors": []},
            {"name": "LI", "contacts": 16, "zone_neighbors": []},
        ]
    }


@pytest.fixture(scope="session")
def patient_montage() -> Montage:
    return Montage.from_dict(patient_montage_dict())


def small_montage_dict() -> dict:
    return {
        "electrodes": [
            {"name": "EA", "contacts": 2, "zone_neighbors": ["EB"]},
            {"name": "EB", "contacts": 2, "zone_neighbors": []},
        ]
    }


def small_spec(seed: int = 0) -> SynthSpec:
    """4-channel fixture with one ictal channel and two seizures."""
    return SynthSpec(
        montage=Montage.from_dict(small_montage_dict()),
        fs=250.0,
        duration_s=120.0,
        seizures=((30.0, 45.0), (80.0, 95.0)),
        ictal_channels=(ChannelLabel("EA", 1),),
        clinician_selected="EA1-2",
        seed=seed,
    )


@pytest.fixture(scope="session")
def small_recording():
    """(Recording, annotations, ground_truth) for the 4-channel fixture."""
    return generate(small_spec())


@pytest.fixture(scope="session")
def small_report(small_recording):
    """(ExtensionReport, RunConfig) from one full workflow on the small fixture."""
    rec, annotations, _ = small_recording
    cfg = cheap_config()
    montage = Montage.from_dict(small_montage_dict())
    report = run_workflow(rec, annotations, montage, expand_range("EA1-2"), cfg)
    return report, cfg


class StubModel:
    """Raw-margin stand-in: any vectorized row function becomes a "model"."""

    def __init__(self, fn, n_features: int):
        self.fn = fn
        self.n_features = n_features

    def raw_margin_batch(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(Z, dtype=np.float64))),
                          dtype=np.float64)


def quadratic_stub(n_features: int, rng: np.random.Generator) -> StubModel:
    """Random quadratic game: rich interactions, exactly reproducible."""
    w = rng.standard_normal(n_features)
    M = rng.standard_normal((n_features, n_features))
    return StubModel(lambda Z: Z @ w + ((Z @ M) * Z).sum(axis=1), n_features)
