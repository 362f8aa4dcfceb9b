"""Run configuration: every tunable knob of the pipeline with its default.

Precedence when assembling a config is flag > config file > default; the
merge itself lives in the CLI, this module only defines fields, validation,
and dict round-trips. The JSON/flag spelling of ``lam`` is "lambda".
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import SchemaError

_WAVELETS = ("db1", "db2", "db4")


@dataclass(frozen=True)
class RunConfig:
    pps_extension_s: float = 20.0
    frame_len_s: float = 1.0
    overlap: float = 0.5
    band_low: float = 1.0
    band_high: float = 60.0
    filter_order: int = 4
    wavelet: str = "db4"
    dwt_levels: int = 5
    folds: int = 5
    test_fraction: float = 0.2
    rounds: int = 100
    depth: int = 4
    learning_rate: float = 0.1
    lam: float = 1.0
    min_child_weight: float = 1.0
    pos_weight: float | None = None  # None -> n_neg / n_pos at train time
    background_size: int = 32
    exact_max_players: int = 15
    n_permutations: int = 200
    elbow_inclusive: bool = True
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.pps_extension_s < 0:
            raise SchemaError("pps_extension_s must be >= 0")
        if self.frame_len_s <= 0:
            raise SchemaError("frame_len_s must be > 0")
        if not 0.0 < self.overlap < 1.0:
            raise SchemaError("overlap must be strictly between 0 and 1")
        if not 0.0 < self.band_low < self.band_high:
            raise SchemaError("band must satisfy 0 < band_low < band_high")
        if self.filter_order % 2 != 0 or not 2 <= self.filter_order <= 8:
            raise SchemaError("filter_order must be an even integer in [2, 8]")
        if self.wavelet not in _WAVELETS:
            raise SchemaError(f"wavelet must be one of {_WAVELETS}, got {self.wavelet!r}")
        if self.dwt_levels < 1:
            raise SchemaError("dwt_levels must be >= 1")
        if self.folds < 2:
            raise SchemaError("folds must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise SchemaError("test_fraction must be strictly between 0 and 1")
        if self.rounds < 1:
            raise SchemaError("rounds must be >= 1")
        if self.depth < 1:
            raise SchemaError("depth must be >= 1")
        if self.learning_rate <= 0:
            raise SchemaError("learning_rate must be > 0")
        if self.lam < 0:
            raise SchemaError("lambda must be >= 0")
        if self.min_child_weight < 0:
            raise SchemaError("min_child_weight must be >= 0")
        if self.pos_weight is not None and self.pos_weight <= 0:
            raise SchemaError("pos_weight must be > 0 when given")
        if self.background_size < 1:
            raise SchemaError("background_size must be >= 1")
        if self.exact_max_players < 1:
            raise SchemaError("exact_max_players must be >= 1")
        if self.n_permutations < 1:
            raise SchemaError("n_permutations must be >= 1")
        if self.threads < 1:
            raise SchemaError("threads must be >= 1")

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **overrides)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise SchemaError("config document must be a JSON object")
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"config has unknown keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)
