"""Channel-level attribution and ranking for multichannel depth-electrode recordings."""

from .config import RunConfig
from .errors import SeegrankError
from .gbdt import GbdtModel, GbdtParams, Metrics, train
from .ingest import Recording, SeizureAnnotation, load_recording, restrict_channels
from .montage import (
    ChannelLabel,
    Electrode,
    Montage,
    electrode_extension,
    expand_range,
    parse_channel_label,
    zone_extension,
)
from .ranking import ElbowResult, ExtensionReport, elbow, rank, run_stage, run_workflow
from .shapley import (
    BackgroundSet,
    ChannelImportance,
    CoalitionPlayers,
    coalition_weight,
    exact_shap_frame,
    mean_importance,
    shap_sequence,
    tree_shap_frame,
)
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BackgroundSet",
    "ChannelImportance",
    "ChannelLabel",
    "CoalitionPlayers",
    "ElbowResult",
    "Electrode",
    "ExtensionReport",
    "GbdtModel",
    "GbdtParams",
    "Metrics",
    "Montage",
    "Recording",
    "RunConfig",
    "SeegrankError",
    "SeizureAnnotation",
    "SynthSpec",
    "coalition_weight",
    "elbow",
    "electrode_extension",
    "exact_shap_frame",
    "expand_range",
    "generate",
    "load_recording",
    "mean_importance",
    "parse_channel_label",
    "rank",
    "restrict_channels",
    "run_stage",
    "run_workflow",
    "shap_sequence",
    "train",
    "tree_shap_frame",
    "zone_extension",
]
